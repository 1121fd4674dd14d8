#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohmflow/errors.hpp"
#include "bohmflow/guidance.hpp"
#include "bohmflow/nodal.hpp"
#include "bohmflow/oscillator.hpp"

using namespace bohmflow;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::mt19937_64 fresh_rng(uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace

TEST_CASE("nodal direction basics") {
    CHECK_THROWS_AS(nodal_direction(0.0), DegenerateTimeError);

    auto rng = fresh_rng(5);
    std::uniform_real_distribution<double> tbox(0.5, 20.0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 n = nodal_direction(tbox(rng));
        CHECK(std::abs(n.norm() - 1.0) < 1e-14);
    }

    const auto state = base_state();
    CHECK(std::abs(state.amplitude(nodal_direction(1.0), 1.0).value) < 1e-12);
}

TEST_CASE("nodal point lies on the nodal set of the base state") {
    const auto state = base_state();
    const auto np = nodal_point(1.0, 4.23);
    CHECK((np.position / 4.23 - nodal_direction(1.0)).norm() == 0.0);
    CHECK(std::abs(state.amplitude(np.position, 1.0).value) < 1e-10);
    CHECK(std::abs(state.amplitude(-np.position, 1.0).value) < 1e-10);

    // the common ratio reproduces the position componentwise
    const Vec3& w = state.config().omega;
    const Vec3 freq(w[2] - w[1], w[0] - w[2], w[1] - w[0]);
    for (int k = 0; k < 3; ++k) {
        const double denom = std::sin(freq[k] * 1.0);
        if (std::abs(denom) < 0.1) continue;
        CHECK(std::sqrt(w[k]) * np.position[k] / denom == doctest::Approx(np.C).epsilon(1e-12));
    }
    CHECK(np.C > 0.0);
}

TEST_CASE("nodal kinematics") {
    SUBCASE("velocity perpendicular to the line") {
        auto rng = fresh_rng(6);
        std::uniform_real_distribution<double> tbox(0.5, 20.0);
        std::uniform_real_distribution<double> rbox(0.2, 5.0);
        for (int i = 0; i < 100; ++i) {
            const double t = tbox(rng), R = rbox(rng);
            const auto np = nodal_point(t, R);
            const Vec3 dir = np.position.normalized();
            CHECK(std::abs(np.velocity.dot(dir)) / np.velocity.norm() < 1e-8);
        }
    }

    SUBCASE("derivatives match high-order finite differences") {
        const double R = 4.23;
        for (double t : {1.3, 4.0, 8.5, 12.7}) {
            const auto [v, a] = nodal_kinematics(t, R);
            const double h = 1e-4;
            const auto p = [&](double tt) { return nodal_point(tt, R).position; };
            // 4th-order central stencils
            const Vec3 fd_v =
                (-p(t + 2 * h) + 8 * p(t + h) - 8 * p(t - h) + p(t - 2 * h)) / (12 * h);
            const Vec3 fd_a =
                (-p(t + 2 * h) + 16 * p(t + h) - 30 * p(t) + 16 * p(t - h) - p(t - 2 * h)) /
                (12 * h * h);
            CHECK((v - fd_v).norm() < 1e-6 * std::max(1.0, v.norm()));
            CHECK((a - fd_a).norm() < 1e-6 * std::max(1.0, a.norm()));
        }
    }
}

TEST_CASE("numeric nodal refinement") {
    const auto state = base_state();

    SUBCASE("agrees with the analytic node when seeded nearby") {
        const auto np = nodal_point(2.3, 3.1);
        Vec3 guess = np.position + Vec3(0.05, -0.04, 0.02);
        guess *= 3.1 / guess.norm();
        const Vec3 refined = nodal_point_numeric(state, 2.3, guess);
        CHECK((refined - np.position).norm() < 1e-10);
    }

    SUBCASE("far guesses fail to converge") {
        // start near the antinode, where Newton stalls at a nonzero residual
        const auto np = nodal_point(2.3, 3.1);
        const Vec3 far = np.position.cross(Vec3::UnitX()).normalized() * 3.1;
        CHECK_THROWS_AS(nodal_point_numeric(state, 2.3, far), NoConvergenceError);
    }

    SUBCASE("perturbed state nodes satisfy the residual target") {
        const auto pert = perturbed_state(0.05);
        for (double t : {1.0, 2.5, 4.0}) {
            const Vec3 guess = nodal_point(t, 2.5).position;
            const Vec3 node = nodal_point_numeric(pert, t, guess);
            CHECK(std::abs(pert.amplitude(node, t).value) < 1e-12);
            CHECK(node.norm() == doctest::Approx(2.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("comoving frame exactness") {
    auto rng = fresh_rng(77);
    std::uniform_real_distribution<double> tbox(0.5, 20.0);
    std::uniform_real_distribution<double> rbox(0.2, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = tbox(rng), R = rbox(rng);
        const auto f = comoving_frame(t, R);
        CHECK((f.S * f.S.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(std::abs(f.S.determinant() - 1.0) < 1e-12);
        CHECK((f.S * nodal_direction(t) - Vec3(0, 0, 1)).norm() < 1e-12);
        CHECK(f.theta >= 0.0);
        CHECK(f.theta <= std::numbers::pi);
        CHECK(f.phi >= 0.0);
        CHECK(f.phi < kTwoPi);
    }
}

TEST_CASE("planar flow reproduces the lab-frame quadratic form") {
    auto rng = fresh_rng(123);
    std::uniform_real_distribution<double> tbox(0.5, 15.0);
    std::uniform_real_distribution<double> ubox(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double t = tbox(rng);
        const double R = 1.0 + 3.0 * ubox(rng) * ubox(rng);
        const auto pf = planar_flow(t, R);
        for (int j = 0; j < 5; ++j) {
            const double u = ubox(rng), v = ubox(rng);
            // map the frame displacement back to the lab and evaluate G there
            const Vec3 x = pf.node.position + pf.frame.S.transpose() * Vec3(u, v, 0.0);
            const double g_lab = base_flow_coefficients(x, t).G;
            const double g_plane = pf.Phi1 * u * u + pf.Phi2 * u * v + pf.Phi3 * v * v;
            CHECK(g_plane == doctest::Approx(g_lab).epsilon(1e-10));
        }
    }
}

TEST_CASE("planar drift equals the frame components of the node velocity") {
    for (double t : {1.0, 4.0, 9.5}) {
        const auto pf = planar_flow(t, 4.23);
        const Vec3 sv = pf.frame.S * pf.node.velocity;
        CHECK(pf.V_u == doctest::Approx(sv[0]).epsilon(1e-12));
        CHECK(pf.V_v == doctest::Approx(sv[1]).epsilon(1e-12));
        // third frame component vanishes by perpendicularity
        CHECK(std::abs(sv[2]) < 1e-10);
    }
}

TEST_CASE("planar velocity field") {
    const auto pf = planar_flow(4.0, 4.23);

    SUBCASE("near-node guard at the origin") {
        CHECK_THROWS_AS(planar_velocity(pf, 0.0, 0.0), NearNodeError);
    }

    SUBCASE("rotational part is orthogonal to the offset when the drift is removed") {
        PlanarFlow still = pf;
        still.V_u = 0.0;
        still.V_v = 0.0;
        const Vec2 f = planar_velocity(still, 0.3, -0.2);
        CHECK(std::abs(f.dot(Vec2(0.3, -0.2))) < 1e-12);
    }

    SUBCASE("rotational term scales as 1/|p| with quadratic G") {
        PlanarFlow still = pf;
        still.V_u = 0.0;
        still.V_v = 0.0;
        const Vec2 f1 = planar_velocity(still, 0.4, 0.1);
        const Vec2 f2 = planar_velocity(still, 0.8, 0.2);
        CHECK((2.0 * f2 - f1).norm() < 1e-12 * f1.norm());
    }

    SUBCASE("matches the full frame field at w' = 0") {
        // (1/G) S A S^T (u, v, 0) - S xdot_nod, first two components
        for (double u : {-0.5, 0.2}) {
            for (double v : {-0.3, 0.4}) {
                const Vec3 x = pf.node.position + pf.frame.S.transpose() * Vec3(u, v, 0.0);
                const auto cf = base_flow_coefficients(x, 4.0);
                const Vec3 full =
                    pf.frame.S * (cf.A * (pf.frame.S.transpose() * Vec3(u, v, 0.0))) / cf.G -
                    pf.frame.S * pf.node.velocity;
                const Vec2 planar = planar_velocity(pf, u, v);
                CHECK(std::abs(full[0] - planar[0]) < 1e-10);
                CHECK(std::abs(full[1] - planar[1]) < 1e-10);
            }
        }
    }
}

TEST_CASE("X-point solution") {
    SUBCASE("residuals vanish and the point is a saddle") {
        for (double t = 1.0; t <= 10.0; t += 1.0) {
            for (double R = 1.0; R <= 5.0; R += 1.0) {
                const auto pf = planar_flow(t, R);
                const auto xp = xpoint_from(pf);
                const Vec2 f = planar_velocity(pf, xp.u, xp.v);
                CHECK(std::abs(f[0]) < 1e-10);
                CHECK(std::abs(f[1]) < 1e-10);
                CHECK(xp.lambda1 * xp.lambda2 < 0.0);
            }
        }
    }

    SUBCASE("jacobian matches finite differences of the planar field") {
        const auto pf = planar_flow(4.0, 4.23);
        const auto xp = xpoint_from(pf);
        const double h = 1e-7;
        const Vec2 fu =
            (planar_velocity(pf, xp.u + h, xp.v) - planar_velocity(pf, xp.u - h, xp.v)) / (2 * h);
        const Vec2 fv =
            (planar_velocity(pf, xp.u, xp.v + h) - planar_velocity(pf, xp.u, xp.v - h)) / (2 * h);
        CHECK(xp.a == doctest::Approx(fu[0]).epsilon(1e-6));
        CHECK(xp.c == doctest::Approx(fu[1]).epsilon(1e-6));
        CHECK(xp.b == doctest::Approx(fv[0]).epsilon(1e-6));
        CHECK(xp.d == doctest::Approx(fv[1]).epsilon(1e-6));
    }

    SUBCASE("eigenvector slopes satisfy the eigenproblem") {
        const auto xp = xpoint(7.0, 2.5);
        for (auto [lam, slope] : {std::pair{xp.lambda1, xp.slope1}, {xp.lambda2, xp.slope2}}) {
            const Vec2 ev(1.0, slope);
            const Vec2 jev(xp.a * ev[0] + xp.b * ev[1], xp.c * ev[0] + xp.d * ev[1]);
            CHECK((jev - lam * ev).norm() < 1e-9 * std::max(1.0, std::abs(lam)) * ev.norm());
        }
    }
}

TEST_CASE("manifold tracing") {
    const double t = 4.0, R = 4.23;

    SUBCASE("first point sits at the seed displacement along the eigenvector") {
        const auto xp = xpoint(t, R);
        TraceOptions opts;
        opts.max_winding = 2.0 * kTwoPi;
        const auto curve = manifold_trace(t, R, ManifoldBranch::UnstablePlus, {}, opts);
        REQUIRE(!curve.points.empty());
        const Vec2 d = curve.points.front() - Vec2(xp.u, xp.v);
        CHECK(d.norm() == doctest::Approx(1e-5).epsilon(1e-12));
        const Vec2 ev = Vec2(1.0, xp.slope1).normalized();
        CHECK(std::abs(d.normalized().dot(ev)) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("reversing the flow sign swaps stable and unstable behaviour") {
        const auto pf = planar_flow(t, R);
        const auto xp = xpoint_from(pf);
        // seed along the unstable eigenvector, integrated backwards: collapses
        // onto the X-point instead of leaving it
        const Vec2 seed_pt = Vec2(xp.u, xp.v) + 1e-5 * Vec2(1.0, xp.slope1).normalized();
        TraceOptions opts;
        opts.arc_cap = 1.0;
        const auto fwd = trace_frozen_flow(pf, seed_pt, +1, {}, opts);
        const auto bwd = trace_frozen_flow(pf, seed_pt, -1, {}, opts);
        const double d_fwd = (fwd.points.back() - Vec2(xp.u, xp.v)).norm();
        const double d_bwd = (bwd.points.back() - Vec2(xp.u, xp.v)).norm();
        CHECK(d_fwd > 100.0 * d_bwd);  // forward escapes, backward converges
    }

    SUBCASE("one unstable branch spirals into the node with shrinking turns") {
        TraceOptions opts;
        opts.max_winding = 12.0 * kTwoPi;
        opts.arc_cap = 1e4;
        int spiraling = 0;
        for (auto br : {ManifoldBranch::UnstablePlus, ManifoldBranch::UnstableMinus}) {
            const auto curve = manifold_trace(t, R, br, {}, opts);
            const auto stats = analyze_spiral(curve);
            if (stats.turn_radii.size() >= 5) {
                ++spiraling;
                for (size_t i = 1; i < stats.turn_radii.size(); ++i)
                    CHECK(stats.turn_radii[i] < stats.turn_radii[i - 1]);
                CHECK(stats.has_trend);
                CHECK(stats.trend < 0.0);
            }
        }
        CHECK(spiraling == 1);
    }
}

TEST_CASE("stability classification around the transition") {
    CHECK(classify_complex(9.52, 5.0) == ComplexStability::Stable);
    CHECK(classify_complex(9.60, 5.0) == ComplexStability::Unstable);
    CHECK(classify_complex(4.0, 4.23) == ComplexStability::Unstable);
}

TEST_CASE("hopf scan on a constant interval is empty") {
    const auto transitions = hopf_scan(4.23, 3.9, 4.1, 0.05);
    CHECK(transitions.empty());
}

TEST_CASE("foliation assembles layers and tolerates degeneracies") {
    const auto st = foliation(4.0, {1.0, 2.0, 3.0, 4.0, 5.0});
    REQUIRE(st.layers.size() == 5);
    const Vec3 n = nodal_direction(4.0);
    for (const auto& layer : st.layers) {
        CHECK((layer.node.position - layer.R * n).norm() < 1e-12 * layer.R);
        REQUIRE(layer.xpoint.has_value());
        CHECK(layer.xpoint->lambda1 * layer.xpoint->lambda2 < 0.0);
        const auto pf = planar_flow(4.0, layer.R);
        const Vec2 f = planar_velocity(pf, layer.xpoint->u, layer.xpoint->v);
        CHECK(f.norm() < 1e-10);
    }
}

TEST_CASE("distances to the structure") {
    const double t = 4.0;
    const auto pf = planar_flow(t, 4.23);
    const auto xp = xpoint_from(pf);
    const Vec3 lab = xpoint_lab_position(pf, xp);

    CHECK(distance_to_structure(lab, t, {4.23}) == 0.0);
    CHECK(distance_to_structure(-lab, t, {4.23}) == 0.0);  // central-symmetric copy
    CHECK(distance_to_xpoint(lab, t) < 1e-12);

    const Vec3 n = nodal_direction(t);
    CHECK(distance_to_nodal_line(2.0 * n, t) < 1e-14);
    const Vec3 off = n.cross(Vec3::UnitX()).normalized();
    CHECK(distance_to_nodal_line(2.0 * n + 0.7 * off, t) == doctest::Approx(0.7).epsilon(1e-12));

    CHECK(distance_to_complexes(2.0 * n, t, {1.0, 2.0}) < 1e-14);
    CHECK(distance_to_complexes(lab, t, {4.23}) == 0.0);
}

TEST_CASE("nodal direction is continuous along dense sampling") {
    NodalPathTracker tracker;
    Vec3 prev = tracker.point(0.5, 1.0).position;
    double max_step_len = 0.0;
    for (double t = 0.501; t < 20.0; t += 0.001) {
        const Vec3 cur = tracker.point(t, 1.0).position;
        max_step_len = std::max(max_step_len, (cur - prev).norm());
        prev = cur;
    }
    double max_speed = 0.0;
    for (double t = 0.5; t < 20.0; t += 0.001)
        max_speed = std::max(max_speed, nodal_point(t, 1.0).velocity.norm());
    CHECK(max_step_len < 10.0 * 0.001 * max_speed);
}
