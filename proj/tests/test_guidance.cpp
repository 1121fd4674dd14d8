#include <doctest.h>

#include <cmath>
#include <random>

#include "bohmflow/errors.hpp"
#include "bohmflow/guidance.hpp"
#include "bohmflow/nodal.hpp"

using namespace bohmflow;

namespace {

std::mt19937_64 fresh_rng(uint64_t seed) { return std::mt19937_64(seed); }

// random point with the node guard comfortably cleared
Vec3 draw_regular_point(std::mt19937_64& rng, const Superposition& state, double t,
                        double min_proximity = 1e-6) {
    std::uniform_real_distribution<double> box(-4.0, 4.0);
    for (;;) {
        const Vec3 x(box(rng), box(rng), box(rng));
        if (x.norm() < 0.3) continue;
        if (node_proximity(state, {x, t}) > min_proximity) return x;
    }
}

}  // namespace

TEST_CASE("base-state velocity vanishes at t = 0") {
    const auto state = base_state();
    auto rng = fresh_rng(1);
    std::uniform_real_distribution<double> box(-3.0, 3.0);
    for (int i = 0; i < 10; ++i) {
        const Vec3 x(box(rng), box(rng), box(rng));
        if (node_proximity(state, {x, 0.0}) < 1e-8) continue;
        CHECK(bohmian_velocity(state, {x, 0.0}).norm() < 1e-12);
        CHECK(closed_form_velocity({x, 0.0}).norm() < 1e-13);
    }
}

TEST_CASE("closed form equals the generic guidance velocity") {
    const auto state = base_state();
    auto rng = fresh_rng(42);
    std::uniform_real_distribution<double> tbox(0.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double t = tbox(rng);
        const Vec3 x = draw_regular_point(rng, state, t);
        const Vec3 a = bohmian_velocity(state, {x, t});
        const Vec3 b = closed_form_velocity({x, t});
        worst = std::max(worst, (a - b).norm() / std::max(1.0, b.norm()));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("closed-form velocity is tangent to the sphere") {
    auto rng = fresh_rng(7);
    std::uniform_real_distribution<double> box(-3.0, 3.0);
    const Vec3 x(1.0, 1.0, 1.0);
    const Vec3 v = closed_form_velocity({x, 2.0});
    CHECK(std::abs(v.dot(x)) < 1e-14);
    for (int i = 0; i < 30; ++i) {
        const Vec3 y(box(rng), box(rng), box(rng));
        const double t = 0.3 + 0.3 * i;
        const auto cf = base_flow_coefficients(y, t);
        CHECK((cf.A + cf.A.transpose()).norm() == 0.0);
        if (cf.G > 1e-6) {
            const Vec3 w = closed_form_velocity({y, t});
            CHECK(std::abs(w.dot(y)) < 1e-12 * std::max(1.0, w.norm() * y.norm()));
        }
    }
}

TEST_CASE("velocity raises NearNode on the nodal line") {
    const auto state = base_state();
    const Vec3 node = nodal_point(1.0, 4.23).position;
    CHECK_THROWS_AS(bohmian_velocity(state, {node, 1.0}), NearNodeError);
    CHECK_THROWS_AS(closed_form_velocity({node, 1.0}), NearNodeError);
}

TEST_CASE("velocity jacobian") {
    const auto state = base_state();

    SUBCASE("zero at t = 0") {
        CHECK(velocity_jacobian(state, {Vec3(1.2, -0.4, 2.0), 0.0}).norm() < 1e-12);
    }

    SUBCASE("matches finite differences") {
        auto rng = fresh_rng(99);
        std::uniform_real_distribution<double> tbox(0.5, 8.0);
        const double h = 1e-6;
        for (int rep = 0; rep < 30; ++rep) {
            const double t = tbox(rng);
            const Vec3 x = draw_regular_point(rng, state, t, 1e-3);
            const Mat3 jac = velocity_jacobian(state, {x, t});
            Mat3 fd;
            for (int k = 0; k < 3; ++k) {
                Vec3 xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                fd.col(k) = (bohmian_velocity(state, {xp, t}) - bohmian_velocity(state, {xm, t})) /
                            (2.0 * h);
            }
            CHECK((jac - fd).norm() / std::max(1.0, jac.norm()) < 1e-5);
        }
    }

    SUBCASE("differentiated sphere identity x^T J + v^T = 0") {
        auto rng = fresh_rng(1234);
        std::uniform_real_distribution<double> tbox(0.5, 8.0);
        for (int rep = 0; rep < 20; ++rep) {
            const double t = tbox(rng);
            const Vec3 x = draw_regular_point(rng, state, t, 1e-4);
            const Mat3 jac = velocity_jacobian(state, {x, t});
            const Vec3 v = bohmian_velocity(state, {x, t});
            CHECK((x.transpose() * jac + v.transpose()).norm() <
                  1e-10 * std::max(1.0, jac.norm() * x.norm()));
        }
    }
}

TEST_CASE("sphere invariant over long spans") {
    const auto state = base_state();
    auto rng = fresh_rng(2024);
    std::uniform_real_distribution<double> box(-4.0, 4.0);
    IntegratorSettings s;
    int done = 0;
    while (done < 3) {
        const Vec3 x0(box(rng), box(rng), box(rng));
        if (x0.norm() < 1.0 || node_proximity(state, {x0, 1.0}) < 1e-4) continue;
        const auto traj = integrate(state, x0, 1.0, 50.0, s);
        const double r0 = traj.radii.front();
        double worst = 0.0;
        for (const double r : traj.radii) worst = std::max(worst, std::abs(r - r0) / r0);
        CHECK(worst < 1e-6);
        ++done;
    }
}

TEST_CASE("degenerate span returns the single starting sample") {
    const auto state = base_state();
    const auto traj = integrate(state, Vec3(2.0, 1.0, -1.0), 3.0, 3.0);
    REQUIRE(traj.size() == 1);
    CHECK(traj.times[0] == 3.0);
    CHECK(traj.positions[0] == Vec3(2.0, 1.0, -1.0));
}

TEST_CASE("sampling grid is regular and radii consistent") {
    const auto state = base_state();
    IntegratorSettings s;
    s.output_interval = 0.05;
    const auto traj = integrate(state, Vec3(3.0, 2.0, 1.0), 1.0, 3.0, s);
    REQUIRE(traj.size() == 41);
    for (size_t i = 0; i < traj.size(); ++i) {
        CHECK(traj.times[i] == doctest::Approx(1.0 + 0.05 * i).epsilon(1e-12));
        CHECK(traj.radii[i] == traj.positions[i].norm());
        if (i) CHECK(traj.times[i] > traj.times[i - 1]);
    }
}

TEST_CASE("deviation integration") {
    const auto state = base_state();

    SUBCASE("zero deviation rejected") {
        CHECK_THROWS_AS(
            integrate_with_deviation(state, Vec3(3, 2, 1), Vec3::Zero(), 1.0, 2.0, 0.01),
            PreconditionError);
    }

    SUBCASE("variational growth matches two-trajectory difference") {
        const Vec3 x0(-1.5, 2.0, -2.0);
        const Vec3 dx0(0.0, 0.0, 1.0);
        const double h = 1e-7;
        IntegratorSettings s;
        const auto [traj_a, dev] = integrate_with_deviation(state, x0, dx0, 0.0, 5.0, 0.01, s);
        const auto traj_b = integrate(state, x0 + h * dx0, 0.0, 5.0, s);
        const double fd = (traj_b.positions.back() - traj_a.positions.back()).norm() / h;
        const double var = dev.norms.back();
        CHECK(std::abs(fd - var) / var < 1e-2);
    }

    SUBCASE("renormalization bookkeeping is transparent") {
        const Vec3 x0(-1.5, 2.0, -2.0);
        const Vec3 dx0(0.0, 0.0, 1.0);
        IntegratorSettings lo, hi;
        lo.deviation_renorm_threshold = 1.5;  // force frequent renormalizations
        hi.deviation_renorm_threshold = 3.0;
        const auto [ta, da] = integrate_with_deviation(state, x0, dx0, 0.0, 4.0, 0.01, lo);
        const auto [tb, db] = integrate_with_deviation(state, x0, dx0, 0.0, 4.0, 0.01, hi);
        REQUIRE(da.log_norms.size() == db.log_norms.size());
        CHECK(!da.renorm_events.empty());
        CHECK(da.renorm_events.size() > db.renorm_events.size());
        for (size_t k = 0; k < da.log_norms.size(); ++k)
            CHECK(std::abs(da.log_norms[k] - db.log_norms[k]) < 1e-12);
    }
}

TEST_CASE("integrator rejects starts inside the node guard") {
    const auto state = base_state();
    const Vec3 node = nodal_point(2.0, 3.0).position;
    CHECK_THROWS_AS(integrate(state, node, 2.0, 3.0), PreconditionError);
}

TEST_CASE("settings validation") {
    IntegratorSettings s;
    s.min_step = 1.0;
    s.max_step = 0.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(integrate(base_state(), Vec3(1, 1, 1), 0.0, -1.0), PreconditionError);
}
