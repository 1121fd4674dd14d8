#include "bohmflow/nodal.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "bohmflow/ode.hpp"

namespace bohmflow {

namespace {

constexpr double kDegenerateRho = 1e-9;
constexpr double kTrendTol = 1e-6;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Unnormalized direction (sin(w32 t)/sqrt(w1), sin(w13 t)/sqrt(w2), sin(w21 t)/sqrt(w3))
// with its first two time derivatives, plus the normalized jet.
struct DirectionJet {
    Vec3 s, ds, dds;
    double rho = 0.0;
    Vec3 n, dn, ddn;
};

DirectionJet direction_jet(double t, const OscillatorConfig& config) {
    config.validate();
    const Vec3& w = config.omega;
    const Vec3 freq(w[2] - w[1], w[0] - w[2], w[1] - w[0]);
    DirectionJet j;
    for (int k = 0; k < 3; ++k) {
        const double sw = std::sqrt(w[k]);
        j.s[k] = std::sin(freq[k] * t) / sw;
        j.ds[k] = freq[k] * std::cos(freq[k] * t) / sw;
        j.dds[k] = -freq[k] * freq[k] * j.s[k];
    }
    j.rho = j.s.norm();
    if (j.rho < kDegenerateRho)
        throw DegenerateTimeError("nodal direction undefined at t = " + std::to_string(t));
    const double rho = j.rho;
    const double drho = j.s.dot(j.ds) / rho;
    const double ddrho = (j.ds.squaredNorm() + j.s.dot(j.dds) - drho * drho) / rho;
    j.n = j.s / rho;
    j.dn = j.ds / rho - j.s * (drho / (rho * rho));
    j.ddn = j.dds / rho - 2.0 * j.ds * (drho / (rho * rho)) - j.s * (ddrho / (rho * rho)) +
            2.0 * j.s * (drho * drho / (rho * rho * rho));
    return j;
}

ComovingFrame frame_from_direction(const Vec3& n, double phi_fallback = 0.0, bool have_fallback = false) {
    ComovingFrame f;
    f.theta = std::acos(std::clamp(n[2], -1.0, 1.0));
    const double sin_theta = std::hypot(n[0], n[1]);
    if (sin_theta < 1e-12 && have_fallback) {
        f.phi = phi_fallback;
    } else {
        f.phi = std::atan2(n[1], n[0]);
        if (f.phi < 0.0) f.phi += kTwoPi;
    }
    const double sp = std::sin(f.phi), cp = std::cos(f.phi);
    const double st = std::sin(f.theta), ct = std::cos(f.theta);
    f.S << sp, -cp, 0.0,
           ct * cp, ct * sp, -st,
           st * cp, st * sp, ct;
    return f;
}

}  // namespace

Vec3 nodal_direction(double t, const OscillatorConfig& config) {
    return direction_jet(t, config).n;
}

NodalPoint nodal_point(double t, double R, const OscillatorConfig& config) {
    if (!(R > 0.0)) throw PreconditionError("nodal_point: R must be positive");
    const auto j = direction_jet(t, config);
    NodalPoint np;
    np.t = t;
    np.position = R * j.n;
    np.C = R / j.rho;
    np.velocity = R * j.dn;
    np.acceleration = R * j.ddn;
    return np;
}

std::pair<Vec3, Vec3> nodal_kinematics(double t, double R, const OscillatorConfig& config) {
    const auto np = nodal_point(t, R, config);
    return {np.velocity, np.acceleration};
}

Vec3 nodal_point_numeric(const Superposition& state, double t, const Vec3& guess) {
    const double R = guess.norm();
    if (!(R > 0.0)) throw PreconditionError("nodal_point_numeric: guess must be nonzero");
    constexpr double kResidual = 1e-12;
    constexpr int kMaxIter = 50;

    Vec3 p = guess;
    double res = std::abs(state.amplitude(p, t).value);
    for (int it = 0; it < kMaxIter; ++it) {
        if (res < kResidual) return p;
        const auto amp = state.amplitude(p, t);
        Vec3 seed = std::abs(p[0]) < 0.9 * R ? Vec3::UnitX() : Vec3::UnitY();
        const Vec3 e1 = p.cross(seed).normalized();
        const Vec3 e2 = p.cross(e1).normalized();
        Mat2 jac;
        const Complex g1 = amp.gradient.dot(e1.cast<Complex>());
        const Complex g2 = amp.gradient.dot(e2.cast<Complex>());
        jac << g1.real(), g2.real(), g1.imag(), g2.imag();
        if (std::abs(jac.determinant()) < 1e-300)
            throw NoConvergenceError("nodal_point_numeric: singular Jacobian");
        const Vec2 step = jac.colPivHouseholderQr().solve(Vec2(-amp.value.real(), -amp.value.imag()));

        double lambda = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 10; ++bt) {
            Vec3 cand = p + lambda * (step[0] * e1 + step[1] * e2);
            cand *= R / cand.norm();
            const double cres = std::abs(state.amplitude(cand, t).value);
            if (cres < res) {
                p = cand;
                res = cres;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved)
            throw NoConvergenceError("nodal_point_numeric: stalled at residual " + std::to_string(res));
    }
    if (res < kResidual) return p;
    throw NoConvergenceError("nodal_point_numeric: no convergence after max iterations");
}

ComovingFrame comoving_frame(double t, double R, const OscillatorConfig& config) {
    if (!(R > 0.0)) throw PreconditionError("comoving_frame: R must be positive");
    return frame_from_direction(direction_jet(t, config).n);
}

PlanarFlow planar_flow(double t, double R, const OscillatorConfig& config) {
    const auto np = nodal_point(t, R, config);
    const auto f = frame_from_direction(np.position / R);

    const Vec3& w = config.omega;
    const double s12 = std::sqrt(w[0] * w[1]), s13 = std::sqrt(w[0] * w[2]), s23 = std::sqrt(w[1] * w[2]);
    const double w12 = w[0] - w[1], w13 = w[0] - w[2], w23 = w[1] - w[2];
    const double c12 = std::cos(w12 * t), c13 = std::cos(w13 * t), c23 = std::cos(w23 * t);
    const double sp = std::sin(f.phi), cp = std::cos(f.phi);
    const double st = std::sin(f.theta), ct = std::cos(f.theta);
    const double s2p = std::sin(2.0 * f.phi), s2t = std::sin(2.0 * f.theta);

    PlanarFlow pf;
    pf.t = t;
    pf.R = R;
    pf.frame = f;
    pf.node = np;
    pf.Phi1 = -s12 * c12 * s2p + w[0] * sp * sp + w[1] * cp * cp;
    pf.Phi2 = 2.0 * s23 * c23 * cp * st - 2.0 * s13 * c13 * sp * st +
              2.0 * s12 * c12 * (-ct * cp * cp + ct * sp * sp) + ct * s2p * (w[0] - w[1]);
    pf.Phi3 = -s23 * c23 * s2t * sp - s13 * c13 * s2t * cp + s12 * c12 * ct * ct * s2p +
              w[0] * ct * ct * cp * cp + w[1] * ct * ct * sp * sp + w[2] * st * st;
    pf.B = -ct * s12 * std::sin(w12 * t) + st * sp * s13 * std::sin(w13 * t) -
           st * cp * s23 * std::sin(w23 * t);
    pf.V_u = f.S.row(0).dot(np.velocity);
    pf.V_v = f.S.row(1).dot(np.velocity);
    return pf;
}

namespace {

double planar_g(const PlanarFlow& pf, double u, double v) {
    return pf.Phi1 * u * u + pf.Phi2 * u * v + pf.Phi3 * v * v;
}

}  // namespace

Vec2 planar_velocity(const PlanarFlow& pf, double u, double v, double eps_g) {
    const double g = planar_g(pf, u, v);
    if (g < eps_g) throw NearNodeError("planar G below node guard");
    return Vec2(pf.B * v / g - pf.V_u, -pf.B * u / g - pf.V_v);
}

XPoint xpoint_from(const PlanarFlow& pf) {
    const double speed2 = pf.V_u * pf.V_u + pf.V_v * pf.V_v;
    if (std::abs(pf.B) < 1e-12)
        throw DegenerateXPointError("X-point undefined: rotational coefficient B vanishes");
    if (speed2 < 1e-24)
        throw DegenerateXPointError("X-point undefined: nodal point momentarily at rest");
    // denominator is the G-form evaluated at (V_v, -V_u); positive definite away from V = 0
    const double den = pf.Phi1 * pf.V_v * pf.V_v - pf.Phi2 * pf.V_u * pf.V_v + pf.Phi3 * pf.V_u * pf.V_u;
    if (den < 1e-12 * speed2)
        throw DegenerateXPointError("X-point undefined: degenerate quadratic form");

    XPoint xp;
    xp.u = -pf.B * pf.V_v / den;
    xp.v = pf.B * pf.V_u / den;

    const double g = planar_g(pf, xp.u, xp.v);
    const double gu = 2.0 * pf.Phi1 * xp.u + pf.Phi2 * xp.v;
    const double gv = pf.Phi2 * xp.u + 2.0 * pf.Phi3 * xp.v;
    const double g2 = g * g;
    xp.a = -pf.B * xp.v * gu / g2;
    xp.b = pf.B / g - pf.B * xp.v * gv / g2;
    xp.c = -pf.B / g + pf.B * xp.u * gu / g2;
    xp.d = pf.B * xp.u * gv / g2;

    const double tr = xp.a + xp.d;
    const double det = xp.a * xp.d - xp.b * xp.c;
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) throw DegenerateXPointError("X-point spectrum not real");
    const double root = std::sqrt(disc);
    xp.lambda1 = 0.5 * (tr + root);
    xp.lambda2 = 0.5 * (tr - root);
    if (xp.b == 0.0) throw DegenerateXPointError("X-point eigenvector slope undefined (b = 0)");
    xp.slope1 = (xp.lambda1 - xp.a) / xp.b;
    xp.slope2 = (xp.lambda2 - xp.a) / xp.b;
    return xp;
}

XPoint xpoint(double t, double R, const OscillatorConfig& config) {
    return xpoint_from(planar_flow(t, R, config));
}

Vec3 xpoint_lab_position(const PlanarFlow& pf, const XPoint& xp) {
    return pf.node.position + pf.frame.S.transpose() * Vec3(xp.u, xp.v, 0.0);
}

ManifoldCurve trace_frozen_flow(const PlanarFlow& pf, const Vec2& p0, int time_sign,
                                const IntegratorSettings& settings, const TraceOptions& opts) {
    settings.validate();
    if (time_sign != 1 && time_sign != -1)
        throw PreconditionError("trace_frozen_flow: time_sign must be +1 or -1");

    ManifoldCurve curve;
    curve.frozen_t = pf.t;
    curve.R = pf.R;
    curve.termination = CurveEnd::StepLimit;

    const double box = opts.box_factor * pf.R;
    const double sign = static_cast<double>(time_sign);

    struct Rhs {
        const PlanarFlow& pf;
        double sign, eps;
        void operator()(double, const ode::StateVec<2>& y, ode::StateVec<2>& dydt) const {
            const double g = pf.Phi1 * y[0] * y[0] + pf.Phi2 * y[0] * y[1] + pf.Phi3 * y[1] * y[1];
            if (g < eps) throw NearNodeError("planar G below node guard");
            dydt[0] = sign * (pf.B * y[1] / g - pf.V_u);
            dydt[1] = sign * (-pf.B * y[0] / g - pf.V_v);
        }
    } rhs{pf, sign, settings.node_guard};

    ode::StateVec<2> y(p0[0], p0[1]);
    double s = 0.0, arc = 0.0, winding = 0.0;
    double angle = std::atan2(y[1], y[0]);
    curve.s.push_back(0.0);
    curve.points.push_back(p0);

    ode::StateVec<2> k1;
    try {
        rhs(0.0, y, k1);
    } catch (const NearNodeError&) {
        curve.termination = CurveEnd::NearNode;
        return curve;
    }

    double h = std::min(settings.max_step, 0.01 * y.norm() / std::max(k1.norm(), 1e-12));
    h = std::max(h, settings.min_step);
    ode::PiController ctrl;

    for (long step = 0; step < opts.max_steps; ++step) {
        const double r = y.norm();
        const double speed = k1.norm();
        double h_try = std::min(h, settings.max_step);
        if (speed > 0.0) h_try = std::min(h_try, settings.node_step_fraction * r / speed);
        if (h_try < settings.min_step) {
            curve.termination = CurveEnd::NearNode;
            break;
        }

        ode::StepAttempt<2> att;
        try {
            att = ode::dopri5_attempt<2>(rhs, s, y, k1, h_try, settings.abs_tol, settings.rel_tol, 2);
        } catch (const NearNodeError&) {
            h = 0.5 * h_try;
            if (h < settings.min_step) {
                curve.termination = CurveEnd::NearNode;
                break;
            }
            continue;
        }

        bool accept = false;
        const double h_next = ctrl.propose(h_try, att.error, accept);
        if (accept) {
            arc += (att.y_new - y).norm();
            y = att.y_new;
            k1 = att.k_last;
            s += h_try;
            const double a_new = std::atan2(y[1], y[0]);
            double d = a_new - angle;
            while (d > std::numbers::pi) d -= kTwoPi;
            while (d < -std::numbers::pi) d += kTwoPi;
            winding += d;
            angle = a_new;
            curve.s.push_back(sign * s);
            curve.points.push_back(Vec2(y[0], y[1]));

            if (std::abs(y[0]) > box || std::abs(y[1]) > box) {
                curve.termination = CurveEnd::DomainBox;
                break;
            }
            if (arc > opts.arc_cap) {
                curve.termination = CurveEnd::ArcLengthCap;
                break;
            }
            if (std::abs(winding) > opts.max_winding) {
                curve.termination = CurveEnd::WindingCap;
                break;
            }
        }
        h = h_next;
        if (h < settings.min_step) {
            curve.termination = CurveEnd::NearNode;
            break;
        }
    }
    return curve;
}

ManifoldCurve manifold_trace(double t, double R, ManifoldBranch branch,
                             const IntegratorSettings& settings, const TraceOptions& opts,
                             const OscillatorConfig& config) {
    const auto pf = planar_flow(t, R, config);
    const auto xp = xpoint_from(pf);

    const bool unstable = branch == ManifoldBranch::UnstablePlus || branch == ManifoldBranch::UnstableMinus;
    const bool plus = branch == ManifoldBranch::UnstablePlus || branch == ManifoldBranch::StablePlus;
    const double slope = unstable ? xp.slope1 : xp.slope2;
    Vec2 dir(1.0, slope);
    dir.normalize();
    if (!plus) dir = -dir;

    const Vec2 p0 = Vec2(xp.u, xp.v) + opts.seed * dir;
    auto curve = trace_frozen_flow(pf, p0, unstable ? 1 : -1, settings, opts);
    curve.branch = branch;
    return curve;
}

SpiralStats analyze_spiral(const ManifoldCurve& curve) {
    SpiralStats st;
    if (curve.points.size() < 3) return st;

    std::vector<double> wind(curve.points.size()), lr(curve.points.size());
    double angle = std::atan2(curve.points[0][1], curve.points[0][0]);
    wind[0] = 0.0;
    lr[0] = std::log(curve.points[0].norm());
    for (size_t i = 1; i < curve.points.size(); ++i) {
        const double a = std::atan2(curve.points[i][1], curve.points[i][0]);
        double d = a - angle;
        while (d > std::numbers::pi) d -= kTwoPi;
        while (d < -std::numbers::pi) d += kTwoPi;
        wind[i] = wind[i - 1] + d;
        angle = a;
        lr[i] = std::log(curve.points[i].norm());
    }
    st.total_winding = wind.back();
    const double total = std::abs(st.total_winding);

    size_t next_turn = 1;
    for (size_t i = 1; i < wind.size(); ++i) {
        if (std::abs(wind[i]) >= next_turn * kTwoPi) {
            st.turn_radii.push_back(curve.points[i].norm());
            ++next_turn;
        }
    }

    if (total < 2.0 * kTwoPi) return st;
    // radial trend per radian, fitted over the final part of the winding
    const double start = 0.4 * total;
    double sw = 0.0, sww = 0.0, sl = 0.0, swl = 0.0;
    long n = 0;
    for (size_t i = 0; i < wind.size(); ++i) {
        const double x = std::abs(wind[i]);
        if (x < start) continue;
        sw += x;
        sww += x * x;
        sl += lr[i];
        swl += x * lr[i];
        ++n;
    }
    if (n < 8) return st;
    const double det = n * sww - sw * sw;
    if (det == 0.0) return st;
    st.trend = (n * swl - sw * sl) / det;
    st.has_trend = true;
    return st;
}

ComplexStability classify_complex(double t, double R, const OscillatorConfig& config,
                                  const IntegratorSettings& settings) {
    TraceOptions opts;
    opts.max_winding = 14.0 * kTwoPi;
    opts.arc_cap = 1e4;

    auto winds_inward = [&](ManifoldBranch a, ManifoldBranch b) {
        SpiralStats best;
        for (auto br : {a, b}) {
            const auto stats = analyze_spiral(manifold_trace(t, R, br, settings, opts, config));
            if (std::abs(stats.total_winding) > std::abs(best.total_winding)) best = stats;
        }
        return best;
    };

    const auto su = winds_inward(ManifoldBranch::UnstablePlus, ManifoldBranch::UnstableMinus);
    const auto ss = winds_inward(ManifoldBranch::StablePlus, ManifoldBranch::StableMinus);
    const bool qu = su.has_trend && su.trend < -kTrendTol;
    const bool qs = ss.has_trend && ss.trend < -kTrendTol;
    if (qu && !qs) return ComplexStability::Unstable;
    if (qs && !qu) return ComplexStability::Stable;
    throw ClassificationAmbiguousError("manifold stability ambiguous at t = " + std::to_string(t));
}

std::vector<HopfTransition> hopf_scan(double R, double t_lo, double t_hi, double dt,
                                      const OscillatorConfig& config,
                                      const IntegratorSettings& settings, double tol) {
    if (!(t_hi > t_lo) || !(dt > 0.0)) throw PreconditionError("hopf_scan: bad interval");

    auto classify = [&](double t) -> std::optional<ComplexStability> {
        try {
            return classify_complex(t, R, config, settings);
        } catch (const ClassificationAmbiguousError&) {
            return std::nullopt;
        } catch (const DegenerateXPointError&) {
            return std::nullopt;
        }
    };

    const long n = std::lround((t_hi - t_lo) / dt);
    std::vector<std::pair<double, std::optional<ComplexStability>>> samples;
    for (long i = 0; i <= n; ++i) {
        const double t = t_lo + i * dt;
        samples.emplace_back(t, classify(t));
    }

    std::vector<HopfTransition> out;
    std::optional<std::pair<double, ComplexStability>> prev;
    for (const auto& [t, label] : samples) {
        if (!label) continue;
        if (prev && prev->second != *label) {
            double lo = prev->first, hi = t;
            while (hi - lo > tol) {
                bool placed = false;
                for (double frac : {0.5, 0.25, 0.75}) {
                    const double mid = lo + frac * (hi - lo);
                    const auto lm = classify(mid);
                    if (!lm) continue;
                    if (*lm == prev->second)
                        lo = mid;
                    else
                        hi = mid;
                    placed = true;
                    break;
                }
                if (!placed) break;
            }
            out.push_back({0.5 * (lo + hi), prev->second, *label});
        }
        prev = {t, *label};
    }
    return out;
}

NodalXStructure foliation(double t, const std::vector<double>& R_grid,
                          const OscillatorConfig& config, bool with_manifolds,
                          const IntegratorSettings& settings) {
    NodalXStructure out;
    out.t = t;
    for (const double R : R_grid) {
        if (!(R > 0.0)) throw PreconditionError("foliation: radii must be positive");
        StructureLayer layer;
        layer.R = R;
        layer.node = nodal_point(t, R, config);
        try {
            const auto pf = planar_flow(t, R, config);
            const auto xp = xpoint_from(pf);
            layer.xpoint = xp;
            layer.xpoint_lab = xpoint_lab_position(pf, xp);
            if (with_manifolds) {
                TraceOptions opts;
                opts.arc_cap = 25.0 * R;
                opts.max_winding = 10.0 * kTwoPi;
                for (auto br : {ManifoldBranch::UnstablePlus, ManifoldBranch::UnstableMinus,
                                ManifoldBranch::StablePlus, ManifoldBranch::StableMinus})
                    layer.manifolds.push_back(manifold_trace(t, R, br, settings, opts, config));
            }
        } catch (const DegenerateXPointError& e) {
            layer.degeneracy = e.what();
        }
        out.layers.push_back(std::move(layer));
    }
    return out;
}

double distance_to_structure(const Vec3& x, double t, const std::vector<double>& R_grid,
                             const OscillatorConfig& config) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const double R : R_grid) {
        try {
            const auto pf = planar_flow(t, R, config);
            const auto xp = xpoint_from(pf);
            const Vec3 lab = xpoint_lab_position(pf, xp);
            best = std::min({best, (x - lab).norm(), (x + lab).norm()});
            any = true;
        } catch (const DegenerateXPointError&) {
        }
    }
    if (!any) throw DegenerateXPointError("no layer produced an X-point");
    return best;
}

double distance_to_xpoint(const Vec3& x, double t, const OscillatorConfig& config) {
    const double R = x.norm();
    if (!(R > 0.0)) throw PreconditionError("distance_to_xpoint: x must be nonzero");
    const auto pf = planar_flow(t, R, config);
    const auto xp = xpoint_from(pf);
    const Vec3 lab = xpoint_lab_position(pf, xp);
    return std::min((x - lab).norm(), (x + lab).norm());
}

double distance_to_nodal_line(const Vec3& x, double t, const OscillatorConfig& config) {
    const Vec3 n = nodal_direction(t, config);
    return (x - x.dot(n) * n).norm();
}

double distance_to_complexes(const Vec3& x, double t, const std::vector<double>& R_grid,
                             const OscillatorConfig& config) {
    double best = distance_to_nodal_line(x, t, config);
    try {
        best = std::min(best, distance_to_structure(x, t, R_grid, config));
    } catch (const DegenerateXPointError&) {
    }
    return best;
}

NodalPoint NodalPathTracker::point(double t, double R) {
    if (!(R > 0.0)) throw PreconditionError("NodalPathTracker: R must be positive");
    const auto j = direction_jet(t, config_);
    Vec3 n = sigma_ * j.n;
    if (have_prev_ && n.dot(prev_n_) < 0.0) {
        sigma_ = -sigma_;
        n = -n;
    }
    prev_n_ = n;
    have_prev_ = true;
    NodalPoint np;
    np.t = t;
    np.position = R * n;
    np.C = sigma_ * R / j.rho;
    np.velocity = sigma_ * R * j.dn;
    np.acceleration = sigma_ * R * j.ddn;
    return np;
}

ComovingFrame NodalPathTracker::frame(double t, double R) {
    const auto np = point(t, R);
    const Vec3 n = np.position / R;
    const auto f = frame_from_direction(n, prev_phi_, have_phi_);
    prev_phi_ = f.phi;
    have_phi_ = true;
    return f;
}

void NodalPathTracker::reset() {
    sigma_ = 1.0;
    have_prev_ = false;
    have_phi_ = false;
    prev_phi_ = 0.0;
    prev_n_ = Vec3::Zero();
}

}  // namespace bohmflow
