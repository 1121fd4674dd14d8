#include "bohmflow/guidance.hpp"

#include <cmath>

#include "bohmflow/ode.hpp"

namespace bohmflow {

void IntegratorSettings::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(min_step > 0.0) || !(min_step < max_step))
        throw ConfigError("require 0 < min_step < max_step");
    if (!(node_guard > 0.0)) throw ConfigError("node_guard must be positive");
    if (!(node_step_fraction > 0.0)) throw ConfigError("node_step_fraction must be positive");
    if (!(deviation_renorm_threshold > 1.0))
        throw ConfigError("deviation_renorm_threshold must exceed 1");
    if (!(output_interval > 0.0)) throw ConfigError("output_interval must be positive");
}

double node_proximity(const Superposition& state, const PhasePoint& p) {
    const auto amp = state.amplitude(p.x, p.t);
    return std::norm(amp.value) / envelope_density(state.config(), p.x);
}

namespace {

struct VelocityEval {
    Vec3 v;
    double proximity;
};

VelocityEval velocity_eval(const Superposition& state, const Vec3& x, double t, double eps_g) {
    const auto amp = state.amplitude(x, t);
    const double env = envelope_density(state.config(), x);
    const double q = std::norm(amp.value) / env;
    if (q < eps_g)
        throw NearNodeError("|Psi|^2 below node guard at t = " + std::to_string(t));
    const auto& cfg = state.config();
    Vec3 v;
    for (int k = 0; k < 3; ++k)
        v[k] = cfg.hbar / cfg.mass[k] * std::imag(amp.gradient[k] / amp.value);
    return {v, q};
}

void require_paper_units(const OscillatorConfig& config) {
    if (config.mass != Vec3(1.0, 1.0, 1.0) || config.hbar != 1.0)
        throw PreconditionError("closed-form flow requires m_k = hbar = 1 units");
}

// G = x^T M(t) x with M_ii = omega_i, M_ij = sqrt(omega_i omega_j) cos((omega_i - omega_j) t).
Mat3 flow_quadratic_form(double t, const OscillatorConfig& config) {
    const Vec3& w = config.omega;
    Mat3 m;
    for (int i = 0; i < 3; ++i) {
        m(i, i) = w[i];
        for (int j = i + 1; j < 3; ++j) {
            m(i, j) = m(j, i) = std::sqrt(w[i] * w[j]) * std::cos((w[i] - w[j]) * t);
        }
    }
    return m;
}

Mat3 flow_numerator_matrix(double t, const OscillatorConfig& config) {
    const Vec3& w = config.omega;
    Mat3 a = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double v = -std::sqrt(w[i] * w[j]) * std::sin((w[i] - w[j]) * t);
            a(i, j) = v;
            a(j, i) = -v;
        }
    return a;
}

}  // namespace

Vec3 bohmian_velocity(const Superposition& state, const PhasePoint& p, double eps_g) {
    return velocity_eval(state, p.x, p.t, eps_g).v;
}

BaseFlowCoefficients base_flow_coefficients(const Vec3& x, double t, const OscillatorConfig& config) {
    require_paper_units(config);
    BaseFlowCoefficients out;
    out.A = flow_numerator_matrix(t, config);
    out.G = x.dot(flow_quadratic_form(t, config) * x);
    return out;
}

Vec3 closed_form_velocity(const PhasePoint& p, const OscillatorConfig& config, double eps_g) {
    const auto cf = base_flow_coefficients(p.x, p.t, config);
    if (cf.G < eps_g)
        throw NearNodeError("G below node guard at t = " + std::to_string(p.t));
    return cf.A * p.x / cf.G;
}

Mat3 velocity_jacobian(const Superposition& state, const PhasePoint& p, double eps_g) {
    const auto jet = state.amplitude_jet(p.x, p.t);
    const double env = envelope_density(state.config(), p.x);
    if (std::norm(jet.value) / env < eps_g)
        throw NearNodeError("|Psi|^2 below node guard at t = " + std::to_string(p.t));
    const auto& cfg = state.config();
    const CVec3 logg = jet.gradient / jet.value;
    Mat3 out;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            out(k, j) = cfg.hbar / cfg.mass[k] *
                        std::imag(jet.hessian(k, j) / jet.value - logg[k] * logg[j]);
    return out;
}

namespace {

using ode::StateVec;

// node-distance estimate from the proximity measure; quadratic growth of
// |Psi|^2 off the nodal set makes sqrt(Q / sum omega) a conservative yardstick
double node_distance_estimate(double proximity, const OscillatorConfig& config) {
    return std::sqrt(proximity / config.omega.sum());
}

template <int N>
struct SampleWriter {
    double t0, t1, interval;
    bool grid_only;  // deviation runs sample strictly on the tau grid
    long next_index = 1;
    Trajectory* traj;
    DeviationLog* dev;
    double* log_scale;

    void emit(double t, const StateVec<N>& y) {
        traj->times.push_back(t);
        const Vec3 x(y[0], y[1], y[2]);
        traj->positions.push_back(x);
        traj->radii.push_back(x.norm());
        if constexpr (N == 6) {
            const double n = Vec3(y[3], y[4], y[5]).norm();
            const double ln = std::log(n) + *log_scale;
            dev->log_norms.push_back(ln);
            dev->norms.push_back(std::exp(ln));
        }
    }

    void on_segment(const ode::DenseSegment<N>& seg, double seg_t0, double seg_t1) {
        for (;; ++next_index) {
            const double ts = t0 + next_index * interval;
            if (ts > seg_t1 + 1e-15 * std::max(1.0, std::abs(seg_t1))) break;
            if (ts <= seg_t0) continue;
            emit(std::min(ts, seg_t1), seg.eval(std::min(ts, seg_t1)));
        }
    }

    void finish(double t, const StateVec<N>& y) {
        if (traj->times.empty() || traj->times.back() < t) {
            if (grid_only && !traj->times.empty()) {
                // keep the deviation grid uniform: only emit t1 if it lands on it
                const double k = (t - t0) / interval;
                if (std::abs(k - std::round(k)) > 1e-9) return;
                if (!traj->times.empty() && traj->times.back() >= t) return;
            }
            emit(t, y);
        }
    }
};

template <int N, class Rhs>
void run_guarded(Rhs& rhs, double t0, double t1, StateVec<N>& y, const IntegratorSettings& s,
                 SampleWriter<N>& out, const OscillatorConfig& config,
                 double* log_scale = nullptr, std::vector<DeviationLog::RenormEvent>* renorms = nullptr) {
    StateVec<N> k1;
    double t = t0;
    try {
        rhs(t, y, k1);
    } catch (const NearNodeError&) {
        throw PreconditionError("initial condition lies within the node guard region");
    }

    const double span = t1 - t0;
    const double v0 = k1.template head<3>().norm();
    double h = std::clamp(0.01 * (1.0 + y.template head<3>().norm()) / (1.0 + v0), s.min_step,
                          std::min(s.max_step, span));
    double prox_here = rhs.last_proximity;

    ode::PiController ctrl;
    while (t < t1) {
        // geometric guard: resolve near-node hairpins where speeds diverge
        const double speed = k1.template head<3>().norm();
        const double d_est = node_distance_estimate(prox_here, config);
        double h_cap = s.max_step;
        if (speed > 0.0) h_cap = std::min(h_cap, s.node_step_fraction * d_est / speed);
        bool capped = h > h_cap;
        double h_try = std::min(h, h_cap);
        bool final_clamp = false;
        if (t + h_try >= t1) {
            h_try = t1 - t;
            final_clamp = true;
        }
        if (h_try < s.min_step && !final_clamp) {
            if (capped) throw NodeCollisionError("node guard forced step below min_step at t = " +
                                                 std::to_string(t));
            throw StepUnderflowError("required step below min_step at t = " + std::to_string(t));
        }

        ode::StepAttempt<N> att;
        try {
            att = ode::dopri5_attempt<N>(rhs, t, y, k1, h_try, s.abs_tol, s.rel_tol, 3);
        } catch (const NearNodeError&) {
            h = 0.5 * h_try;
            if (h < s.min_step)
                throw NodeCollisionError("trajectory entered the node guard region at t = " +
                                         std::to_string(t));
            continue;
        }
        const double prox_new = rhs.last_proximity;  // k7 was evaluated at (t + h, y_new)

        bool accept = false;
        double h_next = ctrl.propose(h_try, att.error, accept);
        if (accept) {
            out.on_segment(att.dense, t, t + h_try);
            t += h_try;
            y = att.y_new;
            k1 = att.k_last;
            prox_here = prox_new;
            if constexpr (N == 6) {
                const double n = y.template tail<3>().norm();
                if (n > s.deviation_renorm_threshold) {
                    y.template tail<3>() /= n;
                    k1.template tail<3>() /= n;
                    *log_scale += std::log(n);
                    renorms->push_back({t, n});
                }
            }
        }
        h = h_next;
        if (!accept && h < s.min_step)
            throw StepUnderflowError("required step below min_step at t = " + std::to_string(t));
    }
    out.finish(t1, y);
}

struct FlowRhs {
    const Superposition& state;
    double eps_g;
    double last_proximity = 0.0;

    void operator()(double t, const StateVec<3>& y, StateVec<3>& dydt) {
        const auto ev = velocity_eval(state, Vec3(y[0], y[1], y[2]), t, eps_g);
        last_proximity = ev.proximity;
        dydt = ev.v;
    }
};

struct VariationalRhs {
    const Superposition& state;
    double eps_g;
    double last_proximity = 0.0;

    void operator()(double t, const StateVec<6>& y, StateVec<6>& dydt) {
        const Vec3 x(y[0], y[1], y[2]);
        const auto jet = state.amplitude_jet(x, t);
        const double env = envelope_density(state.config(), x);
        const double q = std::norm(jet.value) / env;
        if (q < eps_g)
            throw NearNodeError("|Psi|^2 below node guard at t = " + std::to_string(t));
        last_proximity = q;
        const auto& cfg = state.config();
        const CVec3 logg = jet.gradient / jet.value;
        Vec3 v;
        Mat3 jac;
        for (int k = 0; k < 3; ++k) {
            v[k] = cfg.hbar / cfg.mass[k] * std::imag(logg[k]);
            for (int j = 0; j < 3; ++j)
                jac(k, j) = cfg.hbar / cfg.mass[k] *
                            std::imag(jet.hessian(k, j) / jet.value - logg[k] * logg[j]);
        }
        dydt.head<3>() = v;
        dydt.tail<3>() = jac * Vec3(y[3], y[4], y[5]);
    }
};

}  // namespace

Trajectory integrate(const Superposition& state, const Vec3& x0, double t0, double t1,
                     const IntegratorSettings& settings) {
    settings.validate();
    if (t1 < t0) throw PreconditionError("integrate: t1 must be >= t0");

    Trajectory traj;
    StateVec<3> y;
    y << x0[0], x0[1], x0[2];

    SampleWriter<3> out{t0, t1, settings.output_interval, false, 1, &traj, nullptr, nullptr};
    out.emit(t0, y);
    if (t1 == t0) return traj;

    FlowRhs rhs{state, settings.node_guard};
    run_guarded<3>(rhs, t0, t1, y, settings, out, state.config());
    return traj;
}

std::pair<Trajectory, DeviationLog> integrate_with_deviation(const Superposition& state,
                                                             const Vec3& x0, const Vec3& dx0,
                                                             double t0, double t1, double tau,
                                                             const IntegratorSettings& settings) {
    settings.validate();
    if (t1 < t0) throw PreconditionError("integrate_with_deviation: t1 must be >= t0");
    if (!(tau > 0.0)) throw PreconditionError("integrate_with_deviation: tau must be positive");
    if (dx0.norm() == 0.0) throw PreconditionError("integrate_with_deviation: dx0 must be nonzero");

    Trajectory traj;
    DeviationLog dev;
    dev.tau = tau;
    dev.t0 = t0;
    double log_scale = 0.0;

    StateVec<6> y;
    y << x0[0], x0[1], x0[2], dx0[0], dx0[1], dx0[2];

    SampleWriter<6> out{t0, t1, tau, true, 1, &traj, &dev, &log_scale};
    out.emit(t0, y);
    if (t1 == t0) return {traj, dev};

    VariationalRhs rhs{state, settings.node_guard};
    run_guarded<6>(rhs, t0, t1, y, settings, out, state.config(), &log_scale, &dev.renorm_events);
    return {traj, dev};
}

}  // namespace bohmflow
