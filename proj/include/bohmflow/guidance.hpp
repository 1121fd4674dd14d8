#pragma once

#include <utility>
#include <vector>

#include "bohmflow/errors.hpp"
#include "bohmflow/linalg.hpp"
#include "bohmflow/oscillator.hpp"

namespace bohmflow {

struct PhasePoint {
    Vec3 x;
    double t = 0.0;
};

/// Tolerances and guards for trajectory integration.
///
/// node_guard is a threshold on the envelope-normalized density
/// |Psi|^2 / |Psi_000|^2, which has the units (and, for the base state, the
/// value 2/3 G) of the flow denominator G; a raw |Psi|^2 threshold would trip
/// on the Gaussian tail at large radius rather than near nodes.
struct IntegratorSettings {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double max_step = 0.25;
    double min_step = 1e-12;
    double node_guard = 1e-12;          // epsilon_G
    double node_step_fraction = 0.1;    // h <= fraction * (node distance) / speed
    double deviation_renorm_threshold = 1e6;
    double output_interval = 0.01;

    void validate() const;
};

/// Antisymmetric numerator matrix and scalar denominator of the base-state
/// flow dx/dt = A(t) x / G(x, t).
struct BaseFlowCoefficients {
    Mat3 A;
    double G = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec3> positions;
    std::vector<double> radii;

    size_t size() const { return times.size(); }
};

/// Norm history of the linearized deviation vector at uniform sampling
/// interval tau. `norms` carries the renormalization factors folded back in;
/// `log_norms` is the same in log space (exact bookkeeping).
struct DeviationLog {
    double tau = 0.0;
    double t0 = 0.0;
    std::vector<double> norms;
    std::vector<double> log_norms;
    struct RenormEvent {
        double t;
        double factor;
    };
    std::vector<RenormEvent> renorm_events;
};

/// Envelope-normalized |Psi|^2; the node-proximity measure gated by node_guard.
double node_proximity(const Superposition& state, const PhasePoint& p);

/// Guidance velocity (hbar/m_k) Im(grad Psi / Psi). Throws NearNodeError when
/// the proximity measure falls below eps_g.
Vec3 bohmian_velocity(const Superposition& state, const PhasePoint& p, double eps_g = 1e-12);

/// A(t) and G for the base state (paper units m_k = hbar = 1 required).
BaseFlowCoefficients base_flow_coefficients(const Vec3& x, double t,
                                            const OscillatorConfig& config = {});

/// Closed-form base-state velocity A(t) x / G. Same NearNode contract, with
/// the gate applied to G itself.
Vec3 closed_form_velocity(const PhasePoint& p, const OscillatorConfig& config = {},
                          double eps_g = 1e-12);

/// Spatial Jacobian dv_i/dx_j of the guidance velocity, from analytic second
/// derivatives of Psi.
Mat3 velocity_jacobian(const Superposition& state, const PhasePoint& p, double eps_g = 1e-12);

Trajectory integrate(const Superposition& state, const Vec3& x0, double t0, double t1,
                     const IntegratorSettings& settings = {});

std::pair<Trajectory, DeviationLog> integrate_with_deviation(const Superposition& state,
                                                             const Vec3& x0, const Vec3& dx0,
                                                             double t0, double t1, double tau,
                                                             const IntegratorSettings& settings = {});

}  // namespace bohmflow
