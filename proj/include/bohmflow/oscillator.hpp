#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bohmflow/errors.hpp"
#include "bohmflow/linalg.hpp"

namespace bohmflow {

/// Highest quantum number for which the normalization factors are evaluated in
/// closed form. Larger orders are rejected rather than returned inaccurate.
inline constexpr int kMaxModeOrder = 30;

/// Masses, angular frequencies and hbar of the 3-d anisotropic oscillator.
/// The default instance is the unit system m_k = hbar = 1, omega = (1, sqrt 2, sqrt 3).
struct OscillatorConfig {
    Vec3 mass{1.0, 1.0, 1.0};
    Vec3 omega{1.0, 1.4142135623730951, 1.7320508075688772};
    double hbar = 1.0;

    void validate() const;
    bool operator==(const OscillatorConfig&) const = default;
};

struct Mode {
    int n1 = 0, n2 = 0, n3 = 0;

    int operator[](int k) const { return k == 0 ? n1 : (k == 1 ? n2 : n3); }
    bool operator==(const Mode&) const = default;
};

struct SuperpositionTerm {
    Complex coefficient;
    Mode mode;
    double energy = 0.0;  // cached sum_k (n_k + 1/2) hbar omega_k
};

/// Value and analytic spatial gradient of the wavefunction at a point.
struct ComplexAmplitude {
    Complex value;
    CVec3 gradient;
};

/// Adds the second derivatives, used by the variational equations.
struct ComplexAmplitudeJet {
    Complex value;
    CVec3 gradient;
    CMat3 hessian;
};

/// Physicists' Hermite polynomial H_n(x) by upward recurrence.
double hermite_eval(int n, double x);

/// Normalized product eigenfunction of the 3-d oscillator (real-valued).
double eigenstate_amplitude(const OscillatorConfig& config, const Mode& mode, const Vec3& x);

double mode_energy(const OscillatorConfig& config, const Mode& mode);

/// A normalized finite superposition of oscillator eigenstates; the single
/// source of truth for Psi(x, t). Immutable after construction.
class Superposition {
  public:
    Superposition(OscillatorConfig config, std::vector<std::pair<Complex, Mode>> terms);

    const OscillatorConfig& config() const { return config_; }
    const std::vector<SuperpositionTerm>& terms() const { return terms_; }

    ComplexAmplitude amplitude(const Vec3& x, double t) const;
    ComplexAmplitudeJet amplitude_jet(const Vec3& x, double t) const;

  private:
    struct AxisFactors {
        int n;
        double sqrt_alpha;  // sqrt(m omega / hbar)
        double norm;        // (alpha/pi)^(1/4) / sqrt(2^n n!)
    };
    struct TermCache {
        Complex coefficient;
        double phase_rate;  // E / hbar
        std::array<AxisFactors, 3> axes;
    };

    OscillatorConfig config_;
    std::vector<SuperpositionTerm> terms_;
    std::vector<TermCache> cache_;
};

ComplexAmplitude psi(const Superposition& state, const Vec3& x, double t);

/// |Psi_000(x)|^2 for the given config: the Gaussian envelope used to
/// normalize node-proximity thresholds.
double envelope_density(const OscillatorConfig& config, const Vec3& x);

/// The equal-weight (1,0,0)+(0,1,0)+(0,0,1) state whose flow has the
/// closed-form equations of motion.
Superposition base_state(const OscillatorConfig& config = {});

/// Base state plus an a4 * (0,0,2) term, with the (0,0,1) coefficient
/// renormalized so the state stays unit-norm. Requires |a4| <= sqrt(1/3).
Superposition perturbed_state(double a4, const OscillatorConfig& config = {});

}  // namespace bohmflow
