#include "bohmflow/oscillator.hpp"

#include <cmath>
#include <numbers>

namespace bohmflow {

void OscillatorConfig::validate() const {
    for (int k = 0; k < 3; ++k) {
        if (!(mass[k] > 0.0) || !(omega[k] > 0.0))
            throw ConfigError("oscillator masses and frequencies must be positive");
    }
    if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
}

double hermite_eval(int n, double x) {
    if (n < 0) throw PreconditionError("hermite_eval: negative order");
    double h0 = 1.0;
    if (n == 0) return h0;
    double h1 = 2.0 * x;
    for (int k = 1; k < n; ++k) {
        const double h2 = 2.0 * x * h1 - 2.0 * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

namespace {

// H_n, H_{n-1}, H_{n-2} in one pass (absent orders reported as 0).
struct HermiteTriple {
    double h, hm1, hm2;
};

HermiteTriple hermite_triple(int n, double x) {
    if (n == 0) return {1.0, 0.0, 0.0};
    if (n == 1) return {2.0 * x, 1.0, 0.0};
    double hm2 = 1.0, hm1 = 2.0 * x;
    double h = 0.0;
    for (int k = 1; k < n; ++k) {
        h = 2.0 * x * hm1 - 2.0 * k * hm2;
        if (k < n - 1) {
            hm2 = hm1;
            hm1 = h;
        }
    }
    return {h, hm1, hm2};
}

void check_mode(const Mode& mode) {
    for (int k = 0; k < 3; ++k) {
        if (mode[k] < 0) throw PreconditionError("mode quantum numbers must be non-negative");
        if (mode[k] > kMaxModeOrder)
            throw CapacityError("mode order " + std::to_string(mode[k]) + " exceeds supported maximum " +
                                std::to_string(kMaxModeOrder));
    }
}

double axis_norm(int n, double alpha) {
    double fact = 1.0;
    for (int k = 2; k <= n; ++k) fact *= k;
    return std::pow(alpha / std::numbers::pi, 0.25) / std::sqrt(std::exp2(n) * fact);
}

}  // namespace

double eigenstate_amplitude(const OscillatorConfig& config, const Mode& mode, const Vec3& x) {
    config.validate();
    check_mode(mode);
    double out = 1.0;
    for (int k = 0; k < 3; ++k) {
        const double alpha = config.mass[k] * config.omega[k] / config.hbar;
        const double y = std::sqrt(alpha) * x[k];
        out *= axis_norm(mode[k], alpha) * std::exp(-0.5 * y * y) * hermite_eval(mode[k], y);
    }
    return out;
}

double mode_energy(const OscillatorConfig& config, const Mode& mode) {
    config.validate();
    check_mode(mode);
    double e = 0.0;
    for (int k = 0; k < 3; ++k) e += (mode[k] + 0.5) * config.hbar * config.omega[k];
    return e;
}

Superposition::Superposition(OscillatorConfig config, std::vector<std::pair<Complex, Mode>> terms)
    : config_(std::move(config)) {
    config_.validate();
    if (terms.empty()) throw PreconditionError("superposition needs at least one term");

    double norm2 = 0.0;
    for (const auto& [a, mode] : terms) {
        check_mode(mode);
        norm2 += std::norm(a);
    }
    if (std::abs(norm2 - 1.0) > 1e-12)
        throw PreconditionError("superposition coefficients must satisfy sum |a|^2 = 1 (got " +
                                std::to_string(norm2) + ")");
    for (size_t i = 0; i < terms.size(); ++i)
        for (size_t j = i + 1; j < terms.size(); ++j)
            if (terms[i].second == terms[j].second)
                throw PreconditionError("superposition modes must be pairwise distinct");

    for (const auto& [a, mode] : terms) {
        const double e = mode_energy(config_, mode);
        terms_.push_back({a, mode, e});
        TermCache tc;
        tc.coefficient = a;
        tc.phase_rate = e / config_.hbar;
        for (int k = 0; k < 3; ++k) {
            const double alpha = config_.mass[k] * config_.omega[k] / config_.hbar;
            tc.axes[k] = {mode[k], std::sqrt(alpha), axis_norm(mode[k], alpha)};
        }
        cache_.push_back(tc);
    }
}

namespace {

struct AxisJet {
    double f, df, ddf;
};

// f   = N e^{-y^2/2} H_n(y)
// f'  = N sqrt(a) e^{-y^2/2} (2n H_{n-1} - y H_n)
// f'' = N a e^{-y^2/2} ((y^2-1) H_n - 4n y H_{n-1} + 4n(n-1) H_{n-2})
AxisJet axis_jet(int n, double sqrt_alpha, double norm, double x) {
    const double y = sqrt_alpha * x;
    const auto [h, hm1, hm2] = hermite_triple(n, y);
    const double g = norm * std::exp(-0.5 * y * y);
    AxisJet out;
    out.f = g * h;
    out.df = sqrt_alpha * g * (2.0 * n * hm1 - y * h);
    out.ddf = sqrt_alpha * sqrt_alpha * g *
              ((y * y - 1.0) * h - 4.0 * n * y * hm1 + 4.0 * n * (n - 1.0) * hm2);
    return out;
}

}  // namespace

ComplexAmplitude Superposition::amplitude(const Vec3& x, double t) const {
    ComplexAmplitude out{Complex{0.0, 0.0}, CVec3::Zero()};
    for (const auto& tc : cache_) {
        std::array<AxisJet, 3> j;
        for (int k = 0; k < 3; ++k)
            j[k] = axis_jet(tc.axes[k].n, tc.axes[k].sqrt_alpha, tc.axes[k].norm, x[k]);
        const Complex w = tc.coefficient * std::polar(1.0, -tc.phase_rate * t);
        out.value += w * (j[0].f * j[1].f * j[2].f);
        out.gradient[0] += w * (j[0].df * j[1].f * j[2].f);
        out.gradient[1] += w * (j[0].f * j[1].df * j[2].f);
        out.gradient[2] += w * (j[0].f * j[1].f * j[2].df);
    }
    return out;
}

ComplexAmplitudeJet Superposition::amplitude_jet(const Vec3& x, double t) const {
    ComplexAmplitudeJet out{Complex{0.0, 0.0}, CVec3::Zero(), CMat3::Zero()};
    for (const auto& tc : cache_) {
        std::array<AxisJet, 3> j;
        for (int k = 0; k < 3; ++k)
            j[k] = axis_jet(tc.axes[k].n, tc.axes[k].sqrt_alpha, tc.axes[k].norm, x[k]);
        const Complex w = tc.coefficient * std::polar(1.0, -tc.phase_rate * t);
        out.value += w * (j[0].f * j[1].f * j[2].f);
        for (int k = 0; k < 3; ++k) {
            double g = j[k].df;
            for (int m = 0; m < 3; ++m)
                if (m != k) g *= j[m].f;
            out.gradient[k] += w * g;
        }
        for (int k = 0; k < 3; ++k) {
            for (int l = k; l < 3; ++l) {
                double h;
                if (k == l) {
                    h = j[k].ddf;
                    for (int m = 0; m < 3; ++m)
                        if (m != k) h *= j[m].f;
                } else {
                    h = j[k].df * j[l].df;
                    for (int m = 0; m < 3; ++m)
                        if (m != k && m != l) h *= j[m].f;
                }
                out.hessian(k, l) += w * h;
                if (k != l) out.hessian(l, k) += w * h;
            }
        }
    }
    return out;
}

ComplexAmplitude psi(const Superposition& state, const Vec3& x, double t) {
    return state.amplitude(x, t);
}

double envelope_density(const OscillatorConfig& config, const Vec3& x) {
    double out = 1.0;
    for (int k = 0; k < 3; ++k) {
        const double alpha = config.mass[k] * config.omega[k] / config.hbar;
        out *= std::sqrt(alpha / std::numbers::pi) * std::exp(-alpha * x[k] * x[k]);
    }
    return out;
}

Superposition base_state(const OscillatorConfig& config) {
    const double a = 1.0 / std::sqrt(3.0);
    return Superposition(config, {{a, {1, 0, 0}}, {a, {0, 1, 0}}, {a, {0, 0, 1}}});
}

Superposition perturbed_state(double a4, const OscillatorConfig& config) {
    const double rest = 1.0 - 2.0 / 3.0 - a4 * a4;
    if (rest < 0.0)
        throw PreconditionError("perturbed_state: |a4| too large, (0,0,1) coefficient would be imaginary");
    const double a = 1.0 / std::sqrt(3.0);
    return Superposition(config, {{a, {1, 0, 0}}, {a, {0, 1, 0}}, {std::sqrt(rest), {0, 0, 1}}, {a4, {0, 0, 2}}});
}

}  // namespace bohmflow
