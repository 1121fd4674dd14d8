#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohmflow/errors.hpp"
#include "bohmflow/oscillator.hpp"
#include "bohmflow/statefile.hpp"

using namespace bohmflow;

namespace {

// central finite differences of the wavefunction value, the test-side oracle
// for the analytic gradient
CVec3 fd_gradient(const Superposition& state, const Vec3& x, double t, double h = 1e-6) {
    CVec3 g;
    for (int k = 0; k < 3; ++k) {
        Vec3 xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (state.amplitude(xp, t).value - state.amplitude(xm, t).value) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("hermite recurrence low orders") {
    CHECK(hermite_eval(0, 0.7) == 1.0);
    CHECK(hermite_eval(1, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hermite_eval(3, 1.0) == doctest::Approx(-4.0).epsilon(1e-14));
    // spot checks against the closed forms H_2 = 4x^2-2, H_4 = 16x^4-48x^2+12
    for (double x : {-1.3, 0.2, 2.5}) {
        CHECK(hermite_eval(2, x) == doctest::Approx(4 * x * x - 2).epsilon(1e-13));
        CHECK(hermite_eval(4, x) ==
              doctest::Approx(16 * std::pow(x, 4) - 48 * x * x + 12).epsilon(1e-13));
    }
}

TEST_CASE("eigenstate amplitude values and parity") {
    OscillatorConfig cfg;
    CHECK(eigenstate_amplitude(cfg, {1, 0, 0}, {0.0, 0.3, -1.0}) == 0.0);

    const double expected = std::pow(std::sqrt(6.0) / std::pow(std::numbers::pi, 3), 0.25);
    CHECK(eigenstate_amplitude(cfg, {0, 0, 0}, Vec3::Zero()) ==
          doctest::Approx(expected).epsilon(1e-14));

    // parity: sign flips under x_k -> -x_k exactly when n_k is odd
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> box(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Mode m{rep % 3, (rep / 3) % 2, rep % 2};
        const Vec3 x(box(rng), box(rng), box(rng));
        for (int k = 0; k < 3; ++k) {
            Vec3 xf = x;
            xf[k] = -xf[k];
            const double a = eigenstate_amplitude(cfg, m, x);
            const double b = eigenstate_amplitude(cfg, m, xf);
            const double sign = m[k] % 2 == 1 ? -1.0 : 1.0;
            CHECK(b == doctest::Approx(sign * a).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(eigenstate_amplitude(cfg, {kMaxModeOrder + 1, 0, 0}, Vec3::Zero()),
                    CapacityError);
}

TEST_CASE("mode energies") {
    OscillatorConfig cfg;
    const double e0 = 0.5 * (1.0 + std::sqrt(2.0) + std::sqrt(3.0));
    CHECK(mode_energy(cfg, {0, 0, 0}) == doctest::Approx(e0).epsilon(1e-15));
    CHECK(mode_energy(cfg, {1, 0, 0}) == doctest::Approx(e0 + 1.0).epsilon(1e-15));
    CHECK(mode_energy(cfg, {0, 0, 2}) ==
          doctest::Approx(0.5 * (1.0 + std::sqrt(2.0)) + 2.5 * std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("superposition construction guards") {
    OscillatorConfig cfg;
    const double a = 1.0 / std::sqrt(3.0);
    CHECK_THROWS_AS(Superposition(cfg, {{2.0 * a, {1, 0, 0}}, {a, {0, 1, 0}}}), PreconditionError);
    CHECK_THROWS_AS(Superposition(cfg, {{std::sqrt(0.5), {1, 0, 0}}, {std::sqrt(0.5), {1, 0, 0}}}),
                    PreconditionError);
    CHECK_NOTHROW(base_state());
    CHECK_NOTHROW(perturbed_state(0.05));
    CHECK_THROWS_AS(perturbed_state(0.6), PreconditionError);  // sqrt(1/3) = 0.577...
}

TEST_CASE("psi at the origin vanishes for the base state, gradient does not") {
    const auto state = base_state();
    for (double t : {0.0, 0.7, 3.4}) {
        const auto amp = psi(state, Vec3::Zero(), t);
        CHECK(std::abs(amp.value) < 1e-15);
        CHECK(amp.gradient.norm() > 0.1);
    }
}

TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> box(-5.0, 5.0);
    std::uniform_real_distribution<double> tbox(0.0, 10.0);
    for (const auto& state : {base_state(), perturbed_state(0.05)}) {
        double worst = 0.0;
        int used = 0;
        while (used < 100) {
            const Vec3 x(box(rng), box(rng), box(rng));
            const double t = tbox(rng);
            const auto amp = state.amplitude(x, t);
            if (amp.gradient.norm() < 1e-12) continue;  // avoid relative error blowups
            const CVec3 fd = fd_gradient(state, x, t);
            worst = std::max(worst, (amp.gradient - fd).norm() / amp.gradient.norm());
            ++used;
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("hessian matches finite differences of the gradient") {
    const auto state = perturbed_state(0.1);
    std::mt19937_64 rng(991);
    std::uniform_real_distribution<double> box(-2.0, 2.0);
    const double h = 1e-6;
    for (int rep = 0; rep < 25; ++rep) {
        const Vec3 x(box(rng), box(rng), box(rng));
        const double t = 0.3 * rep;
        const auto jet = state.amplitude_jet(x, t);
        CMat3 fd;
        for (int k = 0; k < 3; ++k) {
            Vec3 xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const CVec3 gp = state.amplitude(xp, t).gradient;
            const CVec3 gm = state.amplitude(xm, t).gradient;
            fd.col(k) = (gp - gm) / (2.0 * h);
        }
        const double scale = jet.hessian.norm();
        if (scale < 1e-10) continue;
        CHECK((jet.hessian - fd).norm() / scale < 1e-5);
    }
}

TEST_CASE("single eigenstate evolves by phase only") {
    OscillatorConfig cfg;
    const Superposition one(cfg, {{Complex{1.0, 0.0}, {1, 1, 0}}});
    const Vec3 x(0.4, -1.1, 0.8);
    const double m0 = std::abs(one.amplitude(x, 0.0).value);
    for (double t : {0.5, 2.0, 9.0})
        CHECK(std::abs(std::abs(one.amplitude(x, t).value) - m0) < 1e-12);
}

TEST_CASE("state spec file round-trips literals exactly") {
    const std::string text =
        "hbar 1\n"
        "masses 1 1 1\n"
        "omegas 1 1.4142135623730951 1.7320508075688772\n"
        "term 1 0 0 0.57735026918962584 0\n"
        "term 0 1 0 0.57735026918962584 0\n"
        "term 0 0 1 0.57735026918962584 0\n";
    const auto spec = StateSpec::parse(text);
    CHECK(spec.serialize() == text);
    const auto again = StateSpec::parse(spec.serialize());
    CHECK(again == spec);

    const auto state = spec.build();
    CHECK(state.terms().size() == 3);
    CHECK(state.config().omega[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-16));

    // describe() emits literals that parse back to the same doubles
    const auto described = StateSpec::describe(state);
    const auto rebuilt = described.build();
    CHECK(rebuilt.terms()[0].coefficient == state.terms()[0].coefficient);
    CHECK(rebuilt.config().omega == state.config().omega);
}

TEST_CASE("state spec rejects malformed input") {
    CHECK_THROWS_AS(StateSpec::parse("hbar 1\nmasses 1 1 1\n"), ConfigError);
    CHECK_THROWS_AS(StateSpec::parse("hbar 1\nhbar 2\nmasses 1 1 1\nomegas 1 1 1\nterm 0 0 0 1 0\n"),
                    ConfigError);
    CHECK_THROWS_AS(
        StateSpec::parse("hbar 1\nmasses 1 1 1\nomegas 1 1 1\nfrobnicate 3\nterm 0 0 0 1 0\n"),
        ConfigError);
    CHECK_THROWS_AS(
        StateSpec::parse("hbar 1\nmasses 1 1 1\nomegas 1 1 1\nterm 0 0 0 1x 0\n").build(),
        ConfigError);
}
