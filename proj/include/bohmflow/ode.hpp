#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace bohmflow::ode {

template <int N>
using StateVec = Eigen::Matrix<double, N, 1>;

// Dormand-Prince 5(4) tableau (Hairer, Norsett & Wanner, DOPRI5).
namespace dp {
inline constexpr double a21 = 0.2, a31 = 3.0 / 40.0, a32 = 9.0 / 40.0, a41 = 44.0 / 45.0,
                        a42 = -56.0 / 15.0, a43 = 32.0 / 9.0, a51 = 19372.0 / 6561.0,
                        a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0,
                        a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0, a71 = 35.0 / 384.0,
                        a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                        a76 = 11.0 / 84.0;
inline constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

/// Quartic interpolant over one accepted step.
template <int N>
struct DenseSegment {
    double t0 = 0.0, h = 0.0;
    StateVec<N> r1, r2, r3, r4, r5;

    StateVec<N> eval(double t) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
};

template <int N>
struct StepAttempt {
    StateVec<N> y_new;
    StateVec<N> k_last;  // FSAL derivative at (t+h, y_new)
    double error = 0.0;  // weighted rms over the first err_dims components
    DenseSegment<N> dense;
};

/// One trial step from (t, y) with derivative k1 already evaluated there.
/// rhs(t, y, dydt) may throw; the caller handles rejection/shrinking.
template <int N, class RHS>
StepAttempt<N> dopri5_attempt(RHS&& rhs, double t, const StateVec<N>& y, const StateVec<N>& k1,
                              double h, double abs_tol, double rel_tol, int err_dims = N) {
    using V = StateVec<N>;
    using namespace dp;
    V k2, k3, k4, k5, k6, k7, tmp;

    tmp = y + h * (a21 * k1);
    rhs(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    V y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(t + h, y_new, k7);

    const V err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (int i = 0; i < err_dims; ++i) {
        const double sc = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        const double r = err_vec[i] / sc;
        err += r * r;
    }
    err = std::sqrt(err / err_dims);

    StepAttempt<N> out;
    out.y_new = y_new;
    out.k_last = k7;
    out.error = err;
    const V ydiff = y_new - y;
    const V bspl = h * k1 - ydiff;
    out.dense.t0 = t;
    out.dense.h = h;
    out.dense.r1 = y;
    out.dense.r2 = ydiff;
    out.dense.r3 = bspl;
    out.dense.r4 = ydiff - h * k7 - bspl;
    out.dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    return out;
}

/// PI step-size controller for a fifth-order pair.
class PiController {
  public:
    double propose(double h, double err, bool& accept) {
        accept = err <= 1.0;
        const double expo = 0.2 - kBeta * 0.75;
        const double fac11 = std::pow(std::max(err, 1e-32), expo);
        if (accept) {
            double fac = fac11 / std::pow(facold_, kBeta);
            fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
            double h_new = h / fac;
            if (rejected_) h_new = std::min(h_new, h);
            facold_ = std::max(err, 1e-4);
            rejected_ = false;
            return h_new;
        }
        rejected_ = true;
        return h / std::min(1.0 / kFacMin, fac11 / kSafe);
    }

  private:
    static constexpr double kSafe = 0.9, kFacMin = 0.2, kFacMax = 10.0, kBeta = 0.04;
    double facold_ = 1e-4;
    bool rejected_ = false;
};

}  // namespace bohmflow::ode
