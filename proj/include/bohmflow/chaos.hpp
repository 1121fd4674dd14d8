#pragma once

#include <cstddef>
#include <vector>

#include "bohmflow/guidance.hpp"

namespace bohmflow {

/// Per-sample logarithmic growth rates a_k = ln(xi_{k+1}/xi_k) of a deviation
/// vector sampled at interval tau. values[k] covers (t0 + k tau, t0 + (k+1) tau].
struct StretchingSeries {
    double tau = 0.0;
    double t0 = 0.0;
    std::vector<double> values;

    double time_at(size_t k) const { return t0 + (k + 1) * tau; }
};

/// Finite-time Lyapunov series chi(k tau) = (1/(k tau)) sum_{i<=k} a_i.
struct LcnSeries {
    std::vector<double> times;
    std::vector<double> chi;
};

struct ScatteringEvent {
    double t_jump = 0.0;       // time of the peak stretching value
    double peak_a = 0.0;
    double min_distance = 0.0; // local structure-distance minimum near the jump
    double t_min_distance = 0.0;
    double alignment = 0.0;    // |t_jump - t_min_distance|
    size_t k_begin = 0, k_end = 0;  // inclusive index span of flagged samples
};

StretchingSeries stretching_series(const std::vector<double>& xi, double tau, double t0);

/// Exact log-space variant, immune to renormalization bookkeeping.
StretchingSeries stretching_series(const DeviationLog& log);

LcnSeries finite_time_lcn(const StretchingSeries& s);

std::vector<double> cumulative_stretching(const StretchingSeries& s);

/// Flags samples exceeding jump_factor times a rolling median background and
/// merges contiguous flags into events. The background window trails the
/// current sample by a quarter window so a broad jump does not inflate its
/// own background. `distance` must be aligned with the stretching samples.
std::vector<ScatteringEvent> detect_scattering(const StretchingSeries& s,
                                               const std::vector<double>& distance,
                                               double background_window = 1.0,
                                               double jump_factor = 10.0);

}  // namespace bohmflow
