#include "bohmflow/chaos.hpp"

#include <algorithm>
#include <cmath>

#include "bohmflow/errors.hpp"

namespace bohmflow {

StretchingSeries stretching_series(const std::vector<double>& xi, double tau, double t0) {
    if (!(tau > 0.0)) throw PreconditionError("stretching_series: tau must be positive");
    if (xi.size() < 2) throw PreconditionError("stretching_series: need at least two samples");
    StretchingSeries s;
    s.tau = tau;
    s.t0 = t0;
    s.values.reserve(xi.size() - 1);
    for (size_t k = 0; k + 1 < xi.size(); ++k) {
        if (!(xi[k] > 0.0) || !(xi[k + 1] > 0.0))
            throw NonPositiveDeviationError("stretching_series: deviation norms must be positive");
        s.values.push_back(std::log(xi[k + 1] / xi[k]));
    }
    return s;
}

StretchingSeries stretching_series(const DeviationLog& log) {
    if (log.log_norms.size() < 2)
        throw PreconditionError("stretching_series: need at least two samples");
    StretchingSeries s;
    s.tau = log.tau;
    s.t0 = log.t0;
    s.values.reserve(log.log_norms.size() - 1);
    for (size_t k = 0; k + 1 < log.log_norms.size(); ++k)
        s.values.push_back(log.log_norms[k + 1] - log.log_norms[k]);
    return s;
}

LcnSeries finite_time_lcn(const StretchingSeries& s) {
    if (s.values.empty()) throw PreconditionError("finite_time_lcn: empty series");
    LcnSeries out;
    out.times.reserve(s.values.size());
    out.chi.reserve(s.values.size());
    double sum = 0.0;
    for (size_t k = 0; k < s.values.size(); ++k) {
        sum += s.values[k];
        const double kt = (k + 1) * s.tau;
        out.times.push_back(s.t0 + kt);
        out.chi.push_back(sum / kt);
    }
    return out;
}

std::vector<double> cumulative_stretching(const StretchingSeries& s) {
    std::vector<double> out;
    out.reserve(s.values.size());
    double sum = 0.0;
    for (const double a : s.values) {
        sum += a;
        out.push_back(sum);
    }
    return out;
}

namespace {

double median_abs(std::vector<double>& scratch) {
    const size_t n = scratch.size();
    auto mid = scratch.begin() + n / 2;
    std::nth_element(scratch.begin(), mid, scratch.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(scratch.begin(), mid));
}

}  // namespace

std::vector<ScatteringEvent> detect_scattering(const StretchingSeries& s,
                                               const std::vector<double>& distance,
                                               double background_window, double jump_factor) {
    if (distance.size() != s.values.size())
        throw PreconditionError("detect_scattering: distance series must align with stretching samples");
    if (!(background_window > 0.0) || !(jump_factor > 0.0))
        throw PreconditionError("detect_scattering: window and factor must be positive");

    const auto& a = s.values;
    const size_t n = a.size();
    const long window = std::max<long>(1, std::lround(background_window / s.tau));
    const long gap = std::max<long>(1, window / 4);
    constexpr long kMinBackground = 10;

    std::vector<bool> flagged(n, false);
    std::vector<double> scratch;
    for (size_t k = 0; k < n; ++k) {
        const long hi = static_cast<long>(k) - gap;
        const long lo = std::max<long>(0, hi - window);
        if (hi - lo < kMinBackground) continue;
        scratch.assign(a.begin() + lo, a.begin() + hi);
        for (double& v : scratch) v = std::abs(v);
        const double background = median_abs(scratch);
        flagged[k] = a[k] > jump_factor * background;
    }

    std::vector<ScatteringEvent> events;
    const long search = window;  // distance-minimum search half-width, in samples
    size_t k = 0;
    while (k < n) {
        if (!flagged[k]) {
            ++k;
            continue;
        }
        size_t end = k;
        while (end + 1 < n && flagged[end + 1]) ++end;

        ScatteringEvent ev;
        ev.k_begin = k;
        ev.k_end = end;
        size_t peak = k;
        for (size_t i = k; i <= end; ++i)
            if (a[i] > a[peak]) peak = i;
        ev.peak_a = a[peak];
        ev.t_jump = s.time_at(peak);

        const size_t lo = peak > static_cast<size_t>(search) ? peak - search : 0;
        const size_t hi = std::min(n - 1, peak + search);
        size_t dmin = lo;
        for (size_t i = lo; i <= hi; ++i)
            if (distance[i] < distance[dmin]) dmin = i;
        ev.min_distance = distance[dmin];
        ev.t_min_distance = s.time_at(dmin);
        ev.alignment = std::abs(ev.t_jump - ev.t_min_distance);

        events.push_back(ev);
        k = end + 1;
    }
    return events;
}

}  // namespace bohmflow
