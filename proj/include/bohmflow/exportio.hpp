#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bohmflow/chaos.hpp"
#include "bohmflow/guidance.hpp"
#include "bohmflow/nodal.hpp"

namespace bohmflow {

/// Fixed 17-significant-digit decimal formatting; round-trips doubles exactly
/// and keeps emitted files byte-reproducible.
std::string format_sig(double x);

uint64_t fnv1a64(std::string_view data);
std::string digest_hex(std::string_view data);

std::string trajectory_csv(const Trajectory& traj);
std::string deviation_csv(const DeviationLog& log);
std::string metrics_csv(const StretchingSeries& s, const std::vector<double>& cumulative,
                        const LcnSeries& lcn, const std::vector<double>& distance);
std::string manifold_csv(const ManifoldCurve& curve);
std::string events_json(const std::vector<ScatteringEvent>& events);
std::string structure_json(const NodalXStructure& st);

/// Minimal deterministic JSON emitter; all numbers go through format_sig.
class JsonWriter {
  public:
    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();
    JsonWriter& key(std::string_view k);
    JsonWriter& value(double v);
    JsonWriter& value(long v);
    JsonWriter& value(std::string_view v);
    JsonWriter& value_raw(std::string_view v);
    std::string str() const { return out_; }

  private:
    void comma();
    std::string out_;
    std::vector<bool> first_;  // per nesting level
    bool pending_key_ = false;
};

/// Polyline preview graphic (SVG): autoscaled axes, one path per series.
struct SvgSeries {
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
    bool markers_only = false;
};
std::string svg_plot(const std::vector<SvgSeries>& series, int width = 640, int height = 480);

void write_file(const std::string& path, std::string_view content);

}  // namespace bohmflow
