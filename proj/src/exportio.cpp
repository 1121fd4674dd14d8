#include "bohmflow/exportio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bohmflow/errors.hpp"

namespace bohmflow {

std::string format_sig(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 14695981039346656037ull;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(std::string_view data) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t,x1,x2,x3,R\n";
    for (size_t i = 0; i < traj.size(); ++i) {
        out += format_sig(traj.times[i]);
        for (int k = 0; k < 3; ++k) {
            out += ',';
            out += format_sig(traj.positions[i][k]);
        }
        out += ',';
        out += format_sig(traj.radii[i]);
        out += '\n';
    }
    return out;
}

std::string deviation_csv(const DeviationLog& log) {
    std::string out = "t,xi,stretching_raw\n";
    for (size_t k = 0; k < log.norms.size(); ++k) {
        out += format_sig(log.t0 + k * log.tau);
        out += ',';
        out += format_sig(log.norms[k]);
        out += ',';
        out += format_sig(k == 0 ? 0.0 : log.log_norms[k] - log.log_norms[k - 1]);
        out += '\n';
    }
    return out;
}

std::string metrics_csv(const StretchingSeries& s, const std::vector<double>& cumulative,
                        const LcnSeries& lcn, const std::vector<double>& distance) {
    if (cumulative.size() != s.values.size() || lcn.chi.size() != s.values.size() ||
        distance.size() != s.values.size())
        throw PreconditionError("metrics_csv: series must be aligned");
    std::string out = "t,a,cumulative,chi,distance\n";
    for (size_t k = 0; k < s.values.size(); ++k) {
        out += format_sig(s.time_at(k));
        out += ',';
        out += format_sig(s.values[k]);
        out += ',';
        out += format_sig(cumulative[k]);
        out += ',';
        out += format_sig(lcn.chi[k]);
        out += ',';
        out += format_sig(distance[k]);
        out += '\n';
    }
    return out;
}

std::string manifold_csv(const ManifoldCurve& curve) {
    std::string out = "s,u,v\n";
    for (size_t i = 0; i < curve.points.size(); ++i) {
        out += format_sig(curve.s[i]);
        out += ',';
        out += format_sig(curve.points[i][0]);
        out += ',';
        out += format_sig(curve.points[i][1]);
        out += '\n';
    }
    return out;
}

void JsonWriter::comma() {
    if (!first_.empty()) {
        if (!first_.back() && !pending_key_) out_ += ',';
        first_.back() = false;
    }
}

JsonWriter& JsonWriter::begin_object() {
    comma();
    pending_key_ = false;
    out_ += '{';
    first_.push_back(true);
    return *this;
}

JsonWriter& JsonWriter::end_object() {
    out_ += '}';
    first_.pop_back();
    return *this;
}

JsonWriter& JsonWriter::begin_array() {
    comma();
    pending_key_ = false;
    out_ += '[';
    first_.push_back(true);
    return *this;
}

JsonWriter& JsonWriter::end_array() {
    out_ += ']';
    first_.pop_back();
    return *this;
}

JsonWriter& JsonWriter::key(std::string_view k) {
    comma();
    out_ += '"';
    out_ += k;
    out_ += "\":";
    pending_key_ = true;
    return *this;
}

JsonWriter& JsonWriter::value(double v) {
    comma();
    pending_key_ = false;
    if (std::isfinite(v))
        out_ += format_sig(v);
    else
        out_ += "null";
    return *this;
}

JsonWriter& JsonWriter::value(long v) {
    comma();
    pending_key_ = false;
    out_ += std::to_string(v);
    return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
    comma();
    pending_key_ = false;
    out_ += '"';
    for (const char c : v) {
        if (c == '"' || c == '\\') out_ += '\\';
        out_ += c;
    }
    out_ += '"';
    return *this;
}

JsonWriter& JsonWriter::value_raw(std::string_view v) {
    comma();
    pending_key_ = false;
    out_ += v;
    return *this;
}

std::string events_json(const std::vector<ScatteringEvent>& events) {
    JsonWriter w;
    w.begin_array();
    for (const auto& ev : events) {
        w.begin_object();
        w.key("t_jump").value(ev.t_jump);
        w.key("peak_a").value(ev.peak_a);
        w.key("min_distance").value(ev.min_distance);
        w.key("t_min_distance").value(ev.t_min_distance);
        w.key("alignment").value(ev.alignment);
        w.key("k_begin").value(static_cast<long>(ev.k_begin));
        w.key("k_end").value(static_cast<long>(ev.k_end));
        w.end_object();
    }
    w.end_array();
    return w.str() + "\n";
}

namespace {

void write_vec3(JsonWriter& w, const Vec3& v) {
    w.begin_array();
    w.value(v[0]);
    w.value(v[1]);
    w.value(v[2]);
    w.end_array();
}

}  // namespace

std::string structure_json(const NodalXStructure& st) {
    JsonWriter w;
    w.begin_object();
    w.key("t").value(st.t);
    w.key("layers").begin_array();
    for (const auto& layer : st.layers) {
        w.begin_object();
        w.key("R").value(layer.R);
        w.key("node_xyz");
        write_vec3(w, layer.node.position);
        w.key("node_velocity");
        write_vec3(w, layer.node.velocity);
        w.key("C").value(layer.node.C);
        if (layer.xpoint) {
            const auto& xp = *layer.xpoint;
            w.key("xpoint_uv").begin_array();
            w.value(xp.u);
            w.value(xp.v);
            w.end_array();
            w.key("xpoint_xyz");
            write_vec3(w, layer.xpoint_lab);
            w.key("eigenvalues").begin_array();
            w.value(xp.lambda1);
            w.value(xp.lambda2);
            w.end_array();
            w.key("slopes").begin_array();
            w.value(xp.slope1);
            w.value(xp.slope2);
            w.end_array();
        } else {
            w.key("degenerate").value(layer.degeneracy);
        }
        w.end_object();
    }
    w.end_array();
    w.end_object();
    return w.str() + "\n";
}

std::string svg_plot(const std::vector<SvgSeries>& series, int width, int height) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = ymin = 0.0;
        xmax = ymax = 1.0;
    }
    const double dx = xmax - xmin > 0 ? xmax - xmin : 1.0;
    const double dy = ymax - ymin > 0 ? ymax - ymin : 1.0;
    const double margin = 20.0;
    auto px = [&](double x) { return margin + (x - xmin) / dx * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - (y - ymin) / dy * (height - 2 * margin); };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& s : series) {
        if (s.markers_only) {
            for (const auto& [x, y] : s.points)
                out += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"3\" fill=\"" +
                       s.color + "\"/>\n";
        } else {
            out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1\" points=\"";
            for (const auto& [x, y] : s.points) out += fmt(px(x)) + "," + fmt(py(y)) + " ";
            out += "\"/>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

void write_file(const std::string& path, std::string_view content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace bohmflow
