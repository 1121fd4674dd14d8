#include "bohmflow/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "bohmflow/chaos.hpp"
#include "bohmflow/errors.hpp"
#include "bohmflow/exportio.hpp"
#include "bohmflow/nodal.hpp"
#include "bohmflow/statefile.hpp"
#include "bohmflow/version.hpp"

namespace bohmflow {

namespace {

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value '" + v + "' for key '" + key + "'");
    }
}

long parse_long(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value '" + v + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean value '" + v + "' for key '" + key + "'");
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(v);
    for (std::string tok; in >> tok;) out.push_back(parse_double(tok, key));
    return out;
}

Vec3 parse_vec3(const std::string& v, const std::string& key) {
    const auto list = parse_list(v, key);
    if (list.size() != 3) throw ConfigError("config: key '" + key + "' expects 3 numbers");
    return Vec3(list[0], list[1], list[2]);
}

std::string render_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_sig(v[i]);
    }
    return out;
}

std::string render_vec3(const Vec3& v) {
    return format_sig(v[0]) + " " + format_sig(v[1]) + " " + format_sig(v[2]);
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "experiment") c.experiment = value;
    else if (key == "out") c.out_dir = value;
    else if (key == "state") c.state = value;
    else if (key == "t0") c.t0 = parse_double(value, key);
    else if (key == "t1") c.t1 = parse_double(value, key);
    else if (key == "tau") c.tau = parse_double(value, key);
    else if (key == "dt_out") c.dt_out = parse_double(value, key);
    else if (key == "x0") c.x0 = parse_vec3(value, key);
    else if (key == "dx0") c.dx0 = parse_vec3(value, key);
    else if (key == "R") c.R = parse_double(value, key);
    else if (key == "R_grid") c.R_grid = parse_list(value, key);
    else if (key == "d_grid") c.d_grid = parse_list(value, key);
    else if (key == "a4_grid") c.a4_grid = parse_list(value, key);
    else if (key == "d_offset") c.d_offset = parse_double(value, key);
    else if (key == "seed") c.seed = parse_double(value, key);
    else if (key == "hopf_dt") c.hopf_dt = parse_double(value, key);
    else if (key == "detect_window") c.detect_window = parse_double(value, key);
    else if (key == "detect_factor") c.detect_factor = parse_double(value, key);
    else if (key == "with_manifolds") c.with_manifolds = parse_bool(value, key);
    else if (key == "streamlines") c.streamlines = parse_long(value, key);
    else if (key == "ordered_start") c.ordered_start = parse_bool(value, key);
    else if (key == "rel_tol") c.integrator.rel_tol = parse_double(value, key);
    else if (key == "abs_tol") c.integrator.abs_tol = parse_double(value, key);
    else if (key == "max_step") c.integrator.max_step = parse_double(value, key);
    else if (key == "min_step") c.integrator.min_step = parse_double(value, key);
    else if (key == "node_guard") c.integrator.node_guard = parse_double(value, key);
    else if (key == "node_step_fraction") c.integrator.node_step_fraction = parse_double(value, key);
    else if (key == "renorm_threshold") c.integrator.deviation_renorm_threshold = parse_double(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::string value;
        std::getline(ls, value);
        const auto b = value.find_first_not_of(" \t");
        value = b == std::string::npos ? "" : value.substr(b);
        const auto e = value.find_last_not_of(" \t\r");
        if (e != std::string::npos) value.erase(e + 1);
        if (value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key + "' has no value");
        for (const auto& [k, v] : out)
            if (k == key) throw ConfigError("config: duplicate key '" + key + "'");
        out.emplace_back(key, value);
    }
    return out;
}

}  // namespace

std::string ExperimentConfig::canonical_text() const {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"R", format_sig(R)},
        {"R_grid", render_list(R_grid)},
        {"a4_grid", render_list(a4_grid)},
        {"abs_tol", format_sig(integrator.abs_tol)},
        {"d_grid", render_list(d_grid)},
        {"d_offset", format_sig(d_offset)},
        {"detect_factor", format_sig(detect_factor)},
        {"detect_window", format_sig(detect_window)},
        {"dt_out", format_sig(dt_out)},
        {"dx0", render_vec3(dx0)},
        {"experiment", experiment},
        {"hopf_dt", format_sig(hopf_dt)},
        {"max_step", format_sig(integrator.max_step)},
        {"min_step", format_sig(integrator.min_step)},
        {"node_guard", format_sig(integrator.node_guard)},
        {"node_step_fraction", format_sig(integrator.node_step_fraction)},
        {"ordered_start", ordered_start ? "true" : "false"},
        {"rel_tol", format_sig(integrator.rel_tol)},
        {"renorm_threshold", format_sig(integrator.deviation_renorm_threshold)},
        {"seed", format_sig(seed)},
        {"state", state},
        {"streamlines", std::to_string(streamlines)},
        {"t0", format_sig(t0)},
        {"t1", format_sig(t1)},
        {"tau", format_sig(tau)},
        {"with_manifolds", with_manifolds ? "true" : "false"},
        {"x0", render_vec3(x0)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog = {
        {"nodal-trajectory", "1a", "path of the nodal point on a fixed sphere"},
        {"nodal-kinematics", "1b", "nodal point speed and acceleration vs time"},
        {"complex-portrait", "2", "X-point manifolds and streamlines in the comoving plane"},
        {"hopf-transition", "3", "stability scan of the node-approaching manifold branch"},
        {"trajectory-vs-node", "4a", "trajectory started near the moving nodal point"},
        {"trajectory-families", "4b", "trajectory families over sphere radii and node offsets"},
        {"scattering", "5", "stretching numbers, LCN and structure distance of one trajectory"},
        {"foliation", "6", "layered nodal point / X-point structure at fixed time"},
        {"perturbed-diffusion", "7abc", "radial diffusion of a perturbed-state trajectory"},
        {"power-law", "7d", "max radial jump vs perturbation amplitude with power-law fit"},
    };
    return catalog;
}

std::map<std::string, std::string> experiment_defaults(const std::string& name) {
    std::map<std::string, std::string> d;
    auto base_integrator = [&] {
        d["rel_tol"] = "1e-10";
        d["abs_tol"] = "1e-10";
        d["max_step"] = "0.25";
        d["min_step"] = "1e-12";
        d["node_guard"] = "1e-12";
        d["node_step_fraction"] = "0.1";
        d["renorm_threshold"] = "1e6";
    };
    base_integrator();
    d["state"] = "base";
    if (name == "nodal-trajectory") {
        d["R"] = "4.23";
        d["t0"] = "1";
        d["t1"] = "250";
        d["dt_out"] = "0.01";
    } else if (name == "nodal-kinematics") {
        d["R"] = "4.23";
        d["t0"] = "1";
        d["t1"] = "10";
        d["dt_out"] = "0.001";
    } else if (name == "complex-portrait") {
        d["R"] = "4.23";
        d["t0"] = "4";
        d["seed"] = "1e-5";
        d["streamlines"] = "8";
    } else if (name == "hopf-transition") {
        d["R"] = "5";
        d["t0"] = "9.4";
        d["t1"] = "9.7";
        d["hopf_dt"] = "0.02";
    } else if (name == "trajectory-vs-node") {
        d["R"] = "4.23";
        d["t0"] = "1";
        d["t1"] = "100";
        d["d_offset"] = "0.1";
        d["dt_out"] = "0.01";
    } else if (name == "trajectory-families") {
        d["t0"] = "1";
        d["t1"] = "10";
        d["R"] = "4.23";
        d["R_grid"] = "0.2 1.2 2.2 3.2 4.2";
        d["d_grid"] = "0.1 0.25 0.3";
        d["d_offset"] = "0.1";
        d["dt_out"] = "0.01";
    } else if (name == "scattering") {
        d["x0"] = "-1.5 2 -2";
        d["dx0"] = "0 0 1";
        d["t0"] = "0";
        d["t1"] = "100";
        d["tau"] = "0.01";
        d["detect_window"] = "1";
        d["detect_factor"] = "10";
        d["ordered_start"] = "false";
        d["R"] = "4.23";
    } else if (name == "foliation") {
        d["t0"] = "4";
        d["R_grid"] = "0.5 1 1.5 2 2.5 3 3.5 4 4.5 5";
        d["with_manifolds"] = "true";
    } else if (name == "perturbed-diffusion") {
        d["state"] = "perturbed:0.05";
        d["x0"] = "2.2194 -0.4062 2.3109";
        d["dx0"] = "0 0 1";
        d["t0"] = "4";
        d["t1"] = "100";
        d["tau"] = "0.01";
    } else if (name == "power-law") {
        d["a4_grid"] = "0.025 0.05 0.1 0.15 0.2";
        d["x0"] = "2.2194 -0.4062 2.3109";
        d["t0"] = "4";
        d["t1"] = "100";
        d["dt_out"] = "0.01";
    } else {
        throw UnknownExperimentError("unknown experiment '" + name + "'");
    }
    return d;
}

ExperimentConfig resolve_config(const std::string& experiment, const std::string& config_text,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    for (const auto& [k, v] : experiment_defaults(experiment)) apply_key(cfg, k, v);
    for (const auto& [k, v] : parse_kv_text(config_text)) {
        if (k == "experiment" && v != experiment)
            throw ConfigError("config names experiment '" + v + "' but '" + experiment + "' was requested");
        apply_key(cfg, k, v);
    }
    for (const auto& [k, v] : overrides) apply_key(cfg, k, v);
    cfg.integrator.output_interval = cfg.dt_out;
    return cfg;
}

Superposition resolve_state(const std::string& spec) {
    if (spec == "base") return base_state();
    if (spec.rfind("perturbed:", 0) == 0)
        return perturbed_state(parse_double(spec.substr(10), "state"));
    return StateSpec::parse_file(spec).build();
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw PreconditionError("fit_power_law: need at least two points");
    for (const auto& [x, y] : points)
        if (!(x > 0.0) || !(y > 0.0))
            throw PreconditionError("fit_power_law: coordinates must be positive");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(points.size());
    for (const auto& [x, y] : points) {
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-30) throw DegenerateFitError("fit_power_law: all abscissae equal");
    PowerLawFit fit;
    fit.exponent = (n * sxy - sx * sy) / det;
    const double intercept = (sy - fit.exponent * sx) / n;
    fit.prefactor = std::exp(intercept);
    double ss = 0.0;
    for (const auto& [x, y] : points) {
        const double r = std::log(y) - (intercept + fit.exponent * std::log(x));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

double delta_r_max(const Trajectory& traj) {
    if (traj.size() == 0) throw PreconditionError("delta_r_max: empty trajectory");
    const auto [lo, hi] = std::minmax_element(traj.radii.begin(), traj.radii.end());
    return *hi - *lo;
}

namespace {

class OutputCollector {
  public:
    void add(const std::string& name, std::string content) {
        files_.emplace_back(name, std::move(content));
    }
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  private:
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string label_of(ComplexStability s) {
    return s == ComplexStability::Stable ? "stable" : "unstable";
}

std::string compact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

/// Start point at distance d from the node, in the sphere tangent plane,
/// perpendicular to the node velocity, signed toward positive u'.
Vec3 offset_from_node(double t, double R, double d) {
    const auto pf = planar_flow(t, R);
    Vec2 perp(-pf.V_v, pf.V_u);
    if (perp.norm() == 0.0) perp = Vec2(1.0, 0.0);
    perp.normalize();
    if (perp[0] < 0.0 || (perp[0] == 0.0 && perp[1] < 0.0)) perp = -perp;
    return pf.node.position + d * (pf.frame.S.transpose() * Vec3(perp[0], perp[1], 0.0));
}

/// Start far from the nodal lines: on the sphere R, perpendicular to the
/// nodal direction at t0.
Vec3 ordered_start_point(double t, double R) {
    const Vec3 n = nodal_direction(t);
    Vec3 c = n.cross(Vec3::UnitZ());
    if (c.norm() < 1e-6) c = n.cross(Vec3::UnitX());
    return R * c.normalized();
}

std::vector<double> auto_layer_grid(double r_max) {
    std::vector<double> grid;
    for (double r = 0.2; r <= r_max + 1e-9; r += 0.05) grid.push_back(r);
    return grid;
}


void run_nodal_trajectory(const ExperimentConfig& cfg, OutputCollector& out) {
    NodalPathTracker tracker;
    std::string csv = "t,x1,x2,x3,C\n";
    SvgSeries path;
    const long n = std::lround((cfg.t1 - cfg.t0) / cfg.dt_out);
    for (long i = 0; i <= n; ++i) {
        const double t = cfg.t0 + i * cfg.dt_out;
        const auto np = tracker.point(t, cfg.R);
        csv += format_sig(t);
        for (int k = 0; k < 3; ++k) csv += "," + format_sig(np.position[k]);
        csv += "," + format_sig(np.C) + "\n";
        if (i % 5 == 0) path.points.emplace_back(np.position[0], np.position[1]);
    }
    out.add("node_path.csv", csv);
    out.add("preview.svg", svg_plot({path}));
}

void run_nodal_kinematics(const ExperimentConfig& cfg, OutputCollector& out) {
    std::string csv = "t,speed,accel\n";
    SvgSeries sp{{}, "#1f77b4", false}, ac{{}, "#d62728", false};
    const long n = std::lround((cfg.t1 - cfg.t0) / cfg.dt_out);
    NodalPathTracker tracker;
    for (long i = 0; i <= n; ++i) {
        const double t = cfg.t0 + i * cfg.dt_out;
        const auto np = tracker.point(t, cfg.R);
        const double speed = np.velocity.norm();
        const double accel = np.acceleration.norm();
        csv += format_sig(t) + "," + format_sig(speed) + "," + format_sig(accel) + "\n";
        sp.points.emplace_back(t, speed);
        ac.points.emplace_back(t, accel);
    }
    out.add("kinematics.csv", csv);
    out.add("preview.svg", svg_plot({sp, ac}));
}

std::string branch_name(ManifoldBranch b) {
    switch (b) {
        case ManifoldBranch::UnstablePlus: return "unstable_plus";
        case ManifoldBranch::UnstableMinus: return "unstable_minus";
        case ManifoldBranch::StablePlus: return "stable_plus";
        default: return "stable_minus";
    }
}

void run_complex_portrait(const ExperimentConfig& cfg, OutputCollector& out) {
    const double t = cfg.t0;
    const auto pf = planar_flow(t, cfg.R);
    const auto xp = xpoint_from(pf);

    JsonWriter w;
    w.begin_object();
    w.key("t").value(t);
    w.key("R").value(cfg.R);
    w.key("node_xyz").begin_array().value(pf.node.position[0]).value(pf.node.position[1]).value(pf.node.position[2]).end_array();
    w.key("B").value(pf.B);
    w.key("Phi").begin_array().value(pf.Phi1).value(pf.Phi2).value(pf.Phi3).end_array();
    w.key("V").begin_array().value(pf.V_u).value(pf.V_v).end_array();
    w.key("xpoint_uv").begin_array().value(xp.u).value(xp.v).end_array();
    w.key("eigenvalues").begin_array().value(xp.lambda1).value(xp.lambda2).end_array();
    w.key("slopes").begin_array().value(xp.slope1).value(xp.slope2).end_array();
    w.end_object();
    out.add("xpoint.json", w.str() + "\n");

    TraceOptions opts;
    opts.seed = cfg.seed;
    opts.arc_cap = 60.0 * cfg.R;
    opts.max_winding = 30.0 * 2.0 * std::numbers::pi;

    std::vector<SvgSeries> preview;
    for (auto br : {ManifoldBranch::UnstablePlus, ManifoldBranch::UnstableMinus,
                    ManifoldBranch::StablePlus, ManifoldBranch::StableMinus}) {
        const auto curve = manifold_trace(t, cfg.R, br, cfg.integrator, opts);
        out.add("manifold_" + branch_name(br) + ".csv", manifold_csv(curve));
        SvgSeries s;
        const bool unstable =
            br == ManifoldBranch::UnstablePlus || br == ManifoldBranch::UnstableMinus;
        s.color = unstable ? "#d62728" : "#1f77b4";
        for (size_t i = 0; i < curve.points.size(); i += 4)
            s.points.emplace_back(curve.points[i][0], curve.points[i][1]);
        preview.push_back(std::move(s));
    }

    TraceOptions sopts;
    sopts.arc_cap = 30.0 * cfg.R;
    sopts.max_winding = 10.0 * 2.0 * std::numbers::pi;
    const double ring = 1.5 * std::hypot(xp.u, xp.v);
    for (long i = 0; i < cfg.streamlines; ++i) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(i) /
                           static_cast<double>(std::max<long>(1, cfg.streamlines));
        const Vec2 p0(ring * std::cos(ang), ring * std::sin(ang));
        const auto curve = trace_frozen_flow(pf, p0, +1, cfg.integrator, sopts);
        char name[48];
        std::snprintf(name, sizeof name, "streamline_%02ld.csv", i);
        out.add(name, manifold_csv(curve));
        SvgSeries s;
        s.color = "#999999";
        for (size_t j = 0; j < curve.points.size(); j += 4)
            s.points.emplace_back(curve.points[j][0], curve.points[j][1]);
        preview.push_back(std::move(s));
    }

    SvgSeries marks;
    marks.markers_only = true;
    marks.color = "#000000";
    marks.points = {{0.0, 0.0}, {xp.u, xp.v}};
    preview.push_back(marks);
    out.add("preview.svg", svg_plot(preview));
}

void run_hopf_transition(const ExperimentConfig& cfg, OutputCollector& out) {
    std::string csv = "t,label\n";
    const long n = std::lround((cfg.t1 - cfg.t0) / cfg.hopf_dt);
    for (long i = 0; i <= n; ++i) {
        const double t = cfg.t0 + i * cfg.hopf_dt;
        std::string label;
        try {
            label = label_of(classify_complex(t, cfg.R, {}, cfg.integrator));
        } catch (const ClassificationAmbiguousError&) {
            label = "ambiguous";
        } catch (const DegenerateXPointError&) {
            label = "degenerate";
        }
        csv += format_sig(t) + "," + label + "\n";
    }
    out.add("labels.csv", csv);

    const auto transitions = hopf_scan(cfg.R, cfg.t0, cfg.t1, cfg.hopf_dt, {}, cfg.integrator);
    JsonWriter w;
    w.begin_array();
    for (const auto& tr : transitions) {
        w.begin_object();
        w.key("t_star").value(tr.t_star);
        w.key("before").value(label_of(tr.before));
        w.key("after").value(label_of(tr.after));
        w.end_object();
    }
    w.end_array();
    out.add("transitions.json", w.str() + "\n");
}

void run_trajectory_vs_node(const ExperimentConfig& cfg, OutputCollector& out) {
    const auto state = resolve_state(cfg.state);
    const Vec3 x0 = offset_from_node(cfg.t0, cfg.R, cfg.d_offset);
    const auto traj = integrate(state, x0, cfg.t0, cfg.t1, cfg.integrator);
    out.add("trajectory.csv", trajectory_csv(traj));

    NodalPathTracker tracker;
    std::string node_csv = "t,x1,x2,x3,C\n";
    std::string dist_csv = "t,distance\n";
    SvgSeries dist_series;
    for (size_t i = 0; i < traj.size(); ++i) {
        const auto np = tracker.point(traj.times[i], traj.radii[i]);
        const double d = (traj.positions[i] - np.position).norm();
        node_csv += format_sig(traj.times[i]);
        for (int k = 0; k < 3; ++k) node_csv += "," + format_sig(np.position[k]);
        node_csv += "," + format_sig(np.C) + "\n";
        dist_csv += format_sig(traj.times[i]) + "," + format_sig(d) + "\n";
        if (i % 5 == 0) dist_series.points.emplace_back(traj.times[i], d);
    }
    out.add("node_path.csv", node_csv);
    out.add("distance.csv", dist_csv);
    out.add("preview.svg", svg_plot({dist_series}));
}

void run_trajectory_families(const ExperimentConfig& cfg, OutputCollector& out) {
    const auto state = resolve_state(cfg.state);
    std::vector<SvgSeries> preview;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
    size_t ci = 0;
    for (const double R : cfg.R_grid) {
        const Vec3 x0 = offset_from_node(cfg.t0, R, cfg.d_offset);
        const auto traj = integrate(state, x0, cfg.t0, cfg.t1, cfg.integrator);
        out.add("traj_R" + compact(R) + ".csv", trajectory_csv(traj));
        SvgSeries s;
        s.color = colors[ci++ % 6];
        for (size_t i = 0; i < traj.size(); i += 10)
            s.points.emplace_back(traj.positions[i][0], traj.positions[i][1]);
        preview.push_back(std::move(s));
    }
    for (const double d : cfg.d_grid) {
        const Vec3 x0 = offset_from_node(cfg.t0, cfg.R, d);
        const auto traj = integrate(state, x0, cfg.t0, cfg.t1, cfg.integrator);
        out.add("traj_d" + compact(d) + ".csv", trajectory_csv(traj));
        SvgSeries s;
        s.color = colors[ci++ % 6];
        for (size_t i = 0; i < traj.size(); i += 10)
            s.points.emplace_back(traj.positions[i][0], traj.positions[i][1]);
        preview.push_back(std::move(s));
    }
    out.add("preview.svg", svg_plot(preview));
}

void run_scattering(const ExperimentConfig& cfg, OutputCollector& out) {
    const auto state = resolve_state(cfg.state);
    const Vec3 x0 = cfg.ordered_start ? ordered_start_point(cfg.t0, cfg.R) : cfg.x0;
    const auto [traj, dev] = integrate_with_deviation(state, x0, cfg.dx0, cfg.t0, cfg.t1, cfg.tau,
                                                      cfg.integrator);
    out.add("trajectory.csv", trajectory_csv(traj));
    out.add("deviation.csv", deviation_csv(dev));

    const auto s = stretching_series(dev);
    const auto cum = cumulative_stretching(s);
    const auto lcn = finite_time_lcn(s);

    const auto grid = cfg.R_grid.empty() ? auto_layer_grid(2.0 * x0.norm()) : cfg.R_grid;
    std::vector<double> distance(s.values.size());
    for (size_t k = 0; k < s.values.size(); ++k)
        distance[k] = distance_to_complexes(traj.positions[k + 1], traj.times[k + 1], grid);

    out.add("metrics.csv", metrics_csv(s, cum, lcn, distance));
    const auto events = detect_scattering(s, distance, cfg.detect_window, cfg.detect_factor);
    out.add("events.json", events_json(events));

    SvgSeries sa{{}, "#d62728", false}, sd{{}, "#000000", false};
    for (size_t k = 0; k < s.values.size(); k += 5) {
        sa.points.emplace_back(s.time_at(k), s.values[k]);
        sd.points.emplace_back(s.time_at(k), distance[k] * 0.01);
    }
    out.add("preview.svg", svg_plot({sa, sd}));
}

void run_foliation(const ExperimentConfig& cfg, OutputCollector& out) {
    const auto st = foliation(cfg.t0, cfg.R_grid, {}, cfg.with_manifolds, cfg.integrator);
    out.add("structure.json", structure_json(st));

    std::string xline = "R,x1,x2,x3\n";
    std::vector<SvgSeries> preview;
    SvgSeries node_line{{}, "#2ca02c", false}, xpts{{}, "#000000", true};
    for (const auto& layer : st.layers) {
        node_line.points.emplace_back(layer.node.position[0], layer.node.position[2]);
        if (!layer.xpoint) continue;
        xline += format_sig(layer.R);
        for (int k = 0; k < 3; ++k) xline += "," + format_sig(layer.xpoint_lab[k]);
        xline += "\n";
        xpts.points.emplace_back(layer.xpoint_lab[0], layer.xpoint_lab[2]);
    }
    out.add("xline.csv", xline);

    for (size_t li = 0; li < st.layers.size(); ++li) {
        const auto& layer = st.layers[li];
        for (const auto& curve : layer.manifolds) {
            char name[64];
            std::snprintf(name, sizeof name, "manifold_R%s_%s.csv", compact(layer.R).c_str(),
                          branch_name(curve.branch).c_str());
            out.add(name, manifold_csv(curve));
            // project back to the lab frame for the preview
            const auto frame = comoving_frame(cfg.t0, layer.R);
            SvgSeries s;
            s.color = (curve.branch == ManifoldBranch::UnstablePlus ||
                       curve.branch == ManifoldBranch::UnstableMinus)
                          ? "#d62728"
                          : "#1f77b4";
            for (size_t i = 0; i < curve.points.size(); i += 8) {
                const Vec3 lab = layer.node.position +
                                 frame.S.transpose() * Vec3(curve.points[i][0], curve.points[i][1], 0.0);
                s.points.emplace_back(lab[0], lab[2]);
            }
            preview.push_back(std::move(s));
        }
    }
    preview.push_back(node_line);
    preview.push_back(xpts);
    out.add("preview.svg", svg_plot(preview));
}

void run_perturbed_diffusion(const ExperimentConfig& cfg, OutputCollector& out) {
    const auto state = resolve_state(cfg.state);
    const auto [traj, dev] = integrate_with_deviation(state, cfg.x0, cfg.dx0, cfg.t0, cfg.t1,
                                                      cfg.tau, cfg.integrator);
    out.add("trajectory.csv", trajectory_csv(traj));
    out.add("deviation.csv", deviation_csv(dev));

    std::string radius = "t,R\n";
    SvgSeries rt;
    for (size_t i = 0; i < traj.size(); ++i) {
        radius += format_sig(traj.times[i]) + "," + format_sig(traj.radii[i]) + "\n";
        if (i % 5 == 0) rt.points.emplace_back(traj.times[i], traj.radii[i]);
    }
    out.add("radius.csv", radius);

    const auto s = stretching_series(dev);
    const auto cum = cumulative_stretching(s);
    const auto lcn = finite_time_lcn(s);
    const auto grid = cfg.R_grid.empty() ? auto_layer_grid(2.0 * cfg.x0.norm()) : cfg.R_grid;
    std::vector<double> distance(s.values.size());
    for (size_t k = 0; k < s.values.size(); ++k)
        distance[k] = distance_to_complexes(traj.positions[k + 1], traj.times[k + 1], grid);
    out.add("metrics.csv", metrics_csv(s, cum, lcn, distance));
    out.add("events.json", events_json(detect_scattering(s, distance, cfg.detect_window, cfg.detect_factor)));

    // unperturbed structure backdrop at the start time
    const auto st = foliation(cfg.t0, grid.empty() ? auto_layer_grid(2.0 * cfg.x0.norm()) : grid);
    out.add("structure.json", structure_json(st));
    out.add("preview.svg", svg_plot({rt}));
}

void run_power_law(const ExperimentConfig& cfg, OutputCollector& out) {
    std::vector<std::pair<double, double>> points;
    std::string csv = "a4,delta_R_max\n";
    for (const double a4 : cfg.a4_grid) {
        const auto state = perturbed_state(a4);
        const auto traj = integrate(state, cfg.x0, cfg.t0, cfg.t1, cfg.integrator);
        const double dr = delta_r_max(traj);
        points.emplace_back(a4, dr);
        csv += format_sig(a4) + "," + format_sig(dr) + "\n";
    }
    out.add("delta_r.csv", csv);

    const auto control = integrate(base_state(), cfg.x0, cfg.t0, cfg.t1, cfg.integrator);
    const double control_dr = delta_r_max(control);

    const auto fit = fit_power_law(points);
    JsonWriter w;
    w.begin_object();
    w.key("exponent").value(fit.exponent);
    w.key("prefactor").value(fit.prefactor);
    w.key("residual").value(fit.residual);
    w.key("control_delta_R_max").value(control_dr);
    w.end_object();
    out.add("fit.json", w.str() + "\n");

    SvgSeries pts;
    pts.markers_only = true;
    for (const auto& [x, y] : points) pts.points.emplace_back(std::log10(x), std::log10(y));
    out.add("preview.svg", svg_plot({pts}));
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();

    using Runner = void (*)(const ExperimentConfig&, OutputCollector&);
    static const std::map<std::string, Runner> runners = {
        {"nodal-trajectory", run_nodal_trajectory},
        {"nodal-kinematics", run_nodal_kinematics},
        {"complex-portrait", run_complex_portrait},
        {"hopf-transition", run_hopf_transition},
        {"trajectory-vs-node", run_trajectory_vs_node},
        {"trajectory-families", run_trajectory_families},
        {"scattering", run_scattering},
        {"foliation", run_foliation},
        {"perturbed-diffusion", run_perturbed_diffusion},
        {"power-law", run_power_law},
    };
    const auto it = runners.find(cfg.experiment);
    if (it == runners.end())
        throw UnknownExperimentError("unknown experiment '" + cfg.experiment + "'");

    OutputCollector collector;
    it->second(cfg, collector);

    RunManifest manifest;
    manifest.experiment = cfg.experiment;
    manifest.tool_version = kToolVersion;
    const std::string canonical = cfg.canonical_text();
    manifest.config_digest = digest_hex(canonical);
    for (const auto& [name, content] : collector.files()) {
        write_file(cfg.out_dir + "/" + name, content);
        manifest.files.push_back({name, content.size(), digest_hex(content)});
    }
    manifest.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    JsonWriter w;
    w.begin_object();
    w.key("experiment").value(manifest.experiment);
    w.key("tool_version").value(manifest.tool_version);
    w.key("config_digest").value(manifest.config_digest);
    w.key("wall_time_seconds").value(manifest.wall_time_seconds);
    w.key("config").value(canonical);
    w.key("files").begin_array();
    for (const auto& f : manifest.files) {
        w.begin_object();
        w.key("name").value(f.name);
        w.key("bytes").value(static_cast<long>(f.bytes));
        w.key("digest").value(f.digest);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    write_file(cfg.out_dir + "/manifest.json", w.str() + "\n");
    return manifest;
}

}  // namespace bohmflow
