#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bohmflow/guidance.hpp"
#include "bohmflow/linalg.hpp"

namespace bohmflow {

/// Resolved settings of one experiment run. Populated from per-experiment
/// defaults, then a config file, then command-line overrides; unknown keys
/// are rejected at every stage.
struct ExperimentConfig {
    std::string experiment;
    std::string out_dir = "out";
    std::string state = "base";  // "base" | "perturbed:<a4>" | state file path

    double t0 = 0.0, t1 = 100.0;
    double tau = 0.01;
    double dt_out = 0.01;
    Vec3 x0 = Vec3::Zero();
    Vec3 dx0 = Vec3(0.0, 0.0, 1.0);
    double R = 4.23;
    std::vector<double> R_grid;
    std::vector<double> d_grid;
    std::vector<double> a4_grid;
    double d_offset = 0.1;
    double seed = 1e-5;
    double hopf_dt = 0.02;
    double detect_window = 1.0;
    double detect_factor = 10.0;
    bool with_manifolds = true;
    long streamlines = 8;
    bool ordered_start = false;  // replace x0 by a start far from the nodal lines
    IntegratorSettings integrator;

    /// Canonical sorted key=value rendering; digest source and manifest record.
    std::string canonical_text() const;
};

struct RunManifest {
    std::string experiment;
    std::string tool_version;
    std::string config_digest;
    double wall_time_seconds = 0.0;
    struct FileRecord {
        std::string name;
        size_t bytes = 0;
        std::string digest;
    };
    std::vector<FileRecord> files;
};

struct ExperimentInfo {
    std::string name;
    std::string figure;
    std::string summary;
};

const std::vector<ExperimentInfo>& experiment_catalog();

/// Defaults for one experiment as a key -> value map (same schema as config files).
std::map<std::string, std::string> experiment_defaults(const std::string& name);

/// Builds the resolved config: defaults <- config file text <- overrides.
ExperimentConfig resolve_config(const std::string& experiment, const std::string& config_text,
                                const std::vector<std::pair<std::string, std::string>>& overrides);

RunManifest run_experiment(const ExperimentConfig& config);

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double residual = 0.0;  // rms residual in log-log coordinates
};

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points);

/// max R(t) - min R(t) over the trajectory samples.
double delta_r_max(const Trajectory& traj);

/// Builds the state named by an ExperimentConfig ("base", "perturbed:<a4>",
/// or a state-spec file path).
Superposition resolve_state(const std::string& spec);

}  // namespace bohmflow
