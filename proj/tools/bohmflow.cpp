#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bohmflow/errors.hpp"
#include "bohmflow/experiments.hpp"
#include "bohmflow/version.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bohmflow::ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bohmflow: Bohmian trajectory and nodal-structure experiments"};
    app.set_version_flag("--version", bohmflow::kToolVersion);
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("list", "enumerate experiments with their figure mapping");

    std::string experiment, config_path, out_dir;
    std::vector<std::string> sets;
    auto* run_cmd = app.add_subcommand("run", "run one experiment");
    run_cmd->add_option("experiment", experiment, "experiment name (see `bohmflow list`)")->required();
    run_cmd->add_option("--config", config_path, "key/value config file");
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--set", sets, "override a config key, e.g. --set t1=50");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list_cmd) {
            std::printf("%-20s %-6s %s\n", "experiment", "figure", "summary");
            for (const auto& info : bohmflow::experiment_catalog())
                std::printf("%-20s %-6s %s\n", info.name.c_str(), info.figure.c_str(),
                            info.summary.c_str());
            return 0;
        }

        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw bohmflow::ConfigError("--set expects key=value, got '" + kv + "'");
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out_dir.empty()) overrides.emplace_back("out", out_dir);

        const std::string config_text = config_path.empty() ? "" : read_file(config_path);
        const auto cfg = bohmflow::resolve_config(experiment, config_text, overrides);
        const auto manifest = bohmflow::run_experiment(cfg);

        std::printf("experiment %s (config %s) wrote %zu files to %s in %.2fs\n",
                    manifest.experiment.c_str(), manifest.config_digest.c_str(),
                    manifest.files.size(), cfg.out_dir.c_str(), manifest.wall_time_seconds);
        for (const auto& f : manifest.files)
            std::printf("  %-32s %8zu bytes  %s\n", f.name.c_str(), f.bytes, f.digest.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
