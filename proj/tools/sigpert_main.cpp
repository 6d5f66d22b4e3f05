#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "sigpert/harness.hpp"

using sigpert::harness::Config;
using sigpert::harness::ConfigError;

int main(int argc, char** argv) {
    CLI::App app{"sigpert - signature perturbation analysis of the Gibson-Schwartz "
                 "futures term structure"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool have_seed = false;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "simulate the model and emit path CSVs"},
        {"signature", "write the truncated signature of a futures path"},
        {"converge", "run the convergence-rate experiments"},
        {"expand", "write the delta-expansion report"},
        {"classify", "synthetic signature-feature classification"},
        {"ingest", "read a futures CSV into windowed paths and plot data"},
    };
    for (auto& [name, what] : commands) {
        CLI::App* sub = app.add_subcommand(name, what);
        sub->add_option("--config", config_path, "configuration file (JSON)")->required();
        sub->add_option_function<std::uint64_t>(
               "--seed",
               [&](std::uint64_t s) {
                   seed_override = s;
                   have_seed = true;
               },
               "override driver.seed");
        sub->add_option("--out", out_override, "override output_dir");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints the message or the help text
        return code == 0 ? 0 : sigpert::harness::kExitConfig;
    }
    std::string command = app.get_subcommands().front()->get_name();

    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("config error: cannot open " + config_path);
        nlohmann::json raw;
        try {
            in >> raw;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config error: " + config_path + ": " + e.what());
        }
        // overrides are applied to the raw config so result headers embed the
        // effective values
        if (have_seed) raw["driver"]["seed"] = seed_override;
        if (!out_override.empty()) raw["output_dir"] = out_override;
        Config cfg = sigpert::harness::parse_config(raw);
        return sigpert::harness::run_command(command, cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return sigpert::harness::kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return sigpert::harness::kExitConfig;
    }
}
