#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigpert/gs_model.hpp"
#include "sigpert/metrics.hpp"
#include "sigpert/perturb.hpp"

namespace sigpert::harness {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitConfig = 2;

// slope tolerances enforced by the converge command
inline constexpr double kCySlopeTol = 0.10;
inline constexpr double kSigSlopeTol = 0.15;
inline constexpr double kExpansionSlopeTol = 0.20;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ClassSpec {
    std::string name;
    GSParams model;
};

struct ClassifyConfig {
    std::vector<ClassSpec> classes;
    int markets_per_class = 100;
    int windows = 32;
    int depth = 2;
    int folds = 5;
    bool ablation = true;
};

struct IngestConfig {
    std::string file;
    std::string mode = "prices";  // "prices": take logs; "log": read values raw
    bool demean = true;
    int window = 21;
};

struct ExperimentConfig {
    std::string kind = "all";  // cy_hardy | sig_truncation | expansion_residual | all
    std::vector<double> delta_grid;  // empty: per-kind default grid
    std::vector<int> n_list{0, 1, 2, 3};
    double p = 2.0;
    int depth = 3;
};

struct Config {
    GSParams model;
    DriverSpec driver;
    ExperimentConfig experiment;
    std::optional<ClassifyConfig> classify;
    std::optional<IngestConfig> ingest;
    std::string output_dir = "out";
    json raw;  // effective config as loaded (embedded in result headers)
};

// Parse and validate; throws ConfigError naming the offending field path.
Config parse_config(const json& j);
Config load_config_file(const std::string& path);

// --- result files -----------------------------------------------------------
// Every output embeds the command and the effective config: CSV files start
// with "# sigpert-result v1" comment lines, JSON files carry a "header" object.
json result_header(const Config& cfg, const std::string& command);
std::string format_double(double v);  // round-trip exact %.17g

struct ResultHeader {
    std::string command;
    json config;
};
ResultHeader read_result_header(const std::filesystem::path& file);

// Re-run the command recorded in `result_file` into `scratch_dir` and compare
// the regenerated file byte-for-byte.
bool rerun_matches(const std::filesystem::path& result_file,
                   const std::filesystem::path& scratch_dir);

// --- market-data ingestion ---------------------------------------------------
struct FuturesCurveRecord {
    std::string date;
    std::vector<double> prices;
};
// Validates schema date,contract_1,...,contract_d: positive prices,
// monotone dates, consistent column count.
std::vector<FuturesCurveRecord> read_futures_csv(const std::string& path);

// Non-overlapping windows of `window` rows as d-dim paths on the uniform
// index grid normalized to [0,1]. mode "prices" takes logs (optionally
// demeaned per window); mode "log" reads values untouched.
std::vector<MultiPath> ingest_futures_csv(const std::string& path, int window,
                                          const std::string& mode, bool demean);

void emit_futures_csv(const std::filesystem::path& file, const MultiPath& path,
                      const Config& cfg, const std::string& command);

// --- classification -----------------------------------------------------------
struct CoordStat {
    std::vector<int> word;
    double dprime = 0.0;
};
struct ClassifyOutcome {
    double accuracy = 0.0;
    std::vector<double> fold_accuracy;
    std::vector<CoordStat> discriminability;
    bool identical_classes = false;
};
// Simulates markets per class, pools depth-`depth` window signatures per
// market (per-word mean over windows), standardizes coordinates on the
// training folds, and cross-validates a nearest-centroid classifier.
ClassifyOutcome run_classification(const ClassifyConfig& cc, const DriverSpec& spec);

// --- expansion report ----------------------------------------------------------
json expansion_report(const Config& cfg);
// Minimal structural validator for the documented report schema.
bool validate_against_schema(const json& doc, const json& schema, std::string* error);

// --- commands ------------------------------------------------------------------
int cmd_simulate(const Config& cfg);
int cmd_signature(const Config& cfg);
int cmd_converge(const Config& cfg);
int cmd_expand(const Config& cfg);
int cmd_classify(const Config& cfg);
int cmd_ingest(const Config& cfg);
int run_command(const std::string& command, const Config& cfg);

}  // namespace sigpert::harness
