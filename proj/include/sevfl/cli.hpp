#pragma once

// Experiment front-end: `run`, `synth`, `table` and `inspect` subcommands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sevfl/experiment.hpp"
#include "sevfl/preprocess.hpp"

namespace sevfl {

/// Invalid configuration (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitConfigError = 2;

inline constexpr const char* kOutputDirEnv = "SEVFL_OUTPUT_DIR";

struct ExperimentConfig {
    std::string data;
    std::string label_column = kDefaultLabelColumn;
    ModelConfig model = ModelConfig::defaults(ModelKind::Boosted);
    Regime regime = Regime::Centralized;
    PipelineSpec pipeline;
    int folds = 5;
    std::optional<std::uint64_t> seed;
    std::string output_dir;

    // Regime-specific sections; set iff the matching regime is selected.
    std::optional<FederationPlan> federation;
    std::optional<double> synth_size_ratio;
    bool log_round_metrics = true;

    /// Parses a config document. Unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    void validate() const;
    /// Everything needed to re-run, minus the output location.
    nlohmann::json echo() const;
};

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& ds);

struct BaselineRow {
    std::string name;
    std::map<std::string, double> values;  // metric name -> value
};

BaselineRow parse_baseline(const std::string& spec);

struct ComparisonTable {
    std::vector<std::string> groups;   // regime columns in display order
    std::vector<std::string> metrics;  // metric columns per group
    std::vector<std::string> rows;     // model names in display order
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;

    std::string to_text() const;
    std::string to_csv() const;
};

ComparisonTable build_table(const std::vector<MetricsReport>& reports, const std::vector<BaselineRow>& baselines);

}  // namespace sevfl
