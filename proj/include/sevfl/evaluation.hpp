#pragma once

// Confusion-matrix metrics and the k-fold cross-validation runner.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sevfl/data.hpp"
#include "sevfl/federation.hpp"
#include "sevfl/preprocess.hpp"

namespace sevfl {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : n_classes(k), counts(static_cast<std::size_t>(k * k), 0) {}

    static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> pred, int n_classes);
    static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

    std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t * n_classes + p)]; }
    std::int64_t at(int t, int p) const { return counts[static_cast<std::size_t>(t * n_classes + p)]; }
    std::int64_t total() const;
    std::int64_t support(int t) const;     // row sum
    std::int64_t predicted(int p) const;   // column sum

    nlohmann::json to_json() const;
};

double accuracy(const ConfusionMatrix& cm);
/// Per-class F1 weighted by true-class support.
double f1_weighted(const ConfusionMatrix& cm);
/// Unweighted mean of per-class F1 over classes seen in truth or prediction.
double f1_macro(const ConfusionMatrix& cm);
double mcc(const ConfusionMatrix& cm);
double cohens_kappa(const ConfusionMatrix& cm);
/// Geometric mean of recalls over classes with nonzero support.
double gmean(const ConfusionMatrix& cm);

struct FoldMetrics {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double f1_weighted = 0.0;
    double f1_macro = 0.0;
    double mcc = 0.0;
    double kappa = 0.0;
    double gmean = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<RoundLog> rounds;
    nlohmann::json info;  // trainer diagnostics
};

FoldMetrics score_fold(std::span<const int> truth, std::span<const int> pred, int n_classes);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over folds
};

struct MetricsReport {
    std::vector<FoldMetrics> folds;
    std::map<std::string, MetricSummary> summary;  // keyed by metric name
    nlohmann::json config;

    static const std::vector<std::string>& metric_names();
    void summarize();

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
    /// One aligned row in the model x regime x metric layout.
    std::string to_text_table() const;
};

using Predictor = std::function<std::vector<int>(const Matrix& raw_features)>;

struct FoldContext {
    int fold = 0;
    std::uint64_t seed = 0;
    /// Scores a predictor on the held-out fold without exposing its rows.
    std::function<nlohmann::json(const Predictor&)> evaluate_holdout;
};

struct TrainedModel {
    Predictor predict;
    std::vector<RoundLog> rounds;
    nlohmann::json info = nlohmann::json::object();
};

/// Receives the raw training split only.
using Trainer = std::function<TrainedModel(const Dataset& train, const PipelineSpec& spec, const FoldContext& ctx)>;

/// Stratified k-fold CV. Fold plan seed and per-fold trainer seeds are
/// derived from `seed`. Errors are rethrown with the fold index attached.
MetricsReport run_cv(const Dataset& ds, const PipelineSpec& spec, const Trainer& trainer, int k, std::uint64_t seed,
                     nlohmann::json config = nlohmann::json::object());

inline constexpr const char* kReportSchema = "sevfl.report/1";

}  // namespace sevfl
