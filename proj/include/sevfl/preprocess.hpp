#pragma once

// Median/IQR scaling, ANOVA-F top-k selection and polynomial expansion,
// fitted on a training split and frozen.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sevfl/data.hpp"
#include "sevfl/matrix.hpp"

namespace sevfl {

class PreprocessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineSpec {
    int k = 9;
    int degree = 3;
};

/// Quantile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
double quantile_linear(std::span<const double> sorted, double q);

/// One-way ANOVA F statistic of each column against the labels.
/// A perfect separator (zero within-group spread, nonzero between) scores
/// the largest finite double; a column with no spread at all scores 0.
std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y);

/// Exponent-index tuples (non-decreasing) of every monomial of total degree
/// 1..degree in `n_vars` variables, ordered by degree then lexicographically.
std::vector<std::vector<int>> monomial_terms(int n_vars, int degree);

class FittedPipeline {
public:
    std::vector<double> medians;
    std::vector<double> iqrs;         // raw Q3 - Q1
    std::vector<std::size_t> selected;  // strictly increasing
    std::vector<double> scores;       // F score per input column
    int degree = 3;
    bool include_bias = false;

    std::size_t n_features() const { return medians.size(); }
    std::size_t k() const { return selected.size(); }
    std::size_t expanded_dim() const { return terms_.size(); }

    /// Scale and select only (no expansion).
    Matrix scale_select(const Matrix& x) const;
    Matrix transform(const Matrix& x) const;

    nlohmann::json to_json() const;
    static FittedPipeline from_json(const nlohmann::json& j);

    friend FittedPipeline fit_pipeline(const Dataset& train, const PipelineSpec& spec);

private:
    void build_terms();
    std::vector<std::vector<int>> terms_;
};

FittedPipeline fit_pipeline(const Dataset& train, const PipelineSpec& spec);

inline Matrix transform(const FittedPipeline& p, const Matrix& x) { return p.transform(x); }

}  // namespace sevfl
