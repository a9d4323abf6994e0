#pragma once

// Class-conditional Gaussian copula over empirical marginals.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sevfl/data.hpp"
#include "sevfl/matrix.hpp"

namespace sevfl {

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClassCopula {
    int label = 0;
    std::vector<std::vector<double>> marginals;  // sorted training values per feature
    Matrix correlation;                          // [d x d], unit diagonal
    Matrix cholesky;                             // lower triangular, correlation = L L^T
    bool repaired = false;                       // eigenvalue clipping was applied
};

struct CopulaModel {
    std::vector<std::string> feature_names;
    int n_classes = 0;
    std::vector<double> class_proportions;  // one entry per class, sums to 1
    std::vector<ClassCopula> classes;       // classes present in training, ascending label
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static CopulaModel from_json(const nlohmann::json& j);
};

inline constexpr double kMinEigenvalue = 1e-6;

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Phi^{-1}(rank / (n + 1)) per entry.
std::vector<double> normal_scores(std::span<const double> values);

/// Pearson correlation of the columns; a constant column correlates 0 with
/// every other column and 1 with itself.
Matrix pearson_correlation(const Matrix& x);

/// Symmetric eigenvalue clipping at `min_eigenvalue` followed by rescaling to
/// unit diagonal. Returns true when clipping changed the matrix.
bool repair_correlation(Matrix& corr, double min_eigenvalue = kMinEigenvalue);

/// Linear interpolation of the sorted sample at position u * (n - 1).
double inverse_ecdf(std::span<const double> sorted, double u);

double normal_cdf(double z);
double normal_quantile(double p);

CopulaModel fit_copula(const Dataset& train, std::uint64_t seed);
Dataset sample_copula(const CopulaModel& model, std::size_t n, std::uint64_t seed);

struct FidelityReport {
    std::vector<std::string> feature_names;
    std::vector<double> ks;               // per feature
    double max_ks = 0.0;
    double max_correlation_diff = 0.0;    // over feature pairs, Pearson
    double class_proportion_l1 = 0.0;

    nlohmann::json to_json() const;
};

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

FidelityReport fidelity_report(const Dataset& real, const Dataset& synth);

}  // namespace sevfl
