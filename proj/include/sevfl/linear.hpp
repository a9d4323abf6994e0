#pragma once

// One-vs-rest squared-hinge linear SVM and multiclass passive-aggressive (PA-I).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sevfl/matrix.hpp"

namespace sevfl {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LinearKind { SquaredHingeSVM, PassiveAggressive };

struct LinearHyper {
    double C = 1.0;
    double tol = 1e-4;
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    bool fit_intercept = true;
    bool operator==(const LinearHyper&) const = default;
};

LinearHyper default_svm_hyper();
LinearHyper default_pac_hyper();  // tol = 1e-3

struct LinearModelState {
    LinearKind kind = LinearKind::SquaredHingeSVM;
    int n_classes = 0;
    Matrix weights;              // [n_classes x n_features]
    std::vector<double> intercepts;
    LinearHyper hyper;
    int epochs_run = 0;
    std::size_t skipped_updates = 0;  // PA rows with zero norm and positive loss

    std::size_t n_features() const { return weights.cols(); }

    static LinearModelState zeros(LinearKind kind, int n_classes, std::size_t n_features, const LinearHyper& hyper);

    Matrix decision_function(const Matrix& x) const;
    std::vector<int> predict(const Matrix& x) const;

    bool operator==(const LinearModelState&) const = default;
};

/// Per-class squared-hinge objective 0.5*|w|^2 + C * sum max(0, 1 - t*f)^2
/// with t = +1 for rows of class `cls` and -1 otherwise.
double svm_objective(const LinearModelState& s, int cls, const Matrix& x, std::span<const int> y);

/// Requires at least two classes in y.
LinearModelState train_svm(const Matrix& x, std::span<const int> y, int n_classes, const LinearHyper& hyper);
LinearModelState train_pac(const Matrix& x, std::span<const int> y, int n_classes, const LinearHyper& hyper);

/// Runs up to `epochs` epochs of the state's own algorithm starting from `init`.
/// Single-class data is allowed here (local federated updates).
/// `objective_trace`, when given, receives the SVM objective per class after
/// every epoch ([class][epoch], entry 0 is the starting objective).
LinearModelState continue_training(const LinearModelState& init, const Matrix& x, std::span<const int> y,
                                   int epochs, std::uint64_t seed,
                                   std::vector<std::vector<double>>* objective_trace = nullptr);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax_lowest(std::span<const double> v);

nlohmann::json to_json(const LinearModelState& s);
LinearModelState linear_from_json(const nlohmann::json& j);

std::string to_string(LinearKind k);

}  // namespace sevfl
