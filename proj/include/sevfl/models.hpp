#pragma once

// Uniform contract over the three classifiers.

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sevfl/boosted.hpp"
#include "sevfl/linear.hpp"

namespace sevfl {

enum class ModelKind { Svm, Pac, Boosted };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// Flat parameters of a linear model as exchanged with the aggregation server.
struct ParamVector {
    std::vector<double> values;
    std::vector<std::size_t> shape;
    double sample_weight = 0.0;  // rows held by the producing client

    std::size_t expected_size() const;
};

/// Weights row-major, then one intercept per class: shape {n_classes, n_features + 1}.
ParamVector export_params(const LinearModelState& s, double sample_weight);
LinearModelState import_params(const LinearModelState& s, const ParamVector& v);

using ModelState = std::variant<LinearModelState, BoostedTreesState>;

std::vector<int> predict(const ModelState& s, const Matrix& x);
/// Defined for boosted models only; linear models expose scores, not probabilities.
Matrix predict_proba(const ModelState& s, const Matrix& x);

nlohmann::json to_json(const ModelState& s);
ModelState model_from_json(const nlohmann::json& j);

}  // namespace sevfl
