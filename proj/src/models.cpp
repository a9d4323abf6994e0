#include "sevfl/models.hpp"

#include <functional>
#include <numeric>

namespace sevfl {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Svm: return "svm";
        case ModelKind::Pac: return "pac";
        case ModelKind::Boosted: return "boosted";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "svm") return ModelKind::Svm;
    if (s == "pac") return ModelKind::Pac;
    if (s == "boosted") return ModelKind::Boosted;
    throw std::invalid_argument("unknown model '" + s + "' (expected svm, pac or boosted)");
}

std::size_t ParamVector::expected_size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ParamVector export_params(const LinearModelState& s, double sample_weight) {
    ParamVector v;
    v.shape = {static_cast<std::size_t>(s.n_classes), s.n_features() + 1};
    v.values = s.weights.data();
    v.values.insert(v.values.end(), s.intercepts.begin(), s.intercepts.end());
    v.sample_weight = sample_weight;
    return v;
}

LinearModelState import_params(const LinearModelState& s, const ParamVector& v) {
    const std::vector<std::size_t> shape{static_cast<std::size_t>(s.n_classes), s.n_features() + 1};
    if (v.shape != shape || v.values.size() != s.weights.data().size() + s.intercepts.size()) {
        throw ModelError("import_params: parameter vector of length " + std::to_string(v.values.size()) +
                         " does not match model shape " + std::to_string(shape[0]) + "x" + std::to_string(shape[1]));
    }
    LinearModelState out = s;
    const auto n_w = s.weights.data().size();
    std::copy(v.values.begin(), v.values.begin() + static_cast<std::ptrdiff_t>(n_w), out.weights.data().begin());
    std::copy(v.values.begin() + static_cast<std::ptrdiff_t>(n_w), v.values.end(), out.intercepts.begin());
    return out;
}

std::vector<int> predict(const ModelState& s, const Matrix& x) {
    return std::visit([&](const auto& m) { return m.predict(x); }, s);
}

Matrix predict_proba(const ModelState& s, const Matrix& x) {
    if (const auto* b = std::get_if<BoostedTreesState>(&s)) return b->predict_proba(x);
    throw ModelError("predict_proba: linear models do not produce probabilities");
}

nlohmann::json to_json(const ModelState& s) {
    return std::visit([](const auto& m) { return to_json(m); }, s);
}

ModelState model_from_json(const nlohmann::json& j) {
    const auto type = j.value("type", "");
    if (type == "linear") return linear_from_json(j);
    if (type == "boosted") return boosted_from_json(j);
    throw ModelError("model json: unknown type '" + type + "'");
}

}  // namespace sevfl
