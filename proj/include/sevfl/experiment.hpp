#pragma once

// Trainers for the three training regimes, pluggable into run_cv.

#include <string>

#include <json.hpp>

#include "sevfl/evaluation.hpp"
#include "sevfl/federation.hpp"
#include "sevfl/models.hpp"

namespace sevfl {

enum class Regime { Centralized, Federated, Synthetic };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

struct ModelConfig {
    ModelKind kind = ModelKind::Boosted;
    LinearHyper linear;
    BoostedHyper boosted;

    static ModelConfig defaults(ModelKind kind);
    nlohmann::json to_json() const;
};

struct RegimeConfig {
    Regime regime = Regime::Centralized;
    FederationPlan federation;   // used by the federated regime
    bool log_round_metrics = true;  // per-round held-out metrics in round logs
    double synth_size_ratio = 1.0;  // synthetic rows per real training row
};

/// Trains one model on already-preprocessed features. Seeds in the model
/// hyperparameters are replaced by `seed`.
ModelState train_model(const ModelConfig& cfg, const Matrix& x, std::span<const int> y, int n_classes,
                       std::uint64_t seed);

/// Per fold:
///   centralized: fit pipeline on the split, train on it;
///   federated:   fit pipeline on the split, partition it over clients, federate;
///   synthetic:   fit a copula on the split, sample as many rows, fit pipeline
///                and model on the synthetic rows only.
Trainer make_trainer(const ModelConfig& model, const RegimeConfig& regime);

}  // namespace sevfl
