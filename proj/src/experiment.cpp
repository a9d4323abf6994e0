#include "sevfl/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "sevfl/seed.hpp"
#include "sevfl/synthesis.hpp"

namespace sevfl {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Centralized: return "centralized";
        case Regime::Federated: return "federated";
        case Regime::Synthetic: return "synthetic";
    }
    return "?";
}

Regime parse_regime(const std::string& s) {
    if (s == "centralized") return Regime::Centralized;
    if (s == "federated") return Regime::Federated;
    if (s == "synthetic") return Regime::Synthetic;
    throw std::invalid_argument("unknown regime '" + s + "' (expected centralized, federated or synthetic)");
}

ModelConfig ModelConfig::defaults(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.linear = kind == ModelKind::Pac ? default_pac_hyper() : default_svm_hyper();
    return c;
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j{{"kind", to_string(kind)}};
    if (kind == ModelKind::Boosted) {
        j["hyper"] = {{"n_rounds", boosted.n_rounds},   {"learning_rate", boosted.learning_rate},
                      {"max_depth", boosted.max_depth}, {"n_bins", boosted.n_bins},
                      {"lambda", boosted.lambda},       {"min_child_weight", boosted.min_child_weight}};
    } else {
        j["hyper"] = {{"C", linear.C},
                      {"tol", linear.tol},
                      {"max_epochs", linear.max_epochs},
                      {"fit_intercept", linear.fit_intercept}};
    }
    return j;
}

ModelState train_model(const ModelConfig& cfg, const Matrix& x, std::span<const int> y, int n_classes,
                       std::uint64_t seed) {
    LinearHyper h = cfg.linear;
    h.seed = seed;
    switch (cfg.kind) {
        case ModelKind::Svm: return train_svm(x, y, n_classes, h);
        case ModelKind::Pac: return train_pac(x, y, n_classes, h);
        case ModelKind::Boosted: return train_boosted(x, y, n_classes, cfg.boosted);
    }
    throw ModelError("unknown model kind");
}

namespace {

Predictor pipeline_predictor(FittedPipeline pipeline, ModelState model) {
    return [pipeline = std::move(pipeline), model = std::move(model)](const Matrix& raw) {
        return predict(model, pipeline.transform(raw));
    };
}

Dataset transformed(const Dataset& ds, const FittedPipeline& p) {
    Dataset out;
    out.features = p.transform(ds.features);
    out.labels = ds.labels;
    out.n_classes = ds.n_classes;
    out.feature_names.reserve(out.features.cols());
    for (std::size_t j = 0; j < out.features.cols(); ++j) out.feature_names.push_back("t" + std::to_string(j));
    return out;
}

TrainedModel train_centralized(const ModelConfig& cfg, const Dataset& train, const PipelineSpec& spec,
                               const FoldContext& ctx) {
    FittedPipeline pipeline = fit_pipeline(train, spec);
    ModelState model = train_model(cfg, pipeline.transform(train.features), train.labels, train.n_classes,
                                   derive_seed(ctx.seed, "model"));
    TrainedModel out;
    out.info["selected_features"] = pipeline.selected;
    out.predict = pipeline_predictor(std::move(pipeline), std::move(model));
    return out;
}

TrainedModel train_federated(const ModelConfig& cfg, const RegimeConfig& rc, const Dataset& train,
                             const PipelineSpec& spec, const FoldContext& ctx) {
    FittedPipeline pipeline = fit_pipeline(train, spec);
    const Dataset local = transformed(train, pipeline);
    FederationPlan plan = rc.federation;
    plan.seed = derive_seed(ctx.seed, "federation");
    plan.aggregation = cfg.kind == ModelKind::Boosted ? Aggregation::HistogramSum : Aggregation::FedAvgParams;

    RoundEval eval;
    if (rc.log_round_metrics && ctx.evaluate_holdout) {
        eval = [&](const ModelState& m) {
            return ctx.evaluate_holdout([&](const Matrix& raw) { return predict(m, pipeline.transform(raw)); });
        };
    }
    const auto partition = make_partition(local, plan);
    auto clients = make_clients(local, partition);

    TrainedModel out;
    ModelState model;
    if (cfg.kind == ModelKind::Boosted) {
        auto res = run_federated_boosted(clients, local.n_classes, local.n_features(), cfg.boosted, nullptr, eval);
        out.rounds = std::move(res.rounds);
        model = std::move(res.model);
    } else {
        LinearHyper h = cfg.linear;
        h.seed = derive_seed(ctx.seed, "model");
        auto res = run_federated_linear(clients, local.n_classes, local.n_features(), plan, cfg.kind, h, eval);
        out.rounds = std::move(res.rounds);
        model = std::move(res.model);
    }
    std::vector<std::size_t> sizes;
    for (const auto& c : partition.row_indices) sizes.push_back(c.size());
    out.info["client_sizes"] = sizes;
    out.info["selected_features"] = pipeline.selected;
    out.predict = pipeline_predictor(std::move(pipeline), std::move(model));
    return out;
}

TrainedModel train_synthetic(const ModelConfig& cfg, const RegimeConfig& rc, const Dataset& train,
                             const PipelineSpec& spec, const FoldContext& ctx) {
    const CopulaModel copula = fit_copula(train, derive_seed(ctx.seed, "copula"));
    const auto n_synth = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(rc.synth_size_ratio * static_cast<double>(train.n_rows()))));
    const Dataset synth = sample_copula(copula, n_synth, derive_seed(ctx.seed, "copula-sample"));
    const FidelityReport fidelity = fidelity_report(train, synth);

    FittedPipeline pipeline = fit_pipeline(synth, spec);
    ModelState model = train_model(cfg, pipeline.transform(synth.features), synth.labels, synth.n_classes,
                                   derive_seed(ctx.seed, "model"));
    TrainedModel out;
    out.info["synthetic_rows"] = synth.n_rows();
    out.info["fidelity"] = {{"max_ks", fidelity.max_ks},
                            {"max_correlation_diff", fidelity.max_correlation_diff},
                            {"class_proportion_l1", fidelity.class_proportion_l1}};
    out.info["selected_features"] = pipeline.selected;
    out.predict = pipeline_predictor(std::move(pipeline), std::move(model));
    return out;
}

}  // namespace

Trainer make_trainer(const ModelConfig& model, const RegimeConfig& regime) {
    switch (regime.regime) {
        case Regime::Centralized:
            return [model](const Dataset& train, const PipelineSpec& spec, const FoldContext& ctx) {
                return train_centralized(model, train, spec, ctx);
            };
        case Regime::Federated:
            regime.federation.validate();
            return [model, regime](const Dataset& train, const PipelineSpec& spec, const FoldContext& ctx) {
                return train_federated(model, regime, train, spec, ctx);
            };
        case Regime::Synthetic:
            if (!(regime.synth_size_ratio > 0.0)) throw std::invalid_argument("synthetic size ratio must be positive");
            return [model, regime](const Dataset& train, const PipelineSpec& spec, const FoldContext& ctx) {
                return train_synthetic(model, regime, train, spec, ctx);
            };
    }
    throw std::invalid_argument("unknown regime");
}

}  // namespace sevfl
