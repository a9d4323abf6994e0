#include "sevfl/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sevfl/seed.hpp"

namespace sevfl {

ConfusionMatrix ConfusionMatrix::from_labels(std::span<const int> truth, std::span<const int> pred, int n_classes) {
    if (truth.size() != pred.size()) throw EvaluationError("confusion: truth/prediction length mismatch");
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes) {
            throw EvaluationError("confusion: label outside [0, n_classes)");
        }
        ++cm.at(truth[i], pred[i]);
    }
    return cm;
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != rows.size()) throw EvaluationError("confusion: matrix must be square");
        for (std::size_t p = 0; p < rows.size(); ++p) {
            if (rows[t][p] < 0) throw EvaluationError("confusion: negative count");
            cm.at(static_cast<int>(t), static_cast<int>(p)) = rows[t][p];
        }
    }
    return cm;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t s = 0;
    for (auto v : counts) s += v;
    return s;
}

std::int64_t ConfusionMatrix::support(int t) const {
    std::int64_t s = 0;
    for (int p = 0; p < n_classes; ++p) s += at(t, p);
    return s;
}

std::int64_t ConfusionMatrix::predicted(int p) const {
    std::int64_t s = 0;
    for (int t = 0; t < n_classes; ++t) s += at(t, p);
    return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < n_classes; ++t) {
        std::vector<std::int64_t> row;
        for (int p = 0; p < n_classes; ++p) row.push_back(at(t, p));
        rows.push_back(row);
    }
    return rows;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw EvaluationError("metrics: empty confusion matrix");
}

double class_f1(const ConfusionMatrix& cm, int k) {
    const double tp = static_cast<double>(cm.at(k, k));
    const double pred = static_cast<double>(cm.predicted(k));
    const double sup = static_cast<double>(cm.support(k));
    const double precision = pred > 0 ? tp / pred : 0.0;
    const double recall = sup > 0 ? tp / sup : 0.0;
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    std::int64_t c = 0;
    for (int k = 0; k < cm.n_classes; ++k) c += cm.at(k, k);
    return static_cast<double>(c) / static_cast<double>(cm.total());
}

double f1_weighted(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double s = 0.0;
    for (int k = 0; k < cm.n_classes; ++k) s += class_f1(cm, k) * static_cast<double>(cm.support(k));
    return s / static_cast<double>(cm.total());
}

double f1_macro(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double s = 0.0;
    int m = 0;
    for (int k = 0; k < cm.n_classes; ++k) {
        if (cm.support(k) == 0 && cm.predicted(k) == 0) continue;
        s += class_f1(cm, k);
        ++m;
    }
    return s / m;
}

double mcc(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    const double s = static_cast<double>(cm.total());
    double c = 0.0;
    double pt = 0.0;
    double pp = 0.0;
    double tt = 0.0;
    for (int k = 0; k < cm.n_classes; ++k) {
        c += static_cast<double>(cm.at(k, k));
        const double p = static_cast<double>(cm.predicted(k));
        const double t = static_cast<double>(cm.support(k));
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double den = (s * s - pp) * (s * s - tt);
    if (den <= 0.0) return 0.0;
    return (c * s - pt) / std::sqrt(den);
}

double cohens_kappa(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    const double n = static_cast<double>(cm.total());
    double po = 0.0;
    double pe = 0.0;
    for (int k = 0; k < cm.n_classes; ++k) {
        po += static_cast<double>(cm.at(k, k));
        pe += static_cast<double>(cm.support(k)) * static_cast<double>(cm.predicted(k));
    }
    po /= n;
    pe /= n * n;
    if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

double gmean(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double product = 1.0;
    int m = 0;
    for (int k = 0; k < cm.n_classes; ++k) {
        const auto sup = cm.support(k);
        if (sup == 0) continue;
        const double recall = static_cast<double>(cm.at(k, k)) / static_cast<double>(sup);
        if (recall == 0.0) return 0.0;
        product *= recall;
        ++m;
    }
    return std::pow(product, 1.0 / m);
}

FoldMetrics score_fold(std::span<const int> truth, std::span<const int> pred, int n_classes) {
    FoldMetrics m;
    m.confusion = ConfusionMatrix::from_labels(truth, pred, n_classes);
    m.n_test = truth.size();
    m.f1_weighted = f1_weighted(m.confusion);
    m.f1_macro = f1_macro(m.confusion);
    m.mcc = mcc(m.confusion);
    m.kappa = cohens_kappa(m.confusion);
    m.gmean = gmean(m.confusion);
    m.accuracy = accuracy(m.confusion);
    return m;
}

const std::vector<std::string>& MetricsReport::metric_names() {
    static const std::vector<std::string> names{"f1_weighted", "mcc", "kappa", "gmean", "f1_macro", "accuracy"};
    return names;
}

namespace {

double metric_of(const FoldMetrics& f, const std::string& name) {
    if (name == "f1_weighted") return f.f1_weighted;
    if (name == "f1_macro") return f.f1_macro;
    if (name == "mcc") return f.mcc;
    if (name == "kappa") return f.kappa;
    if (name == "gmean") return f.gmean;
    if (name == "accuracy") return f.accuracy;
    throw EvaluationError("unknown metric '" + name + "'");
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void MetricsReport::summarize() {
    summary.clear();
    if (folds.empty()) return;
    const double n = static_cast<double>(folds.size());
    for (const auto& name : metric_names()) {
        double s = 0.0;
        for (const auto& f : folds) s += metric_of(f, name);
        const double mean = s / n;
        double ss = 0.0;
        for (const auto& f : folds) ss += (metric_of(f, name) - mean) * (metric_of(f, name) - mean);
        summary[name] = {mean, std::sqrt(ss / n)};
    }
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json sum = nlohmann::json::object();
    for (const auto& [name, s] : summary) sum[name] = {{"mean", s.mean}, {"std", s.std}};
    nlohmann::json folds_j = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::json fj{{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"confusion", f.confusion.to_json()},
                          {"rounds", f.rounds.size()},
                          {"info", f.info}};
        for (const auto& name : metric_names()) fj[name] = metric_of(f, name);
        folds_j.push_back(std::move(fj));
    }
    return {{"schema", kReportSchema},
            {"metrics", metric_names()},
            {"config", config},
            {"summary", std::move(sum)},
            {"folds", std::move(folds_j)}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kReportSchema) throw EvaluationError("report json: unsupported schema");
    MetricsReport r;
    r.config = j.at("config");
    for (const auto& [name, s] : j.at("summary").items()) {
        r.summary[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
    }
    for (const auto& fj : j.at("folds")) {
        FoldMetrics f;
        f.fold = fj.at("fold").get<int>();
        f.n_train = fj.at("n_train").get<std::size_t>();
        f.n_test = fj.at("n_test").get<std::size_t>();
        f.f1_weighted = fj.at("f1_weighted").get<double>();
        f.f1_macro = fj.at("f1_macro").get<double>();
        f.mcc = fj.at("mcc").get<double>();
        f.kappa = fj.at("kappa").get<double>();
        f.gmean = fj.at("gmean").get<double>();
        f.accuracy = fj.at("accuracy").get<double>();
        f.confusion = ConfusionMatrix::from_rows(fj.at("confusion").get<std::vector<std::vector<std::int64_t>>>());
        f.info = fj.value("info", nlohmann::json::object());
        r.folds.push_back(std::move(f));
    }
    return r;
}

std::string MetricsReport::to_text_table() const {
    const std::string model = config.value("model", "model");
    const std::string regime = config.value("regime", "regime");
    auto get = [&](const char* k) {
        auto it = summary.find(k);
        return it == summary.end() ? std::string("-") : fixed2(it->second.mean);
    };
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s | %-36s\n", "", regime.c_str());
    out << line;
    std::snprintf(line, sizeof(line), "%-10s | %8s %8s %8s %8s\n", "Model", "F1", "MCC", "Kappa", "G-Mean");
    out << line;
    std::snprintf(line, sizeof(line), "%-10s | %8s %8s %8s %8s\n", model.c_str(), get("f1_weighted").c_str(),
                  get("mcc").c_str(), get("kappa").c_str(), get("gmean").c_str());
    out << line;
    return out.str();
}

MetricsReport run_cv(const Dataset& ds, const PipelineSpec& spec, const Trainer& trainer, int k, std::uint64_t seed,
                     nlohmann::json config) {
    ds.validate();
    const FoldPlan plan = make_stratified_folds(ds, k, derive_seed(seed, "folds"));
    MetricsReport report;
    report.config = std::move(config);
    for (int f = 0; f < k; ++f) {
        const auto train_rows = plan.train_rows(f);
        const auto test_rows = plan.test_rows(f);
        const Dataset train = ds.subset(train_rows);
        const Dataset test = ds.subset(test_rows);
        try {
            FoldContext ctx;
            ctx.fold = f;
            ctx.seed = derive_seed(seed, "fold", static_cast<std::uint64_t>(f));
            ctx.evaluate_holdout = [&test](const Predictor& p) {
                const auto m = score_fold(test.labels, p(test.features), test.n_classes);
                return nlohmann::json{{"f1_weighted", m.f1_weighted}, {"mcc", m.mcc}, {"kappa", m.kappa},
                                      {"gmean", m.gmean}};
            };
            TrainedModel model = trainer(train, spec, ctx);
            FoldMetrics m = score_fold(test.labels, model.predict(test.features), ds.n_classes);
            m.fold = f;
            m.n_train = train.n_rows();
            m.rounds = std::move(model.rounds);
            m.info = std::move(model.info);
            report.folds.push_back(std::move(m));
        } catch (const std::exception& e) {
            throw EvaluationError("fold " + std::to_string(f) + ": " + e.what());
        }
    }
    report.summarize();
    return report;
}

}  // namespace sevfl
