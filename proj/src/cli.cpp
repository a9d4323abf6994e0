#include "sevfl/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "sevfl/seed.hpp"
#include "sevfl/synthesis.hpp"

namespace sevfl {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopKeys{"data",   "label_column", "model",     "regime",    "folds",        "seed",
                                     "output_dir", "pipeline", "hyper",    "federation", "synthesis", "round_metrics", "notes"};
const std::set<std::string> kLinearHyperKeys{"C", "tol", "max_epochs", "fit_intercept"};
const std::set<std::string> kBoostedHyperKeys{"n_rounds", "learning_rate", "max_depth",
                                              "n_bins",   "lambda",        "min_child_weight"};
const std::set<std::string> kFederationKeys{"clients", "rounds", "local_epochs", "scheme", "alpha"};

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + key + "' in " + where);
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open '" + p.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << content;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string default_output_dir() {
    const char* env = std::getenv(kOutputDirEnv);
    return env && *env ? env : "sevfl-out";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, kTopKeys, "config");
    ExperimentConfig c;
    if (j.contains("data")) c.data = get_as<std::string>(j, "data", "config");
    if (j.contains("label_column")) c.label_column = get_as<std::string>(j, "label_column", "config");
    try {
        if (j.contains("model")) c.model = ModelConfig::defaults(parse_model_kind(get_as<std::string>(j, "model", "config")));
        if (j.contains("regime")) c.regime = parse_regime(get_as<std::string>(j, "regime", "config"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("folds")) c.folds = get_as<int>(j, "folds", "config");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir", "config");
    if (j.contains("round_metrics")) c.log_round_metrics = get_as<bool>(j, "round_metrics", "config");
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        reject_unknown(p, {"k", "degree"}, "pipeline");
        if (p.contains("k")) c.pipeline.k = get_as<int>(p, "k", "pipeline");
        if (p.contains("degree")) c.pipeline.degree = get_as<int>(p, "degree", "pipeline");
    }
    if (j.contains("hyper")) {
        const auto& h = j["hyper"];
        if (c.model.kind == ModelKind::Boosted) {
            reject_unknown(h, kBoostedHyperKeys, "hyper (boosted)");
            auto& b = c.model.boosted;
            if (h.contains("n_rounds")) b.n_rounds = get_as<int>(h, "n_rounds", "hyper");
            if (h.contains("learning_rate")) b.learning_rate = get_as<double>(h, "learning_rate", "hyper");
            if (h.contains("max_depth")) b.max_depth = get_as<int>(h, "max_depth", "hyper");
            if (h.contains("n_bins")) b.n_bins = get_as<int>(h, "n_bins", "hyper");
            if (h.contains("lambda")) b.lambda = get_as<double>(h, "lambda", "hyper");
            if (h.contains("min_child_weight")) b.min_child_weight = get_as<double>(h, "min_child_weight", "hyper");
        } else {
            reject_unknown(h, kLinearHyperKeys, "hyper (linear)");
            auto& l = c.model.linear;
            if (h.contains("C")) l.C = get_as<double>(h, "C", "hyper");
            if (h.contains("tol")) l.tol = get_as<double>(h, "tol", "hyper");
            if (h.contains("max_epochs")) l.max_epochs = get_as<int>(h, "max_epochs", "hyper");
            if (h.contains("fit_intercept")) l.fit_intercept = get_as<bool>(h, "fit_intercept", "hyper");
        }
    }
    if (j.contains("federation")) {
        const auto& f = j["federation"];
        reject_unknown(f, kFederationKeys, "federation");
        FederationPlan plan;
        if (f.contains("clients")) plan.n_clients = get_as<int>(f, "clients", "federation");
        if (f.contains("rounds")) plan.rounds = get_as<int>(f, "rounds", "federation");
        if (f.contains("local_epochs")) plan.local_epochs = get_as<int>(f, "local_epochs", "federation");
        if (f.contains("alpha")) plan.alpha = get_as<double>(f, "alpha", "federation");
        if (f.contains("scheme")) {
            try {
                plan.scheme = parse_partition_scheme(get_as<std::string>(f, "scheme", "federation"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        c.federation = plan;
    }
    if (j.contains("synthesis")) {
        const auto& s = j["synthesis"];
        reject_unknown(s, {"size_ratio"}, "synthesis");
        c.synth_size_ratio = s.contains("size_ratio") ? get_as<double>(s, "size_ratio", "synthesis") : 1.0;
    }
    if (c.regime == Regime::Federated && !c.federation) c.federation = FederationPlan{};
    if (c.regime == Regime::Synthetic && !c.synth_size_ratio) c.synth_size_ratio = 1.0;
    return c;
}

void ExperimentConfig::validate() const {
    if (data.empty()) throw ConfigError("no dataset given (--data or \"data\")");
    if (!seed) throw ConfigError("a master seed is required (--seed or \"seed\")");
    if (label_column.empty()) throw ConfigError("label column name is empty");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (pipeline.k < 1) throw ConfigError("pipeline k must be >= 1");
    if (pipeline.degree < 1) throw ConfigError("pipeline degree must be >= 1");
    if (federation.has_value() != (regime == Regime::Federated)) {
        throw ConfigError("federation settings are only valid with --regime federated");
    }
    if (synth_size_ratio.has_value() != (regime == Regime::Synthetic)) {
        throw ConfigError("synthesis settings are only valid with --regime synthetic");
    }
    if (federation) {
        try {
            federation->validate();
        } catch (const FederationError& e) {
            throw ConfigError(e.what());
        }
    }
    if (synth_size_ratio && !(*synth_size_ratio > 0.0)) throw ConfigError("synthesis size_ratio must be positive");
    const auto& l = model.linear;
    if (model.kind != ModelKind::Boosted) {
        if (!(l.C > 0.0) || !(l.tol > 0.0) || l.max_epochs < 0) throw ConfigError("invalid linear hyperparameters");
    } else {
        const auto& b = model.boosted;
        if (b.n_rounds < 0 || b.max_depth < 0 || b.n_bins < 2 || b.n_bins > 65536 || !(b.learning_rate > 0.0) ||
            !(b.lambda >= 0.0) || !(b.min_child_weight >= 0.0)) {
            throw ConfigError("invalid boosted hyperparameters");
        }
    }
}

nlohmann::json ExperimentConfig::echo() const {
    // Same shape as a config file, so a report's config can be fed back to `run --config`.
    nlohmann::json j{{"data", data},
                     {"label_column", label_column},
                     {"model", to_string(model.kind)},
                     {"regime", to_string(regime)},
                     {"folds", folds},
                     {"seed", seed.value_or(0)},
                     {"pipeline", {{"k", pipeline.k}, {"degree", pipeline.degree}}},
                     {"hyper", model.to_json()["hyper"]},
                     {"round_metrics", log_round_metrics}};
    nlohmann::json notes{{"fold_scheme", "stratified"},
                         {"pipeline", "median/IQR scaling, ANOVA-F top-k, polynomial without bias, refit per fold"},
                         {"f1_average", "weighted (f1_macro reported alongside)"}};
    if (federation) {
        j["federation"] = {{"clients", federation->n_clients},
                           {"rounds", federation->rounds},
                           {"local_epochs", federation->local_epochs},
                           {"scheme", to_string(federation->scheme)},
                           {"alpha", federation->alpha}};
        if (model.kind == ModelKind::Boosted) {
            notes["aggregation"] = to_string(Aggregation::HistogramSum);
            notes["federated_rounds"] = "boosting rounds follow hyper.n_rounds";
        } else {
            notes["aggregation"] = to_string(Aggregation::FedAvgParams);
        }
    }
    if (synth_size_ratio) {
        j["synthesis"] = {{"size_ratio", *synth_size_ratio}};
        notes["generator"] = "class-conditional gaussian copula";
    }
    j["notes"] = std::move(notes);
    return j;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
    cfg.validate();
    RegimeConfig rc;
    rc.regime = cfg.regime;
    if (cfg.federation) rc.federation = *cfg.federation;
    rc.log_round_metrics = cfg.log_round_metrics;
    if (cfg.synth_size_ratio) rc.synth_size_ratio = *cfg.synth_size_ratio;
    return run_cv(ds, cfg.pipeline, make_trainer(cfg.model, rc), cfg.folds, *cfg.seed, cfg.echo());
}

BaselineRow parse_baseline(const std::string& spec) {
    // "Name:f1=0.54,mcc=0.21"
    const auto colon = spec.find(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("baseline must look like 'Name:f1=0.54,mcc=0.21'");
    BaselineRow row;
    row.name = spec.substr(0, colon);
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("baseline entry '" + item + "' lacks '='");
        std::string key = item.substr(0, eq);
        if (key == "f1") key = "f1_weighted";
        if (key == "g-mean" || key == "g_mean") key = "gmean";
        const auto& names = MetricsReport::metric_names();
        if (std::find(names.begin(), names.end(), key) == names.end()) {
            throw ConfigError("baseline metric '" + key + "' is unknown");
        }
        try {
            row.values[key] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("baseline value in '" + item + "' is not a number");
        }
    }
    return row;
}

namespace {

std::string group_of(const nlohmann::json& config) {
    std::string g = config.value("regime", "unknown");
    if (g == "federated" && config.contains("federation")) {
        g += " (" + config["federation"].value("scheme", "?") + ")";
    }
    return g;
}

int group_rank(const std::string& g) {
    if (g == "centralized") return 0;
    if (g.rfind("federated", 0) == 0) return 1;
    if (g == "synthetic") return 2;
    return 3;
}

const std::vector<std::pair<std::string, std::string>> kTableMetrics{
    {"f1_weighted", "F1"}, {"mcc", "MCC"}, {"kappa", "Kappa"}, {"gmean", "G-Mean"}};

}  // namespace

ComparisonTable build_table(const std::vector<MetricsReport>& reports, const std::vector<BaselineRow>& baselines) {
    if (reports.empty()) throw DataError("table: no reports given");
    ComparisonTable t;
    for (const auto& [key, _] : kTableMetrics) t.metrics.push_back(key);

    std::set<std::string> reference;
    for (const auto& [name, _] : reports.front().summary) reference.insert(name);
    for (const auto& r : reports) {
        std::set<std::string> names;
        for (const auto& [name, _] : r.summary) names.insert(name);
        if (names != reference) throw DataError("table: reports carry different metric sets");
        for (const auto& m : t.metrics) {
            if (!names.count(m)) throw DataError("table: report lacks metric '" + m + "'");
        }
        const std::string model = r.config.value("model", "unknown");
        const std::string group = group_of(r.config);
        if (std::find(t.rows.begin(), t.rows.end(), model) == t.rows.end()) t.rows.push_back(model);
        if (std::find(t.groups.begin(), t.groups.end(), group) == t.groups.end()) t.groups.push_back(group);
        auto& cell = t.cells[{model, group}];
        if (!cell.empty()) throw DataError("table: two reports for " + model + " / " + group);
        for (const auto& m : t.metrics) cell[m] = r.summary.at(m).mean;
    }
    std::stable_sort(t.groups.begin(), t.groups.end(),
                     [](const std::string& a, const std::string& b) { return group_rank(a) < group_rank(b); });
    for (const auto& b : baselines) {
        if (std::find(t.rows.begin(), t.rows.end(), b.name) != t.rows.end()) {
            throw DataError("table: baseline name '" + b.name + "' collides with a model");
        }
        t.rows.push_back(b.name);
        // Literal values sit under the first (reference) regime group.
        t.cells[{b.name, t.groups.front()}] = b.values;
    }
    return t;
}

std::string ComparisonTable::to_text() const {
    std::size_t name_w = 5;
    for (const auto& r : rows) name_w = std::max(name_w, r.size());
    const std::size_t group_w = 7 * metrics.size();
    std::ostringstream out;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    auto lpad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.insert(0, w - s.size(), ' ');
        return s;
    };
    out << pad("", name_w);
    for (const auto& g : groups) out << " | " << pad(g, group_w);
    out << '\n' << pad("Model", name_w);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        out << " | ";
        std::string hdr;
        for (const auto& [key, label] : kTableMetrics) hdr += lpad(label, 7);
        out << pad(hdr, group_w);
    }
    out << '\n';
    for (const auto& r : rows) {
        out << pad(r, name_w);
        for (const auto& g : groups) {
            out << " | ";
            auto it = cells.find({r, g});
            std::string line;
            for (const auto& m : metrics) {
                std::string v = "-";
                if (it != cells.end()) {
                    auto mv = it->second.find(m);
                    if (mv != it->second.end()) v = fixed2(mv->second);
                }
                line += lpad(v, 7);
            }
            out << pad(line, group_w);
        }
        out << '\n';
    }
    return out.str();
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream out;
    out << "model";
    for (const auto& g : groups) {
        for (const auto& m : metrics) out << ',' << g << ':' << m;
    }
    out << '\n';
    for (const auto& r : rows) {
        out << r;
        for (const auto& g : groups) {
            auto it = cells.find({r, g});
            for (const auto& m : metrics) {
                out << ',';
                if (it != cells.end()) {
                    auto mv = it->second.find(m);
                    if (mv != it->second.end()) out << fixed2(mv->second);
                }
            }
        }
        out << '\n';
    }
    return out.str();
}

namespace {

struct RunFlags {
    std::string config_path;
    std::optional<std::string> data, label, model, regime, out, scheme;
    std::optional<int> folds, k, degree, clients, rounds, local_epochs, max_epochs, n_rounds, max_depth, n_bins;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha, size_ratio, C, tol, learning_rate, lambda, min_child_weight;
    bool no_round_metrics = false;
};

nlohmann::json merge_flags(const RunFlags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config_path.empty()) {
        try {
            j = nlohmann::json::parse(read_file(f.config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config '" + f.config_path + "' is not valid JSON: " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
    }
    if (f.data) j["data"] = *f.data;
    if (f.label) j["label_column"] = *f.label;
    if (f.model) {
        // A different model invalidates hyperparameters written for the old one.
        if (j.contains("model") && j["model"] != *f.model) j.erase("hyper");
        j["model"] = *f.model;
    }
    if (f.regime) j["regime"] = *f.regime;
    if (f.out) j["output_dir"] = *f.out;
    if (f.folds) j["folds"] = *f.folds;
    if (f.seed) j["seed"] = *f.seed;
    if (f.k) j["pipeline"]["k"] = *f.k;
    if (f.degree) j["pipeline"]["degree"] = *f.degree;
    if (f.clients) j["federation"]["clients"] = *f.clients;
    if (f.rounds) j["federation"]["rounds"] = *f.rounds;
    if (f.local_epochs) j["federation"]["local_epochs"] = *f.local_epochs;
    if (f.scheme) j["federation"]["scheme"] = *f.scheme;
    if (f.alpha) j["federation"]["alpha"] = *f.alpha;
    if (f.size_ratio) j["synthesis"]["size_ratio"] = *f.size_ratio;
    if (f.C) j["hyper"]["C"] = *f.C;
    if (f.tol) j["hyper"]["tol"] = *f.tol;
    if (f.max_epochs) j["hyper"]["max_epochs"] = *f.max_epochs;
    if (f.n_rounds) j["hyper"]["n_rounds"] = *f.n_rounds;
    if (f.learning_rate) j["hyper"]["learning_rate"] = *f.learning_rate;
    if (f.max_depth) j["hyper"]["max_depth"] = *f.max_depth;
    if (f.n_bins) j["hyper"]["n_bins"] = *f.n_bins;
    if (f.lambda) j["hyper"]["lambda"] = *f.lambda;
    if (f.min_child_weight) j["hyper"]["min_child_weight"] = *f.min_child_weight;
    if (f.no_round_metrics) j["round_metrics"] = false;
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
    ExperimentConfig cfg = ExperimentConfig::from_json(merge_flags(flags));
    cfg.validate();
    if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir();

    const auto started = std::chrono::steady_clock::now();
    const Dataset ds = load_dataset(cfg.data, CsvOptions{cfg.label_column, true});
    const MetricsReport report = run_experiment(cfg, ds);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "report.json", report.to_json().dump(2) + "\n");
    write_file(dir / "report.txt", report.to_text_table());
    if (cfg.regime == Regime::Federated) {
        std::string lines;
        for (const auto& f : report.folds) {
            for (const auto& r : f.rounds) {
                auto j = to_json(r);
                j["fold"] = f.fold;
                lines += j.dump() + "\n";
            }
        }
        write_file(dir / "rounds.jsonl", lines);
    }
    write_file(dir / "metadata.json",
               nlohmann::json{{"created_utc", utc_timestamp()}, {"wall_seconds", seconds}, {"tool", "sevfl"}}.dump(2) +
                   "\n");
    out << report.to_text_table();
    out << "report written to " << (dir / "report.json").string() << '\n';
    return kExitOk;
}

struct SynthFlags {
    std::string data;
    std::string label = kDefaultLabelColumn;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string fidelity;
    std::string model_json;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    if (f.data.empty()) throw ConfigError("synth: --data is required");
    if (!f.seed) throw ConfigError("synth: --seed is required");
    if (f.out.empty()) throw ConfigError("synth: --out is required");
    if (f.n && *f.n == 0) throw ConfigError("synth: --n must be >= 1");
    const Dataset real = load_dataset(f.data, CsvOptions{f.label, true});
    const CopulaModel model = fit_copula(real, derive_seed(*f.seed, "copula"));
    const Dataset synth = sample_copula(model, f.n.value_or(real.n_rows()), derive_seed(*f.seed, "copula-sample"));
    write_dataset(f.out, synth, f.label);
    const FidelityReport fid = fidelity_report(real, synth);
    const std::string fid_path = f.fidelity.empty() ? f.out + ".fidelity.json" : f.fidelity;
    write_file(fid_path, fid.to_json().dump(2) + "\n");
    if (!f.model_json.empty()) write_file(f.model_json, model.to_json().dump() + "\n");
    out << "wrote " << synth.n_rows() << " synthetic rows to " << f.out << '\n';
    out << "max KS " << fid.max_ks << ", max correlation diff " << fid.max_correlation_diff
        << ", class proportion L1 " << fid.class_proportion_l1 << '\n';
    return kExitOk;
}

int cmd_table(const std::vector<std::string>& paths, const std::vector<std::string>& baselines,
              const std::string& csv, std::ostream& out) {
    std::vector<BaselineRow> rows;
    for (const auto& b : baselines) rows.push_back(parse_baseline(b));
    std::vector<MetricsReport> reports;
    for (const auto& p : paths) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(p));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("report '" + p + "' is not valid JSON");
        }
        reports.push_back(MetricsReport::from_json(j));
    }
    const ComparisonTable t = build_table(reports, rows);
    out << t.to_text();
    if (!csv.empty()) write_file(csv, t.to_csv());
    return kExitOk;
}

int cmd_inspect(const std::string& path, const std::string& label, std::optional<int> folds,
                std::optional<std::uint64_t> seed, std::ostream& out) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        const auto j = nlohmann::json::parse(read_file(path));
        const auto report = MetricsReport::from_json(j);
        out << report.to_text_table();
        for (const auto& [name, s] : report.summary) out << name << ": " << s.mean << " +/- " << s.std << '\n';
        return kExitOk;
    }
    const Dataset ds = load_dataset(path, CsvOptions{label, true});
    out << "rows: " << ds.n_rows() << "\nfeatures: " << ds.n_features() << "\nclass counts:";
    for (auto c : ds.class_counts()) out << ' ' << c;
    out << '\n';
    if (folds) {
        const auto plan = make_stratified_folds(ds, *folds, derive_seed(seed.value_or(0), "folds"));
        for (int f = 0; f < *folds; ++f) out << "fold " << f << ": " << plan.test_rows(f).size() << " test rows\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bug-severity classifiers under centralized, federated and synthetic-data training"};
    app.require_subcommand(1);

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Cross-validate one model under one training regime");
    run->add_option("--config", rf.config_path, "JSON experiment config (flags override it)");
    run->add_option("--data", rf.data, "Metrics CSV");
    run->add_option("--label", rf.label, "Label column (default: severity)");
    run->add_option("--model", rf.model, "svm | pac | boosted");
    run->add_option("--regime", rf.regime, "centralized | federated | synthetic");
    run->add_option("--folds", rf.folds, "Cross-validation folds (default 5)");
    run->add_option("--seed", rf.seed, "Master seed (required)");
    run->add_option("--out", rf.out, std::string("Output directory (default $") + kOutputDirEnv + " or sevfl-out)");
    run->add_option("--k", rf.k, "Features kept by the selector (default 9)");
    run->add_option("--degree", rf.degree, "Polynomial degree (default 3)");
    run->add_option("--clients", rf.clients, "Federated clients (default 3)");
    run->add_option("--rounds", rf.rounds, "Federation rounds for linear models (default 20)");
    run->add_option("--local-epochs", rf.local_epochs, "Local epochs per round (default 1)");
    run->add_option("--scheme", rf.scheme, "iid | dirichlet");
    run->add_option("--alpha", rf.alpha, "Dirichlet concentration (default 1.0)");
    run->add_option("--size-ratio", rf.size_ratio, "Synthetic rows per real training row (default 1.0)");
    run->add_option("--C", rf.C, "Linear models: C");
    run->add_option("--tol", rf.tol, "Linear models: tolerance");
    run->add_option("--max-epochs", rf.max_epochs, "Linear models: epoch budget");
    run->add_option("--n-rounds", rf.n_rounds, "Boosted: rounds");
    run->add_option("--learning-rate", rf.learning_rate, "Boosted: learning rate");
    run->add_option("--max-depth", rf.max_depth, "Boosted: depth limit");
    run->add_option("--n-bins", rf.n_bins, "Boosted: histogram bins");
    run->add_option("--lambda", rf.lambda, "Boosted: L2 penalty on leaves");
    run->add_option("--min-child-weight", rf.min_child_weight, "Boosted: minimum hessian per child");
    run->add_flag("--no-round-metrics", rf.no_round_metrics, "Skip per-round held-out metrics in round logs");

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "Fit a Gaussian copula and write a synthetic CSV");
    synth->add_option("--data", sf.data, "Input metrics CSV");
    synth->add_option("--label", sf.label, "Label column (default: severity)");
    synth->add_option("--n", sf.n, "Rows to sample (default: input size)");
    synth->add_option("--seed", sf.seed, "Seed (required)");
    synth->add_option("--out", sf.out, "Output CSV");
    synth->add_option("--fidelity", sf.fidelity, "Fidelity JSON path (default <out>.fidelity.json)");
    synth->add_option("--model-json", sf.model_json, "Also write the fitted copula as JSON");

    std::vector<std::string> table_paths;
    std::vector<std::string> baselines;
    std::string table_csv;
    auto* table = app.add_subcommand("table", "Merge reports into one comparison table");
    table->add_option("reports", table_paths, "report.json files")->required();
    table->add_option("--baseline", baselines, "Literal row, e.g. 'Baseline Model:f1=0.54,mcc=0.21'");
    table->add_option("--csv", table_csv, "Also write the table as CSV");

    std::string inspect_path;
    std::string inspect_label = kDefaultLabelColumn;
    std::optional<int> inspect_folds;
    std::optional<std::uint64_t> inspect_seed;
    auto* inspect = app.add_subcommand("inspect", "Summarize a dataset CSV or a report JSON");
    inspect->add_option("path", inspect_path, "CSV or report.json")->required();
    inspect->add_option("--label", inspect_label, "Label column (default: severity)");
    inspect->add_option("--folds", inspect_folds, "Also show stratified fold sizes");
    inspect->add_option("--seed", inspect_seed, "Seed for the fold preview");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(rf, out);
        if (synth->parsed()) return cmd_synth(sf, out);
        if (table->parsed()) return cmd_table(table_paths, baselines, table_csv, out);
        if (inspect->parsed()) return cmd_inspect(inspect_path, inspect_label, inspect_folds, inspect_seed, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDataError;
    }
    return kExitConfigError;
}

}  // namespace sevfl
