#include "sevfl/federation.hpp"

#include <bit>
#include <cstring>
#include <numeric>

#include "sevfl/seed.hpp"

namespace sevfl {

void FederationPlan::validate() const {
    if (n_clients < 1) throw FederationError("federation: n_clients must be >= 1");
    if (rounds < 1) throw FederationError("federation: rounds must be >= 1");
    if (local_epochs < 1) throw FederationError("federation: local_epochs must be >= 1");
    if (scheme == PartitionScheme::Dirichlet && !(alpha > 0.0)) {
        throw FederationError("federation: Dirichlet alpha must be positive");
    }
}

std::string to_string(Aggregation a) { return a == Aggregation::FedAvgParams ? "fedavg_params" : "histogram_sum"; }

std::string to_string(MessageKind k) {
    switch (k) {
        case MessageKind::Params: return "params";
        case MessageKind::Histograms: return "histograms";
        case MessageKind::Sketch: return "sketch";
        case MessageKind::BinAck: return "bin_ack";
    }
    return "?";
}

nlohmann::json to_json(const RoundLog& log) {
    nlohmann::json j{{"round", log.round}, {"client_samples", log.client_samples}, {"checksum", log.checksum}};
    if (log.metrics) j["metrics"] = *log.metrics;
    return j;
}

std::string to_jsonl(std::span<const RoundLog> logs) {
    std::string out;
    for (const auto& l : logs) {
        out += to_json(l).dump();
        out += '\n';
    }
    return out;
}

std::uint64_t checksum(std::span<const double> values) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

std::uint64_t fingerprint(const BinMapper& bins) {
    std::vector<double> flat{static_cast<double>(bins.n_bins())};
    for (std::size_t f = 0; f < bins.n_features(); ++f) {
        flat.push_back(static_cast<double>(bins.cuts(f).size()));
        flat.insert(flat.end(), bins.cuts(f).begin(), bins.cuts(f).end());
    }
    return checksum(flat);
}

ParamVector fedavg(std::span<const ParamVector> params) {
    if (params.empty()) throw FederationError("fedavg: no client updates");
    const auto& first = params.front();
    double total = 0.0;
    for (const auto& p : params) {
        if (p.shape != first.shape || p.values.size() != first.values.size() ||
            p.values.size() != p.expected_size()) {
            throw FederationError("fedavg: parameter shape mismatch between clients");
        }
        if (!(p.sample_weight >= 0.0)) throw FederationError("fedavg: negative sample weight");
        total += p.sample_weight;
    }
    if (!(total > 0.0)) throw FederationError("fedavg: total sample weight is zero");

    ParamVector out;
    out.shape = first.shape;
    out.sample_weight = total;
    const double w0 = first.sample_weight / total;
    out.values.resize(first.values.size());
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] = w0 * first.values[j];
    for (std::size_t c = 1; c < params.size(); ++c) {
        const double w = params[c].sample_weight / total;
        for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += w * params[c].values[j];
    }
    return out;
}

AggregationServer::AggregationServer(int n_clients) : n_clients_(n_clients) {
    if (n_clients < 1) throw FederationError("server: n_clients must be >= 1");
}

void AggregationServer::check_client(int client) const {
    if (client < 0 || client >= n_clients_) {
        throw FederationError("server: unknown client " + std::to_string(client));
    }
}

template <typename T>
std::vector<T> AggregationServer::drain(std::map<int, T>& inbox, const char* what) {
    if (static_cast<int>(inbox.size()) != n_clients_) {
        throw FederationError(std::string("server: ") + what + " from " + std::to_string(inbox.size()) + " of " +
                              std::to_string(n_clients_) + " clients; waiting for all");
    }
    std::vector<T> out;
    out.reserve(inbox.size());
    for (auto& [client, msg] : inbox) out.push_back(std::move(msg));  // client-index order
    inbox.clear();
    return out;
}

void AggregationServer::receive(int client, ParamVector update) {
    check_client(client);
    audit_.push_back({MessageKind::Params, client, update.values.size()});
    params_[client] = std::move(update);
}

void AggregationServer::receive(int client, std::vector<GradientHistogram> histograms) {
    check_client(client);
    std::size_t n = 0;
    for (const auto& h : histograms) n += h.grad.size() + h.hess.size();
    audit_.push_back({MessageKind::Histograms, client, n});
    histograms_[client] = std::move(histograms);
}

void AggregationServer::receive(int client, std::vector<FeatureSketch> sketch) {
    check_client(client);
    std::size_t n = 0;
    for (const auto& s : sketch) n += s.values.size() + s.weights.size();
    audit_.push_back({MessageKind::Sketch, client, n});
    sketches_[client] = std::move(sketch);
}

void AggregationServer::receive(int client, BinAck ack) {
    check_client(client);
    audit_.push_back({MessageKind::BinAck, client, 1});
    acks_[client] = ack;
}

ParamVector AggregationServer::aggregate_params() {
    auto updates = drain(params_, "parameter updates");
    return fedavg(updates);
}

std::vector<GradientHistogram> AggregationServer::aggregate_histograms(std::size_t n_features, std::size_t n_bins) {
    auto parts = drain(histograms_, "histograms");
    return sum_histograms(parts, n_features, n_bins);
}

BinMapper AggregationServer::build_bins(int n_bins) {
    auto parts = drain(sketches_, "sketches");
    return BinMapper::from_sketches(merge_sketches(parts), n_bins);
}

void AggregationServer::verify_bins(const BinMapper& bins) {
    const auto expected = fingerprint(bins);
    auto acks = drain(acks_, "bin acknowledgements");
    for (std::size_t c = 0; c < acks.size(); ++c) {
        if (acks[c].fingerprint != expected) {
            throw FederationError("server: client " + std::to_string(c) + " holds different bin edges");
        }
    }
}

FederatedClient::FederatedClient(int id, Dataset local) : id_(id), data_(std::move(local)) {
    if (data_.n_rows() == 0) throw FederationError("client " + std::to_string(id) + " has no rows");
}

ParamVector FederatedClient::local_update(const LinearModelState& global, int epochs, std::uint64_t seed) const {
    auto local = continue_training(global, data_.features, data_.labels, epochs, seed);
    return export_params(local, static_cast<double>(data_.n_rows()));
}

std::vector<FeatureSketch> FederatedClient::sketch(std::size_t max_entries) const {
    return sketch_features(data_.features, max_entries);
}

BinAck FederatedClient::accept_bins(const BinMapper& bins) {
    const std::vector<double> base(static_cast<std::size_t>(data_.n_classes), 0.0);
    boosting_.emplace(data_.features, data_.labels, data_.n_classes, bins, base);
    return {fingerprint(bins)};
}

HistogramParticipant& FederatedClient::participant() {
    if (!boosting_) throw FederationError("client " + std::to_string(id_) + " has not accepted bins");
    return *boosting_;
}

std::vector<FederatedClient> make_clients(const Dataset& train, const ClientPartition& partition) {
    std::vector<FederatedClient> clients;
    clients.reserve(partition.n_clients());
    for (std::size_t c = 0; c < partition.n_clients(); ++c) {
        clients.emplace_back(static_cast<int>(c), train.subset(partition.row_indices[c]));
    }
    return clients;
}

ClientPartition make_partition(const Dataset& train, const FederationPlan& plan) {
    std::vector<std::size_t> rows(train.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    const auto seed = derive_seed(plan.seed, "partition");
    if (plan.scheme == PartitionScheme::IID) return partition_iid(rows, train.labels, plan.n_clients, seed);
    return partition_dirichlet(rows, train.labels, plan.n_clients, plan.alpha, seed);
}

namespace {

std::vector<std::size_t> sample_counts(std::span<const FederatedClient> clients) {
    std::vector<std::size_t> out;
    for (const auto& c : clients) out.push_back(c.n_rows());
    return out;
}

std::vector<double> flatten(const std::vector<Tree>& trees) {
    std::vector<double> flat;
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
            flat.push_back(static_cast<double>(n.feature));
            flat.push_back(n.threshold);
            flat.push_back(n.weight);
        }
    }
    return flat;
}

}  // namespace

FederatedLinearResult run_federated_linear(std::span<const FederatedClient> clients, int n_classes,
                                           std::size_t n_features, const FederationPlan& plan, ModelKind kind,
                                           const LinearHyper& hyper, const RoundEval& eval) {
    plan.validate();
    if (kind == ModelKind::Boosted) throw FederationError("federation: boosted models use histogram aggregation");
    if (clients.empty()) throw FederationError("federation: no clients");
    const auto lk = kind == ModelKind::Svm ? LinearKind::SquaredHingeSVM : LinearKind::PassiveAggressive;

    AggregationServer server(static_cast<int>(clients.size()));
    FederatedLinearResult result;
    LinearModelState global = LinearModelState::zeros(lk, n_classes, n_features, hyper);
    const auto counts = sample_counts(clients);
    const auto n = static_cast<std::uint64_t>(clients.size());
    for (int r = 0; r < plan.rounds; ++r) {
        for (const auto& client : clients) {
            const std::uint64_t seed = hyper.seed + static_cast<std::uint64_t>(r) * n +
                                       static_cast<std::uint64_t>(client.id());
            server.receive(client.id(), client.local_update(global, plan.local_epochs, seed));
        }
        const ParamVector avg = server.aggregate_params();
        global = import_params(global, avg);
        RoundLog log{r, counts, checksum(avg.values), std::nullopt};
        if (eval) log.metrics = eval(ModelState{global});
        result.rounds.push_back(std::move(log));
    }
    global.epochs_run = plan.rounds * plan.local_epochs;
    result.model = std::move(global);
    result.audit = server.audit();
    return result;
}

FederatedLinearResult run_federated_linear(const Dataset& train, const FederationPlan& plan, ModelKind kind,
                                           const LinearHyper& hyper, const RoundEval& eval) {
    plan.validate();
    const auto clients = make_clients(train, make_partition(train, plan));
    return run_federated_linear(clients, train.n_classes, train.n_features(), plan, kind, hyper, eval);
}

FederatedBoostedResult run_federated_boosted(std::span<FederatedClient> clients, int n_classes,
                                             std::size_t n_features, const BoostedHyper& hyper,
                                             const BinMapper* shared_bins, const RoundEval& eval) {
    if (clients.empty()) throw FederationError("federation: no clients");
    AggregationServer server(static_cast<int>(clients.size()));

    BinMapper bins;
    if (shared_bins) {
        bins = *shared_bins;
    } else {
        for (const auto& c : clients) server.receive(c.id(), c.sketch(sketch_entries(hyper.n_bins)));
        bins = server.build_bins(hyper.n_bins);
    }
    for (auto& c : clients) server.receive(c.id(), c.accept_bins(bins));
    server.verify_bins(bins);

    std::vector<HistogramParticipant*> parts;
    for (auto& c : clients) parts.push_back(&c.participant());
    HistogramAggregator via_server = [&](std::vector<std::vector<GradientHistogram>> per_client) {
        for (std::size_t c = 0; c < per_client.size(); ++c) {
            server.receive(clients[c].id(), std::move(per_client[c]));
        }
        return server.aggregate_histograms(n_features, static_cast<std::size_t>(hyper.n_bins));
    };

    FederatedBoostedResult result;
    const auto counts = sample_counts(clients);
    // The partial ensemble is only materialized when a per-round evaluation is requested.
    BoostedTreesState partial;
    if (eval) {
        partial.n_classes = n_classes;
        partial.n_features = n_features;
        partial.hyper = hyper;
        partial.base_score.assign(static_cast<std::size_t>(n_classes), 0.0);
        partial.bins = bins;
    }
    BoostRoundHook hook = [&](int round, const std::vector<Tree>& trees) {
        RoundLog log{round, counts, checksum(flatten(trees)), std::nullopt};
        if (eval) {
            partial.rounds.push_back(trees);
            log.metrics = eval(ModelState{partial});
        }
        result.rounds.push_back(std::move(log));
    };
    result.model = grow_ensemble(parts, n_classes, n_features, bins, hyper, hook, via_server);
    result.audit = server.audit();
    return result;
}

FederatedBoostedResult run_federated_boosted(const Dataset& train, const FederationPlan& plan,
                                             const BoostedHyper& hyper, const RoundEval& eval) {
    plan.validate();
    auto clients = make_clients(train, make_partition(train, plan));
    return run_federated_boosted(clients, train.n_classes, train.n_features(), hyper, nullptr, eval);
}

}  // namespace sevfl
