#pragma once

// In-process federated learning simulation.
//
// Clients own their rows. The server only ever receives ParamVector updates,
// gradient histograms, feature sketches and bin acknowledgements; its
// receive() overload set admits nothing else.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sevfl/boosted.hpp"
#include "sevfl/data.hpp"
#include "sevfl/models.hpp"

namespace sevfl {

class FederationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Aggregation { FedAvgParams, HistogramSum };

struct FederationPlan {
    int n_clients = 3;
    int rounds = 20;
    int local_epochs = 1;
    PartitionScheme scheme = PartitionScheme::IID;
    double alpha = 1.0;
    Aggregation aggregation = Aggregation::FedAvgParams;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RoundLog {
    int round = 0;
    std::vector<std::size_t> client_samples;
    std::uint64_t checksum = 0;  // FNV-1a over the aggregated state
    std::optional<nlohmann::json> metrics;
};

nlohmann::json to_json(const RoundLog& log);
std::string to_jsonl(std::span<const RoundLog> logs);

/// Sample-weighted elementwise mean, summed in client order.
ParamVector fedavg(std::span<const ParamVector> params);

/// Bin agreement token a client returns after receiving the shared bins.
struct BinAck {
    std::uint64_t fingerprint = 0;
};

std::uint64_t fingerprint(const BinMapper& bins);
std::uint64_t checksum(std::span<const double> values);

enum class MessageKind { Params, Histograms, Sketch, BinAck };

struct MessageRecord {
    MessageKind kind;
    int client;
    std::size_t payload_values;
};

class AggregationServer {
public:
    explicit AggregationServer(int n_clients);

    void receive(int client, ParamVector update);
    void receive(int client, std::vector<GradientHistogram> histograms);
    void receive(int client, std::vector<FeatureSketch> sketch);
    void receive(int client, BinAck ack);

    /// Barrier: every client must have reported since the last aggregation.
    ParamVector aggregate_params();
    std::vector<GradientHistogram> aggregate_histograms(std::size_t n_features, std::size_t n_bins);
    BinMapper build_bins(int n_bins);
    void verify_bins(const BinMapper& bins);

    const std::vector<MessageRecord>& audit() const { return audit_; }
    int n_clients() const { return n_clients_; }

private:
    void check_client(int client) const;
    template <typename T>
    std::vector<T> drain(std::map<int, T>& inbox, const char* what);

    int n_clients_;
    std::map<int, ParamVector> params_;
    std::map<int, std::vector<GradientHistogram>> histograms_;
    std::map<int, std::vector<FeatureSketch>> sketches_;
    std::map<int, BinAck> acks_;
    std::vector<MessageRecord> audit_;
};

class FederatedClient {
public:
    FederatedClient(int id, Dataset local);

    int id() const { return id_; }
    std::size_t n_rows() const { return data_.n_rows(); }

    /// Trains `epochs` local epochs from the global model and exports the result.
    ParamVector local_update(const LinearModelState& global, int epochs, std::uint64_t seed) const;

    std::vector<FeatureSketch> sketch(std::size_t max_entries) const;
    BinAck accept_bins(const BinMapper& bins);
    HistogramParticipant& participant();

private:
    int id_;
    Dataset data_;
    std::optional<LocalHistogramParticipant> boosting_;
};

std::vector<FederatedClient> make_clients(const Dataset& train, const ClientPartition& partition);
ClientPartition make_partition(const Dataset& train, const FederationPlan& plan);

using RoundEval = std::function<nlohmann::json(const ModelState&)>;

struct FederatedLinearResult {
    LinearModelState model;
    std::vector<RoundLog> rounds;
    std::vector<MessageRecord> audit;
};

/// Local seed for (round, client): hyper.seed + round * n_clients + client.
FederatedLinearResult run_federated_linear(std::span<const FederatedClient> clients, int n_classes,
                                           std::size_t n_features, const FederationPlan& plan, ModelKind kind,
                                           const LinearHyper& hyper, const RoundEval& eval = {});
FederatedLinearResult run_federated_linear(const Dataset& train, const FederationPlan& plan, ModelKind kind,
                                           const LinearHyper& hyper, const RoundEval& eval = {});

struct FederatedBoostedResult {
    BoostedTreesState model;
    std::vector<RoundLog> rounds;
    std::vector<MessageRecord> audit;
};

/// Bins come from `shared_bins` when given, otherwise from server-merged client sketches.
FederatedBoostedResult run_federated_boosted(std::span<FederatedClient> clients, int n_classes,
                                             std::size_t n_features, const BoostedHyper& hyper,
                                             const BinMapper* shared_bins = nullptr, const RoundEval& eval = {});
FederatedBoostedResult run_federated_boosted(const Dataset& train, const FederationPlan& plan,
                                             const BoostedHyper& hyper, const RoundEval& eval = {});

std::string to_string(Aggregation a);
std::string to_string(MessageKind k);

}  // namespace sevfl
