#pragma once

// Tabular dataset loading, stratified folds and client partitioning.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sevfl/matrix.hpp"

namespace sevfl {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    int n_classes = 4;

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_features() const { return features.cols(); }

    /// Throws DataError if any invariant is broken.
    void validate() const;

    std::vector<std::size_t> class_counts() const;
    Dataset subset(std::span<const std::size_t> rows) const;
};

inline constexpr const char* kDefaultLabelColumn = "severity";

struct CsvOptions {
    std::string label_column = kDefaultLabelColumn;
    // Labels must lie in {0,1,2,3}; otherwise n_classes = max label + 1.
    bool strict_severity = true;
};

Dataset load_dataset(const std::filesystem::path& path, const CsvOptions& opts = {});
Dataset parse_dataset(const std::string& csv_text, const CsvOptions& opts = {});

/// Features in column order followed by the label column. Numbers use the
/// shortest round-trip representation so the output is byte-stable.
std::string format_dataset_csv(const Dataset& ds, const std::string& label_column = kDefaultLabelColumn);
void write_dataset(const std::filesystem::path& path, const Dataset& ds,
                   const std::string& label_column = kDefaultLabelColumn);

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignments;  // per-row fold index

    std::vector<std::size_t> test_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
};

FoldPlan make_stratified_folds(std::span<const int> labels, int n_classes, int k, std::uint64_t seed);
inline FoldPlan make_stratified_folds(const Dataset& ds, int k, std::uint64_t seed) {
    return make_stratified_folds(ds.labels, ds.n_classes, k, seed);
}

enum class PartitionScheme { IID, Dirichlet };

struct ClientPartition {
    PartitionScheme scheme = PartitionScheme::IID;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> row_indices;  // sorted, one list per client

    std::size_t n_clients() const { return row_indices.size(); }
};

/// `labels` is indexed by row id; `rows` selects which rows take part.
ClientPartition partition_iid(std::span<const std::size_t> rows, std::span<const int> labels,
                              int n_clients, std::uint64_t seed);
ClientPartition partition_dirichlet(std::span<const std::size_t> rows, std::span<const int> labels,
                                    int n_clients, double alpha, std::uint64_t seed);

/// Integer counts summing to `total`, proportional to `weights`, using
/// largest-remainder rounding. Ties in the remainder go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights);

std::string to_string(PartitionScheme s);
PartitionScheme parse_partition_scheme(const std::string& s);

nlohmann::json to_json(const FoldPlan& plan);
nlohmann::json to_json(const ClientPartition& part);

}  // namespace sevfl
