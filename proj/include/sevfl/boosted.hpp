#pragma once

// Histogram gradient-boosted trees with a softmax objective.
//
// Tree growth is split between a coordinator that only sees per-node
// gradient/hessian histograms and participants that own rows. Centralized
// training is the one-participant case of the same protocol, so the
// federated ensemble can be checked against it directly.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "sevfl/linear.hpp"
#include "sevfl/matrix.hpp"

namespace sevfl {

struct BoostedHyper {
    int n_rounds = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    int n_bins = 256;
    double lambda = 1.0;
    double min_child_weight = 1.0;

    bool operator==(const BoostedHyper&) const = default;
};

/// Weighted summary of one feature's values: sorted distinct values and the
/// number of rows each stands for. Summaries of large columns are compressed
/// to at most `max_entries` points at evenly spaced ranks.
struct FeatureSketch {
    std::vector<double> values;
    std::vector<double> weights;

    bool operator==(const FeatureSketch&) const = default;
};

std::vector<FeatureSketch> sketch_features(const Matrix& x, std::size_t max_entries);

/// Merges per-participant sketches (one vector per participant, one entry per feature).
std::vector<FeatureSketch> merge_sketches(std::span<const std::vector<FeatureSketch>> parts);

/// Per-feature cut points. A value v falls into bin b = #cuts strictly less than v,
/// so bin b holds cuts[b-1] < v <= cuts[b].
class BinMapper {
public:
    BinMapper() = default;
    BinMapper(std::vector<std::vector<double>> cuts, int n_bins);

    static BinMapper from_sketches(const std::vector<FeatureSketch>& merged, int n_bins);
    static BinMapper fit(const Matrix& x, int n_bins);

    int n_bins() const { return n_bins_; }
    std::size_t n_features() const { return cuts_.size(); }
    const std::vector<double>& cuts(std::size_t feature) const { return cuts_[feature]; }

    std::uint16_t bin(std::size_t feature, double value) const;
    /// Row-major [rows x features] bin codes.
    std::vector<std::uint16_t> bin_matrix(const Matrix& x) const;

    bool operator==(const BinMapper&) const = default;

private:
    std::vector<std::vector<double>> cuts_;
    int n_bins_ = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    int bin_threshold = 0;  // rows with bin <= threshold go left
    double threshold = 0.0;  // value form of the same test: x <= threshold goes left
    int left = -1;
    int right = -1;
    double weight = 0.0;  // leaf output (already scaled by the learning rate)

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict(std::span<const double> x) const;
    bool operator==(const Tree&) const = default;
};

struct BoostedTreesState {
    int n_classes = 0;
    std::size_t n_features = 0;
    BoostedHyper hyper;
    std::vector<double> base_score;
    BinMapper bins;
    std::vector<std::vector<Tree>> rounds;  // [round][class]

    std::size_t n_rounds() const { return rounds.size(); }

    /// Base score plus summed leaf outputs, [rows x n_classes].
    Matrix raw_scores(const Matrix& x) const;
    Matrix predict_proba(const Matrix& x) const;
    std::vector<int> predict(const Matrix& x) const;

    bool operator==(const BoostedTreesState&) const = default;
};

/// (G, H) sums over the rows of one tree node: index [feature * n_bins + bin].
struct GradientHistogram {
    int node = 0;
    std::size_t n_features = 0;
    std::size_t n_bins = 0;
    std::vector<double> grad;
    std::vector<double> hess;
};

struct SplitDecision {
    int node = 0;
    int feature = 0;
    int bin_threshold = 0;
    int left = 0;
    int right = 0;
};

/// Row-owning side of the histogram protocol. Implementations keep their rows
/// private; only histograms leave them.
class HistogramParticipant {
public:
    virtual ~HistogramParticipant() = default;

    /// Recompute softmax gradients/hessians for all classes from current scores.
    virtual void begin_round() = 0;
    /// Start a tree for `cls`: every row sits at the root.
    virtual void begin_tree(int cls) = 0;
    virtual std::vector<GradientHistogram> node_histograms(std::span<const int> frontier) = 0;
    virtual void apply_split(const SplitDecision& split) = 0;
    /// Add the finished tree's leaf outputs to the local scores of its class.
    virtual void finish_tree(int cls, const Tree& tree) = 0;
};

/// Holds a row block, its bin codes, running scores and gradients.
class LocalHistogramParticipant : public HistogramParticipant {
public:
    LocalHistogramParticipant(const Matrix& x, std::span<const int> y, int n_classes, const BinMapper& bins,
                              std::span<const double> base_score);

    void begin_round() override;
    void begin_tree(int cls) override;
    std::vector<GradientHistogram> node_histograms(std::span<const int> frontier) override;
    void apply_split(const SplitDecision& split) override;
    void finish_tree(int cls, const Tree& tree) override;

    std::size_t n_rows() const { return labels_.size(); }
    const Matrix& scores() const { return scores_; }

private:
    std::vector<std::uint16_t> codes_;
    std::size_t n_features_;
    std::vector<int> labels_;
    int n_classes_;
    std::size_t n_bins_;
    Matrix scores_;
    Matrix grad_;
    Matrix hess_;
    int cls_ = 0;
    std::vector<int> position_;
};

/// Softmax of one score row.
std::vector<double> softmax(std::span<const double> scores);

/// Gradient and hessian of the multiclass log-loss with respect to each class score.
void softmax_grad_hess(std::span<const double> scores, int label, std::span<double> grad, std::span<double> hess);

/// Adds histograms elementwise in participant order. Throws on shape mismatch
/// (including a histogram whose per-feature length is not n_bins).
std::vector<GradientHistogram> sum_histograms(const std::vector<std::vector<GradientHistogram>>& parts,
                                              std::size_t n_features, std::size_t n_bins);

/// Observer called after every round; used for round logs.
using BoostRoundHook = std::function<void(int round, const std::vector<Tree>& trees)>;

/// Combines the per-participant histograms of one frontier; defaults to sum_histograms.
using HistogramAggregator =
    std::function<std::vector<GradientHistogram>(std::vector<std::vector<GradientHistogram>>)>;

/// Coordinator: grows the ensemble from histograms only.
BoostedTreesState grow_ensemble(std::span<HistogramParticipant* const> participants, int n_classes,
                                std::size_t n_features, const BinMapper& bins, const BoostedHyper& hyper,
                                const BoostRoundHook& hook = {}, const HistogramAggregator& aggregate = {});

BoostedTreesState train_boosted(const Matrix& x, std::span<const int> y, int n_classes, const BoostedHyper& hyper);
BoostedTreesState train_boosted(const Matrix& x, std::span<const int> y, int n_classes, const BoostedHyper& hyper,
                                const BinMapper& bins);

/// Sketch resolution used when building bins from data.
std::size_t sketch_entries(int n_bins);

nlohmann::json to_json(const BoostedTreesState& s);
BoostedTreesState boosted_from_json(const nlohmann::json& j);

}  // namespace sevfl
