#include "sevfl/boosted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sevfl {

std::size_t sketch_entries(int n_bins) { return static_cast<std::size_t>(std::max(n_bins, 1)) * 8; }

std::vector<FeatureSketch> sketch_features(const Matrix& x, std::size_t max_entries) {
    if (max_entries < 2) throw ModelError("sketch: max_entries must be >= 2");
    std::vector<FeatureSketch> out(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto col = x.column(f);
        std::sort(col.begin(), col.end());
        FeatureSketch exact;
        for (double v : col) {
            if (!exact.values.empty() && exact.values.back() == v) {
                exact.weights.back() += 1.0;
            } else {
                exact.values.push_back(v);
                exact.weights.push_back(1.0);
            }
        }
        if (exact.values.size() <= max_entries) {
            out[f] = std::move(exact);
            continue;
        }
        // Keep the distinct value reached at each of max_entries evenly spaced ranks.
        const double total = static_cast<double>(col.size());
        FeatureSketch& s = out[f];
        double cum = 0.0;
        double taken = 0.0;
        std::size_t i = 0;
        for (std::size_t e = 1; e <= max_entries; ++e) {
            const double target = total * static_cast<double>(e) / static_cast<double>(max_entries);
            while (i < exact.values.size() && cum + exact.weights[i] < target) cum += exact.weights[i++];
            if (i == exact.values.size()) break;
            const double reach = cum + exact.weights[i];
            if (s.values.empty() || s.values.back() != exact.values[i]) {
                s.values.push_back(exact.values[i]);
                s.weights.push_back(reach - taken);
                taken = reach;
            }
        }
    }
    return out;
}

std::vector<FeatureSketch> merge_sketches(std::span<const std::vector<FeatureSketch>> parts) {
    if (parts.empty()) throw ModelError("sketch: nothing to merge");
    const std::size_t d = parts.front().size();
    std::vector<FeatureSketch> out(d);
    for (const auto& p : parts) {
        if (p.size() != d) throw ModelError("sketch: participants disagree on feature count");
    }
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<std::pair<double, double>> entries;
        for (const auto& p : parts) {
            if (p[f].values.size() != p[f].weights.size()) throw ModelError("sketch: malformed entry");
            for (std::size_t i = 0; i < p[f].values.size(); ++i) entries.emplace_back(p[f].values[i], p[f].weights[i]);
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [v, w] : entries) {
            if (!out[f].values.empty() && out[f].values.back() == v) {
                out[f].weights.back() += w;
            } else {
                out[f].values.push_back(v);
                out[f].weights.push_back(w);
            }
        }
    }
    return out;
}

BinMapper::BinMapper(std::vector<std::vector<double>> cuts, int n_bins) : cuts_(std::move(cuts)), n_bins_(n_bins) {
    if (n_bins < 2 || n_bins > 65536) throw ModelError("bins: n_bins must be in [2, 65536]");
    for (const auto& c : cuts_) {
        if (c.size() + 1 > static_cast<std::size_t>(n_bins)) throw ModelError("bins: too many cut points");
        for (std::size_t i = 1; i < c.size(); ++i) {
            if (!(c[i] > c[i - 1])) throw ModelError("bins: cut points must be strictly increasing");
        }
    }
}

BinMapper BinMapper::from_sketches(const std::vector<FeatureSketch>& merged, int n_bins) {
    std::vector<std::vector<double>> cuts(merged.size());
    for (std::size_t f = 0; f < merged.size(); ++f) {
        const auto& s = merged[f];
        auto& c = cuts[f];
        if (s.values.size() <= static_cast<std::size_t>(n_bins)) {
            for (std::size_t i = 0; i + 1 < s.values.size(); ++i) {
                const double mid = s.values[i] + (s.values[i + 1] - s.values[i]) / 2.0;
                if (c.empty() || mid > c.back()) c.push_back(mid);
            }
            continue;
        }
        double total = 0.0;
        for (double w : s.weights) total += w;
        double cum = 0.0;
        std::size_t i = 0;
        for (int j = 1; j < n_bins; ++j) {
            const double target = total * static_cast<double>(j) / static_cast<double>(n_bins);
            while (i + 1 < s.values.size() && cum + s.weights[i] < target) cum += s.weights[i++];
            const double v = s.values[i];
            if (v < s.values.back() && (c.empty() || v > c.back())) c.push_back(v);
        }
    }
    return BinMapper(std::move(cuts), n_bins);
}

BinMapper BinMapper::fit(const Matrix& x, int n_bins) {
    std::vector<std::vector<FeatureSketch>> one{sketch_features(x, sketch_entries(n_bins))};
    return from_sketches(merge_sketches(one), n_bins);
}

std::uint16_t BinMapper::bin(std::size_t feature, double value) const {
    const auto& c = cuts_[feature];
    return static_cast<std::uint16_t>(std::lower_bound(c.begin(), c.end(), value) - c.begin());
}

std::vector<std::uint16_t> BinMapper::bin_matrix(const Matrix& x) const {
    if (x.cols() != cuts_.size()) throw ModelError("bins: input width does not match bin mapper");
    std::vector<std::uint16_t> codes(x.rows() * x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t f = 0; f < x.cols(); ++f) codes[i * x.cols() + f] = bin(f, x(i, f));
    }
    return codes;
}

double Tree::predict(std::span<const double> x) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
        const auto& node = nodes[static_cast<std::size_t>(n)];
        n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].weight;
}

Matrix BoostedTreesState::raw_scores(const Matrix& x) const {
    if (x.cols() != n_features) {
        throw ModelError("boosted: input width " + std::to_string(x.cols()) + " != trained width " +
                         std::to_string(n_features));
    }
    Matrix out(x.rows(), static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double s = base_score[c];
            for (const auto& trees : rounds) s += trees[c].predict(row);
            out(i, c) = s;
        }
    }
    return out;
}

Matrix BoostedTreesState::predict_proba(const Matrix& x) const {
    Matrix raw = raw_scores(x);
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        auto p = softmax(raw.row(i));
        std::copy(p.begin(), p.end(), raw.row(i).begin());
    }
    return raw;
}

std::vector<int> BoostedTreesState::predict(const Matrix& x) const {
    Matrix raw = raw_scores(x);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = static_cast<int>(argmax_lowest(raw.row(i)));
    return out;
}

std::vector<double> softmax(std::span<const double> scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        p[c] = std::exp(scores[c] - mx);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

void softmax_grad_hess(std::span<const double> scores, int label, std::span<double> grad, std::span<double> hess) {
    auto p = softmax(scores);
    for (std::size_t c = 0; c < p.size(); ++c) {
        grad[c] = p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
        hess[c] = p[c] * (1.0 - p[c]);
    }
}

LocalHistogramParticipant::LocalHistogramParticipant(const Matrix& x, std::span<const int> y, int n_classes,
                                                     const BinMapper& bins, std::span<const double> base_score)
    : codes_(bins.bin_matrix(x)),
      n_features_(x.cols()),
      labels_(y.begin(), y.end()),
      n_classes_(n_classes),
      n_bins_(static_cast<std::size_t>(bins.n_bins())),
      scores_(x.rows(), static_cast<std::size_t>(n_classes)),
      grad_(x.rows(), static_cast<std::size_t>(n_classes)),
      hess_(x.rows(), static_cast<std::size_t>(n_classes)),
      position_(x.rows(), 0) {
    if (x.rows() != y.size()) throw ModelError("boosted: row count != label count");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw ModelError("boosted: non-finite feature value");
    }
    for (int label : labels_) {
        if (label < 0 || label >= n_classes) throw ModelError("boosted: label outside [0, n_classes)");
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < scores_.cols(); ++c) scores_(i, c) = base_score[c];
    }
}

void LocalHistogramParticipant::begin_round() {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        softmax_grad_hess(scores_.row(i), labels_[i], grad_.row(i), hess_.row(i));
    }
}

void LocalHistogramParticipant::begin_tree(int cls) {
    cls_ = cls;
    std::fill(position_.begin(), position_.end(), 0);
}

std::vector<GradientHistogram> LocalHistogramParticipant::node_histograms(std::span<const int> frontier) {
    int max_node = 0;
    for (int n : frontier) max_node = std::max(max_node, n);
    std::vector<int> slot(static_cast<std::size_t>(max_node) + 1, -1);
    std::vector<GradientHistogram> out(frontier.size());
    for (std::size_t k = 0; k < frontier.size(); ++k) {
        slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
        out[k].node = frontier[k];
        out[k].n_features = n_features_;
        out[k].n_bins = n_bins_;
        out[k].grad.assign(n_features_ * n_bins_, 0.0);
        out[k].hess.assign(n_features_ * n_bins_, 0.0);
    }
    const auto c = static_cast<std::size_t>(cls_);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const auto pos = static_cast<std::size_t>(position_[i]);
        if (pos >= slot.size() || slot[pos] < 0) continue;
        auto& h = out[static_cast<std::size_t>(slot[pos])];
        const double g = grad_(i, c);
        const double hv = hess_(i, c);
        const std::uint16_t* row = codes_.data() + i * n_features_;
        for (std::size_t f = 0; f < n_features_; ++f) {
            const std::size_t idx = f * n_bins_ + row[f];
            h.grad[idx] += g;
            h.hess[idx] += hv;
        }
    }
    return out;
}

void LocalHistogramParticipant::apply_split(const SplitDecision& split) {
    const auto f = static_cast<std::size_t>(split.feature);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (position_[i] != split.node) continue;
        position_[i] = codes_[i * n_features_ + f] <= split.bin_threshold ? split.left : split.right;
    }
}

void LocalHistogramParticipant::finish_tree(int cls, const Tree& tree) {
    const auto c = static_cast<std::size_t>(cls);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        scores_(i, c) += tree.nodes[static_cast<std::size_t>(position_[i])].weight;
    }
}

std::vector<GradientHistogram> sum_histograms(const std::vector<std::vector<GradientHistogram>>& parts,
                                              std::size_t n_features, std::size_t n_bins) {
    if (parts.empty()) throw ModelError("histogram: no participants");
    const std::size_t len = n_features * n_bins;
    const auto& first = parts.front();
    for (const auto& part : parts) {
        if (part.size() != first.size()) throw ModelError("histogram: participants returned different node sets");
        for (std::size_t k = 0; k < part.size(); ++k) {
            const auto& h = part[k];
            if (h.node != first[k].node) throw ModelError("histogram: node order mismatch");
            if (h.n_bins != n_bins || h.n_features != n_features || h.grad.size() != len || h.hess.size() != len) {
                throw ModelError("histogram: expected " + std::to_string(n_features) + " features x " +
                                 std::to_string(n_bins) + " bins, got " + std::to_string(h.n_features) + " x " +
                                 std::to_string(h.n_bins) + " (" + std::to_string(h.grad.size()) + " entries)");
            }
        }
    }
    std::vector<GradientHistogram> total = first;
    for (std::size_t p = 1; p < parts.size(); ++p) {
        for (std::size_t k = 0; k < total.size(); ++k) {
            for (std::size_t i = 0; i < len; ++i) {
                total[k].grad[i] += parts[p][k].grad[i];
                total[k].hess[i] += parts[p][k].hess[i];
            }
        }
    }
    return total;
}

namespace {

struct NodeStats {
    double grad = 0.0;
    double hess = 0.0;
    int depth = 0;
};

struct BestSplit {
    double gain = 0.0;
    int feature = -1;
    int bin = 0;
    double left_grad = 0.0;
    double left_hess = 0.0;
};

double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

BestSplit find_split(const GradientHistogram& h, const NodeStats& node, const BinMapper& bins,
                     const BoostedHyper& hyper) {
    BestSplit best;
    const double parent = leaf_score(node.grad, node.hess, hyper.lambda);
    for (std::size_t f = 0; f < h.n_features; ++f) {
        const std::size_t n_cuts = bins.cuts(f).size();
        const double* g = h.grad.data() + f * h.n_bins;
        const double* hs = h.hess.data() + f * h.n_bins;
        double gl = 0.0;
        double hl = 0.0;
        for (std::size_t b = 0; b < n_cuts; ++b) {
            gl += g[b];
            hl += hs[b];
            const double gr = node.grad - gl;
            const double hr = node.hess - hl;
            if (hl <= 0.0 || hr <= 0.0 || hl < hyper.min_child_weight || hr < hyper.min_child_weight) continue;
            const double gain =
                0.5 * (leaf_score(gl, hl, hyper.lambda) + leaf_score(gr, hr, hyper.lambda) - parent);
            if (gain > best.gain) {
                best = {gain, static_cast<int>(f), static_cast<int>(b), gl, hl};
            }
        }
    }
    return best;
}

Tree grow_tree(std::span<HistogramParticipant* const> participants, int cls, std::size_t n_features,
               const BinMapper& bins, const BoostedHyper& hyper, const HistogramAggregator& aggregate) {
    const auto n_bins = static_cast<std::size_t>(bins.n_bins());
    for (auto* p : participants) p->begin_tree(cls);

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<NodeStats> stats(1);
    std::vector<int> frontier{0};
    bool root = true;
    while (!frontier.empty()) {
        std::vector<std::vector<GradientHistogram>> parts;
        parts.reserve(participants.size());
        for (auto* p : participants) parts.push_back(p->node_histograms(frontier));
        auto hists = aggregate ? aggregate(std::move(parts)) : sum_histograms(parts, n_features, n_bins);
        if (hists.size() != frontier.size()) throw ModelError("histogram: aggregate lost frontier nodes");

        std::vector<int> next;
        for (const auto& h : hists) {
            const auto id = static_cast<std::size_t>(h.node);
            if (root) {
                // Every row lands in exactly one bin of feature 0.
                double g = 0.0;
                double hs = 0.0;
                for (std::size_t b = 0; b < n_bins; ++b) {
                    g += h.grad[b];
                    hs += h.hess[b];
                }
                stats[id].grad = g;
                stats[id].hess = hs;
            }
            const NodeStats node = stats[id];
            if (node.depth >= hyper.max_depth) continue;
            const BestSplit best = find_split(h, node, bins, hyper);
            if (best.feature < 0) continue;

            const int left = static_cast<int>(tree.nodes.size());
            const int right = left + 1;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            stats.push_back({best.left_grad, best.left_hess, node.depth + 1});
            stats.push_back({node.grad - best.left_grad, node.hess - best.left_hess, node.depth + 1});
            auto& parent = tree.nodes[id];
            parent.feature = best.feature;
            parent.bin_threshold = best.bin;
            parent.threshold = bins.cuts(static_cast<std::size_t>(best.feature))[static_cast<std::size_t>(best.bin)];
            parent.left = left;
            parent.right = right;
            const SplitDecision split{h.node, best.feature, best.bin, left, right};
            for (auto* p : participants) p->apply_split(split);
            if (node.depth + 1 < hyper.max_depth) {
                next.push_back(left);
                next.push_back(right);
            }
        }
        root = false;
        frontier = std::move(next);
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        if (tree.nodes[id].is_leaf()) {
            tree.nodes[id].weight = -stats[id].grad / (stats[id].hess + hyper.lambda) * hyper.learning_rate;
        }
    }
    for (auto* p : participants) p->finish_tree(cls, tree);
    return tree;
}

void check_hyper(const BoostedHyper& h) {
    if (h.n_rounds < 0) throw ModelError("boosted: n_rounds must be >= 0");
    if (h.max_depth < 0) throw ModelError("boosted: max_depth must be >= 0");
    if (!(h.learning_rate > 0.0)) throw ModelError("boosted: learning_rate must be positive");
    if (!(h.lambda >= 0.0)) throw ModelError("boosted: lambda must be >= 0");
}

}  // namespace

BoostedTreesState grow_ensemble(std::span<HistogramParticipant* const> participants, int n_classes,
                                std::size_t n_features, const BinMapper& bins, const BoostedHyper& hyper,
                                const BoostRoundHook& hook, const HistogramAggregator& aggregate) {
    check_hyper(hyper);
    if (participants.empty()) throw ModelError("boosted: no participants");
    if (n_features == 0) throw ModelError("boosted: no features");
    if (bins.n_features() != n_features || bins.n_bins() != hyper.n_bins) {
        throw ModelError("boosted: bin mapper does not match feature count or n_bins");
    }
    BoostedTreesState state;
    state.n_classes = n_classes;
    state.n_features = n_features;
    state.hyper = hyper;
    state.base_score.assign(static_cast<std::size_t>(n_classes), 0.0);
    state.bins = bins;
    for (int r = 0; r < hyper.n_rounds; ++r) {
        for (auto* p : participants) p->begin_round();
        std::vector<Tree> trees;
        trees.reserve(static_cast<std::size_t>(n_classes));
        for (int c = 0; c < n_classes; ++c) trees.push_back(grow_tree(participants, c, n_features, bins, hyper, aggregate));
        state.rounds.push_back(std::move(trees));
        if (hook) hook(r, state.rounds.back());
    }
    return state;
}

BoostedTreesState train_boosted(const Matrix& x, std::span<const int> y, int n_classes, const BoostedHyper& hyper,
                                const BinMapper& bins) {
    if (x.rows() == 0) throw ModelError("boosted: empty training set");
    const std::vector<double> base(static_cast<std::size_t>(n_classes), 0.0);
    LocalHistogramParticipant local(x, y, n_classes, bins, base);
    HistogramParticipant* parts[] = {&local};
    return grow_ensemble(parts, n_classes, x.cols(), bins, hyper);
}

BoostedTreesState train_boosted(const Matrix& x, std::span<const int> y, int n_classes, const BoostedHyper& hyper) {
    check_hyper(hyper);
    if (n_classes < 2) throw ModelError("boosted: need at least two classes");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw ModelError("boosted: non-finite feature value");
    }
    return train_boosted(x, y, n_classes, hyper, BinMapper::fit(x, hyper.n_bins));
}

nlohmann::json to_json(const BoostedTreesState& s) {
    nlohmann::json cuts = nlohmann::json::array();
    for (std::size_t f = 0; f < s.bins.n_features(); ++f) cuts.push_back(s.bins.cuts(f));
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& trees : s.rounds) {
        nlohmann::json per_class = nlohmann::json::array();
        for (const auto& t : trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) {
                nodes.push_back({n.feature, n.bin_threshold, n.threshold, n.left, n.right, n.weight});
            }
            per_class.push_back(std::move(nodes));
        }
        rounds.push_back(std::move(per_class));
    }
    return {{"schema", "sevfl.model/1"},
            {"type", "boosted"},
            {"n_classes", s.n_classes},
            {"n_features", s.n_features},
            {"hyper",
             {{"n_rounds", s.hyper.n_rounds},
              {"learning_rate", s.hyper.learning_rate},
              {"max_depth", s.hyper.max_depth},
              {"n_bins", s.hyper.n_bins},
              {"lambda", s.hyper.lambda},
              {"min_child_weight", s.hyper.min_child_weight}}},
            {"base_score", s.base_score},
            {"cuts", std::move(cuts)},
            {"rounds", std::move(rounds)}};
}

BoostedTreesState boosted_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "sevfl.model/1" || j.value("type", "") != "boosted") {
        throw ModelError("boosted json: unsupported schema");
    }
    BoostedTreesState s;
    s.n_classes = j.at("n_classes").get<int>();
    s.n_features = j.at("n_features").get<std::size_t>();
    const auto& h = j.at("hyper");
    s.hyper.n_rounds = h.at("n_rounds").get<int>();
    s.hyper.learning_rate = h.at("learning_rate").get<double>();
    s.hyper.max_depth = h.at("max_depth").get<int>();
    s.hyper.n_bins = h.at("n_bins").get<int>();
    s.hyper.lambda = h.at("lambda").get<double>();
    s.hyper.min_child_weight = h.at("min_child_weight").get<double>();
    s.base_score = j.at("base_score").get<std::vector<double>>();
    s.bins = BinMapper(j.at("cuts").get<std::vector<std::vector<double>>>(), s.hyper.n_bins);
    for (const auto& per_class : j.at("rounds")) {
        std::vector<Tree> trees;
        for (const auto& nodes : per_class) {
            Tree t;
            for (const auto& n : nodes) {
                TreeNode node;
                node.feature = n.at(0).get<int>();
                node.bin_threshold = n.at(1).get<int>();
                node.threshold = n.at(2).get<double>();
                node.left = n.at(3).get<int>();
                node.right = n.at(4).get<int>();
                node.weight = n.at(5).get<double>();
                if (node.feature >= static_cast<int>(s.n_features)) {
                    throw ModelError("boosted json: split feature out of range");
                }
                t.nodes.push_back(node);
            }
            trees.push_back(std::move(t));
        }
        if (trees.size() != static_cast<std::size_t>(s.n_classes)) {
            throw ModelError("boosted json: round must hold one tree per class");
        }
        s.rounds.push_back(std::move(trees));
    }
    return s;
}

}  // namespace sevfl
