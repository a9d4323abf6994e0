#include "sevfl/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace sevfl {

double quantile_linear(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw PreprocessError("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y) {
    if (x.rows() != y.size()) throw PreprocessError("anova: row count mismatch");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
    if (groups.size() < 2) throw PreprocessError("anova: at least two classes are required");
    for (const auto& [cls, rows] : groups) {
        if (rows.size() < 2) {
            throw PreprocessError("anova: class " + std::to_string(cls) + " has fewer than 2 rows");
        }
    }
    const double n = static_cast<double>(y.size());
    const double c = static_cast<double>(groups.size());

    std::vector<double> scores(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) total += x(i, j);
        const double grand = total / n;

        double between = 0.0;
        double within = 0.0;
        bool groups_constant = true;
        for (const auto& [cls, rows] : groups) {
            double s = 0.0;
            for (auto r : rows) s += x(r, j);
            const double mean = s / static_cast<double>(rows.size());
            const double first = x(rows.front(), j);
            double ss = 0.0;
            for (auto r : rows) {
                const double d = x(r, j) - mean;
                ss += d * d;
                if (x(r, j) != first) groups_constant = false;
            }
            within += ss;
            between += static_cast<double>(rows.size()) * (mean - grand) * (mean - grand);
        }
        if (groups_constant) {
            // Exact zero spread inside each group: score depends only on whether group values differ.
            bool all_equal = true;
            for (std::size_t i = 1; i < x.rows(); ++i) {
                if (x(i, j) != x(0, j)) all_equal = false;
            }
            scores[j] = all_equal ? 0.0 : std::numeric_limits<double>::max();
            continue;
        }
        scores[j] = (between / (c - 1.0)) / (within / (n - c));
    }
    return scores;
}

std::vector<std::vector<int>> monomial_terms(int n_vars, int degree) {
    std::vector<std::vector<int>> terms;
    std::vector<int> idx;
    for (int d = 1; d <= degree; ++d) {
        idx.assign(static_cast<std::size_t>(d), 0);
        // Enumerate non-decreasing index tuples in lexicographic order.
        while (true) {
            terms.push_back(idx);
            int pos = d - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n_vars - 1) --pos;
            if (pos < 0) break;
            int v = ++idx[static_cast<std::size_t>(pos)];
            for (int q = pos + 1; q < d; ++q) idx[static_cast<std::size_t>(q)] = v;
        }
    }
    return terms;
}

void FittedPipeline::build_terms() {
    terms_ = monomial_terms(static_cast<int>(selected.size()), degree);
    if (include_bias) terms_.insert(terms_.begin(), std::vector<int>{});
}

FittedPipeline fit_pipeline(const Dataset& train, const PipelineSpec& spec) {
    if (train.n_rows() == 0) throw PreprocessError("pipeline: empty training set");
    if (spec.k < 1 || static_cast<std::size_t>(spec.k) > train.n_features()) {
        throw PreprocessError("pipeline: k=" + std::to_string(spec.k) + " outside [1, " +
                              std::to_string(train.n_features()) + "]");
    }
    if (spec.degree < 1) throw PreprocessError("pipeline: degree must be >= 1");

    FittedPipeline p;
    p.degree = spec.degree;
    const std::size_t d = train.n_features();
    p.medians.resize(d);
    p.iqrs.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        auto col = train.features.column(j);
        std::sort(col.begin(), col.end());
        p.medians[j] = quantile_linear(col, 0.5);
        p.iqrs[j] = quantile_linear(col, 0.75) - quantile_linear(col, 0.25);
    }

    // Scale every column, score, keep the top k (ties to the lower index).
    p.selected.resize(d);
    std::iota(p.selected.begin(), p.selected.end(), 0);
    Matrix scaled = p.scale_select(train.features);
    p.scores = anova_f_scores(scaled, train.labels);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p.scores[a] > p.scores[b]; });
    p.selected.assign(order.begin(), order.begin() + spec.k);
    std::sort(p.selected.begin(), p.selected.end());
    p.build_terms();
    return p;
}

Matrix FittedPipeline::scale_select(const Matrix& x) const {
    if (x.cols() != n_features()) {
        throw PreprocessError("pipeline: input has " + std::to_string(x.cols()) + " columns, fitted on " +
                              std::to_string(n_features()));
    }
    Matrix out(x.rows(), selected.size());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t s = 0; s < selected.size(); ++s) {
            const std::size_t j = selected[s];
            const double scale = iqrs[j] == 0.0 ? 1.0 : iqrs[j];
            out(i, s) = (x(i, j) - medians[j]) / scale;
        }
    }
    return out;
}

Matrix FittedPipeline::transform(const Matrix& x) const {
    Matrix base = scale_select(x);
    Matrix out(x.rows(), terms_.size());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = base.row(i);
        for (std::size_t t = 0; t < terms_.size(); ++t) {
            double v = 1.0;
            for (int idx : terms_[t]) v *= row[static_cast<std::size_t>(idx)];
            out(i, t) = v;
        }
    }
    return out;
}

nlohmann::json FittedPipeline::to_json() const {
    return {{"medians", medians}, {"iqrs", iqrs},     {"selected", selected},
            {"degree", degree},   {"include_bias", include_bias}, {"expanded_dim", expanded_dim()}};
}

FittedPipeline FittedPipeline::from_json(const nlohmann::json& j) {
    FittedPipeline p;
    p.medians = j.at("medians").get<std::vector<double>>();
    p.iqrs = j.at("iqrs").get<std::vector<double>>();
    p.selected = j.at("selected").get<std::vector<std::size_t>>();
    p.degree = j.at("degree").get<int>();
    p.include_bias = j.value("include_bias", false);
    if (p.iqrs.size() != p.medians.size()) throw PreprocessError("pipeline json: medians/iqrs length mismatch");
    for (std::size_t s = 0; s < p.selected.size(); ++s) {
        if (p.selected[s] >= p.medians.size() || (s > 0 && p.selected[s] <= p.selected[s - 1])) {
            throw PreprocessError("pipeline json: selected indices must be increasing and in range");
        }
    }
    p.build_terms();
    return p;
}

}  // namespace sevfl
