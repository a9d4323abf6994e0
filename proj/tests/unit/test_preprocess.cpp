#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfloat>
#include <cmath>
#include <random>

#include "sevfl/preprocess.hpp"
#include "toy.hpp"

using namespace sevfl;

namespace {

// Direct sum-of-squares F statistic.
double brute_f(const std::vector<double>& v, const std::vector<int>& y, int k) {
    std::vector<double> sum(k, 0.0), cnt(k, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        sum[y[i]] += v[i];
        cnt[y[i]] += 1.0;
        grand += v[i];
    }
    grand /= static_cast<double>(v.size());
    double between = 0.0, within = 0.0;
    for (int c = 0; c < k; ++c) between += cnt[c] * std::pow(sum[c] / cnt[c] - grand, 2);
    for (std::size_t i = 0; i < v.size(); ++i) within += std::pow(v[i] - sum[y[i]] / cnt[y[i]], 2);
    const double n = static_cast<double>(v.size());
    return (between / (k - 1)) / (within / (n - k));
}

Dataset one_column(std::vector<double> v, std::vector<int> y) {
    Dataset ds;
    ds.features = Matrix(v.size(), 1, v);
    ds.labels = std::move(y);
    ds.feature_names = {"x"};
    ds.n_classes = 2;
    return ds;
}

}  // namespace

TEST_CASE("quantiles and robust scaling of 1..5") {
    const std::vector<double> s{1, 2, 3, 4, 5};
    CHECK(quantile_linear(s, 0.25) == 2.0);
    CHECK(quantile_linear(s, 0.5) == 3.0);
    CHECK(quantile_linear(s, 0.75) == 4.0);
    const auto ds = one_column({1, 2, 3, 4, 5}, {0, 0, 1, 1, 1});
    const auto p = fit_pipeline(ds, {1, 1});
    CHECK(p.medians[0] == 3.0);
    CHECK(p.iqrs[0] == 2.0);
    const auto out = p.transform(ds.features);
    const std::vector<double> expect{-1, -0.5, 0, 0.5, 1};
    for (std::size_t i = 0; i < 5; ++i) CHECK(out(i, 0) == doctest::Approx(expect[i]).epsilon(1e-15));
}

TEST_CASE("constant column scales to zeros and scores F = 0") {
    const auto ds = one_column({7, 7, 7, 7}, {0, 0, 1, 1});
    const auto f = anova_f_scores(ds.features, ds.labels);
    CHECK(f[0] == 0.0);
    const auto p = fit_pipeline(ds, {1, 1});
    CHECK(p.iqrs[0] == 0.0);
    const auto out = p.transform(ds.features);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out(i, 0) == 0.0);
}

TEST_CASE("perfect separator scores the largest finite double") {
    const auto ds = one_column({0, 0, 1, 1}, {0, 0, 1, 1});
    CHECK(anova_f_scores(ds.features, ds.labels)[0] == DBL_MAX);
}

TEST_CASE("anova F matches brute force on random instances") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        Matrix x(40, 3);
        std::vector<int> y(40);
        for (int i = 0; i < 40; ++i) {
            y[i] = i % 4;
            for (int j = 0; j < 3; ++j) x(i, j) = z(rng) + 0.3 * j * y[i];
        }
        const auto f = anova_f_scores(x, y);
        for (int j = 0; j < 3; ++j) {
            const double b = brute_f(x.column(j), y, 4);
            CHECK(std::abs(f[j] - b) <= 1e-9 * std::max(1.0, std::abs(b)));
        }
    }
}

TEST_CASE("label-equal feature is ranked first") {
    auto ds = toy::blobs(200, 6, 4, 5, 3.0);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) ds.features(i, 4) = ds.labels[i];
    const auto p = fit_pipeline(ds, {1, 1});
    REQUIRE(p.selected.size() == 1);
    CHECK(p.selected[0] == 4);
}

TEST_CASE("anova errors") {
    const auto single = one_column({1, 2, 3}, {0, 0, 0});
    CHECK_THROWS_AS(anova_f_scores(single.features, single.labels), PreprocessError);
    const auto lonely = one_column({1, 2, 3}, {0, 0, 1});
    CHECK_THROWS_WITH_AS(anova_f_scores(lonely.features, lonely.labels), doctest::Contains("class 1"),
                         PreprocessError);
    CHECK_THROWS_AS(fit_pipeline(toy::blobs(20, 3, 2, 1), {4, 2}), PreprocessError);
}

TEST_CASE("polynomial expansion shape and order") {
    CHECK(monomial_terms(9, 3).size() == 219);
    const auto t = monomial_terms(2, 2);
    REQUIRE(t.size() == 5);
    CHECK(t[0] == std::vector<int>{0});
    CHECK(t[1] == std::vector<int>{1});
    CHECK(t[2] == std::vector<int>{0, 0});
    CHECK(t[3] == std::vector<int>{0, 1});
    CHECK(t[4] == std::vector<int>{1, 1});

    auto ds = toy::blobs(120, 12, 4, 2);
    const auto p = fit_pipeline(ds, {9, 3});
    CHECK(p.expanded_dim() == 219);
    CHECK(p.transform(ds.features).cols() == 219);
}

TEST_CASE("expansion of (a, b) and of a zero row") {
    Dataset ds;
    ds.features = Matrix(4, 2, std::vector<double>{2, 3, -0.5, -0.5, 0, 0, 0.5, 0.5});
    ds.labels = {0, 0, 1, 1};
    ds.feature_names = {"a", "b"};
    ds.n_classes = 2;
    auto p = fit_pipeline(ds, {2, 2});
    // Identity scaler so the raw monomials can be read off.
    p.medians = {0.0, 0.0};
    p.iqrs = {1.0, 1.0};
    const auto out = p.transform(Matrix(2, 2, std::vector<double>{2, 3, 0, 0}));
    const std::vector<double> expect{2, 3, 4, 6, 9};
    for (std::size_t j = 0; j < 5; ++j) CHECK(out(0, j) == expect[j]);
    for (std::size_t j = 0; j < 5; ++j) CHECK(out(1, j) == 0.0);
}

TEST_CASE("selected columns have zero median after scaling") {
    const auto ds = toy::blobs(301, 12, 4, 8);
    const auto p = fit_pipeline(ds, {9, 3});
    const auto s = p.scale_select(ds.features);
    for (std::size_t j = 0; j < s.cols(); ++j) {
        auto col = s.column(j);
        std::sort(col.begin(), col.end());
        CHECK(std::abs(quantile_linear(col, 0.5)) < 1e-9);
    }
}

TEST_CASE("selection is invariant to affine rescaling of columns") {
    auto ds = toy::blobs(200, 12, 4, 9);
    const auto base = fit_pipeline(ds, {9, 1}).selected;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        for (std::size_t i = 0; i < ds.n_rows(); ++i) ds.features(i, j) = ds.features(i, j) * (j + 2.5) - 17.0 * j;
    }
    CHECK(fit_pipeline(ds, {9, 1}).selected == base);
}

TEST_CASE("fit sees only its inputs") {
    const auto ds = toy::blobs(100, 4, 2, 10);
    Dataset shifted = ds;
    for (std::size_t i = 0; i < shifted.n_rows(); ++i) shifted.features(i, 0) += 100.0;
    // train ∪ shifted-test has a different median than train alone.
    std::vector<std::size_t> all = toy::iota_rows(100);
    Dataset pooled = ds;
    pooled.features = Matrix(200, 4);
    pooled.labels.clear();
    for (std::size_t i = 0; i < 100; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            pooled.features(i, j) = ds.features(i, j);
            pooled.features(i + 100, j) = shifted.features(i, j);
        }
    }
    pooled.labels = ds.labels;
    pooled.labels.insert(pooled.labels.end(), ds.labels.begin(), ds.labels.end());
    CHECK(fit_pipeline(ds, {2, 1}).medians[0] != fit_pipeline(pooled, {2, 1}).medians[0]);
}

TEST_CASE("transform is deterministic and json round-trips") {
    const auto ds = toy::blobs(150, 10, 4, 12);
    const auto p = fit_pipeline(ds, {9, 3});
    const auto a = p.transform(ds.features);
    CHECK(a == p.transform(ds.features));
    const auto q = FittedPipeline::from_json(p.to_json());
    CHECK(q.transform(ds.features) == a);
    CHECK_THROWS_AS(p.transform(Matrix(2, 3)), PreprocessError);
}
