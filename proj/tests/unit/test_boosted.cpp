#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sevfl/models.hpp"
#include "toy.hpp"

using namespace sevfl;

namespace {

double log_loss(std::span<const double> s, int y) {
    double m = s[0];
    for (double v : s) m = std::max(m, v);
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    return -(s[y] - m - std::log(z));
}

long double log_loss_ext(const std::vector<long double>& s, int y) {
    long double m = *std::max_element(s.begin(), s.end()), z = 0.0L;
    for (long double v : s) z += std::exp(v - m);
    return -(s[y] - m - std::log(z));
}

double mean_log_loss(const BoostedTreesState& m, const Matrix& x, const std::vector<int>& y) {
    const auto raw = m.raw_scores(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += log_loss(raw.row(i), y[i]);
    return s / static_cast<double>(y.size());
}

BoostedHyper small(int rounds) {
    BoostedHyper h;
    h.n_rounds = rounds;
    h.max_depth = 3;
    h.n_bins = 32;
    return h;
}

}  // namespace

TEST_CASE("softmax gradient at a zero base score") {
    const std::vector<double> s(4, 0.0);
    std::vector<double> g(4), h(4);
    softmax_grad_hess(s, 2, g, h);
    CHECK(g[2] == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(g[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(h[1] == doctest::Approx(0.1875).epsilon(1e-15));
}

TEST_CASE("softmax gradient and hessian against central differences") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> s(4);
        for (double& v : s) v = u(rng);
        const int y = rep % 4;
        std::vector<double> g(4), h(4);
        softmax_grad_hess(s, y, g, h);
        for (int c = 0; c < 4; ++c) {
            auto at = [&](long double d) {
                std::vector<long double> t(s.begin(), s.end());
                t[c] += d;
                return log_loss_ext(t, y);
            };
            const long double e1 = 1e-6L, e2 = 1e-4L;
            const double fd_g = static_cast<double>((at(e1) - at(-e1)) / (2 * e1));
            const double fd_h = static_cast<double>((at(e2) - 2 * at(0) + at(-e2)) / (e2 * e2));
            CHECK(std::abs(g[c] - fd_g) / std::abs(fd_g) < 1e-5);
            CHECK(std::abs(h[c] - fd_h) / std::abs(fd_h) < 1e-5);
        }
    }
}

TEST_CASE("no trees means uniform probabilities") {
    const auto ds = toy::blobs(40, 2, 4, 3);
    const auto m = train_boosted(ds.features, ds.labels, 4, small(0));
    const auto p = m.predict_proba(ds.features);
    for (double v : p.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("a perfect single-feature split is found and the loss falls") {
    // Later rounds may stall once child hessians drop below min_child_weight.
    Matrix x(20, 1);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i;
        y[i] = i < 10 ? 0 : 1;
    }
    double prev = std::log(2.0);
    for (int r = 1; r <= 5; ++r) {
        const auto m = train_boosted(x, y, 2, small(r));
        const auto& root = m.rounds[0][0].nodes[0];
        CHECK(root.feature == 0);
        CHECK(root.threshold >= 9.0);
        CHECK(root.threshold < 10.0);
        const double loss = mean_log_loss(m, x, y);
        if (r == 1) CHECK(loss < prev);
        CHECK(loss <= prev);
        prev = loss;
    }
}

TEST_CASE("huge lambda pins predictions to the base score") {
    const auto ds = toy::blobs(100, 3, 4, 4);
    auto h = small(5);
    h.lambda = 1e15;
    const auto m = train_boosted(ds.features, ds.labels, 4, h);
    for (const auto& round : m.rounds) {
        for (const auto& tree : round) {
            for (const auto& n : tree.nodes) CHECK(std::abs(n.weight) < 1e-12);
        }
    }
    const auto p = m.predict_proba(ds.features);
    for (double v : p.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("probabilities are normalized and training is deterministic") {
    const auto ds = toy::blobs(200, 4, 4, 5, 1.5);
    const auto m = train_boosted(ds.features, ds.labels, 4, small(10));
    const auto p = m.predict_proba(ds.features);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (double v : p.row(i)) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(m == train_boosted(ds.features, ds.labels, 4, small(10)));
    const auto back = boosted_from_json(to_json(m));
    CHECK(back.raw_scores(ds.features) == m.raw_scores(ds.features));
}

TEST_CASE("value thresholds agree with bin thresholds on training rows") {
    const auto ds = toy::blobs(150, 3, 4, 6, 1.2);
    const auto h = small(6);
    const auto bins = BinMapper::fit(ds.features, h.n_bins);
    const std::vector<double> base(4, 0.0);
    LocalHistogramParticipant part(ds.features, ds.labels, 4, bins, base);
    HistogramParticipant* parts[] = {&part};
    const auto m = grow_ensemble(parts, 4, 3, bins, h);
    const auto raw = m.raw_scores(ds.features);
    for (std::size_t i = 0; i < raw.data().size(); ++i) {
        CHECK(raw.data()[i] == doctest::Approx(part.scores().data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("bin mapper semantics") {
    // Few distinct values: cuts are midpoints.
    const Matrix x(5, 1, std::vector<double>{1, 2, 2, 3, 5});
    const auto b = BinMapper::fit(x, 8);
    CHECK(b.cuts(0) == std::vector<double>{1.5, 2.5, 4.0});
    CHECK(b.bin(0, 1.0) == 0);
    CHECK(b.bin(0, 1.5) == 0);
    CHECK(b.bin(0, 2.0) == 1);
    CHECK(b.bin(0, 100.0) == 3);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Matrix big(2000, 1);
    for (double& v : big.data()) v = z(rng);
    const auto q = BinMapper::fit(big, 16);
    CHECK(q.cuts(0).size() <= 15);
    for (std::size_t t = 0; t < q.cuts(0).size(); ++t) {
        for (std::size_t i = 0; i < 2000; ++i) {
            const double v = big(i, 0);
            CHECK((q.bin(0, v) <= t) == (v <= q.cuts(0)[t]));
        }
    }
    CHECK_THROWS_AS(BinMapper::fit(big, 1), ModelError);
}

TEST_CASE("sketches merge without loss") {
    const auto ds = toy::blobs(60, 2, 2, 7);
    const auto sk = sketch_features(ds.features, 1000);
    const std::vector<std::vector<FeatureSketch>> one{sk};
    CHECK(merge_sketches(one) == sk);
    const std::vector<std::size_t> lo = toy::iota_rows(30);
    std::vector<std::size_t> hi;
    for (std::size_t i = 30; i < 60; ++i) hi.push_back(i);
    const std::vector<std::vector<FeatureSketch>> two{sketch_features(ds.features.select_rows(lo), 1000),
                                                      sketch_features(ds.features.select_rows(hi), 1000)};
    CHECK(merge_sketches(two) == sk);
}

TEST_CASE("histogram sums reject malformed parts") {
    GradientHistogram a{0, 2, 4, std::vector<double>(8, 1.0), std::vector<double>(8, 1.0)};
    GradientHistogram b = a;
    const auto s = sum_histograms({{a}, {b}}, 2, 4);
    CHECK(s[0].grad[3] == 2.0);
    b.grad.resize(6);
    b.hess.resize(6);
    CHECK_THROWS_AS(sum_histograms({{a}, {b}}, 2, 4), ModelError);
    GradientHistogram c = a;
    c.node = 1;
    CHECK_THROWS_AS(sum_histograms({{a}, {c}}, 2, 4), ModelError);
}
