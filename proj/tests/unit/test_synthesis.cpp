#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sevfl/synthesis.hpp"
#include "toy.hpp"

using namespace sevfl;

namespace {

// Brute-force KS: scan every observed value.
double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
    double best = 0.0;
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    for (double t : pts) {
        double fa = 0, fb = 0;
        for (double v : a) fa += v <= t;
        for (double v : b) fb += v <= t;
        best = std::max(best, std::abs(fa / a.size() - fb / b.size()));
    }
    return best;
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

Dataset single_class(Matrix x) {
    Dataset ds;
    ds.n_classes = 2;
    for (std::size_t j = 0; j < x.cols(); ++j) ds.feature_names.push_back("c" + std::to_string(j));
    ds.labels.assign(x.rows(), 0);
    ds.features = std::move(x);
    return ds;
}

}  // namespace

TEST_CASE("ranks, normal scores and the normal pair") {
    const std::vector<double> v{10, 20, 20, 5};
    CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
    const auto s = normal_scores(v);
    CHECK(s[3] == doctest::Approx(normal_quantile(1.0 / 5.0)).epsilon(1e-15));
    CHECK(s[1] == s[2]);
    for (double p : {1e-10, 0.01, 0.3, 0.5, 0.77, 0.999}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("inverse ECDF") {
    const std::vector<double> s{1, 2, 3, 4, 5};
    CHECK(inverse_ecdf(s, 0.5) == 3.0);
    CHECK(inverse_ecdf(s, 0.0) == 1.0);
    CHECK(inverse_ecdf(s, 1.0) == 5.0);
    CHECK(inverse_ecdf(s, 0.125) == doctest::Approx(1.5));
    CHECK_THROWS_AS(inverse_ecdf(std::vector<double>{}, 0.5), SynthesisError);
}

TEST_CASE("KS statistic") {
    const std::vector<double> a{1, 2, 3, 4}, b{10, 11};
    CHECK(ks_statistic(a, a) == 0.0);
    CHECK(ks_statistic(a, b) == 1.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> x(15 + rep), y(20);
        for (double& v : x) v = std::round(z(rng) * 3);  // ties on purpose
        for (double& v : y) v = std::round(z(rng) * 3 + 0.5);
        CHECK(ks_statistic(x, y) == doctest::Approx(brute_ks(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("pearson correlation and degenerate columns") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Matrix x(50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = x(i, 0) + z(rng);
        x(i, 2) = 4.0;
    }
    const auto c = pearson_correlation(x);
    CHECK(c(0, 1) == doctest::Approx(corr(x.column(0), x.column(1))).epsilon(1e-12));
    CHECK(c(0, 2) == 0.0);
    CHECK(c(2, 2) == 1.0);

    const auto m = fit_copula(single_class(x), 1);
    const auto& k = m.classes[0];
    CHECK(k.correlation(0, 2) == 0.0);
    CHECK(k.correlation(1, 2) == 0.0);
}

TEST_CASE("single feature gives a 1x1 correlation") {
    const auto m = fit_copula(single_class(Matrix(10, 1, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10})), 1);
    CHECK(m.classes[0].correlation == Matrix(1, 1, 1.0));
}

TEST_CASE("duplicated column triggers eigenvalue repair and a valid Cholesky") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    Matrix x(200, 3);
    for (std::size_t i = 0; i < 200; ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = x(i, 0);
        x(i, 2) = z(rng);
    }
    const auto m = fit_copula(single_class(x), 4);
    const auto& k = m.classes[0];
    CHECK(k.repaired);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(k.correlation(i, i) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = 0; j < 3; ++j) {
            double llt = 0.0;
            for (std::size_t t = 0; t < 3; ++t) llt += k.cholesky(i, t) * k.cholesky(j, t);
            CHECK(llt == doctest::Approx(k.correlation(i, j)).epsilon(1e-9));
            if (j > i) CHECK(k.cholesky(i, j) == 0.0);
        }
    }
    CHECK_NOTHROW(sample_copula(m, 100, 5));
}

TEST_CASE("independent uniform columns stay uncorrelated") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u;
    Matrix x(5000, 2);
    for (double& v : x.data()) v = u(rng);
    const auto m = fit_copula(single_class(x), 1);
    CHECK(std::abs(m.classes[0].correlation(0, 1)) < 0.05);
    const auto s = sample_copula(m, 5000, 2);
    CHECK(std::abs(corr(s.features.column(0), s.features.column(1))) < 0.05);
}

TEST_CASE("class counts follow largest-remainder allocation") {
    auto ds = toy::blobs(3342, 2, 4, 5);
    ds.labels = toy::labels_with_counts({275, 2082, 291, 694});
    const auto m = fit_copula(ds, 6);
    CHECK(sample_copula(m, 3342, 7).class_counts() == std::vector<std::size_t>{275, 2082, 291, 694});
    const auto half = sample_copula(m, 1671, 7).class_counts();
    CHECK(half == std::vector<std::size_t>{138, 1041, 145, 347});  // 137.5 | 1041 | 145.5 | 347, ties low
}

TEST_CASE("samples stay inside each marginal's range and are reproducible") {
    const auto ds = toy::blobs(300, 3, 4, 8, 2.0);
    const auto m = fit_copula(ds, 9);
    const auto a = sample_copula(m, 500, 10);
    CHECK(format_dataset_csv(a) == format_dataset_csv(sample_copula(m, 500, 10)));
    CHECK_FALSE(a.features == sample_copula(m, 500, 11).features);
    for (std::size_t j = 0; j < 3; ++j) {
        const auto col = ds.features.column(j);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        for (double v : a.features.column(j)) {
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
    }
    const auto back = CopulaModel::from_json(m.to_json());
    CHECK(sample_copula(back, 500, 10).features == a.features);
}

TEST_CASE("fidelity of a copy is perfect; of a fitted toy is close") {
    const auto ds = toy::blobs(400, 3, 2, 11);
    const auto same = fidelity_report(ds, ds);
    CHECK(same.max_ks == 0.0);
    CHECK(same.max_correlation_diff == 0.0);
    CHECK(same.class_proportion_l1 == 0.0);

    const auto real = single_class(toy::copula_toy(5000, 12));
    const auto rep = fidelity_report(real, sample_copula(fit_copula(real, 1), 5000, 2));
    for (double k : rep.ks) CHECK(k < 0.05);
    CHECK(rep.max_correlation_diff < 0.1);
}
