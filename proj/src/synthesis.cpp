#include "sevfl/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

namespace sevfl {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    }
    return out;
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
    Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    }
    return out;
}

Matrix cholesky_lower(const Matrix& corr) {
    Eigen::LLT<Eigen::MatrixXd> llt(to_eigen(corr));
    if (llt.info() != Eigen::Success) throw SynthesisError("copula: correlation matrix is not positive definite");
    Eigen::MatrixXd l = llt.matrixL();
    return from_eigen(l);
}

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::vector<double> normal_scores(std::span<const double> values) {
    auto ranks = average_ranks(values);
    const double denom = static_cast<double>(values.size()) + 1.0;
    for (auto& r : ranks) r = normal_quantile(r / denom);
    return ranks;
}

Matrix pearson_correlation(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = x(i, a) - mean[a];
            for (std::size_t b = a; b < d; ++b) cov(a, b) += da * (x(i, b) - mean[b]);
        }
    }
    Matrix corr(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        corr(a, a) = 1.0;
        for (std::size_t b = a + 1; b < d; ++b) {
            const double denom = std::sqrt(cov(a, a) * cov(b, b));
            const double r = denom > 0.0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
            corr(a, b) = r;
            corr(b, a) = r;
        }
    }
    return corr;
}

bool repair_correlation(Matrix& corr, double min_eigenvalue) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(corr));
    if (eig.info() != Eigen::Success) throw SynthesisError("copula: eigen decomposition failed");
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() >= min_eigenvalue) return false;
    values = values.cwiseMax(min_eigenvalue);
    Eigen::MatrixXd fixed = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd inv_sd = fixed.diagonal().cwiseSqrt().cwiseInverse();
    fixed = inv_sd.asDiagonal() * fixed * inv_sd.asDiagonal();
    fixed = 0.5 * (fixed + fixed.transpose());
    fixed.diagonal().setOnes();
    corr = from_eigen(fixed);
    return true;
}

double inverse_ecdf(std::span<const double> sorted, double u) {
    if (sorted.empty()) throw SynthesisError("inverse_ecdf: empty support");
    u = std::clamp(u, 0.0, 1.0);
    const double pos = u * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return std::clamp(sorted[lo] + frac * (sorted[hi] - sorted[lo]), sorted.front(), sorted.back());
}

CopulaModel fit_copula(const Dataset& train, std::uint64_t seed) {
    train.validate();
    if (train.n_features() == 0) throw SynthesisError("copula: dataset has no features");
    if (train.n_rows() == 0) throw SynthesisError("copula: dataset has no rows");
    CopulaModel model;
    model.feature_names = train.feature_names;
    model.n_classes = train.n_classes;
    model.seed = seed;

    const auto counts = train.class_counts();
    const double n = static_cast<double>(train.n_rows());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        model.class_proportions.push_back(static_cast<double>(counts[c]) / n);
        if (counts[c] == 0) continue;
        if (counts[c] < 2) {
            throw SynthesisError("copula: class " + std::to_string(c) + " has fewer than 2 rows");
        }
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < train.n_rows(); ++i) {
            if (train.labels[i] == static_cast<int>(c)) rows.push_back(i);
        }
        const Matrix block = train.features.select_rows(rows);

        ClassCopula cc;
        cc.label = static_cast<int>(c);
        const std::size_t d = block.cols();
        Matrix scores(block.rows(), d);
        for (std::size_t j = 0; j < d; ++j) {
            auto col = block.column(j);
            const bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
            auto z = constant ? std::vector<double>(col.size(), 0.0) : normal_scores(col);
            for (std::size_t i = 0; i < z.size(); ++i) scores(i, j) = z[i];
            std::sort(col.begin(), col.end());
            cc.marginals.push_back(std::move(col));
        }
        cc.correlation = pearson_correlation(scores);
        cc.repaired = repair_correlation(cc.correlation);
        cc.cholesky = cholesky_lower(cc.correlation);
        model.classes.push_back(std::move(cc));
    }
    return model;
}

Dataset sample_copula(const CopulaModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw SynthesisError("copula: sample size must be >= 1");
    if (model.classes.empty()) throw SynthesisError("copula: model has no classes");
    const auto counts = largest_remainder(n, model.class_proportions);
    const std::size_t d = model.feature_names.size();

    Dataset out;
    out.feature_names = model.feature_names;
    out.n_classes = model.n_classes;
    std::vector<double> values;
    values.reserve(n * d);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> eps(d), z(d);
    for (const auto& cc : model.classes) {
        const std::size_t count = counts[static_cast<std::size_t>(cc.label)];
        for (std::size_t r = 0; r < count; ++r) {
            for (auto& e : eps) e = gauss(rng);
            for (std::size_t a = 0; a < d; ++a) {
                double s = 0.0;
                for (std::size_t b = 0; b <= a; ++b) s += cc.cholesky(a, b) * eps[b];
                z[a] = s;
            }
            for (std::size_t j = 0; j < d; ++j) values.push_back(inverse_ecdf(cc.marginals[j], normal_cdf(z[j])));
            out.labels.push_back(cc.label);
        }
    }
    out.features = Matrix(out.labels.size(), d, std::move(values));
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw SynthesisError("ks: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

FidelityReport fidelity_report(const Dataset& real, const Dataset& synth) {
    if (real.n_features() != synth.n_features()) {
        throw SynthesisError("fidelity: feature count mismatch (" + std::to_string(real.n_features()) + " vs " +
                             std::to_string(synth.n_features()) + ")");
    }
    FidelityReport rep;
    rep.feature_names = real.feature_names;
    for (std::size_t j = 0; j < real.n_features(); ++j) {
        const double ks = ks_statistic(real.features.column(j), synth.features.column(j));
        rep.ks.push_back(ks);
        rep.max_ks = std::max(rep.max_ks, ks);
    }
    const Matrix cr = pearson_correlation(real.features);
    const Matrix cs = pearson_correlation(synth.features);
    for (std::size_t a = 0; a < cr.rows(); ++a) {
        for (std::size_t b = a + 1; b < cr.cols(); ++b) {
            rep.max_correlation_diff = std::max(rep.max_correlation_diff, std::abs(cr(a, b) - cs(a, b)));
        }
    }
    const int k = std::max(real.n_classes, synth.n_classes);
    std::vector<double> pr(static_cast<std::size_t>(k), 0.0), ps(static_cast<std::size_t>(k), 0.0);
    for (int y : real.labels) pr[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(real.n_rows());
    for (int y : synth.labels) ps[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(synth.n_rows());
    for (std::size_t c = 0; c < pr.size(); ++c) rep.class_proportion_l1 += std::abs(pr[c] - ps[c]);
    return rep;
}

nlohmann::json FidelityReport::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t j = 0; j < ks.size(); ++j) per[feature_names[j]] = ks[j];
    return {{"schema", "sevfl.fidelity/1"},
            {"ks", per},
            {"max_ks", max_ks},
            {"max_correlation_diff", max_correlation_diff},
            {"class_proportion_l1", class_proportion_l1}};
}

nlohmann::json CopulaModel::to_json() const {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& c : classes) {
        cls.push_back({{"label", c.label},
                       {"marginals", c.marginals},
                       {"correlation", matrix_json(c.correlation)},
                       {"cholesky", matrix_json(c.cholesky)},
                       {"repaired", c.repaired}});
    }
    return {{"schema", "sevfl.copula/1"},   {"feature_names", feature_names}, {"n_classes", n_classes},
            {"class_proportions", class_proportions}, {"seed", seed}, {"classes", std::move(cls)}};
}

CopulaModel CopulaModel::from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "sevfl.copula/1") throw SynthesisError("copula json: unsupported schema");
    CopulaModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.n_classes = j.at("n_classes").get<int>();
    m.class_proportions = j.at("class_proportions").get<std::vector<double>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("classes")) {
        ClassCopula cc;
        cc.label = c.at("label").get<int>();
        cc.marginals = c.at("marginals").get<std::vector<std::vector<double>>>();
        cc.correlation = matrix_from_json(c.at("correlation"));
        cc.cholesky = matrix_from_json(c.at("cholesky"));
        cc.repaired = c.value("repaired", false);
        m.classes.push_back(std::move(cc));
    }
    return m;
}

}  // namespace sevfl
