#include "sevfl/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace sevfl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_inputs(const Matrix& x, std::span<const int> y, int n_classes) {
    if (x.rows() != y.size()) throw ModelError("linear: row count != label count");
    if (x.rows() == 0) throw ModelError("linear: empty training set");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw ModelError("linear: non-finite feature value");
    }
    for (int label : y) {
        if (label < 0 || label >= n_classes) throw ModelError("linear: label outside [0, n_classes)");
    }
}

void require_two_classes(std::span<const int> y) {
    std::set<int> seen(y.begin(), y.end());
    if (seen.size() < 2) throw ModelError("linear: training data must contain at least two classes");
}

struct SvmClassView {
    std::vector<double> target;  // +1 / -1
    std::vector<double> margin_f;  // current f_i = w.x_i + b
};

double squared_hinge_sum(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = 1.0 - t[i] * f[i];
        if (v > 0.0) s += v * v;
    }
    return s;
}

// Full-batch gradient descent with Armijo backtracking on one OvR class.
// Returns the number of epochs performed.
int svm_descend(LinearModelState& s, int cls, const Matrix& x, std::span<const int> y, int epochs,
                std::vector<double>* trace) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const double C = s.hyper.C;
    const bool intercept = s.hyper.fit_intercept;
    auto w = s.weights.row(static_cast<std::size_t>(cls));
    double& b = s.intercepts[static_cast<std::size_t>(cls)];

    std::vector<double> t(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = y[i] == cls ? 1.0 : -1.0;
        f[i] = dot(w, x.row(i)) + b;
    }
    double ww = dot(w, w);
    double obj = 0.5 * ww + C * squared_hinge_sum(t, f);
    if (trace) trace->push_back(obj);

    std::vector<double> gw(d), xd(n), f_try(n);
    double step = 1.0;
    int epoch = 0;
    for (; epoch < epochs; ++epoch) {
        std::copy(w.begin(), w.end(), gw.begin());
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = 1.0 - t[i] * f[i];
            if (v <= 0.0) continue;
            const double coef = -2.0 * C * t[i] * v;
            auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) gw[j] += coef * xi[j];
            gb += coef;
        }
        if (!intercept) gb = 0.0;
        const double gnorm2 = dot(gw, gw) + gb * gb;
        if (gnorm2 == 0.0) break;

        // Direction is -g; f changes linearly along it.
        for (std::size_t i = 0; i < n; ++i) xd[i] = -(dot(gw, x.row(i)) + gb);
        const double w_dot_g = dot(w, gw);

        step = std::min(1.0, step * 2.0);
        double new_obj = obj;
        bool accepted = false;
        while (step > 1e-300) {
            for (std::size_t i = 0; i < n; ++i) f_try[i] = f[i] + step * xd[i];
            const double ww_try = ww - 2.0 * step * w_dot_g + step * step * (gnorm2 - gb * gb);
            new_obj = 0.5 * ww_try + C * squared_hinge_sum(t, f_try);
            if (new_obj <= obj - 1e-4 * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        for (std::size_t j = 0; j < d; ++j) w[j] -= step * gw[j];
        b -= step * gb;
        ww = dot(w, w);
        // Recompute exactly rather than trusting the line-search extrapolation.
        for (std::size_t i = 0; i < n; ++i) f[i] = dot(w, x.row(i)) + b;
        new_obj = 0.5 * ww + C * squared_hinge_sum(t, f);
        const double decrease = obj - new_obj;
        obj = new_obj;
        if (trace) trace->push_back(obj);
        if (decrease < s.hyper.tol) {
            ++epoch;
            break;
        }
    }
    return epoch;
}

int pac_epochs(LinearModelState& s, const Matrix& x, std::span<const int> y, int epochs, std::uint64_t seed) {
    const std::size_t n = x.rows();
    const auto k = static_cast<std::size_t>(s.n_classes);
    const double C = s.hyper.C;
    const double bias_norm = s.hyper.fit_intercept ? 1.0 : 0.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::vector<double> scores(k);
    double prev_loss = 0.0;
    int epoch = 0;
    for (; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t i : order) {
            auto xi = x.row(i);
            for (std::size_t c = 0; c < k; ++c) scores[c] = dot(s.weights.row(c), xi) + s.intercepts[c];
            const auto truth = static_cast<std::size_t>(y[i]);
            std::size_t rival = truth == 0 ? 1 : 0;
            for (std::size_t c = 0; c < k; ++c) {
                if (c != truth && scores[c] > scores[rival]) rival = c;
            }
            const double loss = std::max(0.0, 1.0 - (scores[truth] - scores[rival]));
            loss_sum += loss;
            if (loss == 0.0) continue;
            const double norm2 = dot(xi, xi) + bias_norm;
            if (norm2 == 0.0) {
                ++s.skipped_updates;
                continue;
            }
            const double tau = std::min(C, loss / (2.0 * norm2));
            auto wt = s.weights.row(truth);
            auto wr = s.weights.row(rival);
            for (std::size_t j = 0; j < xi.size(); ++j) {
                wt[j] += tau * xi[j];
                wr[j] -= tau * xi[j];
            }
            if (s.hyper.fit_intercept) {
                s.intercepts[truth] += tau;
                s.intercepts[rival] -= tau;
            }
        }
        const double avg = loss_sum / static_cast<double>(n);
        if (epoch > 0 && std::abs(prev_loss - avg) < s.hyper.tol) {
            ++epoch;
            break;
        }
        prev_loss = avg;
    }
    return epoch;
}

}  // namespace

LinearHyper default_svm_hyper() { return LinearHyper{}; }

LinearHyper default_pac_hyper() {
    LinearHyper h;
    h.tol = 1e-3;
    return h;
}

LinearModelState LinearModelState::zeros(LinearKind kind, int n_classes, std::size_t n_features,
                                         const LinearHyper& hyper) {
    if (n_classes < 2) throw ModelError("linear: n_classes must be >= 2");
    LinearModelState s;
    s.kind = kind;
    s.n_classes = n_classes;
    s.weights = Matrix(static_cast<std::size_t>(n_classes), n_features);
    s.intercepts.assign(static_cast<std::size_t>(n_classes), 0.0);
    s.hyper = hyper;
    return s;
}

Matrix LinearModelState::decision_function(const Matrix& x) const {
    if (x.cols() != n_features()) {
        throw ModelError("linear: input width " + std::to_string(x.cols()) + " != trained width " +
                         std::to_string(n_features()));
    }
    Matrix out(x.rows(), static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(i, c) = dot(weights.row(c), x.row(i)) + intercepts[c];
    }
    return out;
}

std::vector<int> LinearModelState::predict(const Matrix& x) const {
    Matrix scores = decision_function(x);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = static_cast<int>(argmax_lowest(scores.row(i)));
    return out;
}

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

double svm_objective(const LinearModelState& s, int cls, const Matrix& x, std::span<const int> y) {
    auto w = s.weights.row(static_cast<std::size_t>(cls));
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double t = y[i] == cls ? 1.0 : -1.0;
        const double v = 1.0 - t * (dot(w, x.row(i)) + s.intercepts[static_cast<std::size_t>(cls)]);
        if (v > 0.0) loss += v * v;
    }
    return 0.5 * dot(w, w) + s.hyper.C * loss;
}

LinearModelState continue_training(const LinearModelState& init, const Matrix& x, std::span<const int> y, int epochs,
                                   std::uint64_t seed, std::vector<std::vector<double>>* objective_trace) {
    check_inputs(x, y, init.n_classes);
    if (x.cols() != init.n_features()) throw ModelError("linear: input width does not match model");
    if (epochs < 0) throw ModelError("linear: negative epoch budget");
    LinearModelState s = init;
    s.epochs_run = 0;
    if (s.kind == LinearKind::SquaredHingeSVM) {
        if (objective_trace) objective_trace->assign(static_cast<std::size_t>(s.n_classes), {});
        for (int c = 0; c < s.n_classes; ++c) {
            auto* trace = objective_trace ? &(*objective_trace)[static_cast<std::size_t>(c)] : nullptr;
            s.epochs_run = std::max(s.epochs_run, svm_descend(s, c, x, y, epochs, trace));
        }
    } else {
        s.epochs_run = pac_epochs(s, x, y, epochs, seed);
    }
    return s;
}

LinearModelState train_svm(const Matrix& x, std::span<const int> y, int n_classes, const LinearHyper& hyper) {
    check_inputs(x, y, n_classes);
    require_two_classes(y);
    auto init = LinearModelState::zeros(LinearKind::SquaredHingeSVM, n_classes, x.cols(), hyper);
    return continue_training(init, x, y, hyper.max_epochs, hyper.seed);
}

LinearModelState train_pac(const Matrix& x, std::span<const int> y, int n_classes, const LinearHyper& hyper) {
    check_inputs(x, y, n_classes);
    require_two_classes(y);
    auto init = LinearModelState::zeros(LinearKind::PassiveAggressive, n_classes, x.cols(), hyper);
    return continue_training(init, x, y, hyper.max_epochs, hyper.seed);
}

std::string to_string(LinearKind k) {
    return k == LinearKind::SquaredHingeSVM ? "squared_hinge_svm" : "passive_aggressive";
}

nlohmann::json to_json(const LinearModelState& s) {
    return {{"schema", "sevfl.model/1"},
            {"type", "linear"},
            {"kind", to_string(s.kind)},
            {"n_classes", s.n_classes},
            {"n_features", s.n_features()},
            {"weights", s.weights.data()},
            {"intercepts", s.intercepts},
            {"hyper",
             {{"C", s.hyper.C},
              {"tol", s.hyper.tol},
              {"max_epochs", s.hyper.max_epochs},
              {"seed", s.hyper.seed},
              {"fit_intercept", s.hyper.fit_intercept}}},
            {"epochs_run", s.epochs_run},
            {"skipped_updates", s.skipped_updates}};
}

LinearModelState linear_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "sevfl.model/1" || j.value("type", "") != "linear") {
        throw ModelError("linear json: unsupported schema");
    }
    LinearModelState s;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "squared_hinge_svm") {
        s.kind = LinearKind::SquaredHingeSVM;
    } else if (kind == "passive_aggressive") {
        s.kind = LinearKind::PassiveAggressive;
    } else {
        throw ModelError("linear json: unknown kind '" + kind + "'");
    }
    s.n_classes = j.at("n_classes").get<int>();
    const auto d = j.at("n_features").get<std::size_t>();
    s.weights = Matrix(static_cast<std::size_t>(s.n_classes), d, j.at("weights").get<std::vector<double>>());
    s.intercepts = j.at("intercepts").get<std::vector<double>>();
    if (s.intercepts.size() != static_cast<std::size_t>(s.n_classes)) {
        throw ModelError("linear json: intercept count mismatch");
    }
    const auto& h = j.at("hyper");
    s.hyper.C = h.at("C").get<double>();
    s.hyper.tol = h.at("tol").get<double>();
    s.hyper.max_epochs = h.at("max_epochs").get<int>();
    s.hyper.seed = h.at("seed").get<std::uint64_t>();
    s.hyper.fit_intercept = h.at("fit_intercept").get<bool>();
    s.epochs_run = j.value("epochs_run", 0);
    s.skipped_updates = j.value("skipped_updates", std::size_t{0});
    return s;
}

}  // namespace sevfl
