#pragma once

// Metric definitions written directly over label vectors, independent of the
// confusion-matrix code they check.

#include <cmath>
#include <vector>

namespace oracle {

// Direct definitions over label vectors.
struct Brute {
    const std::vector<int>& t;
    const std::vector<int>& p;
    int k;

    double count(auto pred) const {
        double c = 0;
        for (std::size_t i = 0; i < t.size(); ++i) c += pred(t[i], p[i]);
        return c;
    }
    double f1w() const {
        double s = 0;
        for (int c = 0; c < k; ++c) {
            const double tp = count([&](int a, int b) { return a == c && b == c; });
            const double fp = count([&](int a, int b) { return a != c && b == c; });
            const double fn = count([&](int a, int b) { return a == c && b != c; });
            const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
            s += f1 * (tp + fn);
        }
        return s / static_cast<double>(t.size());
    }
    // Correlation of the one-hot indicator matrices, each class column centered on its own mean.
    double mcc() const {
        const double n = static_cast<double>(t.size());
        double sab = 0, saa = 0, sbb = 0;
        for (int c = 0; c < k; ++c) {
            const double ma = count([&](int a, int) { return a == c; }) / n;
            const double mb = count([&](int, int b) { return b == c; }) / n;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double a = (t[i] == c) - ma, b = (p[i] == c) - mb;
                sab += a * b;
                saa += a * a;
                sbb += b * b;
            }
        }
        return saa * sbb == 0 ? 0.0 : sab / std::sqrt(saa * sbb);
    }
    double kappa() const {
        const double n = static_cast<double>(t.size());
        const double po = count([](int a, int b) { return a == b; }) / n;
        double pe = 0;
        for (int c = 0; c < k; ++c) {
            pe += count([&](int a, int) { return a == c; }) * count([&](int, int b) { return b == c; }) / (n * n);
        }
        if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
        return (po - pe) / (1 - pe);
    }
    double gmean() const {
        double logs = 0;
        int m = 0;
        for (int c = 0; c < k; ++c) {
            const double sup = count([&](int a, int) { return a == c; });
            if (sup == 0) continue;
            const double r = count([&](int a, int b) { return a == c && b == c; }) / sup;
            if (r == 0) return 0.0;
            logs += std::log(r);
            ++m;
        }
        return std::exp(logs / m);
    }
};

}  // namespace oracle
