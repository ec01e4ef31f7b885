#pragma once
// Slow reference implementations used as test oracles. None of these call into
// the library's numeric code; they recompute from the raw parameter arrays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sddnn/arch.hpp"
#include "sddnn/evalsess.hpp"
#include "sddnn/nncore.hpp"

namespace oracle {

inline double act(sddnn::Activation a, double z) {
    switch (a) {
        case sddnn::Activation::tanh:
            return std::tanh(z);
        case sddnn::Activation::sigmoid:
            return 1.0 / (1.0 + std::exp(-z));
        case sddnn::Activation::linear:
            return z;
    }
    return z;
}

// Scalar triple loop over the layers.
inline std::vector<double> forward(const std::vector<sddnn::Layer>& layers, std::vector<double> x) {
    for (const auto& l : layers) {
        std::vector<double> y(l.shape.output_dim);
        for (std::size_t r = 0; r < l.shape.output_dim; ++r) {
            double z = l.biases[r];
            for (std::size_t c = 0; c < l.shape.input_dim; ++c) z += l.weights[r * l.shape.input_dim + c] * x[c];
            y[r] = act(l.shape.activation, z);
        }
        x = std::move(y);
    }
    return x;
}

inline double network_score(const sddnn::Network& n, const std::vector<double>& frame) {
    std::vector<double> x;
    if (n.feature_indices.empty()) {
        x = frame;
    } else {
        for (auto i : n.feature_indices) x.push_back(frame[i]);
    }
    return forward(n.layers, x)[0];
}

// Composite evaluated group by group, straight from the stored blocks.
inline double composite_score(const sddnn::Composite& c, const std::vector<double>& frame) {
    std::vector<double> concat;
    for (std::size_t j = 0; j < c.groups.size(); ++j) {
        std::vector<double> x;
        for (auto i : c.groups[j].feature_indices) x.push_back(frame[i]);
        auto h = forward({c.layers[j]}, x);
        concat.insert(concat.end(), h.begin(), h.end());
    }
    std::vector<sddnn::Layer> fusion(c.layers.begin() + static_cast<std::ptrdiff_t>(c.groups.size()), c.layers.end());
    return forward(fusion, concat)[0];
}

inline double mse(const std::vector<double>& y, const std::vector<double>& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - t[i]) * (y[i] - t[i]);
    return s / static_cast<double>(y.size());
}

// Nearest-rank style search: value at fractional rank r = (p/100)(n-1) by linear
// interpolation between the two neighbouring order statistics.
inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double r = p / 100.0 * static_cast<double>(v.size() - 1);
    std::size_t lo = 0;
    while (static_cast<double>(lo + 1) <= r && lo + 1 < v.size()) ++lo;
    const double frac = r - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v[lo];
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct Functionals {
    double p1, p99, range, mean, median, stddev;
};

inline Functionals functionals(const std::vector<double>& col) {
    Functionals f{};
    f.p1 = percentile(col, 1.0);
    f.p99 = percentile(col, 99.0);
    f.range = f.p99 - f.p1;
    long double s = 0.0L;
    for (double v : col) s += v;
    f.mean = static_cast<double>(s / static_cast<long double>(col.size()));
    f.median = percentile(col, 50.0);
    long double ss = 0.0L;
    for (double v : col) ss += (v - f.mean) * (v - f.mean);
    f.stddev = std::sqrt(static_cast<double>(ss / static_cast<long double>(col.size())));
    return f;
}

// Error of thresholding at t, counted directly.
inline double threshold_error(const std::vector<double>& q, const std::vector<int>& y, double t) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < q.size(); ++i) wrong += ((q[i] > t ? 1 : 0) != y[i]);
    return static_cast<double>(wrong) / static_cast<double>(q.size());
}

// Every midpoint between distinct scores plus one threshold below all and one above all.
inline double best_threshold_error(const std::vector<double>& q, const std::vector<int>& y) {
    std::vector<double> cands{-1.0, 2.0};
    for (double a : q) {
        for (double b : q) {
            if (a < b) cands.push_back((a + b) / 2.0);
        }
    }
    double best = 1.0;
    for (double c : cands) best = std::min(best, threshold_error(q, y, c));
    return best;
}

// Counts window starts 0, s, 2s, ... whose window [k, k + w) fits in n samples.
inline std::size_t enumerate_windows(std::size_t n, std::size_t w, std::size_t s) {
    std::size_t count = 0;
    for (std::size_t start = 0; start + w <= n; start += s) ++count;
    return count;
}

// Central differences of the MSE loss w.r.t. every parameter of every trainable layer.
inline std::vector<double> fd_gradient(sddnn::Network net, const std::vector<double>& x, const std::vector<double>& t,
                                       double h) {
    std::vector<double> g;
    for (auto& l : net.layers) {
        if (!l.trainable) continue;
        for (auto* block : {&l.weights, &l.biases}) {
            for (double& p : *block) {
                const double keep = p;
                p = keep + h;
                const double up = mse(forward(net.layers, x), t);
                p = keep - h;
                const double down = mse(forward(net.layers, x), t);
                p = keep;
                g.push_back((up - down) / (2.0 * h));
            }
        }
    }
    return g;
}

inline std::vector<double> flatten(const sddnn::Gradients& grads) {
    std::vector<double> out;
    for (const auto& g : grads) {
        out.insert(out.end(), g.weights.begin(), g.weights.end());
        out.insert(out.end(), g.biases.begin(), g.biases.end());
    }
    return out;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace oracle
