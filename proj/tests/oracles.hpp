#pragma once

// Test-only oracles, independent of the library's backward/metric paths:
// brute-force matrix products and central finite differences over a
// forward-only loss recomputation.

#include <cmath>
#include <functional>
#include <vector>

#include "dep/tensor.hpp"

namespace dep::testing {

// Three-nested-loop reference product.
inline std::vector<double> brute_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        int m, int k, int n) {
    std::vector<double> c(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) {
                s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
            }
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
    }
    return c;
}

// d(loss)/d(leaf[i]) by central differences; loss() must be a forward-only
// recomputation (it is called with the leaf temporarily perturbed).
inline std::vector<double> finite_diff(Tensor leaf, const std::function<double()>& loss,
                                       double h = 1e-5) {
    std::vector<double> grads(leaf.numel());
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = loss();
        data[i] = saved - h;
        const double down = loss();
        data[i] = saved;
        grads[i] = (up - down) / (2.0 * h);
    }
    return grads;
}

// Relative error with the spec's small-magnitude skip: coordinates where
// both sides are below `floor` in magnitude do not count.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& fd,
                          double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double f = fd[i];
        const double mag = std::max(std::abs(a), std::abs(f));
        if (mag <= floor) continue;
        worst = std::max(worst, std::abs(a - f) / mag);
    }
    return worst;
}

inline std::vector<double> grad_of(const Tensor& t) {
    auto g = t.grad();
    return std::vector<double>(g.begin(), g.end());
}

}  // namespace dep::testing
