#pragma once

// Shared builders for test data.

#include <cmath>
#include <random>
#include <vector>

#include "kinkreg/dataset.hpp"

namespace testutil {

// Kink outcome with intercept-only covariates: y = bg*neg + bx*pos + noise.
inline kinkreg::Dataset kink_data(const std::vector<double>& g, const std::vector<double>& m,
                                  double beta_g, double beta_x, double gamma0,
                                  const std::vector<double>& noise = {}) {
    kinkreg::Dataset ds;
    ds.running = g;
    ds.shifter = m;
    ds.covariates = {std::vector<double>(g.size(), 1.0)};
    ds.covariate_names = {"const"};
    ds.outcome.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double dist = g[i] - gamma0;
        ds.outcome[i] = beta_g * std::min(dist, 0.0) + beta_x * std::max(dist, 0.0) +
                        (noise.empty() ? 0.0 : noise[i]);
    }
    return ds;
}

inline std::vector<double> randn(std::size_t n, unsigned seed, double sd = 1.0) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<double> out(n);
    for (auto& v : out) v = nd(gen);
    return out;
}

inline std::vector<double> uniform_weights(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

} // namespace testutil
