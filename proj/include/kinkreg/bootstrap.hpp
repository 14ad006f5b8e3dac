#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/estimator.hpp"
#include "kinkreg/linalg.hpp"
#include "kinkreg/parallel.hpp"
#include "kinkreg/rng.hpp"
#include "kinkreg/stats.hpp"

namespace kinkreg {

struct BootstrapResult {
    std::vector<std::vector<double>> replicates; // B rows, one coefficient vector each
    std::vector<double> standard_errors;
    std::vector<double> ci_lower, ci_upper; // percentile interval at level alpha
    std::uint64_t seed = 0;
    std::size_t n_draws = 0;
    double alpha = 0.05;
};

namespace detail {

// Order statistic at level q using the (B + 1) q convention, interpolating
// between neighbors when the index is not integral.
inline double percentile(const std::vector<double>& sorted, double q) {
    const std::size_t b = sorted.size();
    const double h = q * static_cast<double>(b + 1);
    if (h <= 1.0) return sorted.front();
    if (h >= static_cast<double>(b)) return sorted.back();
    const std::size_t i = static_cast<std::size_t>(h); // 1-based lower order statistic
    const double frac = h - static_cast<double>(i);
    return sorted[i - 1] + frac * (sorted[i] - sorted[i - 1]);
}

} // namespace detail

// Wild bootstrap for the second-step coefficients: residuals from the
// second-step fit are flipped by Rademacher signs, the design z_i evaluated
// at the leave-one-out thresholds stays fixed, and only the second-step
// least squares is re-run per draw. The threshold is never re-estimated
// (the bootstrap is valid for the coefficients only). Draws are keyed by
// (seed, draw, observation), so replicates are reproducible from the seed
// under any thread count.
inline BootstrapResult wild_bootstrap(const Dataset& ds, std::span<const double> loo_gamma,
                                      std::span<const std::uint8_t> interior_mask,
                                      const CoefficientEstimate& beta_star, std::size_t n_draws,
                                      double alpha, std::uint64_t seed, int threads = 0) {
    const std::size_t n = ds.n();
    if (loo_gamma.size() != n || interior_mask.size() != n)
        throw validation_error("wild_bootstrap: input lengths do not match dataset");
    if (n_draws < 2) throw validation_error("wild_bootstrap: need at least 2 draws");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("wild_bootstrap: alpha must lie in (0, 1)");

    const std::size_t p = ds.covariates.size();
    const std::size_t d = p + 2;
    std::vector<double> beta(d);
    beta[0] = beta_star.beta_g;
    beta[1] = beta_star.beta_x;
    for (std::size_t c = 0; c < beta_star.beta_c.size(); ++c) beta[2 + c] = beta_star.beta_c[c];
    for (std::size_t c = 0; c < beta_star.beta_v.size(); ++c)
        beta[2 + beta_star.beta_c.size() + c] = beta_star.beta_v[c];
    if (beta_star.beta_c.size() + beta_star.beta_v.size() != p)
        throw validation_error("wild_bootstrap: coefficient estimate does not match dataset");

    // Fixed design over the rows the second step used.
    std::vector<double> zrows, fitted, resid;
    std::vector<std::uint64_t> obs_index;
    std::vector<double> gram(d * d, 0.0);
    std::vector<double> z(d);
    for (std::size_t i = 0; i < n; ++i) {
        if (!interior_mask[i] || !std::isfinite(loo_gamma[i])) continue;
        const double dist = ds.running[i] - loo_gamma[i];
        z[0] = std::min(dist, 0.0);
        z[1] = std::max(dist, 0.0);
        for (std::size_t c = 0; c < p; ++c) z[2 + c] = ds.covariates[c][i];
        double fit = 0;
        for (std::size_t r = 0; r < d; ++r) fit += beta[r] * z[r];
        zrows.insert(zrows.end(), z.begin(), z.end());
        fitted.push_back(fit);
        resid.push_back(ds.outcome[i] - fit);
        obs_index.push_back(i);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c2 = 0; c2 <= r; ++c2) gram[r * d + c2] += z[r] * z[c2];
    }
    const std::size_t rows = fitted.size();
    if (rows < d)
        throw degenerate_window_error(std::numeric_limits<double>::quiet_NaN(),
                                      "wild_bootstrap: too few usable observations");
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c2 = r + 1; c2 < d; ++c2) gram[r * d + c2] = gram[c2 * d + r];
    if (!linalg::solve_spd_pivoted(gram, std::vector<double>(d, 0.0), d, local_pivot_tol))
        throw singular_fit_error(std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN(),
                                 "wild_bootstrap: second-step design is rank deficient");

    BootstrapResult out;
    out.seed = seed;
    out.n_draws = n_draws;
    out.alpha = alpha;
    out.replicates.assign(n_draws, std::vector<double>(d, 0.0));

    parallel_for(n_draws, threads, [&](std::size_t draw) {
        std::vector<double> rhs(d, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double eps = rng::rademacher(seed, draw, obs_index[r]);
            const double ystar = fitted[r] + resid[r] * eps;
            const double* zr = &zrows[r * d];
            for (std::size_t c = 0; c < d; ++c) rhs[c] += zr[c] * ystar;
        }
        auto sol = linalg::solve_spd_pivoted(gram, std::move(rhs), d, local_pivot_tol);
        // the design is fixed across draws and was checked full rank above
        out.replicates[draw] = std::move(sol.value());
    });

    out.standard_errors.resize(d);
    out.ci_lower.resize(d);
    out.ci_upper.resize(d);
    std::vector<double> col(n_draws);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t b2 = 0; b2 < n_draws; ++b2) col[b2] = out.replicates[b2][c];
        out.standard_errors[c] = sample_sd(col);
        std::sort(col.begin(), col.end());
        out.ci_lower[c] = detail::percentile(col, alpha / 2.0);
        out.ci_upper[c] = detail::percentile(col, 1.0 - alpha / 2.0);
    }
    return out;
}

} // namespace kinkreg
