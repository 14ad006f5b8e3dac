#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/kernel.hpp"
#include "kinkreg/model_spec.hpp"
#include "kinkreg/parallel.hpp"
#include "kinkreg/profile.hpp"

namespace kinkreg {

// The estimated threshold function on a query grid plus the per-observation
// leave-one-out values feeding the second step. Missing fits are NaN, never
// interpolated. interior_mask marks observations inside the central
// quantile range of the shifter.
struct ThresholdContour {
    std::vector<double> query_points; // shifter values
    std::vector<double> query_levels; // matching quantile levels
    std::vector<double> gamma_hat;    // NaN = missing
    std::vector<double> effective_mass;
    std::vector<double> loo_gamma;    // per observation, NaN = missing; empty until computed
    double bandwidth = 0;
    double gamma_lo = 0, gamma_hi = 0; // candidate search range
    std::vector<std::uint8_t> interior_mask;
};

struct CoefficientEstimate {
    double beta_g = 0;
    double beta_x = 0;
    std::vector<double> beta_c; // ordinary covariates (includes the intercept)
    std::vector<double> beta_v; // control-residual coefficients, when present
    // Filled by the bootstrap; order [beta_g, beta_x, beta_c..., beta_v...].
    std::vector<double> standard_errors;
    std::size_t n_used = 0;
};

namespace detail {

constexpr std::size_t no_skip = std::numeric_limits<std::size_t>::max();

// Shared machinery for the contour sweep and the leave-one-out pass: data
// re-sorted by the shifter so each kernel window is one contiguous range,
// plus a g-ascending traversal order for the incremental grid sweep.
struct ContourEngine {
    const Dataset& ds;
    std::size_t n, p, d;
    double b;
    std::vector<double> grid;
    double min_mass;

    std::vector<std::size_t> m_order; // m-position -> original index
    std::vector<std::size_t> m_pos;   // original index -> m-position
    std::vector<double> m_s, g_s, y_s;
    std::vector<std::vector<double>> x_s;
    std::vector<const double*> xcols;

    std::vector<std::uint32_t> g_walk; // m-positions in g-ascending order
    std::vector<double> g_walk_val;

    ContourEngine(const Dataset& dataset, const ModelSpec& spec)
        : ds(dataset),
          n(dataset.n()),
          p(dataset.covariates.size()),
          d(dataset.covariates.size() + 2),
          b(bandwidth(dataset.n(), spec.bandwidth_rule)),
          grid(make_gamma_grid(dataset, spec.gamma_grid)),
          min_mass(static_cast<double>(p + 3)) {
        m_order.resize(n);
        std::iota(m_order.begin(), m_order.end(), std::size_t{0});
        std::sort(m_order.begin(), m_order.end(), [&](std::size_t a, std::size_t c) {
            if (ds.shifter[a] != ds.shifter[c]) return ds.shifter[a] < ds.shifter[c];
            return a < c;
        });
        m_pos.resize(n);
        m_s.resize(n);
        g_s.resize(n);
        y_s.resize(n);
        x_s.assign(p, std::vector<double>(n));
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t i = m_order[r];
            m_pos[i] = r;
            m_s[r] = ds.shifter[i];
            g_s[r] = ds.running[i];
            y_s[r] = ds.outcome[i];
            for (std::size_t c = 0; c < p; ++c) x_s[c][r] = ds.covariates[c][i];
        }
        xcols.resize(p);
        for (std::size_t c = 0; c < p; ++c) xcols[c] = x_s[c].data();

        g_walk.resize(n);
        std::iota(g_walk.begin(), g_walk.end(), std::uint32_t{0});
        std::sort(g_walk.begin(), g_walk.end(), [&](std::uint32_t a, std::uint32_t c) {
            if (g_s[a] != g_s[c]) return g_s[a] < g_s[c];
            return a < c;
        });
        g_walk_val.resize(n);
        for (std::size_t t = 0; t < n; ++t) g_walk_val[t] = g_s[g_walk[t]];
    }

    struct Workspace {
        std::vector<double> w_m; // weights by m-position; zero outside the active window
        WeightVector wv_orig;    // original-order weights for the final refit
        SweepAccum acc;
        SweepScratch scratch;
        std::vector<double> ssr;
        void init(const ContourEngine& e) {
            if (w_m.size() != e.n) {
                w_m.assign(e.n, 0.0);
                wv_orig.weights.assign(e.n, 0.0);
            }
            acc.reset(e.p);
            scratch.reset(e.d);
        }
    };

    struct QueryResult {
        double gamma = std::numeric_limits<double>::quiet_NaN();
        double mass = 0;
        bool ok = false;
        LocalFit fit;
    };

    // Pointwise estimate at query point m; skip_pos (an m-position) gets
    // zero weight, which is how the leave-one-out estimator removes one
    // observation without rebuilding anything.
    QueryResult run_query(double m, std::size_t skip_pos, Workspace& ws) const {
        QueryResult res;
        ws.init(*this);
        const double span = kernel_cutoff * b;
        const std::size_t lo =
            std::lower_bound(m_s.begin(), m_s.end(), m - span) - m_s.begin();
        const std::size_t hi =
            std::upper_bound(m_s.begin(), m_s.end(), m + span) - m_s.begin();

        double mass = 0;
        for (std::size_t r = lo; r < hi; ++r) {
            const double k = r == skip_pos ? 0.0 : kernel_trunc((m_s[r] - m) / b);
            ws.w_m[r] = k;
            mass += k;
        }
        res.mass = mass;
        if (!(mass >= min_mass)) {
            for (std::size_t r = lo; r < hi; ++r) ws.w_m[r] = 0.0;
            return res;
        }
        for (std::size_t r = lo; r < hi; ++r) {
            const double w = ws.w_m[r] / mass;
            ws.w_m[r] = w;
            if (w != 0.0) ws.acc.add_total(w, g_s[r], y_s[r], xcols.data(), r);
        }

        std::size_t t = 0;
        auto advance = [&](double gamma) {
            while (t < n && g_walk_val[t] <= gamma) {
                const std::uint32_t r = g_walk[t];
                if (r >= lo && r < hi) {
                    const double w = ws.w_m[r];
                    if (w != 0.0) ws.acc.add_left(w, g_s[r], y_s[r], xcols.data(), r);
                }
                ++t;
            }
        };
        std::size_t best = 0;
        bool any = false;
        sweep_profile(ws.acc, grid, advance, ws.scratch, d, ws.ssr, best, any);
        if (!any) {
            for (std::size_t r = lo; r < hi; ++r) ws.w_m[r] = 0.0;
            return res;
        }

        // Refit at the minimizer through the same entry point callers use,
        // accumulated in original observation order.
        for (std::size_t r = lo; r < hi; ++r) ws.wv_orig.weights[m_order[r]] = ws.w_m[r];
        ws.wv_orig.total_mass = mass;
        ws.wv_orig.query_point = m;
        bool fit_ok = true;
        ProfileFit refit;
        try {
            refit = profile_ssr(ds, ws.wv_orig, grid[best]);
        } catch (const singular_fit_error&) {
            fit_ok = false;
        }
        for (std::size_t r = lo; r < hi; ++r) {
            ws.wv_orig.weights[m_order[r]] = 0.0;
            ws.w_m[r] = 0.0;
        }
        if (!fit_ok) return res;

        res.ok = true;
        res.gamma = grid[best];
        res.fit.gamma = grid[best];
        res.fit.beta_g = refit.coefficients[0];
        res.fit.beta_x = refit.coefficients[1];
        res.fit.beta_c.assign(refit.coefficients.begin() + 2, refit.coefficients.end());
        res.fit.ssr = refit.ssr;
        res.fit.query_point = m;
        res.fit.effective_mass = mass;
        return res;
    }
};

inline std::vector<std::uint8_t> interior_mask_of(const Dataset& ds,
                                                  std::pair<double, double> quantiles) {
    const auto ms = sorted_copy(ds.shifter);
    const double lo = empirical_quantile(ms, quantiles.first);
    const double hi = empirical_quantile(ms, quantiles.second);
    std::vector<std::uint8_t> mask(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i)
        mask[i] = (ds.shifter[i] >= lo && ds.shifter[i] <= hi) ? 1 : 0;
    return mask;
}

} // namespace detail

// Pointwise profile least squares repeated over the query grid. Query
// points where the kernel mass is too thin or every candidate is singular
// are reported missing (NaN), never extrapolated.
inline ThresholdContour estimate_contour(const Dataset& ds, const ModelSpec& spec,
                                         int threads = 0) {
    throw_on_errors(validate(ds, spec));
    detail::ContourEngine engine(ds, spec);
    const ResolvedQueries rq = resolve_query_grid(ds, spec.query_grid);

    ThresholdContour out;
    out.query_points = rq.points;
    out.query_levels = rq.levels;
    out.bandwidth = engine.b;
    out.gamma_lo = engine.grid.front();
    out.gamma_hi = engine.grid.back();
    out.interior_mask = detail::interior_mask_of(ds, spec.interior_quantiles);

    const std::size_t q = rq.points.size();
    out.gamma_hat.assign(q, std::numeric_limits<double>::quiet_NaN());
    out.effective_mass.assign(q, 0.0);

    std::vector<detail::ContourEngine::Workspace> ws(resolve_threads(threads));
    parallel_for_indexed(q, threads, [&](std::size_t worker, std::size_t k) {
        auto res = engine.run_query(rq.points[k], detail::no_skip, ws[worker]);
        out.effective_mass[k] = res.mass;
        if (res.ok) out.gamma_hat[k] = res.gamma;
    });
    return out;
}

// Leave-one-out thresholds: for each observation, the pointwise estimator
// at its own shifter value with its kernel weight forced to zero.
inline std::vector<double> leave_one_out_thresholds(const Dataset& ds, const ModelSpec& spec,
                                                    int threads = 0) {
    throw_on_errors(validate(ds, spec));
    detail::ContourEngine engine(ds, spec);
    std::vector<double> out(ds.n(), std::numeric_limits<double>::quiet_NaN());
    std::vector<detail::ContourEngine::Workspace> ws(resolve_threads(threads));
    parallel_for_indexed(ds.n(), threads, [&](std::size_t worker, std::size_t i) {
        auto res = engine.run_query(ds.shifter[i], engine.m_pos[i], ws[worker]);
        if (res.ok) out[i] = res.gamma;
    });
    return out;
}

// Second-step OLS of the outcome on the kink basis evaluated at the
// leave-one-out thresholds, restricted to interior observations with a
// non-missing threshold.
inline CoefficientEstimate second_step_beta(const Dataset& ds,
                                            std::span<const double> loo_gamma,
                                            std::span<const std::uint8_t> interior_mask) {
    const std::size_t n = ds.n();
    if (loo_gamma.size() != n || interior_mask.size() != n)
        throw validation_error("second_step_beta: input lengths do not match dataset");
    const std::size_t p = ds.covariates.size();
    const std::size_t d = p + 2;

    std::vector<double> a(d * d, 0.0), rhs(d, 0.0), z(d);
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!interior_mask[i] || !std::isfinite(loo_gamma[i])) continue;
        ++used;
        const double dist = ds.running[i] - loo_gamma[i];
        z[0] = std::min(dist, 0.0);
        z[1] = std::max(dist, 0.0);
        for (std::size_t c = 0; c < p; ++c) z[2 + c] = ds.covariates[c][i];
        const double y = ds.outcome[i];
        for (std::size_t r = 0; r < d; ++r) {
            rhs[r] += z[r] * y;
            for (std::size_t c2 = 0; c2 <= r; ++c2) a[r * d + c2] += z[r] * z[c2];
        }
    }
    if (used < d)
        throw degenerate_window_error(
            std::numeric_limits<double>::quiet_NaN(),
            "second step has " + std::to_string(used) + " usable observations, needs at least " +
                std::to_string(d));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c2 = r + 1; c2 < d; ++c2) a[r * d + c2] = a[c2 * d + r];

    auto beta = linalg::solve_spd_pivoted(std::move(a), std::move(rhs), d, local_pivot_tol);
    if (!beta)
        throw singular_fit_error(std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN(),
                                 "second-step design is rank deficient");

    const std::size_t e = std::min(ds.control_residual_count, p);
    CoefficientEstimate est;
    est.beta_g = (*beta)[0];
    est.beta_x = (*beta)[1];
    est.beta_c.assign(beta->begin() + 2, beta->end() - static_cast<std::ptrdiff_t>(e));
    est.beta_v.assign(beta->end() - static_cast<std::ptrdiff_t>(e), beta->end());
    est.n_used = used;
    return est;
}

} // namespace kinkreg
