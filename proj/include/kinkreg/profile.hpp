#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/kernel.hpp"
#include "kinkreg/linalg.hpp"

namespace kinkreg {

// Relative pivot tolerance for every local weighted least-squares system.
inline constexpr double local_pivot_tol = 1e-10;

// Local parameter estimate at one query point. Coefficient order throughout
// the library: [beta_g, beta_x, covariates...].
struct LocalFit {
    double gamma = 0;
    double beta_g = 0;
    double beta_x = 0;
    std::vector<double> beta_c;
    double ssr = 0;
    double query_point = 0;
    double effective_mass = 0;
};

// The profiled objective S_n over the candidate grid. ssr holds +inf where
// the local design is singular at that candidate.
struct ProfileCurve {
    std::vector<double> grid;
    std::vector<double> ssr;
    std::size_t argmin_index = 0;
};

struct ProfileFit {
    std::vector<double> coefficients; // [neg, pos, covariates...]
    double ssr = 0;
};

// Weighted least squares of the outcome on the kink basis at a fixed
// candidate gamma. The reported ssr is recomputed from residuals in a
// second pass, which stays accurate when the fit is near-exact.
inline ProfileFit profile_ssr(const Dataset& ds, const WeightVector& wv, double gamma) {
    const std::size_t n = ds.n();
    if (wv.weights.size() != n)
        throw validation_error("profile_ssr: weight vector length does not match dataset");
    const std::size_t p = ds.covariates.size();
    const std::size_t d = p + 2;

    std::vector<double> a(d * d, 0.0), rhs(d, 0.0), z(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = wv.weights[i];
        if (w == 0.0) continue;
        const double dist = ds.running[i] - gamma;
        z[0] = std::min(dist, 0.0);
        z[1] = std::max(dist, 0.0);
        for (std::size_t c = 0; c < p; ++c) z[2 + c] = ds.covariates[c][i];
        const double y = ds.outcome[i];
        for (std::size_t r = 0; r < d; ++r) {
            const double wzr = w * z[r];
            rhs[r] += wzr * y;
            for (std::size_t c2 = 0; c2 <= r; ++c2) a[r * d + c2] += wzr * z[c2];
        }
    }
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c2 = r + 1; c2 < d; ++c2) a[r * d + c2] = a[c2 * d + r];

    auto beta = linalg::solve_spd_pivoted(std::move(a), rhs, d, local_pivot_tol);
    if (!beta)
        throw singular_fit_error(wv.query_point, gamma,
                                 "singular weighted design at query point " +
                                     std::to_string(wv.query_point) + ", gamma " +
                                     std::to_string(gamma));

    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = wv.weights[i];
        if (w == 0.0) continue;
        const double dist = ds.running[i] - gamma;
        double r = ds.outcome[i] - (*beta)[0] * std::min(dist, 0.0) -
                   (*beta)[1] * std::max(dist, 0.0);
        for (std::size_t c = 0; c < p; ++c) r -= (*beta)[2 + c] * ds.covariates[c][i];
        ssr += w * r * r;
    }
    return {std::move(*beta), ssr};
}

namespace detail {

// Sufficient statistics for the profiled objective, split into fixed window
// totals and a running left-of-threshold part. Sweeping the candidate grid
// in increasing order moves each observation from the positive to the
// negative side exactly once, so the d x d normal equations at every
// candidate assemble in O(d^2) from these sums.
struct SweepAccum {
    std::size_t p = 0;
    // left side (g <= gamma)
    double lk = 0, lkg = 0, lkg2 = 0, lky = 0, lkgy = 0;
    std::vector<double> lkx, lkgx;
    // window totals
    double tk = 0, tkg = 0, tkg2 = 0, tky = 0, tkgy = 0, tkyy = 0;
    std::vector<double> tkx, tkgx, tkxy, txx; // txx: p x p, lower triangle filled

    void reset(std::size_t p_) {
        p = p_;
        lk = lkg = lkg2 = lky = lkgy = 0;
        tk = tkg = tkg2 = tky = tkgy = tkyy = 0;
        lkx.assign(p, 0.0);
        lkgx.assign(p, 0.0);
        tkx.assign(p, 0.0);
        tkgx.assign(p, 0.0);
        tkxy.assign(p, 0.0);
        txx.assign(p * p, 0.0);
    }

    void add_total(double w, double g, double y, const double* const* xcols, std::size_t i) {
        const double wg = w * g;
        tk += w;
        tkg += wg;
        tkg2 += wg * g;
        tky += w * y;
        tkgy += wg * y;
        tkyy += w * y * y;
        for (std::size_t c = 0; c < p; ++c) {
            const double xc = xcols[c][i];
            tkx[c] += w * xc;
            tkgx[c] += wg * xc;
            tkxy[c] += w * xc * y;
            const double wxc = w * xc;
            for (std::size_t c2 = 0; c2 <= c; ++c2) txx[c * p + c2] += wxc * xcols[c2][i];
        }
    }

    void add_left(double w, double g, double y, const double* const* xcols, std::size_t i) {
        const double wg = w * g;
        lk += w;
        lkg += wg;
        lkg2 += wg * g;
        lky += w * y;
        lkgy += wg * y;
        for (std::size_t c = 0; c < p; ++c) {
            const double xc = xcols[c][i];
            lkx[c] += w * xc;
            lkgx[c] += wg * xc;
        }
    }

    // Normal equations at a candidate gamma. (g - gamma)^2 and its cross
    // terms expand into the accumulated moments; neg * pos is identically 0.
    void assemble(double gamma, double* a, double* rhs) const {
        const std::size_t d = p + 2;
        const double rk = tk - lk, rkg = tkg - lkg, rkg2 = tkg2 - lkg2;
        const double rky = tky - lky, rkgy = tkgy - lkgy;
        a[0] = lkg2 - 2.0 * gamma * lkg + gamma * gamma * lk;
        a[1] = 0.0;
        a[d] = 0.0;
        a[d + 1] = rkg2 - 2.0 * gamma * rkg + gamma * gamma * rk;
        rhs[0] = lkgy - gamma * lky;
        rhs[1] = rkgy - gamma * rky;
        for (std::size_t c = 0; c < p; ++c) {
            const double negx = lkgx[c] - gamma * lkx[c];
            const double posx = (tkgx[c] - lkgx[c]) - gamma * (tkx[c] - lkx[c]);
            a[0 * d + 2 + c] = negx;
            a[(2 + c) * d + 0] = negx;
            a[1 * d + 2 + c] = posx;
            a[(2 + c) * d + 1] = posx;
            rhs[2 + c] = tkxy[c];
            for (std::size_t c2 = 0; c2 < p; ++c2) {
                const double v = c2 <= c ? txx[c * p + c2] : txx[c2 * p + c];
                a[(2 + c) * d + (2 + c2)] = v;
            }
        }
    }
};

struct SweepScratch {
    std::vector<double> a, rhs, rhs_keep, x;
    std::vector<std::size_t> perm;
    void reset(std::size_t d) {
        a.assign(d * d, 0.0);
        rhs.assign(d, 0.0);
        rhs_keep.assign(d, 0.0);
        x.assign(d, 0.0);
        perm.assign(d, 0);
    }
};

// One profiled-objective evaluation over the grid given totals already
// accumulated and a g-ascending visitor. next(gamma) must add every not yet
// consumed observation with running value <= gamma via acc.add_left and is
// called once per grid point in increasing order.
template <class AdvanceFn>
inline void sweep_profile(const SweepAccum& acc, std::span<const double> grid,
                          AdvanceFn&& advance, SweepScratch& ws, std::size_t d,
                          std::vector<double>& ssr_out, std::size_t& best,
                          bool& any_finite) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    ssr_out.assign(grid.size(), inf);
    best = 0;
    any_finite = false;
    double best_ssr = inf;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double gamma = grid[k];
        advance(gamma);
        acc.assemble(gamma, ws.a.data(), ws.rhs.data());
        std::copy(ws.rhs.begin(), ws.rhs.end(), ws.rhs_keep.begin());
        if (!linalg::solve_spd_pivoted_inplace(ws.a.data(), ws.rhs.data(), d,
                                               local_pivot_tol, ws.x.data(),
                                               ws.perm.data()))
            continue;
        double fitted = 0;
        for (std::size_t r = 0; r < d; ++r) fitted += ws.x[r] * ws.rhs_keep[r];
        const double s = std::max(0.0, acc.tkyy - fitted);
        ssr_out[k] = s;
        if (s < best_ssr) {
            best_ssr = s;
            best = k;
        }
        any_finite = true;
    }
}

inline void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw validation_error("grid_search: empty gamma grid");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1]))
            throw validation_error("grid_search: gamma grid must be strictly increasing");
}

} // namespace detail

// Profile least squares over the candidate grid: S_n(gamma) per candidate
// via the incremental sweep, argmin with ties broken toward the smallest
// gamma, and the local fit re-extracted at the minimizer from scratch (so
// it matches profile_ssr bit for bit).
inline std::pair<ProfileCurve, LocalFit>
grid_search(const Dataset& ds, const WeightVector& wv, std::span<const double> grid) {
    detail::check_grid(grid);
    const std::size_t n = ds.n();
    if (wv.weights.size() != n)
        throw validation_error("grid_search: weight vector length does not match dataset");
    const std::size_t p = ds.covariates.size();
    const std::size_t d = p + 2;

    std::vector<std::uint32_t> order;
    order.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
        if (wv.weights[i] != 0.0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (ds.running[a] != ds.running[b]) return ds.running[a] < ds.running[b];
        return a < b;
    });

    std::vector<const double*> xcols(p);
    for (std::size_t c = 0; c < p; ++c) xcols[c] = ds.covariates[c].data();

    detail::SweepAccum acc;
    acc.reset(p);
    for (std::uint32_t i : order)
        acc.add_total(wv.weights[i], ds.running[i], ds.outcome[i], xcols.data(), i);

    detail::SweepScratch ws;
    ws.reset(d);
    ProfileCurve curve;
    curve.grid.assign(grid.begin(), grid.end());
    std::size_t pos = 0;
    auto advance = [&](double gamma) {
        while (pos < order.size() && ds.running[order[pos]] <= gamma) {
            const std::uint32_t i = order[pos];
            acc.add_left(wv.weights[i], ds.running[i], ds.outcome[i], xcols.data(), i);
            ++pos;
        }
    };
    std::size_t best = 0;
    bool any = false;
    detail::sweep_profile(acc, grid, advance, ws, d, curve.ssr, best, any);
    if (!any)
        throw degenerate_window_error(
            wv.query_point, "every gamma candidate yields a singular local design at query point " +
                                std::to_string(wv.query_point));
    curve.argmin_index = best;

    ProfileFit refit = profile_ssr(ds, wv, grid[best]);
    LocalFit fit;
    fit.gamma = curve.grid[best];
    fit.beta_g = refit.coefficients[0];
    fit.beta_x = refit.coefficients[1];
    fit.beta_c.assign(refit.coefficients.begin() + 2, refit.coefficients.end());
    fit.ssr = refit.ssr;
    fit.query_point = wv.query_point;
    fit.effective_mass = wv.total_mass;
    return {std::move(curve), std::move(fit)};
}

} // namespace kinkreg
