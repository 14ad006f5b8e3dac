#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "kinkreg/control_function.hpp"
#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/estimator.hpp"
#include "kinkreg/model_spec.hpp"
#include "kinkreg/parallel.hpp"
#include "kinkreg/rng.hpp"
#include "kinkreg/stats.hpp"

namespace kinkreg {

// Monte Carlo designs: exogenous draws everything iid standard normal with
// outcome noise 0.5 u; endogenous correlates the running variable with the
// error through u = 0.5 eps + 0.5 v, g = v + w, and exposes w as the
// instrument column.
struct DgpSpec {
    enum class Kind { exogenous, endogenous };
    Kind kind = Kind::exogenous;
    double beta_g0 = 1.0;
    double beta_x0 = 0.0;
    double beta_c10 = 0.0; // intercept
    double beta_c20 = 0.0; // slope on the extra covariate
    double noise_scale = 0.5;
    std::size_t n = 500;
    std::uint64_t seed = 0;
};

inline const char* to_string(DgpSpec::Kind k) {
    return k == DgpSpec::Kind::exogenous ? "exogenous" : "endogenous";
}

// The threshold function generating every simulated design.
inline double true_threshold(double m) {
    if (!std::isfinite(m)) throw validation_error("true_threshold: non-finite argument");
    const double a = m + 1.0;
    return a * a * a / 8.0;
}

inline Dataset generate(const DgpSpec& spec) {
    if (spec.n < 1) throw validation_error("generate: n must be >= 1");
    if (!(spec.noise_scale >= 0) || !std::isfinite(spec.noise_scale))
        throw validation_error("generate: noise_scale must be >= 0");
    Dataset ds;
    const std::size_t n = spec.n;
    ds.outcome.resize(n);
    ds.running.resize(n);
    ds.shifter.resize(n);
    ds.covariates.assign(2, std::vector<double>(n));
    ds.covariate_names = {"const", "x"};
    const bool endo = spec.kind == DgpSpec::Kind::endogenous;
    if (endo) {
        ds.instruments.assign(1, std::vector<double>(n));
        ds.instrument_names = {"w"};
    }
    for (std::size_t i = 0; i < n; ++i) {
        double g, m, x, u;
        if (!endo) {
            g = rng::normal(spec.seed, 0, i);
            m = rng::normal(spec.seed, 1, i);
            x = rng::normal(spec.seed, 2, i);
            u = spec.noise_scale * rng::normal(spec.seed, 3, i);
        } else {
            m = rng::normal(spec.seed, 0, i);
            x = rng::normal(spec.seed, 1, i);
            const double eps = rng::normal(spec.seed, 2, i);
            const double v = rng::normal(spec.seed, 3, i);
            const double w = rng::normal(spec.seed, 4, i);
            g = v + w;
            u = spec.noise_scale * eps + spec.noise_scale * v;
            ds.instruments[0][i] = w;
        }
        const double cut = true_threshold(m);
        const double dist = g - cut;
        ds.outcome[i] = spec.beta_g0 * std::min(dist, 0.0) + spec.beta_x0 * std::max(dist, 0.0) +
                        spec.beta_c10 + x * spec.beta_c20 + u;
        ds.running[i] = g;
        ds.shifter[i] = m;
        ds.covariates[0][i] = 1.0;
        ds.covariates[1][i] = x;
    }
    return ds;
}

namespace detail {

// Var((g - gamma0(m))_-) has no closed form here; a long fixed-seed Monte
// Carlo run serves as the oracle. Conditional on m the cutoff is fixed and
// only g is drawn (g is independent of m under both designs).
inline double neg_part_variance(DgpSpec::Kind kind, std::optional<double> m) {
    static std::map<std::tuple<int, int, double>, double> cache;
    static std::mutex mu;
    const std::tuple<int, int, double> key{static_cast<int>(kind), m.has_value() ? 1 : 0,
                                           m.value_or(0.0)};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    constexpr std::uint64_t oracle_seed = 0x6f7261636c65ULL;
    constexpr std::size_t draws = 10'000'000;
    const double gsd = kind == DgpSpec::Kind::endogenous ? std::numbers::sqrt2 : 1.0;
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double g = gsd * rng::normal(oracle_seed, 0, i);
        const double cut = m ? true_threshold(*m) : true_threshold(rng::normal(oracle_seed, 1, i));
        const double v = std::min(g - cut, 0.0);
        sum += v;
        sumsq += v * v;
    }
    const double nn = static_cast<double>(draws);
    const double var = sumsq / nn - (sum / nn) * (sum / nn);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, var);
    return var;
}

} // namespace detail

// Signal-to-noise ratio of the kink component: beta^2 Var((g-gamma0(m))_-)
// over the noise variance (0.25 exogenous, 0.5 endogenous at the default
// noise scale). Conditional when m is given, integrated over m otherwise.
inline double snr(const DgpSpec& spec, std::optional<double> m = {}) {
    if (!(spec.noise_scale > 0))
        throw validation_error("snr: noise_scale must be > 0");
    const double var = detail::neg_part_variance(spec.kind, m);
    const double denom = spec.kind == DgpSpec::Kind::endogenous
                             ? 2.0 * spec.noise_scale * spec.noise_scale
                             : spec.noise_scale * spec.noise_scale;
    return spec.beta_g0 * spec.beta_g0 * var / denom;
}

struct SimulationCell {
    DgpSpec::Kind kind = DgpSpec::Kind::exogenous;
    std::size_t n = 0;
    double beta_g0 = 0;
    std::string target; // "beta_g" or "gamma@<m>"
    double truth = 0;
    double bias = 0, rmse = 0;
    double bias_se = 0, rmse_se = 0; // Monte Carlo standard errors
    std::size_t n_fail = 0;          // failed or missing replications
    std::size_t n_rep = 0;           // replications entering the cell
};

struct SnrCell {
    DgpSpec::Kind kind = DgpSpec::Kind::exogenous;
    double beta_g0 = 0;
    std::optional<double> m; // empty = global
    double value = 0;
};

struct HistogramBin {
    double lo = 0, hi = 0;
    std::size_t count = 0;
};

struct SimulationReport {
    std::vector<SimulationCell> cells;
    std::vector<SnrCell> snr;
    std::vector<HistogramBin> histogram; // beta_g error at the reference design
    std::size_t n_replications = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline const std::vector<double>& table_query_points() {
    static const std::vector<double> pts{0.0, 0.25, 0.5};
    return pts;
}

inline std::string format_query(double m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", m);
    return buf;
}

struct RepRecord {
    double beta_g = std::numeric_limits<double>::quiet_NaN();
    double gamma[3] = {std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
    bool failed = false;
};

// One full two-step estimation pass on a generated sample; the control
// function is applied first for endogenous designs.
inline RepRecord run_replication(const DgpSpec& design, const ModelSpec& model_spec,
                                 const std::vector<double>& query_points) {
    RepRecord rec;
    try {
        Dataset data = generate(design);
        ModelSpec ms = model_spec;
        ms.query_grid = QueryGrid::values(query_points);
        ms.endogenous_columns.clear();
        const Dataset* est = &data;
        ControlFunctionResult cf;
        if (design.kind == DgpSpec::Kind::endogenous) {
            cf = control_function(data, {ColumnRef::running()}, data.instruments);
            est = &cf.augmented;
        }
        const ThresholdContour contour = estimate_contour(*est, ms, 1);
        const std::vector<double> loo = leave_one_out_thresholds(*est, ms, 1);
        const CoefficientEstimate beta = second_step_beta(*est, loo, contour.interior_mask);
        rec.beta_g = beta.beta_g;
        for (std::size_t k = 0; k < query_points.size() && k < 3; ++k)
            rec.gamma[k] = contour.gamma_hat[k];
    } catch (const std::exception&) {
        rec.failed = true;
    }
    return rec;
}

inline void summarize(const std::vector<double>& errors, SimulationCell& cell) {
    const std::size_t r = errors.size();
    cell.n_rep = r;
    if (r == 0) return;
    double s = 0, s2 = 0;
    for (double e : errors) {
        s += e;
        s2 += e * e;
    }
    const double nn = static_cast<double>(r);
    cell.bias = s / nn;
    cell.rmse = std::sqrt(s2 / nn);
    if (r > 1) {
        double vb = 0, vq = 0;
        for (double e : errors) {
            vb += (e - cell.bias) * (e - cell.bias);
            vq += (e * e - cell.rmse * cell.rmse) * (e * e - cell.rmse * cell.rmse);
        }
        cell.bias_se = std::sqrt(vb / (nn - 1.0) / nn);
        if (cell.rmse > 0) cell.rmse_se = std::sqrt(vq / (nn - 1.0) / nn) / (2.0 * cell.rmse);
    }
}

} // namespace detail

// Bias/RMSE tables over the given designs: per replication the contour is
// evaluated at m in {0, 0.25, 0.5}, then the leave-one-out second step runs
// (with the control function for endogenous designs). Replications carry
// derived seeds, so the report is independent of scheduling.
inline SimulationReport run_monte_carlo(const std::vector<DgpSpec>& designs,
                                        const ModelSpec& model_spec, std::size_t replications,
                                        std::uint64_t seed, int threads = 0) {
    if (replications < 1) throw validation_error("run_monte_carlo: need replications >= 1");
    const auto& qpts = detail::table_query_points();
    const std::size_t jobs = designs.size() * replications;
    std::vector<detail::RepRecord> records(jobs);
    parallel_for(jobs, threads, [&](std::size_t j) {
        const std::size_t di = j / replications;
        const std::size_t r = j % replications;
        DgpSpec design = designs[di];
        design.seed = rng::derive(seed, di, r);
        records[j] = detail::run_replication(design, model_spec, qpts);
    });

    SimulationReport report;
    report.n_replications = replications;
    report.seed = seed;

    for (std::size_t di = 0; di < designs.size(); ++di) {
        const DgpSpec& dg = designs[di];
        std::vector<double> beta_err;
        std::vector<double> gamma_err[3];
        std::size_t n_failed = 0;
        for (std::size_t r = 0; r < replications; ++r) {
            const auto& rec = records[di * replications + r];
            if (rec.failed) {
                ++n_failed;
                continue;
            }
            beta_err.push_back(rec.beta_g - dg.beta_g0);
            for (std::size_t k = 0; k < 3; ++k)
                if (std::isfinite(rec.gamma[k]))
                    gamma_err[k].push_back(rec.gamma[k] - true_threshold(qpts[k]));
        }
        SimulationCell bc;
        bc.kind = dg.kind;
        bc.n = dg.n;
        bc.beta_g0 = dg.beta_g0;
        bc.target = "beta_g";
        bc.truth = dg.beta_g0;
        bc.n_fail = n_failed;
        detail::summarize(beta_err, bc);
        report.cells.push_back(bc);
        for (std::size_t k = 0; k < 3; ++k) {
            SimulationCell gc;
            gc.kind = dg.kind;
            gc.n = dg.n;
            gc.beta_g0 = dg.beta_g0;
            gc.target = "gamma@" + detail::format_query(qpts[k]);
            gc.truth = true_threshold(qpts[k]);
            gc.n_fail = replications - gamma_err[k].size();
            detail::summarize(gamma_err[k], gc);
            report.cells.push_back(gc);
        }
    }

    // SNR is a property of (kind, beta) alone; emit each combination once.
    std::vector<std::pair<int, double>> seen;
    for (const auto& dg : designs) {
        const std::pair<int, double> key{static_cast<int>(dg.kind), dg.beta_g0};
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        report.snr.push_back({dg.kind, dg.beta_g0, std::nullopt, snr(dg)});
        for (double m : qpts) report.snr.push_back({dg.kind, dg.beta_g0, m, snr(dg, m)});
    }

    // Histogram of beta_g error at the reference design, when present.
    for (std::size_t di = 0; di < designs.size(); ++di) {
        if (designs[di].n != 1000 || designs[di].beta_g0 != 4.0) continue;
        std::vector<double> err;
        for (std::size_t r = 0; r < replications; ++r) {
            const auto& rec = records[di * replications + r];
            if (!rec.failed) err.push_back(rec.beta_g - designs[di].beta_g0);
        }
        if (err.size() < 2) break;
        const auto [mn, mx] = std::minmax_element(err.begin(), err.end());
        const std::size_t bins = 25;
        const double lo = *mn, hi = *mx;
        const double width = (hi - lo) / static_cast<double>(bins);
        if (!(width > 0)) break;
        report.histogram.assign(bins, {});
        for (std::size_t b2 = 0; b2 < bins; ++b2) {
            report.histogram[b2].lo = lo + width * static_cast<double>(b2);
            report.histogram[b2].hi = lo + width * static_cast<double>(b2 + 1);
        }
        for (double e : err) {
            std::size_t b2 = static_cast<std::size_t>((e - lo) / width);
            if (b2 >= bins) b2 = bins - 1;
            report.histogram[b2].count += 1;
        }
        break;
    }
    return report;
}

// Average estimated threshold over replications on an explicit query grid,
// plus the per-replication second-step slope draws.
struct ContourRecovery {
    std::vector<double> query_points;
    std::vector<double> gamma_mean; // NaN where never estimated
    std::vector<double> gamma_true;
    std::vector<std::size_t> n_valid;
    std::vector<double> beta_draws;
    std::size_t n_fail = 0;
};

inline ContourRecovery contour_recovery(const DgpSpec& design, const ModelSpec& model_spec,
                                        const std::vector<double>& query_points,
                                        std::size_t replications, std::uint64_t seed,
                                        int threads = 0) {
    if (replications < 1) throw validation_error("contour_recovery: need replications >= 1");
    const std::size_t q = query_points.size();
    struct Rec {
        std::vector<double> gamma;
        double beta_g = std::numeric_limits<double>::quiet_NaN();
        bool failed = false;
    };
    std::vector<Rec> recs(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
        Rec rec;
        try {
            DgpSpec dg = design;
            dg.seed = rng::derive(seed, 0, r);
            Dataset data = generate(dg);
            ModelSpec ms = model_spec;
            ms.query_grid = QueryGrid::values(query_points);
            ms.endogenous_columns.clear();
            const Dataset* est = &data;
            ControlFunctionResult cf;
            if (design.kind == DgpSpec::Kind::endogenous) {
                cf = control_function(data, {ColumnRef::running()}, data.instruments);
                est = &cf.augmented;
            }
            const ThresholdContour contour = estimate_contour(*est, ms, 1);
            const std::vector<double> loo = leave_one_out_thresholds(*est, ms, 1);
            const CoefficientEstimate beta = second_step_beta(*est, loo, contour.interior_mask);
            rec.gamma = contour.gamma_hat;
            rec.beta_g = beta.beta_g;
        } catch (const std::exception&) {
            rec.failed = true;
        }
        recs[r] = std::move(rec);
    });

    ContourRecovery out;
    out.query_points = query_points;
    out.gamma_true.reserve(q);
    for (double m : query_points) out.gamma_true.push_back(true_threshold(m));
    out.gamma_mean.assign(q, std::numeric_limits<double>::quiet_NaN());
    out.n_valid.assign(q, 0);
    std::vector<double> sum(q, 0.0);
    for (const auto& rec : recs) {
        if (rec.failed) {
            ++out.n_fail;
            continue;
        }
        out.beta_draws.push_back(rec.beta_g);
        for (std::size_t k = 0; k < q; ++k) {
            if (std::isfinite(rec.gamma[k])) {
                sum[k] += rec.gamma[k];
                out.n_valid[k] += 1;
            }
        }
    }
    for (std::size_t k = 0; k < q; ++k)
        if (out.n_valid[k] > 0) out.gamma_mean[k] = sum[k] / static_cast<double>(out.n_valid[k]);
    return out;
}

} // namespace kinkreg
