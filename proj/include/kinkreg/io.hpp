#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include <json.hpp>

#include "kinkreg/bootstrap.hpp"
#include "kinkreg/csv.hpp"
#include "kinkreg/estimator.hpp"
#include "kinkreg/pipeline.hpp"
#include "kinkreg/simulation.hpp"

// Plot-ready artifacts with fixed column names and order. All floating
// point CSV values are written with %.17g so a rerun can be compared byte
// for byte.

namespace kinkreg::io {

// Normal-approximation significance marks at the 10/5/1% levels.
inline std::string significance_stars(double coefficient, double se) {
    if (!(se > 0)) return "";
    const double z = std::abs(coefficient / se);
    if (z > 2.5758293035489004) return "***";
    if (z > 1.9599639845400545) return "**";
    if (z > 1.6448536269514722) return "*";
    return "";
}

inline void write_contour_csv(std::ostream& os, const ThresholdContour& c) {
    os << "m_quantile,gamma_hat,effective_mass,missing_flag\n";
    for (std::size_t k = 0; k < c.query_points.size(); ++k) {
        const bool missing = !std::isfinite(c.gamma_hat[k]);
        os << format_g17(c.query_levels[k]) << ',' << format_g17(c.gamma_hat[k]) << ','
           << format_g17(c.effective_mass[k]) << ',' << (missing ? 1 : 0) << '\n';
    }
}

inline nlohmann::json coefficients_json(const Dataset& ds, const CoefficientEstimate& est,
                                        const ThresholdContour& contour,
                                        const BootstrapResult* bs = nullptr) {
    nlohmann::json j;
    j["beta_g"] = est.beta_g;
    j["beta_x"] = est.beta_x;
    nlohmann::json covs = nlohmann::json::object();
    const std::size_t e = est.beta_v.size();
    for (std::size_t c = 0; c < est.beta_c.size(); ++c)
        covs[ds.covariate_name(c)] = est.beta_c[c];
    for (std::size_t c = 0; c < e; ++c)
        covs[ds.covariate_name(est.beta_c.size() + c)] = est.beta_v[c];
    j["beta_c"] = est.beta_c;
    j["beta_v"] = est.beta_v;
    j["coefficients_by_name"] = covs;
    j["n_used"] = est.n_used;
    j["bandwidth"] = contour.bandwidth;
    j["gamma_grid"] = {{"lo", contour.gamma_lo}, {"hi", contour.gamma_hi}};
    std::size_t boundary = 0;
    for (double g : contour.loo_gamma)
        if (g == contour.gamma_lo || g == contour.gamma_hi) ++boundary;
    j["n_gamma_boundary"] = boundary; // kept in the fit, flagged here
    if (bs) {
        j["standard_errors"] = bs->standard_errors;
        j["ci_lower"] = bs->ci_lower;
        j["ci_upper"] = bs->ci_upper;
        j["bootstrap_draws"] = bs->n_draws;
        j["bootstrap_seed"] = bs->seed;
        j["alpha"] = bs->alpha;
        j["stars"] = nlohmann::json::array();
        std::vector<double> coef = {est.beta_g, est.beta_x};
        for (double c : est.beta_c) coef.push_back(c);
        for (double c : est.beta_v) coef.push_back(c);
        for (std::size_t c = 0; c < coef.size() && c < bs->standard_errors.size(); ++c)
            j["stars"].push_back(significance_stars(coef[c], bs->standard_errors[c]));
    }
    return j;
}

inline std::string snr_key(const std::optional<double>& m) {
    return m ? format_g17(*m) : std::string("global");
}

inline void write_report_csv(std::ostream& os, const SimulationReport& r) {
    os << "kind,n,beta_g0,target,truth,bias,rmse,bias_se,rmse_se,n_fail,n_rep\n";
    for (const auto& c : r.cells)
        os << to_string(c.kind) << ',' << c.n << ',' << format_g17(c.beta_g0) << ',' << c.target
           << ',' << format_g17(c.truth) << ',' << format_g17(c.bias) << ',' << format_g17(c.rmse)
           << ',' << format_g17(c.bias_se) << ',' << format_g17(c.rmse_se) << ',' << c.n_fail
           << ',' << c.n_rep << '\n';
}

inline void write_snr_csv(std::ostream& os, const SimulationReport& r) {
    os << "kind,beta_g0,m,snr\n";
    for (const auto& s : r.snr)
        os << to_string(s.kind) << ',' << format_g17(s.beta_g0) << ',' << snr_key(s.m) << ','
           << format_g17(s.value) << '\n';
}

inline void write_histogram_csv(std::ostream& os, const SimulationReport& r) {
    os << "bin_left,bin_right,count\n";
    for (const auto& b : r.histogram)
        os << format_g17(b.lo) << ',' << format_g17(b.hi) << ',' << b.count << '\n';
}

inline void write_avg_contour_csv(std::ostream& os, const ContourRecovery& r) {
    os << "m,gamma_mean,gamma_true,n_valid\n";
    for (std::size_t k = 0; k < r.query_points.size(); ++k)
        os << format_g17(r.query_points[k]) << ',' << format_g17(r.gamma_mean[k]) << ','
           << format_g17(r.gamma_true[k]) << ',' << r.n_valid[k] << '\n';
}

// Pivot table shaped like the per-design summary tables: one SNR row, then
// bias и RMSE blocks by sample size, columns indexed by beta_g0.
inline void write_pivot_csv(std::ostream& os, const SimulationReport& r, DgpSpec::Kind kind,
                            const std::string& target) {
    std::vector<double> betas;
    std::vector<std::size_t> ns;
    for (const auto& c : r.cells) {
        if (c.kind != kind || c.target != target) continue;
        if (std::find(betas.begin(), betas.end(), c.beta_g0) == betas.end())
            betas.push_back(c.beta_g0);
        if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
    }
    std::sort(betas.begin(), betas.end());
    std::sort(ns.begin(), ns.end());
    os << "statistic,n";
    for (double b : betas) os << ",beta_" << format_g17(b);
    os << '\n';
    auto cell = [&](std::size_t n, double beta) -> const SimulationCell* {
        for (const auto& c : r.cells)
            if (c.kind == kind && c.target == target && c.n == n && c.beta_g0 == beta) return &c;
        return nullptr;
    };
    os << "snr,";
    for (double b : betas) {
        os << ',';
        for (const auto& s : r.snr) {
            const bool global = target == "beta_g";
            const std::string want = global ? "beta_g" : target;
            if (s.kind != kind || s.beta_g0 != b) continue;
            if (global && !s.m) {
                os << format_g17(s.value);
                break;
            }
            if (!global && s.m && ("gamma@" + detail::format_query(*s.m)) == target) {
                os << format_g17(s.value);
                break;
            }
        }
    }
    os << '\n';
    for (const char* stat : {"bias", "rmse"}) {
        for (std::size_t n : ns) {
            os << stat << ',' << n;
            for (double b : betas) {
                os << ',';
                if (const auto* c = cell(n, b))
                    os << format_g17(std::string(stat) == "bias" ? c->bias : c->rmse);
            }
            os << '\n';
        }
    }
}

inline void write_heatmap_csv(std::ostream& os, const HeatmapGrid& h) {
    os << "m_decile,g_decile,fraction,count,missing_flag\n";
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = 0; b < 10; ++b) {
            const bool missing = h.cell_counts[a][b] == 0;
            os << (a + 1) << ',' << (b + 1) << ',' << format_g17(h.cell_fractions[a][b]) << ','
               << h.cell_counts[a][b] << ',' << (missing ? 1 : 0) << '\n';
        }
}

inline void write_overlay_csv(std::ostream& os, const HeatmapGrid& h) {
    os << "m_percentile,gamma_percentile,missing_flag\n";
    for (std::size_t k = 0; k < h.overlay.query_points.size(); ++k) {
        const bool missing = !std::isfinite(h.overlay.gamma_hat[k]);
        os << format_g17(h.overlay.query_points[k]) << ',' << format_g17(h.overlay.gamma_hat[k])
           << ',' << (missing ? 1 : 0) << '\n';
    }
}

inline void write_replicates_csv(std::ostream& os, const BootstrapResult& bs) {
    os << "draw";
    if (!bs.replicates.empty())
        for (std::size_t c = 0; c < bs.replicates.front().size(); ++c) os << ",coef_" << c;
    os << '\n';
    for (std::size_t b = 0; b < bs.replicates.size(); ++b) {
        os << b;
        for (double v : bs.replicates[b]) os << ',' << format_g17(v);
        os << '\n';
    }
}

} // namespace kinkreg::io
