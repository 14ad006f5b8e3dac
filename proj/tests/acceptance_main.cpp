// Acceptance suite: ten end-to-end criteria, each printed as one pass/fail
// line. Tolerances are fixed here in code; the binary exits nonzero if any
// criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinkreg/io.hpp"
#include "kinkreg/kinkreg.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kinkreg;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

const SimulationCell* find_cell(const SimulationReport& r, DgpSpec::Kind kind, std::size_t n,
                                double beta, const std::string& target) {
    for (const auto& c : r.cells)
        if (c.kind == kind && c.n == n && c.beta_g0 == beta && c.target == target) return &c;
    return nullptr;
}

// ---------------------------------------------------------------- criterion 1
void criterion_noiseless() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 200;
    std::vector<double> g(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = rng::normal(1001, 0, i);
        m[i] = rng::normal(1001, 1, i);
    }
    const auto grid = linspace(-0.75, 1.25, 401);
    const double truth = grid[200]; // 0.25 up to grid construction
    Dataset ds;
    ds.running = g;
    ds.shifter = m;
    ds.covariates = {std::vector<double>(n, 1.0)};
    ds.outcome.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dist = g[i] - truth;
        ds.outcome[i] = 1.0 * std::min(dist, 0.0) + 2.0 * std::max(dist, 0.0);
    }

    ModelSpec spec;
    spec.gamma_grid = {false, -0.75, 1.25, 401};
    const auto queries = resolve_query_grid(ds, spec.query_grid);

    bool ok = std::abs(truth - 0.25) < 1e-12;
    double worst_coef = 0, worst_ssr = 0;
    std::size_t n_queries = 0;
    for (double q : queries.points) {
        const auto wv = local_weights(ds.shifter, q, bandwidth(n, spec.bandwidth_rule));
        const auto [curve, fit] = grid_search(ds, wv, grid);
        ++n_queries;
        if (fit.gamma != truth) ok = false;
        worst_coef = std::max({worst_coef, std::abs(fit.beta_g - 1.0),
                               std::abs(fit.beta_x - 2.0), std::abs(fit.beta_c[0])});
        worst_ssr = std::max(worst_ssr, fit.ssr);
    }
    const auto contour = estimate_contour(ds, spec);
    for (double gh : contour.gamma_hat)
        if (gh != truth) ok = false;
    const double elapsed = seconds_since(t0);
    ok = ok && worst_coef <= 1e-10 && worst_ssr <= 1e-18 && elapsed < 1.0 && n_queries == 71;
    report(1, "noiseless exact recovery", ok,
           "gamma==0.25 at " + std::to_string(n_queries) + " query points, max |coef err| " +
               fmt(worst_coef, 3) + " (<=1e-10), max ssr " + fmt(worst_ssr, 3) +
               " (<=1e-18), " + fmt(elapsed, 3) + " s (<1)");
}

// ------------------------------------------------------------ criteria 2 & 3
void criteria_tables34() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<DgpSpec> designs;
    for (std::size_t n : {100, 500})
        for (double b : {1.0, 2.0, 3.0, 4.0}) {
            DgpSpec d;
            d.n = n;
            d.beta_g0 = b;
            designs.push_back(d);
        }
    ModelSpec spec;
    spec.bandwidth_rule = BandwidthRule::undersmooth();
    const auto rep = run_monte_carlo(designs, spec, 200, 20240801, 0);
    const double elapsed = seconds_since(t0);

    // criterion 2: Table 3 cells for beta*
    bool ok2 = elapsed < 600.0;
    std::string det2;
    for (std::size_t n : {100, 500}) {
        const double rmse_lo = n == 100 ? 0.05 : 0.02;
        const double rmse_hi = n == 100 ? 0.15 : 0.06;
        for (double b : {1.0, 4.0}) {
            const auto* c = find_cell(rep, DgpSpec::Kind::exogenous, n, b, "beta_g");
            if (!c || std::abs(c->bias) > 0.01 || c->rmse < rmse_lo || c->rmse > rmse_hi)
                ok2 = false;
            if (c)
                det2 += "n=" + std::to_string(n) + ",b=" + fmt(b, 1) + ": bias " +
                        fmt(c->bias, 2) + " rmse " + fmt(c->rmse, 2) + "; ";
        }
    }
    report(2, "table of beta* bias/RMSE (exogenous)", ok2,
           det2 + fmt(elapsed, 3) + " s (<600)");

    // criterion 3: Table 4 cells for gamma-hat at m = 0
    bool ok3 = true;
    const auto* c100 = find_cell(rep, DgpSpec::Kind::exogenous, 100, 1.0, "gamma@0");
    const auto* c500 = find_cell(rep, DgpSpec::Kind::exogenous, 500, 4.0, "gamma@0");
    std::string det3;
    if (!c100 || c100->rmse < 0.38 || c100->rmse > 0.70) ok3 = false;
    if (!c500 || c500->rmse < 0.02 || c500->rmse > 0.08) ok3 = false;
    if (c100) det3 += "rmse(n=100,b=1)=" + fmt(c100->rmse, 3) + " in [0.38,0.70]; ";
    if (c500) det3 += "rmse(n=500,b=4)=" + fmt(c500->rmse, 3) + " in [0.02,0.08]; ";
    for (std::size_t n : {100, 500}) {
        for (double b = 1.0; b < 4.0; b += 1.0) {
            const auto* lo = find_cell(rep, DgpSpec::Kind::exogenous, n, b, "gamma@0");
            const auto* hi = find_cell(rep, DgpSpec::Kind::exogenous, n, b + 1.0, "gamma@0");
            if (!lo || !hi) {
                ok3 = false;
                continue;
            }
            const double slack = 2.0 * std::sqrt(lo->rmse_se * lo->rmse_se +
                                                 hi->rmse_se * hi->rmse_se);
            if (hi->rmse > lo->rmse + slack) ok3 = false;
        }
    }
    det3 += "monotone in beta within 2 MC SEs";
    report(3, "table of gamma-hat RMSE at m (exogenous)", ok3, det3);
}

// ---------------------------------------------------------------- criterion 4
void criterion_snr() {
    DgpSpec exo;
    exo.beta_g0 = 1.0;
    const double global1 = snr(exo);
    DgpSpec exo2 = exo;
    exo2.beta_g0 = 2.0;
    const double scale_ratio = snr(exo2) / global1;
    const double cond0 = snr(exo, 0.0);

    const bool global_ok = std::abs(global1 / 4.90 - 1.0) <= 0.02;
    const bool scale_ok = scale_ratio == 4.0;
    const bool cond_ok = std::abs(cond0 / 1.57 - 1.0) <= 0.03;
    std::string det = "global(beta=1) " + fmt(global1) + " vs 4.90 (2%); beta^2 ratio " +
                      fmt(scale_ratio, 17) + " == 4; conditional(m=0) " + fmt(cond0) +
                      " vs 1.57 (3%)";
    if (!cond_ok)
        det += " — conditional definition mismatch: the conditional-variance reading of the "
               "per-m SNR does not reproduce the reported value";
    report(4, "signal-to-noise oracle", global_ok && scale_ok && cond_ok, det);
}

// ---------------------------------------------------------------- criterion 5
void criterion_endogenous() {
    std::vector<DgpSpec> designs(1);
    designs[0].kind = DgpSpec::Kind::endogenous;
    designs[0].n = 500;
    designs[0].beta_g0 = 4.0;
    ModelSpec spec;
    spec.bandwidth_rule = BandwidthRule::undersmooth();
    const std::size_t reps = 200;
    const auto rep = run_monte_carlo(designs, spec, reps, 20240805, 0);
    const auto* with_cf = find_cell(rep, DgpSpec::Kind::endogenous, 500, 4.0, "beta_g");

    // the same designs estimated without the control function
    std::vector<double> err(reps, std::numeric_limits<double>::quiet_NaN());
    parallel_for(reps, 0, [&](std::size_t r) {
        DgpSpec d = designs[0];
        d.seed = rng::derive(20240805, 0, r);
        try {
            const Dataset data = generate(d);
            ModelSpec ms = spec;
            ms.query_grid = QueryGrid::values({0.0});
            const auto contour = estimate_contour(data, ms, 1);
            const auto loo = leave_one_out_thresholds(data, ms, 1);
            const auto beta = second_step_beta(data, loo, contour.interior_mask);
            err[r] = beta.beta_g - d.beta_g0;
        } catch (const std::exception&) {
        }
    });
    double s = 0, s2 = 0;
    std::size_t cnt = 0;
    for (double e : err)
        if (std::isfinite(e)) {
            s += e;
            s2 += e * e;
            ++cnt;
        }
    const double bias_nocf = s / static_cast<double>(cnt);
    const double sd_nocf = std::sqrt((s2 - s * s / static_cast<double>(cnt)) /
                                     static_cast<double>(cnt - 1));
    const double se_nocf = sd_nocf / std::sqrt(static_cast<double>(cnt));

    bool ok = with_cf != nullptr;
    std::string det;
    if (with_cf) {
        ok = std::abs(with_cf->bias) <= 0.01 && with_cf->rmse >= 0.03 && with_cf->rmse <= 0.06;
        det = "with CF: bias " + fmt(with_cf->bias, 2) + " (<=0.01), rmse " +
              fmt(with_cf->rmse, 2) + " in [0.03,0.06]; ";
    }
    const bool omitted_ok = std::abs(bias_nocf) > 3.0 * se_nocf;
    det += "without CF: bias " + fmt(bias_nocf, 3) + " (" + fmt(std::abs(bias_nocf) / se_nocf, 3) +
           " MC SEs, needs >3)";
    report(5, "endogenous design with control function", ok && omitted_ok, det);
}

// ---------------------------------------------------------------- criterion 6
void criterion_bootstrap() {
    // (a) coverage of the 95% percentile interval for beta_g
    const std::size_t reps = 200, draws = 500;
    std::vector<int> covered(reps, -1);
    parallel_for(reps, 0, [&](std::size_t r) {
        DgpSpec d;
        d.n = 500;
        d.beta_g0 = 1.0;
        d.seed = rng::derive(20240806, 0, r);
        try {
            const Dataset data = generate(d);
            ModelSpec ms;
            ms.bandwidth_rule = BandwidthRule::undersmooth();
            ms.query_grid = QueryGrid::values({0.0});
            const auto contour = estimate_contour(data, ms, 1);
            const auto loo = leave_one_out_thresholds(data, ms, 1);
            const auto beta = second_step_beta(data, loo, contour.interior_mask);
            const auto bs = wild_bootstrap(data, loo, contour.interior_mask, beta, draws, 0.05,
                                           rng::derive(20240806, 1, r), 1);
            covered[r] = (bs.ci_lower[0] <= 1.0 && 1.0 <= bs.ci_upper[0]) ? 1 : 0;
        } catch (const std::exception&) {
        }
    });
    std::size_t hits = 0, valid = 0;
    for (int c : covered)
        if (c >= 0) {
            ++valid;
            hits += static_cast<std::size_t>(c);
        }
    const double coverage = static_cast<double>(hits) / static_cast<double>(valid);
    const bool coverage_ok = coverage >= 0.90 && coverage <= 0.98 && valid >= 195;

    // (b) bootstrap SE vs the sandwich oracle on a fixed design
    const std::size_t n = 200;
    std::vector<double> g(n), m(n), noise(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = rng::normal(606, 0, i);
        m[i] = rng::normal(606, 1, i);
        noise[i] = rng::normal(606, 2, i);
    }
    Dataset ds;
    ds.running = g;
    ds.shifter = m;
    ds.covariates = {std::vector<double>(n, 1.0)};
    ds.outcome.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dist = g[i];
        ds.outcome[i] = std::min(dist, 0.0) + 2.0 * std::max(dist, 0.0) +
                        (0.2 + 0.6 * std::abs(g[i])) * noise[i];
    }
    std::vector<double> loo(n, 0.0);
    std::vector<std::uint8_t> mask(n, 1);
    const auto est = second_step_beta(ds, loo, mask);
    const auto bs = wild_bootstrap(ds, loo, mask, est, 2000, 0.05, 909, 0);
    std::vector<std::vector<double>> zrows;
    std::vector<double> resid;
    std::vector<double> beta = {est.beta_g, est.beta_x};
    for (double b : est.beta_c) beta.push_back(b);
    for (std::size_t i = 0; i < n; ++i) {
        auto z = oracle::design_row(ds, i, 0.0);
        double fitv = 0;
        for (std::size_t c = 0; c < z.size(); ++c) fitv += beta[c] * z[c];
        resid.push_back(ds.outcome[i] - fitv);
        zrows.push_back(std::move(z));
    }
    const auto se = oracle::sandwich_se(zrows, resid);
    double worst = 0;
    for (std::size_t c = 0; c < se.size(); ++c)
        worst = std::max(worst, std::abs(bs.standard_errors[c] / se[c] - 1.0));
    const bool sandwich_ok = worst <= 0.10;
    report(6, "wild bootstrap validity", coverage_ok && sandwich_ok,
           "coverage " + fmt(coverage, 3) + " in [0.90,0.98] over " + std::to_string(valid) +
               " reps; max |SE/sandwich - 1| " + fmt(worst, 3) + " (<=0.10)");
}

// ---------------------------------------------------------------- criterion 7
void criterion_contour_shape() {
    DgpSpec d;
    d.n = 1000;
    d.beta_g0 = 4.0;
    ModelSpec spec;
    spec.bandwidth_rule = BandwidthRule::undersmooth();
    const auto rec = contour_recovery(d, spec, linspace(-1.0, 1.0, 21), 50, 20240807, 0);
    double worst = 0;
    bool all_valid = rec.n_fail == 0;
    for (std::size_t k = 0; k < rec.query_points.size(); ++k) {
        if (rec.n_valid[k] < 45) all_valid = false;
        if (std::isfinite(rec.gamma_mean[k]))
            worst = std::max(worst, std::abs(rec.gamma_mean[k] - rec.gamma_true[k]));
    }
    const double mu = mean(rec.beta_draws);
    const double sd = sample_sd(rec.beta_draws);
    std::vector<double> standardized;
    for (double b : rec.beta_draws) standardized.push_back((b - mu) / sd);
    const double dks = ks_statistic(standardized, [](double x) { return normal_cdf(x); });
    const double pks = ks_pvalue(dks, standardized.size());
    report(7, "contour shape and histogram normality", all_valid && worst <= 0.15 && pks > 0.01,
           "max |avg contour - truth| " + fmt(worst, 3) + " (<=0.15) on [-1,1]; KS p " +
               fmt(pks, 3) + " (>0.01) over " + std::to_string(standardized.size()) + " draws");
}

// ---------------------------------------------------------------- criterion 8
void criterion_sweep_equivalence() {
    std::size_t checked = 0;
    double worst = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 200;
        const std::uint64_t s = 5000 + static_cast<std::uint64_t>(rep);
        Dataset ds;
        ds.running.resize(n);
        ds.shifter.resize(n);
        ds.outcome.resize(n);
        ds.covariates = {std::vector<double>(n, 1.0), std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) {
            ds.running[i] = rng::normal(s, 0, i);
            ds.shifter[i] = rng::normal(s, 1, i);
            ds.covariates[1][i] = rng::normal(s, 2, i);
            const double dist = ds.running[i] - true_threshold(ds.shifter[i]);
            ds.outcome[i] = 2.0 * std::min(dist, 0.0) - 0.5 * std::max(dist, 0.0) +
                            0.3 * ds.covariates[1][i] + 0.5 * rng::normal(s, 3, i);
        }
        WeightVector wv;
        wv.weights.resize(n);
        double mass = 0;
        for (std::size_t i = 0; i < n; ++i) {
            wv.weights[i] = rng::uniform01(s, 4, i);
            mass += wv.weights[i];
        }
        for (auto& w : wv.weights) w /= mass;
        wv.total_mass = mass;
        const auto grid = linspace(-1.5, 1.5, 401);
        const auto [curve, fit] = grid_search(ds, wv, grid);
        for (std::size_t k = 0; k < grid.size(); k += 7) { // every 7th candidate
            if (!std::isfinite(curve.ssr[k])) continue;
            const auto ref = oracle::wls(ds, wv.weights, grid[k]);
            worst = std::max(worst, std::abs(curve.ssr[k] - ref.ssr) / std::max(1.0, ref.ssr));
            ++checked;
        }
    }
    report(8, "sorted-sweep equals naive refit", worst <= 1e-8,
           "max relative ssr gap " + fmt(worst, 3) + " (<=1e-8) over " + std::to_string(checked) +
               " candidate solves, 100 instances");
}

// ---------------------------------------------------------------- criterion 9
void criterion_scale() {
    const auto t0 = std::chrono::steady_clock::now();
    DgpSpec d;
    d.n = 187720;
    d.beta_g0 = 1.0;
    d.seed = 20240809;
    const Dataset ds = generate(d);
    ModelSpec spec; // rule-of-thumb bandwidth, auto 401-point gamma grid, 71 query points
    const auto contour = estimate_contour(ds, spec, 0);
    const auto loo = leave_one_out_thresholds(ds, spec, 0);
    const auto beta = second_step_beta(ds, loo, contour.interior_mask);
    const double elapsed = seconds_since(t0);
    std::size_t missing = 0;
    for (double v : loo)
        if (!std::isfinite(v)) ++missing;
    const bool ok = elapsed < 1800.0 && beta.n_used > 150000 &&
                    std::abs(beta.beta_g - 1.0) < 0.05;
    report(9, "full-scale benchmark (n=187,720)", ok,
           fmt(elapsed, 4) + " s (<1800) for contour + leave-one-out + second step; n_used " +
               std::to_string(beta.n_used) + ", loo missing " + std::to_string(missing) +
               ", beta_g " + fmt(beta.beta_g, 4));
}

// --------------------------------------------------------------- criterion 10
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::vector<std::string>& args) {
    std::string cmd = "'";
    cmd += KINKREG_CLI_PATH;
    cmd += "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion_determinism() {
    const fs::path tmp =
        fs::temp_directory_path() / ("kinkreg_acc_" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    DgpSpec d;
    d.n = 400;
    d.beta_g0 = 2.0;
    d.seed = 13;
    const Dataset ds = generate(d);
    const fs::path csv = tmp / "data.csv";
    {
        std::ofstream out(csv);
        out << "pi,g,m,x\n";
        for (std::size_t i = 0; i < ds.n(); ++i)
            out << format_g17(ds.outcome[i]) << ',' << format_g17(ds.running[i]) << ','
                << format_g17(ds.shifter[i]) << ',' << format_g17(ds.covariates[1][i]) << "\n";
    }
    auto args = [&](const std::string& outdir, const std::string& threads) {
        return std::vector<std::string>{
            "fit",  "--input",      csv.string(), "--outcome-col", "pi",
            "--running-col", "g",   "--shifter-col", "m",  "--covariate-cols", "x",
            "--bootstrap", "99", "--seed", "42", "--threads", threads,
            "--output-dir", outdir};
    };
    bool ok = run_cli(args((tmp / "a").string(), "1")) == 0;
    ok = ok && run_cli(args((tmp / "b").string(), "2")) == 0;
    ok = ok && slurp(tmp / "a" / "contour.csv") == slurp(tmp / "b" / "contour.csv");
    ok = ok && slurp(tmp / "a" / "coefficients.json") == slurp(tmp / "b" / "coefficients.json");

    // rerun from the manifest's argv into a fresh directory
    bool rerun_ok = false;
    try {
        const json manifest = json::parse(slurp(tmp / "a" / "manifest.json"));
        std::vector<std::string> argv;
        for (const auto& a : manifest["argv"]) argv.push_back(a.get<std::string>());
        std::vector<std::string> rerun(argv.begin() + 1, argv.end());
        for (std::size_t i = 0; i + 1 < rerun.size(); ++i)
            if (rerun[i] == "--output-dir") rerun[i + 1] = (tmp / "c").string();
        rerun_ok = run_cli(rerun) == 0 &&
                   slurp(tmp / "a" / "contour.csv") == slurp(tmp / "c" / "contour.csv") &&
                   slurp(tmp / "a" / "coefficients.json") ==
                       slurp(tmp / "c" / "coefficients.json");
    } catch (const std::exception&) {
    }
    std::error_code ec;
    fs::remove_all(tmp, ec);
    report(10, "manifest rerun is byte-identical across thread counts", ok && rerun_ok,
           ok ? "contour.csv and coefficients.json identical for threads 1/2 and manifest rerun"
              : "outputs differ");
}

} // namespace

int main(int argc, char** argv) {
    // optional arguments select criteria by number; default runs all ten
    std::vector<int> wanted;
    for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));
    auto selected = [&](std::initializer_list<int> ids) {
        if (wanted.empty()) return true;
        for (int id : ids)
            if (std::find(wanted.begin(), wanted.end(), id) != wanted.end()) return true;
        return false;
    };
    std::printf("acceptance suite, %u hardware threads\n", resolve_threads(0));
    if (selected({1})) criterion_noiseless();
    if (selected({2, 3})) criteria_tables34();
    if (selected({4})) criterion_snr();
    if (selected({5})) criterion_endogenous();
    if (selected({6})) criterion_bootstrap();
    if (selected({7})) criterion_contour_shape();
    if (selected({8})) criterion_sweep_equivalence();
    if (selected({9})) criterion_scale();
    if (selected({10})) criterion_determinism();
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all selected criteria passed\n");
    return failures == 0 ? 0 : 1;
}
