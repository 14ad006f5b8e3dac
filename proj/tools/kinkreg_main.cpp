// Command-line front end: batch estimation, simulation tables, bootstrap
// inference, heatmap construction, and SNR reporting. Every run writes a
// manifest.json carrying the library version, the exact argv, and the
// resolved configuration; rerunning that argv reproduces every numeric
// output byte for byte regardless of --threads.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinkreg/io.hpp"
#include "kinkreg/kinkreg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kinkreg;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_degenerate = 3;
constexpr int exit_io = 4;

std::string upper_snake(std::string name) {
    for (char& c : name) {
        if (c == '-') c = '_';
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return "KINKREG_" + name;
}

// Registers an option with the matching KINKREG_* environment fallback.
template <class T>
CLI::Option* opt(CLI::App& app, const std::string& flag, T& target, const std::string& help) {
    auto* o = app.add_option(flag, target, help);
    std::string name = flag;
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    o->envname(upper_snake(name));
    return o;
}

BandwidthRule parse_bandwidth(const std::string& s) {
    if (s == "rot") return BandwidthRule::rule_of_thumb();
    if (s == "under") return BandwidthRule::undersmooth();
    try {
        return BandwidthRule::fixed(std::stod(s));
    } catch (...) {
        throw validation_error("--bandwidth expects rot, under, or a positive number, got '" +
                               s + "'");
    }
}

GammaGrid parse_gamma_grid(const std::string& s) {
    GammaGrid g;
    if (s == "auto") return g;
    double lo, hi;
    std::size_t count;
    char c1, c2;
    std::istringstream in(s);
    if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':')
        throw validation_error("--gamma-grid expects lo:hi:count or auto, got '" + s + "'");
    g.automatic = false;
    g.lo = lo;
    g.hi = hi;
    g.count = count;
    return g;
}

QueryGrid parse_query_grid(const std::string& s) {
    QueryGrid q;
    if (s == "auto") return q;
    double lo, hi;
    std::size_t count;
    char c1, c2;
    std::istringstream in(s);
    if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':')
        throw validation_error("--query-grid expects lo:hi:count or auto, got '" + s + "'");
    q.lo = lo;
    q.hi = hi;
    q.count = count;
    return q;
}

std::pair<double, double> parse_interior(const std::string& s) {
    double lo, hi;
    char c;
    std::istringstream in(s);
    if (!(in >> lo >> c >> hi) || c != ',')
        throw validation_error("--interior expects lo,hi, got '" + s + "'");
    return {lo, hi};
}

int parse_threads(const std::string& s) {
    if (s == "auto") return 0;
    try {
        const int t = std::stoi(s);
        if (t < 1) throw validation_error("--threads must be >= 1 or auto");
        return t;
    } catch (const validation_error&) {
        throw;
    } catch (...) {
        throw validation_error("--threads expects a count or auto, got '" + s + "'");
    }
}

struct DataOpts {
    std::string input;
    std::string outcome_col = "outcome";
    std::string running_col = "running";
    std::string shifter_col = "shifter";
    std::vector<std::string> covariate_cols;
    std::vector<std::string> instrument_cols;
    std::vector<std::string> endogenous_cols;
    std::string export_flag_col;
    std::string delimiter = ",";

    // cleaning
    std::vector<std::string> require_positive_cols;
    std::vector<std::string> standardize_cols;
    std::vector<std::string> quantile_cols;
    double trim = -1.0; // < 0: trimming off

    bool cleaning_requested() const {
        return trim >= 0.0 || !require_positive_cols.empty() || !standardize_cols.empty() ||
               !quantile_cols.empty();
    }
};

struct ModelOpts {
    int model = 1;
    std::string bandwidth = "rot";
    std::string gamma_grid = "auto";
    std::string query_grid = "auto";
    std::string interior = "0.01,0.99";
};

struct RunOpts {
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    std::string threads = "auto";
    std::size_t bootstrap_draws = 0;
    double alpha = 0.05;
};

void add_data_options(CLI::App& cmd, DataOpts& d, bool need_input = true) {
    auto* in = opt(cmd, "--input", d.input, "input CSV with a header row");
    if (need_input) in->required();
    opt(cmd, "--outcome-col", d.outcome_col, "outcome column name");
    opt(cmd, "--running-col", d.running_col, "running-variable column name");
    opt(cmd, "--shifter-col", d.shifter_col, "threshold-shifter column name");
    opt(cmd, "--covariate-cols", d.covariate_cols, "covariate column names")->delimiter(',');
    opt(cmd, "--instrument-cols", d.instrument_cols, "instrument column names")->delimiter(',');
    opt(cmd, "--endogenous-cols", d.endogenous_cols,
        "endogenous covariate names (model 3)")->delimiter(',');
    opt(cmd, "--export-flag-col", d.export_flag_col, "0/1 exporter flag column");
    opt(cmd, "--delimiter", d.delimiter, "CSV delimiter (default ,)");
    opt(cmd, "--require-positive-cols", d.require_positive_cols,
        "columns that must be strictly positive")->delimiter(',');
    opt(cmd, "--standardize-cols", d.standardize_cols,
        "columns standardized to mean 0, sd 1")->delimiter(',');
    opt(cmd, "--quantile-cols", d.quantile_cols,
        "columns mapped to (0,1] by averaged ranks")->delimiter(',');
    opt(cmd, "--trim", d.trim, "drop this upper fraction of the outcome");
}

void add_model_options(CLI::App& cmd, ModelOpts& m) {
    opt(cmd, "--model", m.model, "1 exogenous, 2 control function for g, 3 also for a covariate")
        ->check(CLI::Range(1, 3));
    opt(cmd, "--bandwidth", m.bandwidth, "rot, under, or a fixed value");
    opt(cmd, "--gamma-grid", m.gamma_grid, "candidate grid lo:hi:count or auto");
    opt(cmd, "--query-grid", m.query_grid, "query quantile grid lo:hi:count or auto");
    opt(cmd, "--interior", m.interior, "interior quantile range lo,hi for the second step");
}

void add_run_options(CLI::App& cmd, RunOpts& r, bool with_bootstrap = true) {
    opt(cmd, "--output-dir", r.output_dir, "directory for output files");
    opt(cmd, "--seed", r.seed, "random seed");
    opt(cmd, "--threads", r.threads, "worker count or auto");
    if (with_bootstrap) {
        opt(cmd, "--bootstrap", r.bootstrap_draws, "wild-bootstrap draws (0 = off)");
        opt(cmd, "--alpha", r.alpha, "confidence level for percentile intervals");
    }
}

ColumnRef map_column(const std::string& name, const DataOpts& d, bool with_intercept) {
    if (name == d.outcome_col) return ColumnRef::outcome();
    if (name == d.running_col) return ColumnRef::running();
    if (name == d.shifter_col) return ColumnRef::shifter();
    for (std::size_t c = 0; c < d.covariate_cols.size(); ++c)
        if (d.covariate_cols[c] == name)
            return ColumnRef::covariate(c + (with_intercept ? 1 : 0));
    for (std::size_t c = 0; c < d.instrument_cols.size(); ++c)
        if (d.instrument_cols[c] == name) return ColumnRef::instrument(c);
    throw validation_error("column '" + name + "' is not part of the declared schema");
}

Dataset load_and_clean(const DataOpts& d, json& config) {
    CsvSchema schema;
    schema.outcome = d.outcome_col;
    schema.running = d.running_col;
    schema.shifter = d.shifter_col;
    schema.covariates = d.covariate_cols;
    schema.instruments = d.instrument_cols;
    schema.export_flag = d.export_flag_col;
    if (d.delimiter.size() != 1)
        throw validation_error("--delimiter expects a single character");
    schema.delimiter = d.delimiter[0];
    Dataset ds = load_csv(d.input, schema);
    config["n_loaded"] = ds.n();
    if (d.cleaning_requested()) {
        CleaningSpec cspec;
        cspec.trim_upper_fraction = d.trim >= 0.0 ? d.trim : 0.0;
        for (const auto& c : d.require_positive_cols)
            cspec.require_positive.push_back(map_column(c, d, true));
        for (const auto& c : d.standardize_cols)
            cspec.standardize.push_back(map_column(c, d, true));
        for (const auto& c : d.quantile_cols)
            cspec.quantile_transform.push_back(map_column(c, d, true));
        auto [cleaned, report] = clean(ds, cspec);
        config["cleaning"] = {{"n_in", report.n_in},
                              {"dropped_nonpositive", report.dropped_nonpositive},
                              {"dropped_trim", report.dropped_trim},
                              {"n_out", report.n_out}};
        std::cerr << "cleaning: " << report.n_in << " rows in, " << report.dropped_nonpositive
                  << " dropped by positivity, " << report.dropped_trim << " trimmed, "
                  << report.n_out << " kept\n";
        ds = std::move(cleaned);
    }
    return ds;
}

ModelSpec build_model_spec(const ModelOpts& m, const DataOpts& d) {
    ModelSpec spec;
    spec.bandwidth_rule = parse_bandwidth(m.bandwidth);
    spec.gamma_grid = parse_gamma_grid(m.gamma_grid);
    spec.query_grid = parse_query_grid(m.query_grid);
    spec.interior_quantiles = parse_interior(m.interior);
    if (m.model >= 2) spec.endogenous_columns.push_back(ColumnRef::running());
    if (m.model == 3) {
        if (d.endogenous_cols.empty())
            throw validation_error("--model 3 needs --endogenous-cols");
        for (const auto& name : d.endogenous_cols) {
            const auto ref = map_column(name, d, true);
            if (ref.role != ColumnRef::Role::covariate)
                throw validation_error("--endogenous-cols must name covariates, got '" + name +
                                       "'");
            spec.endogenous_columns.push_back(ref);
        }
    } else if (!d.endogenous_cols.empty() && m.model == 1) {
        throw validation_error("--endogenous-cols requires --model 3");
    }
    return spec;
}

int report_diagnostics(const std::vector<Diagnostic>& diags) {
    int errors = 0;
    for (const auto& dg : diags) {
        const bool err = dg.severity == Diagnostic::Severity::error;
        std::cerr << (err ? "error: " : "warning: ") << dg.message << "\n";
        if (err) ++errors;
    }
    return errors;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw io_error("write failed for '" + path.string() + "'");
}

template <class Fn>
void write_stream(const fs::path& path, Fn&& fn) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    fn(os);
    write_file(path, os.str());
}

void write_manifest(const fs::path& dir, const std::string& command, int argc, char** argv,
                    const json& config) {
    json m;
    m["version"] = KINKREG_VERSION;
    m["command"] = command;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(std::string(argv[i]));
    m["argv"] = args;
    m["config"] = config;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

json config_json(const DataOpts& d, const ModelOpts& m, const RunOpts& r) {
    json c;
    c["input"] = d.input;
    c["outcome_col"] = d.outcome_col;
    c["running_col"] = d.running_col;
    c["shifter_col"] = d.shifter_col;
    c["covariate_cols"] = d.covariate_cols;
    c["instrument_cols"] = d.instrument_cols;
    c["endogenous_cols"] = d.endogenous_cols;
    c["export_flag_col"] = d.export_flag_col;
    c["trim"] = d.trim;
    c["require_positive_cols"] = d.require_positive_cols;
    c["standardize_cols"] = d.standardize_cols;
    c["quantile_cols"] = d.quantile_cols;
    c["model"] = m.model;
    c["bandwidth"] = m.bandwidth;
    c["gamma_grid"] = m.gamma_grid;
    c["query_grid"] = m.query_grid;
    c["interior"] = m.interior;
    c["output_dir"] = r.output_dir;
    c["seed"] = r.seed;
    c["threads"] = r.threads;
    c["bootstrap"] = r.bootstrap_draws;
    c["alpha"] = r.alpha;
    return c;
}

struct FitOutput {
    Dataset data; // post-cleaning, post-augmentation
    ModelSpec spec;
    ThresholdContour contour;
    CoefficientEstimate estimate;
    std::optional<BootstrapResult> bootstrap;
};

FitOutput run_fit_pipeline(const DataOpts& d, const ModelOpts& m, const RunOpts& r,
                           json& config) {
    FitOutput out;
    Dataset raw = load_and_clean(d, config);
    ModelSpec spec = build_model_spec(m, d);
    if (report_diagnostics(validate(raw, spec)) > 0)
        throw validation_error("dataset failed validation");

    const int threads = parse_threads(r.threads);
    if (!spec.endogenous_columns.empty()) {
        auto cf = control_function(raw, spec.endogenous_columns, raw.instruments);
        config["first_stage"] = {{"endogenous", spec.endogenous_columns.size()},
                                 {"intercept_added", cf.intercept_added}};
        raw = std::move(cf.augmented);
        spec.endogenous_columns.clear();
    }
    out.spec = spec;
    out.contour = estimate_contour(raw, spec, threads);
    out.contour.loo_gamma = leave_one_out_thresholds(raw, spec, threads);
    out.estimate = second_step_beta(raw, out.contour.loo_gamma, out.contour.interior_mask);
    if (r.bootstrap_draws > 0) {
        out.bootstrap = wild_bootstrap(raw, out.contour.loo_gamma, out.contour.interior_mask,
                                       out.estimate, r.bootstrap_draws, r.alpha, r.seed, threads);
        out.estimate.standard_errors = out.bootstrap->standard_errors;
    }
    config["bandwidth_value"] = out.contour.bandwidth;
    config["gamma_range"] = {out.contour.gamma_lo, out.contour.gamma_hi};
    config["n_used"] = out.estimate.n_used;
    out.data = std::move(raw);
    return out;
}

// Console summary in the usual table style; the constant's estimate is
// suppressed here but kept in coefficients.json.
void print_fit_summary(const FitOutput& fit) {
    const auto& est = fit.estimate;
    struct Row {
        std::string name;
        double value;
        std::size_t se_index;
        bool suppressed;
    };
    std::vector<Row> rows = {{"(g-gamma(m))_-", est.beta_g, 0, false},
                             {"(g-gamma(m))_+", est.beta_x, 1, false}};
    for (std::size_t c = 0; c < est.beta_c.size(); ++c)
        rows.push_back({fit.data.covariate_name(c), est.beta_c[c], 2 + c,
                        detail::is_constant_column(fit.data.covariates[c])});
    for (std::size_t c = 0; c < est.beta_v.size(); ++c)
        rows.push_back({fit.data.covariate_name(est.beta_c.size() + c), est.beta_v[c],
                        2 + est.beta_c.size() + c, false});
    std::cerr << "n_used " << est.n_used << ", bandwidth " << fit.contour.bandwidth << "\n";
    for (const auto& row : rows) {
        if (row.suppressed) continue;
        std::cerr << "  " << row.name << ": " << row.value;
        if (row.se_index < est.standard_errors.size()) {
            const double se = est.standard_errors[row.se_index];
            std::cerr << " (" << se << ")" << io::significance_stars(row.value, se);
        }
        std::cerr << "\n";
    }
}

void write_fit_outputs(const fs::path& dir, const FitOutput& fit, bool with_replicates) {
    write_stream(dir / "contour.csv", [&](std::ostream& os) {
        io::write_contour_csv(os, fit.contour);
    });
    const json coef = io::coefficients_json(fit.data, fit.estimate, fit.contour,
                                            fit.bootstrap ? &*fit.bootstrap : nullptr);
    write_file(dir / "coefficients.json", coef.dump(2) + "\n");
    if (with_replicates && fit.bootstrap)
        write_stream(dir / "replicates.csv", [&](std::ostream& os) {
            io::write_replicates_csv(os, *fit.bootstrap);
        });
}

int dispatch(int argc, char** argv) {
    CLI::App app{"nonparametric regression-kink estimation with a shifter-dependent threshold"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KINKREG_VERSION);

    // fit / bootstrap share their options
    DataOpts fit_data, boot_data, heat_data;
    ModelOpts fit_model, boot_model, heat_model;
    RunOpts fit_run, boot_run, heat_run;
    boot_run.bootstrap_draws = 999;

    auto* cmd_fit = app.add_subcommand("fit", "estimate the threshold contour and coefficients");
    add_data_options(*cmd_fit, fit_data);
    add_model_options(*cmd_fit, fit_model);
    add_run_options(*cmd_fit, fit_run);

    auto* cmd_boot = app.add_subcommand(
        "bootstrap", "fit plus wild-bootstrap standard errors and intervals");
    add_data_options(*cmd_boot, boot_data);
    add_model_options(*cmd_boot, boot_model);
    add_run_options(*cmd_boot, boot_run);

    auto* cmd_heat =
        app.add_subcommand("heatmap", "exporter fractions on the decile grid plus the contour");
    add_data_options(*cmd_heat, heat_data);
    add_model_options(*cmd_heat, heat_model);
    add_run_options(*cmd_heat, heat_run, false);

    // simulate
    DataOpts sim_data;
    ModelOpts sim_model;
    sim_model.bandwidth = "under";
    RunOpts sim_run;
    std::string sim_kind = "both";
    std::vector<std::size_t> sim_n{100, 200, 500};
    std::vector<double> sim_beta{1, 2, 3, 4};
    std::size_t sim_reps = 200;
    std::size_t fig_reps = 0; // 0 = same as --replications
    bool no_figures = false;
    auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo bias/RMSE tables and figures");
    add_model_options(*cmd_sim, sim_model);
    add_run_options(*cmd_sim, sim_run, false);
    opt(*cmd_sim, "--kind", sim_kind, "exogenous, endogenous, or both");
    opt(*cmd_sim, "--n-list", sim_n, "sample sizes")->delimiter(',');
    opt(*cmd_sim, "--beta-list", sim_beta, "kink slopes beta_g0")->delimiter(',');
    opt(*cmd_sim, "--replications", sim_reps, "Monte Carlo replications per design");
    opt(*cmd_sim, "--figure-replications", fig_reps,
        "replications for the contour/histogram figures (default: --replications)");
    cmd_sim->add_flag("--no-figures", no_figures, "skip the figure CSVs");

    // snr
    RunOpts snr_run;
    std::string snr_kind = "both";
    std::vector<double> snr_beta{1, 2, 3, 4};
    std::vector<double> snr_m{0.0, 0.25, 0.5};
    auto* cmd_snr = app.add_subcommand("snr", "signal-to-noise ratios of the simulation designs");
    add_run_options(*cmd_snr, snr_run, false);
    opt(*cmd_snr, "--kind", snr_kind, "exogenous, endogenous, or both");
    opt(*cmd_snr, "--beta-list", snr_beta, "kink slopes beta_g0")->delimiter(',');
    opt(*cmd_snr, "--m-list", snr_m, "conditional query points (global always included)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    auto kinds_of = [](const std::string& s) {
        std::vector<DgpSpec::Kind> kinds;
        if (s == "exogenous" || s == "both") kinds.push_back(DgpSpec::Kind::exogenous);
        if (s == "endogenous" || s == "both") kinds.push_back(DgpSpec::Kind::endogenous);
        if (kinds.empty())
            throw validation_error("--kind expects exogenous, endogenous, or both, got '" + s +
                                   "'");
        return kinds;
    };

    if (cmd_fit->parsed() || cmd_boot->parsed()) {
        const bool is_boot = cmd_boot->parsed();
        const DataOpts& d = is_boot ? boot_data : fit_data;
        const ModelOpts& m = is_boot ? boot_model : fit_model;
        const RunOpts& r = is_boot ? boot_run : fit_run;
        fs::create_directories(r.output_dir);
        json config = config_json(d, m, r);
        const FitOutput fit = run_fit_pipeline(d, m, r, config);
        write_fit_outputs(r.output_dir, fit, is_boot);
        print_fit_summary(fit);
        write_manifest(r.output_dir, is_boot ? "bootstrap" : "fit", argc, argv, config);
        return exit_ok;
    }

    if (cmd_heat->parsed()) {
        fs::create_directories(heat_run.output_dir);
        json config = config_json(heat_data, heat_model, heat_run);
        Dataset ds = load_and_clean(heat_data, config);
        if (ds.export_flag.empty())
            throw validation_error("heatmap needs --export-flag-col");
        ModelSpec spec = build_model_spec(heat_model, heat_data);
        if (report_diagnostics(validate(ds, spec)) > 0)
            throw validation_error("dataset failed validation");
        const int threads = parse_threads(heat_run.threads);
        if (!spec.endogenous_columns.empty()) {
            auto cf = control_function(ds, spec.endogenous_columns, ds.instruments);
            ds = std::move(cf.augmented);
            spec.endogenous_columns.clear();
        }
        const ThresholdContour contour = estimate_contour(ds, spec, threads);
        const HeatmapGrid grid = heatmap(ds, contour);
        const fs::path dir = heat_run.output_dir;
        write_stream(dir / "contour.csv",
                     [&](std::ostream& os) { io::write_contour_csv(os, contour); });
        write_stream(dir / "heatmap.csv",
                     [&](std::ostream& os) { io::write_heatmap_csv(os, grid); });
        write_stream(dir / "overlay.csv",
                     [&](std::ostream& os) { io::write_overlay_csv(os, grid); });
        write_manifest(dir, "heatmap", argc, argv, config);
        return exit_ok;
    }

    if (cmd_sim->parsed()) {
        fs::create_directories(sim_run.output_dir);
        json config = config_json(sim_data, sim_model, sim_run);
        config["kind"] = sim_kind;
        config["n_list"] = sim_n;
        config["beta_list"] = sim_beta;
        config["replications"] = sim_reps;
        const int threads = parse_threads(sim_run.threads);
        ModelSpec spec;
        spec.bandwidth_rule = parse_bandwidth(sim_model.bandwidth);
        spec.gamma_grid = parse_gamma_grid(sim_model.gamma_grid);
        spec.interior_quantiles = parse_interior(sim_model.interior);

        std::vector<DgpSpec> designs;
        for (auto kind : kinds_of(sim_kind))
            for (std::size_t n : sim_n)
                for (double b : sim_beta) {
                    DgpSpec dg;
                    dg.kind = kind;
                    dg.n = n;
                    dg.beta_g0 = b;
                    designs.push_back(dg);
                }
        const SimulationReport report =
            run_monte_carlo(designs, spec, sim_reps, sim_run.seed, threads);
        const fs::path dir = sim_run.output_dir;
        write_stream(dir / "report.csv",
                     [&](std::ostream& os) { io::write_report_csv(os, report); });
        write_stream(dir / "snr.csv", [&](std::ostream& os) { io::write_snr_csv(os, report); });
        write_stream(dir / "histogram.csv",
                     [&](std::ostream& os) { io::write_histogram_csv(os, report); });
        for (auto kind : kinds_of(sim_kind)) {
            const std::string kn = to_string(kind);
            write_stream(dir / ("table_beta_" + kn + ".csv"), [&](std::ostream& os) {
                io::write_pivot_csv(os, report, kind, "beta_g");
            });
            for (double m : {0.0, 0.25, 0.5}) {
                const std::string label = "gamma@" + kinkreg::detail::format_query(m);
                const std::string fname =
                    "table_gamma_" + kn + "_m" + kinkreg::detail::format_query(m) + ".csv";
                write_stream(dir / fname, [&](std::ostream& os) {
                    io::write_pivot_csv(os, report, kind, label);
                });
            }
        }
        if (!no_figures) {
            DgpSpec ref;
            ref.n = 1000;
            ref.beta_g0 = 4.0;
            const std::size_t reps = fig_reps ? fig_reps : sim_reps;
            const auto rec = contour_recovery(ref, spec, linspace(-1.0, 1.0, 41), reps,
                                              sim_run.seed, threads);
            write_stream(dir / "avg_contour.csv",
                         [&](std::ostream& os) { io::write_avg_contour_csv(os, rec); });
        }
        write_manifest(dir, "simulate", argc, argv, config);
        return exit_ok;
    }

    if (cmd_snr->parsed()) {
        fs::create_directories(snr_run.output_dir);
        json config;
        config["kind"] = snr_kind;
        config["beta_list"] = snr_beta;
        config["m_list"] = snr_m;
        config["output_dir"] = snr_run.output_dir;
        const fs::path dir = snr_run.output_dir;
        write_stream(dir / "snr.csv", [&](std::ostream& os) {
            os << "kind,beta_g0,m,snr\n";
            for (auto kind : kinds_of(snr_kind))
                for (double b : snr_beta) {
                    DgpSpec dg;
                    dg.kind = kind;
                    dg.beta_g0 = b;
                    os << to_string(kind) << ',' << format_g17(b) << ",global,"
                       << format_g17(snr(dg)) << '\n';
                    for (double m : snr_m)
                        os << to_string(kind) << ',' << format_g17(b) << ',' << format_g17(m)
                           << ',' << format_g17(snr(dg, m)) << '\n';
                }
        });
        write_manifest(dir, "snr", argc, argv, config);
        return exit_ok;
    }

    return exit_ok;
}

} // namespace

namespace {

// One machine-readable error line on stderr alongside the prose.
int report_error(const char* type, const std::exception& e, int code, const json& extra = {}) {
    json rec;
    rec["error"] = {{"type", type}, {"message", e.what()}, {"exit_code", code}};
    if (!extra.empty()) rec["error"]["detail"] = extra;
    std::cerr << type << " error: " << e.what() << "\n" << rec.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const io_error& e) {
        json extra;
        if (e.row()) extra["row"] = e.row();
        if (!e.column().empty()) extra["column"] = e.column();
        return report_error("io", e, exit_io, extra);
    } catch (const degenerate_window_error& e) {
        json extra;
        if (std::isfinite(e.query_point())) extra["query_point"] = e.query_point();
        return report_error("estimation", e, exit_degenerate, extra);
    } catch (const singular_fit_error& e) {
        json extra;
        if (std::isfinite(e.query_point())) extra["query_point"] = e.query_point();
        if (std::isfinite(e.gamma())) extra["gamma"] = e.gamma();
        return report_error("estimation", e, exit_degenerate, extra);
    } catch (const validation_error& e) {
        return report_error("validation", e, exit_validation);
    } catch (const std::exception& e) {
        return report_error("internal", e, 1);
    }
}
