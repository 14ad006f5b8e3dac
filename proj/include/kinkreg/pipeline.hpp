#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kinkreg/csv.hpp"
#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/estimator.hpp"
#include "kinkreg/stats.hpp"

namespace kinkreg {

struct CsvSchema {
    std::string outcome, running, shifter;
    std::vector<std::string> covariates;  // beyond the intercept
    std::vector<std::string> instruments; // optional
    std::string export_flag;              // optional
    char delimiter = ',';
    bool add_intercept = true;
};

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    const CsvFile f = read_numeric_csv(path, schema.delimiter);
    Dataset ds;
    ds.outcome = f.data[f.column_index(schema.outcome)];
    ds.running = f.data[f.column_index(schema.running)];
    ds.shifter = f.data[f.column_index(schema.shifter)];
    if (schema.add_intercept) {
        ds.covariates.push_back(std::vector<double>(f.rows, 1.0));
        ds.covariate_names.push_back("const");
    }
    for (const auto& name : schema.covariates) {
        ds.covariates.push_back(f.data[f.column_index(name)]);
        ds.covariate_names.push_back(name);
    }
    for (const auto& name : schema.instruments) {
        ds.instruments.push_back(f.data[f.column_index(name)]);
        ds.instrument_names.push_back(name);
    }
    if (!schema.export_flag.empty()) {
        const auto& col = f.data[f.column_index(schema.export_flag)];
        ds.export_flag.resize(f.rows);
        for (std::size_t i = 0; i < f.rows; ++i) {
            if (col[i] != 0.0 && col[i] != 1.0)
                throw io_error("export flag not 0/1 at row " + std::to_string(i + 1) +
                                   ", column '" + schema.export_flag + "'",
                               i + 1, schema.export_flag);
            ds.export_flag[i] = col[i] == 1.0 ? 1 : 0;
        }
    }
    return ds;
}

// Preprocessing rules: positivity filters first, then the upper-outcome
// trim, then standardization / quantile transforms, so the normalization
// statistics describe the analysis sample.
struct CleaningSpec {
    std::vector<ColumnRef> require_positive;
    double trim_upper_fraction = 0.15; // on the outcome
    std::vector<ColumnRef> standardize;
    std::vector<ColumnRef> quantile_transform;
};

struct CleanReport {
    std::size_t n_in = 0;
    std::size_t dropped_nonpositive = 0;
    std::size_t dropped_trim = 0;
    std::size_t n_out = 0;
    double trim_cutoff = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline Dataset filter_rows(const Dataset& ds, const std::vector<std::uint8_t>& keep) {
    Dataset out;
    out.covariate_names = ds.covariate_names;
    out.instrument_names = ds.instrument_names;
    out.control_residual_count = ds.control_residual_count;
    const std::size_t n = ds.n();
    auto copy_col = [&](const std::vector<double>& src, std::vector<double>& dst) {
        dst.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (keep[i]) dst.push_back(src[i]);
    };
    copy_col(ds.outcome, out.outcome);
    copy_col(ds.running, out.running);
    copy_col(ds.shifter, out.shifter);
    out.covariates.resize(ds.covariates.size());
    for (std::size_t c = 0; c < ds.covariates.size(); ++c)
        copy_col(ds.covariates[c], out.covariates[c]);
    out.instruments.resize(ds.instruments.size());
    for (std::size_t c = 0; c < ds.instruments.size(); ++c)
        copy_col(ds.instruments[c], out.instruments[c]);
    if (!ds.export_flag.empty()) {
        out.export_flag.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (keep[i]) out.export_flag.push_back(ds.export_flag[i]);
    }
    return out;
}

// Ascending averaged ranks divided by n, mapping into (0, 1].
inline void quantile_transform_column(std::vector<double>& col) {
    const std::size_t n = col.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (col[a] != col[b]) return col[a] < col[b];
        return a < b;
    });
    std::vector<double> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && col[order[j + 1]] == col[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg_rank / static_cast<double>(n);
        i = j + 1;
    }
    col = std::move(out);
}

} // namespace detail

inline std::pair<Dataset, CleanReport> clean(const Dataset& ds, const CleaningSpec& spec) {
    if (!(spec.trim_upper_fraction >= 0.0 && spec.trim_upper_fraction < 1.0))
        throw validation_error("clean: trim fraction must lie in [0, 1)");
    CleanReport report;
    report.n_in = ds.n();

    std::vector<std::uint8_t> keep(ds.n(), 1);
    for (const auto& ref : spec.require_positive) {
        const auto& col = ds.column(ref);
        for (std::size_t i = 0; i < col.size(); ++i)
            if (!(col[i] > 0.0)) keep[i] = 0;
    }
    Dataset cur = detail::filter_rows(ds, keep);
    report.dropped_nonpositive = report.n_in - cur.n();
    if (cur.n() == 0) throw validation_error("clean: every row dropped by positivity rules");

    if (spec.trim_upper_fraction > 0.0) {
        const std::size_t k = static_cast<std::size_t>(
            spec.trim_upper_fraction * static_cast<double>(cur.n()));
        if (k > 0) {
            auto sorted = sorted_copy(cur.outcome);
            const double cutoff = sorted[sorted.size() - k]; // k-th largest
            report.trim_cutoff = cutoff;
            std::vector<std::uint8_t> keep2(cur.n(), 1);
            for (std::size_t i = 0; i < cur.n(); ++i)
                if (cur.outcome[i] >= cutoff) keep2[i] = 0; // ties at the cutoff all go
            const std::size_t before = cur.n();
            cur = detail::filter_rows(cur, keep2);
            report.dropped_trim = before - cur.n();
        }
    }
    if (cur.n() == 0) throw validation_error("clean: every row dropped by trimming");

    for (const auto& ref : spec.standardize) {
        auto& col = cur.column(ref);
        const double mu = mean(col);
        const double sd = sample_sd(col);
        if (!(sd > 0.0))
            throw validation_error("clean: cannot standardize constant column " + to_string(ref));
        for (double& v : col) v = (v - mu) / sd;
    }
    for (const auto& ref : spec.quantile_transform)
        detail::quantile_transform_column(cur.column(ref));

    report.n_out = cur.n();
    return {std::move(cur), report};
}

// Exporter fractions on the decile grid of (shifter, running), with the
// threshold contour re-expressed in the same percentile coordinates.
// Observations exactly on an edge go to the lower cell.
struct HeatmapGrid {
    std::array<std::array<double, 10>, 10> cell_fractions{}; // [m_decile][g_decile], NaN = empty
    std::array<std::array<std::size_t, 10>, 10> cell_counts{};
    ThresholdContour overlay; // query_points/gamma_hat in 0-100 percentile units
};

inline HeatmapGrid heatmap(const Dataset& ds, const ThresholdContour& contour) {
    const std::size_t n = ds.n();
    if (ds.export_flag.size() != n)
        throw validation_error("heatmap: dataset has no export flag");

    const auto ms = sorted_copy(ds.shifter);
    const auto gs = sorted_copy(ds.running);
    std::array<double, 9> medge{}, gedge{};
    for (std::size_t e = 0; e < 9; ++e) {
        const double q = static_cast<double>(e + 1) / 10.0;
        medge[e] = empirical_quantile(ms, q);
        gedge[e] = empirical_quantile(gs, q);
    }
    auto cell_of = [](double v, const std::array<double, 9>& edges) {
        std::size_t c = 0;
        for (double e : edges)
            if (e < v) ++c;
        return c;
    };

    HeatmapGrid out;
    std::array<std::array<std::size_t, 10>, 10> flags{};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t mc = cell_of(ds.shifter[i], medge);
        const std::size_t gc = cell_of(ds.running[i], gedge);
        out.cell_counts[mc][gc] += 1;
        flags[mc][gc] += ds.export_flag[i];
    }
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = 0; b < 10; ++b)
            out.cell_fractions[a][b] =
                out.cell_counts[a][b] == 0
                    ? std::numeric_limits<double>::quiet_NaN()
                    : static_cast<double>(flags[a][b]) /
                          static_cast<double>(out.cell_counts[a][b]);

    out.overlay.bandwidth = contour.bandwidth;
    out.overlay.gamma_lo = contour.gamma_lo;
    out.overlay.gamma_hi = contour.gamma_hi;
    out.overlay.query_levels = contour.query_levels;
    out.overlay.effective_mass = contour.effective_mass;
    out.overlay.query_points.reserve(contour.query_points.size());
    out.overlay.gamma_hat.reserve(contour.query_points.size());
    for (std::size_t k = 0; k < contour.query_points.size(); ++k) {
        out.overlay.query_points.push_back(100.0 * contour.query_levels[k]);
        const double g = contour.gamma_hat[k];
        out.overlay.gamma_hat.push_back(std::isfinite(g)
                                            ? 100.0 * empirical_cdf(gs, g)
                                            : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

} // namespace kinkreg
