#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/linalg.hpp"
#include "kinkreg/model_spec.hpp"
#include "kinkreg/profile.hpp"

namespace kinkreg {

// First-stage regressions of each endogenous column on the instruments and
// the dataset augmented with the residual columns, which then enter both
// the threshold estimation and the second-stage regression as ordinary
// covariates.
struct ControlFunctionResult {
    std::vector<std::vector<double>> residuals;                // one column per endogenous regressor
    std::vector<std::vector<double>> first_stage_coefficients; // aligned with [ones?, instruments...]
    bool intercept_added = false;
    Dataset augmented;
};

inline ControlFunctionResult
control_function(const Dataset& ds, const std::vector<ColumnRef>& endogenous,
                 const std::vector<std::vector<double>>& instruments) {
    ControlFunctionResult out;
    out.augmented = ds;
    if (endogenous.empty()) return out; // exogenous model: dataset unchanged

    const std::size_t n = ds.n();
    if (instruments.empty())
        throw validation_error("control_function: endogenous columns declared but no instruments");
    for (const auto& col : instruments)
        if (col.size() != n)
            throw validation_error("control_function: instrument column length mismatch");
    for (const auto& ref : endogenous) {
        if (ref.role != ColumnRef::Role::running && ref.role != ColumnRef::Role::covariate)
            throw validation_error("control_function: " + to_string(ref) +
                                   " cannot be treated as endogenous");
        if (ref.role == ColumnRef::Role::covariate && ref.index >= ds.covariates.size())
            throw validation_error("control_function: " + to_string(ref) + " does not exist");
    }

    // Ensure the first stage has an intercept: the augmented regression
    // needs mean-zero residuals for its own intercept to retain meaning.
    bool has_const = false;
    for (const auto& col : instruments)
        if (detail::is_constant_column(col)) has_const = true;
    std::vector<const double*> w;
    std::vector<double> ones;
    if (!has_const) {
        ones.assign(n, 1.0);
        w.push_back(ones.data());
        out.intercept_added = true;
    }
    for (const auto& col : instruments) w.push_back(col.data());
    const std::size_t q = w.size();

    std::vector<double> gram(q * q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < q; ++r)
            for (std::size_t c = 0; c <= r; ++c) gram[r * q + c] += w[r][i] * w[c][i];
    for (std::size_t r = 0; r < q; ++r)
        for (std::size_t c = r + 1; c < q; ++c) gram[r * q + c] = gram[c * q + r];

    for (const auto& ref : endogenous) {
        const std::vector<double>& col = ds.column(ref);
        std::vector<double> rhs(q, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < q; ++r) rhs[r] += w[r][i] * col[i];
        auto eta = linalg::solve_spd_pivoted(gram, std::move(rhs), q, local_pivot_tol);
        if (!eta)
            throw singular_fit_error(std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN(),
                                     "first stage for " + to_string(ref) + " is rank deficient");
        std::vector<double> resid(n);
        for (std::size_t i = 0; i < n; ++i) {
            double fit = 0;
            for (std::size_t r = 0; r < q; ++r) fit += (*eta)[r] * w[r][i];
            resid[i] = col[i] - fit;
        }
        std::string name = "vhat_";
        name += ref.role == ColumnRef::Role::running ? "g" : ds.covariate_name(ref.index);
        while (out.augmented.covariate_names.size() < out.augmented.covariates.size())
            out.augmented.covariate_names.push_back(
                out.augmented.covariate_name(out.augmented.covariate_names.size()));
        out.augmented.covariates.push_back(resid);
        out.augmented.covariate_names.push_back(std::move(name));
        out.augmented.control_residual_count += 1;
        out.residuals.push_back(std::move(resid));
        out.first_stage_coefficients.push_back(std::move(*eta));
    }
    return out;
}

// Convenience overload using the dataset's own instrument columns.
inline ControlFunctionResult control_function(const Dataset& ds,
                                              const std::vector<ColumnRef>& endogenous) {
    return control_function(ds, endogenous, ds.instruments);
}

} // namespace kinkreg
