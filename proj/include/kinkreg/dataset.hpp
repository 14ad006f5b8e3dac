#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kinkreg/errors.hpp"

namespace kinkreg {

// Which dataset column a setting refers to.
struct ColumnRef {
    enum class Role { outcome, running, shifter, covariate, instrument };
    Role role = Role::covariate;
    std::size_t index = 0; // meaningful for covariate / instrument

    bool operator==(const ColumnRef&) const = default;

    static ColumnRef outcome() { return {Role::outcome, 0}; }
    static ColumnRef running() { return {Role::running, 0}; }
    static ColumnRef shifter() { return {Role::shifter, 0}; }
    static ColumnRef covariate(std::size_t i) { return {Role::covariate, i}; }
    static ColumnRef instrument(std::size_t i) { return {Role::instrument, i}; }
};

inline std::string to_string(const ColumnRef& c) {
    switch (c.role) {
        case ColumnRef::Role::outcome: return "outcome";
        case ColumnRef::Role::running: return "running";
        case ColumnRef::Role::shifter: return "shifter";
        case ColumnRef::Role::covariate: return "covariate[" + std::to_string(c.index) + "]";
        case ColumnRef::Role::instrument: return "instrument[" + std::to_string(c.index) + "]";
    }
    return "?";
}

// Column-oriented sample. Columns are stored separately because the
// estimator sweeps one column at a time over the candidate-threshold grid.
struct Dataset {
    std::vector<double> outcome;                  // pi
    std::vector<double> running;                  // g
    std::vector<double> shifter;                  // m
    std::vector<std::vector<double>> covariates;  // x columns; exactly one constant column
    std::vector<std::vector<double>> instruments; // w columns; may be empty
    std::vector<std::uint8_t> export_flag;        // 0/1; empty when absent

    std::vector<std::string> covariate_names;     // optional labels, parallel to covariates
    std::vector<std::string> instrument_names;

    // Trailing covariate columns that are first-stage control residuals.
    std::size_t control_residual_count = 0;

    std::size_t n() const noexcept { return outcome.size(); }

    const std::vector<double>& column(const ColumnRef& ref) const {
        switch (ref.role) {
            case ColumnRef::Role::outcome: return outcome;
            case ColumnRef::Role::running: return running;
            case ColumnRef::Role::shifter: return shifter;
            case ColumnRef::Role::covariate:
                if (ref.index >= covariates.size())
                    throw validation_error("no such covariate column: " + to_string(ref));
                return covariates[ref.index];
            case ColumnRef::Role::instrument:
                if (ref.index >= instruments.size())
                    throw validation_error("no such instrument column: " + to_string(ref));
                return instruments[ref.index];
        }
        throw validation_error("bad column reference");
    }

    std::vector<double>& column(const ColumnRef& ref) {
        return const_cast<std::vector<double>&>(
            static_cast<const Dataset&>(*this).column(ref));
    }

    std::string covariate_name(std::size_t i) const {
        if (i < covariate_names.size()) return covariate_names[i];
        return "x" + std::to_string(i);
    }
};

struct Diagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string message;
};

} // namespace kinkreg
