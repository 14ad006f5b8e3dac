#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kinkreg {

// Input data or configuration violates a documented invariant.
class validation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No usable local fit at a query point: the kernel window carries no mass,
// too little mass to identify the local parameters, or every candidate
// threshold yields a singular design.
class degenerate_window_error : public std::runtime_error {
public:
    degenerate_window_error(double query_point, const std::string& what)
        : std::runtime_error(what), query_point_(query_point) {}
    double query_point() const noexcept { return query_point_; }

private:
    double query_point_;
};

// A specific weighted least-squares system is rank deficient.
class singular_fit_error : public std::runtime_error {
public:
    singular_fit_error(double query_point, double gamma, const std::string& what)
        : std::runtime_error(what), query_point_(query_point), gamma_(gamma) {}
    double query_point() const noexcept { return query_point_; }
    double gamma() const noexcept { return gamma_; }

private:
    double query_point_;
    double gamma_;
};

// File level problem: unreadable file, missing column, unparseable cell.
class io_error : public std::runtime_error {
public:
    io_error(const std::string& what, std::size_t row = 0, std::string column = {})
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}
    // 1-based data row of the offending cell; 0 when not cell-specific.
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

} // namespace kinkreg
