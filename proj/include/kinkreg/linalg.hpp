#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace kinkreg::linalg {

// Cholesky with diagonal pivoting on a symmetric positive semidefinite
// matrix, the factorization behind every weighted least-squares solve in
// the library. Rank deficiency is declared when a pivot falls below
// tol * (largest pivot), which gives reproducible cross-platform behavior.
//
// a: d x d row-major, fully populated and symmetric; destroyed.
// b: right-hand side of length d; destroyed.
// x: solution, length d.
// perm: scratch of length d.
// Returns false on rank deficiency.
inline bool solve_spd_pivoted_inplace(double* a, double* b, std::size_t d,
                                      double tol, double* x, std::size_t* perm) {
    if (d == 0) return true;
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;

    double max_pivot = 0;
    for (std::size_t k = 0; k < d; ++k) {
        // largest remaining diagonal entry
        std::size_t piv = k;
        for (std::size_t j = k + 1; j < d; ++j)
            if (a[j * d + j] > a[piv * d + piv]) piv = j;
        if (piv != k) {
            std::swap(perm[k], perm[piv]);
            std::swap(b[k], b[piv]);
            for (std::size_t j = 0; j < d; ++j) std::swap(a[k * d + j], a[piv * d + j]);
            for (std::size_t i = 0; i < d; ++i) std::swap(a[i * d + k], a[i * d + piv]);
        }
        const double pivot = a[k * d + k];
        if (k == 0) max_pivot = pivot;
        if (!(pivot > 0) || pivot < tol * max_pivot || !std::isfinite(pivot)) return false;

        const double lkk = std::sqrt(pivot);
        a[k * d + k] = lkk;
        for (std::size_t i = k + 1; i < d; ++i) a[i * d + k] /= lkk;
        // keep the trailing submatrix fully symmetric so later swaps stay valid
        for (std::size_t j = k + 1; j < d; ++j) {
            const double ljk = a[j * d + k];
            for (std::size_t i = j; i < d; ++i) {
                a[i * d + j] -= a[i * d + k] * ljk;
                a[j * d + i] = a[i * d + j];
            }
        }
    }

    // L y = b, then L' z = y, then undo the permutation.
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= a[i * d + j] * b[j];
        b[i] = s / a[i * d + i];
    }
    for (std::size_t ii = d; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < d; ++j) s -= a[j * d + ii] * b[j];
        b[ii] = s / a[ii * d + ii];
    }
    for (std::size_t i = 0; i < d; ++i) x[perm[i]] = b[i];
    return true;
}

inline std::optional<std::vector<double>>
solve_spd_pivoted(std::vector<double> a, std::vector<double> b, std::size_t d,
                  double tol = 1e-10) {
    std::vector<double> x(d);
    std::vector<std::size_t> perm(d);
    if (!solve_spd_pivoted_inplace(a.data(), b.data(), d, tol, x.data(), perm.data()))
        return std::nullopt;
    return x;
}

} // namespace kinkreg::linalg
