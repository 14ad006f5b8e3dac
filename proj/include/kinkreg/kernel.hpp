#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kinkreg/errors.hpp"

namespace kinkreg {

// Kernel values with |t| beyond this cutoff are treated as exactly zero;
// the Gaussian density there is below 7e-9, under numerical noise, and the
// truncation is what bounds the window a query point has to visit.
inline constexpr double kernel_cutoff = 6.0;

// Standard Gaussian density, the kernel used throughout.
inline double kernel_eval(double t) {
    if (!std::isfinite(t)) throw validation_error("kernel_eval: non-finite argument");
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * t * t);
}

namespace detail {
// Truncated kernel without the finiteness check, for the hot loops.
inline double kernel_trunc(double t) noexcept {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
    return std::abs(t) > kernel_cutoff ? 0.0 : inv_sqrt_2pi * std::exp(-0.5 * t * t);
}
} // namespace detail

// Normalized local weights k_i = K((m_i - m)/b) / sum_j K((m_j - m)/b).
struct WeightVector {
    std::vector<double> weights; // sum to 1
    double total_mass = 0;       // unnormalized kernel mass
    double query_point = 0;
};

inline WeightVector local_weights(std::span<const double> shifter, double m, double b) {
    if (!(b > 0) || !std::isfinite(b)) throw validation_error("local_weights: bandwidth must be > 0");
    if (shifter.empty()) throw validation_error("local_weights: empty shifter");
    if (!std::isfinite(m)) throw validation_error("local_weights: non-finite query point");
    WeightVector out;
    out.query_point = m;
    out.weights.resize(shifter.size());
    double mass = 0;
    for (std::size_t i = 0; i < shifter.size(); ++i) {
        const double k = detail::kernel_trunc((shifter[i] - m) / b);
        out.weights[i] = k;
        mass += k;
    }
    if (!(mass > 0))
        throw degenerate_window_error(m, "no kernel mass at query point " + std::to_string(m));
    for (double& w : out.weights) w /= mass;
    out.total_mass = mass;
    return out;
}

} // namespace kinkreg
