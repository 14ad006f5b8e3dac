#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "kinkreg/errors.hpp"

namespace kinkreg {

// The regressor split around a candidate kink: (a)_- = min(a, 0) and
// (a)_+ = max(a, 0) applied to a = g - gamma, plus the covariates carried
// through unchanged. neg + pos reconstructs g - gamma exactly and at most
// one of the two is nonzero.
struct KinkBasis {
    double neg = 0;
    double pos = 0;
    std::vector<double> covs;
};

inline KinkBasis kink_basis(double g, double gamma, std::vector<double> covs) {
    if (!std::isfinite(g) || !std::isfinite(gamma))
        throw validation_error("kink_basis: non-finite input");
    for (double c : covs)
        if (!std::isfinite(c)) throw validation_error("kink_basis: non-finite covariate");
    const double a = g - gamma;
    return {std::min(a, 0.0), std::max(a, 0.0), std::move(covs)};
}

} // namespace kinkreg
