#pragma once

// Nonparametric regression-kink estimation with a threshold that varies
// with an observed shifter: pointwise profile least squares over a
// candidate grid with kernel weights in the shifter, leave-one-out
// two-step coefficient estimation, control-function correction for
// endogenous regressors, wild-bootstrap inference, a Monte Carlo harness,
// and a CSV preprocessing pipeline.

#include "kinkreg/basis.hpp"
#include "kinkreg/bootstrap.hpp"
#include "kinkreg/control_function.hpp"
#include "kinkreg/csv.hpp"
#include "kinkreg/dataset.hpp"
#include "kinkreg/errors.hpp"
#include "kinkreg/estimator.hpp"
#include "kinkreg/kernel.hpp"
#include "kinkreg/linalg.hpp"
#include "kinkreg/model_spec.hpp"
#include "kinkreg/parallel.hpp"
#include "kinkreg/pipeline.hpp"
#include "kinkreg/profile.hpp"
#include "kinkreg/rng.hpp"
#include "kinkreg/simulation.hpp"
#include "kinkreg/stats.hpp"
#include "kinkreg/version.hpp"
