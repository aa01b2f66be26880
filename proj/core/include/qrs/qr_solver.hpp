#pragma once

#include <vector>

#include "qrs/quantile_core.hpp"

namespace qrs {

struct SolverOptions {
    double tolerance = 1e-10;     // duality-gap threshold for the LP solver
    int max_iterations = 200;
    double smoothing = 0.0;       // penalized-path smoothing half-width; 0 = auto (1e-4 * IQR(y))
};

/// Elastic-net path: one coefficient vector per lambda, lambdas strictly
/// decreasing, training objective (sum of check losses) per lambda.
struct PenaltyPath {
    double alpha_mix = 1.0;
    Vector lambdas;
    Matrix betas;   // row i = coefficients at lambdas(i)
    Vector losses;
};

/// Full-model quantile regression by primal-dual interior point on the LP
/// formulation, followed by a vertex polish that interpolates p observations
/// exactly when the optimum is a vertex.
QuantileFit fit_full(const PartitionedDesign& design, const SolverOptions& options = {});

/// Restricted fit with the trailing p2 coefficients forced to zero; the first
/// p1 entries minimize the check loss over the retained block.
QuantileFit fit_submodel(const PartitionedDesign& design, const SolverOptions& options = {});

/// Exact oracle: enumerates all p-subsets of observations, solves each
/// interpolation system and returns the global check-loss minimizer. Guarded
/// to n <= 15, p <= 4. Ties break to the lexicographically smallest subset.
QuantileFit brute_force_fit(const PartitionedDesign& design);

/// Elastic-net penalized quantile path on a decreasing lambda grid. The check
/// loss is smoothed by a quadratic region of half-width options.smoothing and
/// solved by cyclic coordinate descent with warm starts. Column
/// `intercept_column` (default 0, -1 = none) is never penalized.
PenaltyPath fit_penalized(const PartitionedDesign& design, double alpha_mix,
                          const Vector& lambdas, const SolverOptions& options = {},
                          Index intercept_column = 0);

/// Default path grid: n log-spaced values from lambda_max (null-model
/// subgradient bound) down to 1e-3 * lambda_max.
Vector default_lambda_grid(const PartitionedDesign& design, double alpha_mix,
                           int n_lambda = 100, Index intercept_column = 0);

} // namespace qrs
