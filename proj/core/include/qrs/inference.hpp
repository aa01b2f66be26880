#pragma once

#include "qrs/quantile_core.hpp"

namespace qrs {

/// D = X'X/n with its (p1, p2) blocks, Schur complements and the D^22 block
/// of the inverse.
struct DesignPartitions {
    Matrix D;
    Matrix D11, D12, D21, D22;
    Matrix D11_2;    // D11 - D12 D22^-1 D21
    Matrix D22_1;    // D22 - D21 D11^-1 D12
    Matrix D_sup22;  // (D22 - D21 D11^-1 D12)^-1 = D22_1^-1
};

struct WaldResult {
    double statistic = 0.0;
    Index dof = 0;
    double sparsity = 0.0;  // s(tau) = 1 / f(F^-1(tau))
    double w = 0.0;         // sqrt(tau(1-tau)) * s(tau)
    double alpha = 0.05;
    double critical_value = 0.0;
    bool reject = false;
};

/// Blocks and Schur complements of D = X'X/n; positive definiteness certified
/// by Cholesky.
DesignPartitions compute_partitions(const PartitionedDesign& design);

/// Same decomposition from an already-formed symmetric positive definite D.
DesignPartitions partition_matrix(const Matrix& D, Index p1, Index p2);

/// Difference-quotient sparsity estimate on the residual empirical quantile
/// function with the Hall-Sheather bandwidth; F^-1 interpolates linearly
/// between order statistics.
double estimate_sparsity(const Vector& residuals, double tau, Index n);

/// Hall-Sheather bandwidth n^(-1/3) z_{1-a/2}^(2/3)
/// (1.5 phi(z_tau)^2 / (2 z_tau^2 + 1))^(1/3), clamped into
/// (0, min(tau, 1-tau)/2].
double hall_sheather_bandwidth(Index n, double tau, double alpha_level = 0.05);

/// Wald statistic W = n w^-2 beta2' (D^22)^-1 beta2 with beta2 the trailing
/// p2 entries of the fit, tested against the chi-square upper-alpha quantile.
WaldResult wald_statistic(const QuantileFit& fit, const DesignPartitions& parts, double w,
                          Index p1, Index p2, Index n, double alpha = 0.05);

} // namespace qrs
