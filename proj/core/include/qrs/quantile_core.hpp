#pragma once

#include <Eigen/Dense>

#include "qrs/errors.hpp"

namespace qrs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// n x p regression design with response, quantile level and the p = p1 + p2
/// column split. The first p1 columns are the retained block, the trailing p2
/// columns are the candidate-irrelevant block.
struct PartitionedDesign {
    Matrix X;
    Vector y;
    double tau = 0.5;
    Index p1 = 0;
    Index p2 = 0;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
    Matrix X1() const { return X.leftCols(p1); }
    Matrix X2() const { return X.rightCols(p2); }
};

/// Validates invariants (n >= p >= 1, p = p1 + p2, tau in (0,1), full column
/// rank) and returns the design. Throws singular_design_error naming the
/// numerical rank when X is rank deficient.
PartitionedDesign make_design(Matrix X, Vector y, double tau, Index p1, Index p2);

/// Fitted coefficients for one quantile model.
struct QuantileFit {
    Vector beta;
    double objective = 0.0;
    Vector residuals;
    int iterations = 0;
    bool converged = false;
};

struct LossSpec {
    double tau;
};

/// Check loss rho_tau(u) = u * (tau - 1{u<0}).
double quantile_loss(double u, double tau);

/// Sum of check losses over a residual vector.
double quantile_objective(const Vector& residuals, double tau);

/// Least-squares baseline; residuals orthogonal to the column space.
QuantileFit ls_fit(const PartitionedDesign& design);

/// Left-continuous inverse of the empirical CDF: the smallest order statistic
/// whose empirical CDF is >= tau.
double empirical_quantile(const Vector& values, double tau);

/// Numerical column rank of X with tolerance n * eps * sigma_max.
Index numerical_rank(const Matrix& X);

} // namespace qrs
