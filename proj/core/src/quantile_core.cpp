#include "qrs/quantile_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qrs {

Index numerical_rank(const Matrix& X) {
    Eigen::JacobiSVD<Matrix> svd(X);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double tol = static_cast<double>(X.rows()) *
                       std::numeric_limits<double>::epsilon() * sv(0);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    return rank;
}

PartitionedDesign make_design(Matrix X, Vector y, double tau, Index p1, Index p2) {
    if (X.rows() != y.size())
        throw std::invalid_argument("make_design: X rows and y length differ");
    if (X.cols() < 1 || X.rows() < X.cols())
        throw std::invalid_argument("make_design: need n >= p >= 1");
    if (p1 < 0 || p2 < 0 || p1 + p2 != X.cols())
        throw std::invalid_argument("make_design: p1 + p2 must equal p");
    if (!(tau > 0.0 && tau < 1.0))
        throw std::domain_error("make_design: tau must lie strictly in (0,1)");
    const Index r = numerical_rank(X);
    if (r < X.cols())
        throw singular_design_error("make_design: X is rank deficient (numerical rank " +
                                    std::to_string(r) + " of " + std::to_string(X.cols()) + ")");
    return PartitionedDesign{std::move(X), std::move(y), tau, p1, p2};
}

double quantile_loss(double u, double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::domain_error("quantile_loss: tau must lie strictly in (0,1)");
    return u < 0.0 ? (tau - 1.0) * u : tau * u;
}

double quantile_objective(const Vector& residuals, double tau) {
    double s = 0.0;
    for (Index i = 0; i < residuals.size(); ++i)
        s += quantile_loss(residuals(i), tau);
    return s;
}

QuantileFit ls_fit(const PartitionedDesign& design) {
    const Index r = numerical_rank(design.X);
    if (r < design.p())
        throw singular_design_error("ls_fit: rank-deficient design (rank " + std::to_string(r) +
                                    " < p = " + std::to_string(design.p()) + ")");
    QuantileFit fit;
    fit.beta = design.X.colPivHouseholderQr().solve(design.y);
    fit.residuals = design.y - design.X * fit.beta;
    fit.objective = quantile_objective(fit.residuals, design.tau);
    fit.iterations = 0;
    fit.converged = true;
    return fit;
}

double empirical_quantile(const Vector& values, double tau) {
    if (values.size() == 0)
        throw std::domain_error("empirical_quantile: empty input");
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    // smallest k with k/n >= tau
    const auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(tau * n) - 1.0));
    return v[std::min(k, v.size() - 1)];
}

} // namespace qrs
