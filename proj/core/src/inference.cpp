#include "qrs/inference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qrs/special.hpp"

namespace qrs {

namespace {

Matrix spd_inverse(const Matrix& M, const char* what) {
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
        throw singular_design_error(std::string(what) + ": block not positive definite");
    return llt.solve(Matrix::Identity(M.rows(), M.cols()));
}

// Linear interpolation between order statistics of the empirical quantile
// function, with the convention F^-1(k/n) = x_(k).
double interp_quantile(const std::vector<double>& sorted, double q) {
    const double n = static_cast<double>(sorted.size());
    const double pos = q * n - 1.0;  // index of x_(k) at q = k/n, zero-based
    if (pos <= 0.0) return sorted.front();
    if (pos >= n - 1.0) return sorted.back();
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - std::floor(pos);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

} // namespace

DesignPartitions partition_matrix(const Matrix& D, Index p1, Index p2) {
    if (D.rows() != D.cols() || D.rows() != p1 + p2)
        throw std::invalid_argument("partition_matrix: dimension mismatch");
    DesignPartitions parts;
    parts.D = D;
    parts.D11 = D.topLeftCorner(p1, p1);
    parts.D12 = D.topRightCorner(p1, p2);
    parts.D21 = D.bottomLeftCorner(p2, p1);
    parts.D22 = D.bottomRightCorner(p2, p2);
    Eigen::LLT<Matrix> lltD(parts.D);
    if (lltD.info() != Eigen::Success)
        throw singular_design_error("partition_matrix: D is not positive definite");
    const Matrix D22inv = spd_inverse(parts.D22, "partition_matrix D22");
    const Matrix D11inv = spd_inverse(parts.D11, "partition_matrix D11");
    parts.D11_2 = parts.D11 - parts.D12 * D22inv * parts.D21;
    parts.D22_1 = parts.D22 - parts.D21 * D11inv * parts.D12;
    parts.D_sup22 = spd_inverse(parts.D22_1, "partition_matrix D22_1");
    return parts;
}

DesignPartitions compute_partitions(const PartitionedDesign& design) {
    const Index r = numerical_rank(design.X);
    if (r < design.p())
        throw singular_design_error("compute_partitions: rank-deficient design");
    const Matrix D =
        design.X.transpose() * design.X / static_cast<double>(design.n());
    return partition_matrix(D, design.p1, design.p2);
}

double hall_sheather_bandwidth(Index n, double tau, double alpha_level) {
    if (n < 10) throw insufficient_data_error("hall_sheather_bandwidth: n >= 10 required");
    const double z_a = norm_quantile(1.0 - alpha_level / 2.0);
    const double z_t = norm_quantile(tau);
    const double phi = norm_pdf(z_t);
    const double h = std::pow(static_cast<double>(n), -1.0 / 3.0) *
                     std::pow(z_a, 2.0 / 3.0) *
                     std::pow(1.5 * phi * phi / (2.0 * z_t * z_t + 1.0), 1.0 / 3.0);
    const double cap = std::min(tau, 1.0 - tau) / 2.0;
    return std::min(std::max(h, 1e-12), cap);
}

double estimate_sparsity(const Vector& residuals, double tau, Index n) {
    if (residuals.size() < 10 || n < 10)
        throw insufficient_data_error("estimate_sparsity: need at least 10 residuals");
    const double h = hall_sheather_bandwidth(n, tau);
    std::vector<double> sorted(residuals.data(), residuals.data() + residuals.size());
    std::sort(sorted.begin(), sorted.end());
    const double hi = interp_quantile(sorted, std::min(tau + h, 1.0 - 1e-12));
    const double lo = interp_quantile(sorted, std::max(tau - h, 1e-12));
    const double s = (hi - lo) / (2.0 * h);
    if (s <= 0.0)
        throw degenerate_error("estimate_sparsity: zero difference quotient (degenerate residuals)");
    return s;
}

WaldResult wald_statistic(const QuantileFit& fit, const DesignPartitions& parts, double w,
                          Index p1, Index p2, Index n, double alpha) {
    if (fit.beta.size() != p1 + p2)
        throw std::invalid_argument("wald_statistic: coefficient length != p1 + p2");
    if (!(w > 0.0)) throw std::domain_error("wald_statistic: w must be positive");
    WaldResult res;
    const Vector beta2 = fit.beta.tail(p2);
    // (D^22)^-1 = D22_1
    res.statistic = static_cast<double>(n) / (w * w) *
                    (beta2.transpose() * parts.D22_1 * beta2).value();
    res.dof = p2;
    res.w = w;
    res.alpha = alpha;
    res.critical_value = chisq_quantile(1.0 - alpha, static_cast<double>(p2));
    res.reject = res.statistic >= res.critical_value;
    return res;
}

} // namespace qrs
