#pragma once

namespace qrs {

/// Lower regularized incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double inc_beta(double x, double a, double b);

/// Standard normal density and CDF.
double norm_pdf(double x);
double norm_cdf(double x);

/// Standard normal quantile (Newton-refined rational approximation).
double norm_quantile(double p);

/// Central chi-square CDF with v > 0 degrees of freedom.
double chisq_cdf(double x, double v);

/// Central chi-square upper-alpha quantile via bracketed root finding on the
/// regularized incomplete gamma: returns x with CDF(x; v) = p.
double chisq_quantile(double p, double v);

/// Student t CDF with v > 0 degrees of freedom.
double student_t_cdf(double x, double v);

} // namespace qrs
