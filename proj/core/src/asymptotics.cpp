#include "qrs/asymptotics.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "qrs/special.hpp"

namespace qrs {

namespace {

constexpr double kPoissonTail = 1e-14;
constexpr double kQuadTol = 1e-12;

double central_chisq_pdf(double x, double m) {
    if (x <= 0.0) return 0.0;
    const double half = 0.5 * m;
    return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * std::log(2.0) -
                    std::lgamma(half));
}

// Poisson(delta/2) mixture sweep: calls f(m, weight) for m = v, v+2, ...
// until the accumulated Poisson mass exceeds 1 - kPoissonTail.
void poisson_mixture(int v, double delta, const std::function<void(double, double)>& f) {
    const double lam = 0.5 * delta;
    double term = std::exp(-lam);
    double cum = 0.0;
    for (int k = 0; k < 100000; ++k) {
        f(static_cast<double>(v + 2 * k), term);
        cum += term;
        if (cum >= 1.0 - kPoissonTail) break;
        term *= lam / (k + 1);
    }
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 48);
}

} // namespace

double noncentral_chisq_cdf(double x, int v, double delta) {
    if (v < 1) throw std::domain_error("noncentral_chisq_cdf: v >= 1 required");
    if (delta < 0.0) throw std::domain_error("noncentral_chisq_cdf: negative noncentrality");
    if (x <= 0.0) return 0.0;
    double cdf = 0.0;
    poisson_mixture(v, delta,
                    [&](double m, double wk) { cdf += wk * chisq_cdf(x, m); });
    return std::min(cdf, 1.0);
}

double noncentral_chisq_pdf(double x, int v, double delta) {
    if (v < 1) throw std::domain_error("noncentral_chisq_pdf: v >= 1 required");
    if (delta < 0.0) throw std::domain_error("noncentral_chisq_pdf: negative noncentrality");
    if (x <= 0.0) return 0.0;
    double pdf = 0.0;
    poisson_mixture(v, delta,
                    [&](double m, double wk) { pdf += wk * central_chisq_pdf(x, m); });
    return pdf;
}

double inv_moment(int v, double delta, int j) {
    if (j < 1) throw std::domain_error("inv_moment: j >= 1 required");
    if (v <= 2 * j)
        throw std::domain_error("inv_moment: divergent, needs v > 2j (v = " +
                                std::to_string(v) + ", j = " + std::to_string(j) + ")");
    if (delta < 0.0) throw std::domain_error("inv_moment: negative noncentrality");
    double e = 0.0;
    poisson_mixture(v, delta, [&](double m, double wk) {
        // E[(chi2_m)^-j] = 2^-j Gamma(m/2 - j) / Gamma(m/2)
        e += wk * std::exp(-j * std::log(2.0) + std::lgamma(0.5 * m - j) -
                           std::lgamma(0.5 * m));
    });
    return e;
}

double truncated_inv_moment(int v, double delta, int j, double d) {
    if (j < 0 || j > 2) throw std::domain_error("truncated_inv_moment: j in {0,1,2}");
    if (j >= 1 && v <= 2 * j)
        throw std::domain_error("truncated_inv_moment: divergent, needs v > 2j");
    if (!(d > 0.0)) return 0.0;
    if (j == 0) return noncentral_chisq_cdf(d, v, delta);
    // substitute x = t^2 to tame the endpoint at 0
    auto g = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double x = t * t;
        return 2.0 * std::pow(t, 1.0 - 2.0 * j) * noncentral_chisq_pdf(x, v, delta);
    };
    // Piecewise with doubling breakpoints: when d dwarfs the bulk of the
    // distribution a single adaptive pass over [0, sqrt(d)] can sample only
    // the flat tails, miss the density bump entirely, and return 0.
    const double b = std::sqrt(d);
    double total = 0.0;
    double lo = 0.0;
    double step = std::min(1.0, b);
    while (lo < b) {
        const double hi = std::min(lo + step, b);
        total += integrate(g, lo, hi, kQuadTol);
        lo = hi;
        step *= 2.0;
    }
    return total;
}

Vector AsymptoticScenario::delta_vec() const {
    return parts.D11.llt().solve(parts.D12 * kappa);
}

double AsymptoticScenario::noncentrality() const {
    return (kappa.transpose() * parts.D22_1 * kappa).value() / (w * w);
}

Matrix AsymptoticScenario::phi() const {
    const Matrix D11inv = parts.D11.llt().solve(Matrix::Identity(p1, p1));
    return w * w * D11inv * parts.D12 * parts.D_sup22 * parts.D21 * D11inv;
}

AsymptoticScenario make_scenario(DesignPartitions parts, double w, Vector kappa, Index p1,
                                 Index p2, double alpha, Matrix weight) {
    if (kappa.size() != p2)
        throw std::invalid_argument("make_scenario: kappa length must be p2");
    if (!(w > 0.0)) throw std::domain_error("make_scenario: w must be positive");
    AsymptoticScenario scn;
    scn.parts = std::move(parts);
    scn.w = w;
    scn.kappa = std::move(kappa);
    scn.p1 = p1;
    scn.p2 = p2;
    scn.alpha = alpha;
    scn.weight = weight.size() == 0 ? Matrix::Identity(p1, p1) : std::move(weight);
    return scn;
}

BiasSet bias_all(const AsymptoticScenario& scn) {
    const int v2 = static_cast<int>(scn.p2) + 2;
    const double delta = scn.noncentrality();
    const Vector dv = scn.delta_vec();
    const double crit = chisq_quantile(1.0 - scn.alpha, static_cast<double>(scn.p2));

    BiasSet bias;
    bias.fm = Vector::Zero(scn.p1);
    bias.sm = dv;
    bias.pt = dv * noncentral_chisq_cdf(crit, v2, delta);
    if (scn.p2 >= 3) {
        const double d = static_cast<double>(scn.p2 - 2);
        const double e2 = inv_moment(v2, delta, 1);
        bias.s = d * e2 * dv;
        const double trunc = truncated_inv_moment(v2, delta, 1, d);
        bias.ps = dv * (d * e2 + noncentral_chisq_cdf(d, v2, delta) - d * trunc);
    }
    return bias;
}

double quadratic_bias(const Vector& bias, const DesignPartitions& parts) {
    return (bias.transpose() * parts.D11_2 * bias).value();
}

namespace {

RiskSet risk_corrected(const AsymptoticScenario& scn) {
    const Index p1 = scn.p1;
    const int p2 = static_cast<int>(scn.p2);
    const double w2 = scn.w * scn.w;
    const Matrix& W = scn.weight;
    const double delta = scn.noncentrality();
    const Vector dv = scn.delta_vec();
    const Matrix Phi = scn.phi();
    const double crit = chisq_quantile(1.0 - scn.alpha, static_cast<double>(p2));

    const Matrix D11_2_inv = scn.parts.D11_2.llt().solve(Matrix::Identity(p1, p1));
    const Matrix D11_inv = scn.parts.D11.llt().solve(Matrix::Identity(p1, p1));
    const double trWPhi = (W * Phi).trace();
    const double dWd = (dv.transpose() * W * dv).value();

    RiskSet risk;
    risk.fm = w2 * (W * D11_2_inv).trace();
    risk.sm = w2 * (W * D11_inv).trace() + dWd;

    const double h2 = noncentral_chisq_cdf(crit, p2 + 2, delta);
    const double h4 = noncentral_chisq_cdf(crit, p2 + 4, delta);
    risk.pt = risk.fm - trWPhi * h2 + dWd * (2.0 * h2 - h4);

    if (p2 >= 3) {
        const double d = static_cast<double>(p2 - 2);
        const double e2 = inv_moment(p2 + 2, delta, 1);
        const double e4 = inv_moment(p2 + 4, delta, 1);
        const double e2sq = inv_moment(p2 + 2, delta, 2);
        const double e4sq = inv_moment(p2 + 4, delta, 2);
        risk.s = risk.fm - 2.0 * d * trWPhi * e2 + 2.0 * d * dWd * (e2 - e4) +
                 d * d * trWPhi * e2sq + d * d * dWd * e4sq;

        // g_k = E[(1 - d/X) 1{X <= d}], h_k = E[(1 - d^2/X^2) 1{X <= d}],
        // X = chi2_{p2+k}(Delta)
        auto g = [&](int k) {
            return noncentral_chisq_cdf(d, p2 + k, delta) -
                   d * truncated_inv_moment(p2 + k, delta, 1, d);
        };
        auto h = [&](int k) {
            return noncentral_chisq_cdf(d, p2 + k, delta) -
                   d * d * truncated_inv_moment(p2 + k, delta, 2, d);
        };
        const double g2 = g(2), g4 = g(4), hh2 = h(2), hh4 = h(4);
        risk.ps = *risk.s - 2.0 * (trWPhi * g2 + dWd * (g4 - g2)) + trWPhi * hh2 + dWd * hh4;
    }
    return risk;
}

RiskSet risk_as_printed(const AsymptoticScenario& scn) {
    const Index p1 = scn.p1;
    const int p2 = static_cast<int>(scn.p2);
    const double w2 = scn.w * scn.w;
    const Matrix& W = scn.weight;
    const double delta = scn.noncentrality();
    const Vector dv = scn.delta_vec();
    const Matrix Phi = scn.phi();
    const double crit = chisq_quantile(1.0 - scn.alpha, static_cast<double>(p2));

    const Matrix D11_2_inv = scn.parts.D11_2.llt().solve(Matrix::Identity(p1, p1));
    const Matrix D11_inv = scn.parts.D11.llt().solve(Matrix::Identity(p1, p1));
    const Matrix Sigma21 = -w2 * D11_inv * scn.parts.D12 * scn.parts.D21;
    const Matrix PhiPinv = Phi.completeOrthogonalDecomposition().pseudoInverse();
    const double dWd = (dv.transpose() * W * dv).value();
    const double trWPhi = (W * Phi).trace();
    const double trWS21 = (W * Sigma21).trace();

    RiskSet risk;
    risk.fm = w2 * (W * D11_2_inv).trace();
    risk.sm = w2 * (W * D11_inv).trace() + dWd;

    const double H2c = noncentral_chisq_cdf(crit, p2 + 2, delta);
    const double H4c = noncentral_chisq_cdf(crit, p2 + 4, delta);
    const double cross = dv.size() == 0 ? 0.0
                                        : (W * dv * dv.transpose() * PhiPinv * Sigma21).trace();
    risk.pt = risk.fm + cross * (H4c + H2c) + trWPhi * H2c + dWd * H4c - 2.0 * trWS21 * H2c;

    if (p2 >= 3) {
        const double d = static_cast<double>(p2 - 2);
        const double e2 = inv_moment(p2 + 2, delta, 1);
        const double e4 = inv_moment(p2 + 4, delta, 1);
        const double crossS = (W * dv * dv.transpose() * Phi * Sigma21).trace();
        risk.s = risk.fm - 2.0 * d * trWS21 * e2 - 2.0 * d * crossS * e4 +
                 d * d * trWPhi * H2c + d * d * dWd * H4c;

        auto g = [&](int k) {
            return noncentral_chisq_cdf(d, p2 + k, delta) -
                   d * truncated_inv_moment(p2 + k, delta, 1, d);
        };
        const double t2sq = truncated_inv_moment(p2 + 2, delta, 2, d);
        const double crossP = (W * dv * dv.transpose() * PhiPinv * Sigma21).trace();
        risk.ps = *risk.s - 2.0 * trWS21 * g(2) + 2.0 * crossP * g(4) + 2.0 * crossP * g(2) -
                  d * d * trWPhi * t2sq - d * d * dWd * t2sq +
                  trWPhi * noncentral_chisq_cdf(d, p2 + 2, delta) +
                  dWd * noncentral_chisq_cdf(d, p2 + 4, delta);
    }
    return risk;
}

} // namespace

RiskSet risk_all(const AsymptoticScenario& scn, RiskFormulation formulation) {
    return formulation == RiskFormulation::corrected ? risk_corrected(scn)
                                                     : risk_as_printed(scn);
}

RiskCurve risk_curve(const AsymptoticScenario& scn, const Vector& delta_grid,
                     RiskFormulation formulation) {
    if (delta_grid.size() == 0)
        throw std::domain_error("risk_curve: empty delta grid");
    for (Index i = 0; i + 1 < delta_grid.size(); ++i)
        if (delta_grid(i) > delta_grid(i + 1))
            throw std::domain_error("risk_curve: grid must be sorted ascending");

    Vector dir = scn.kappa;
    if (dir.size() == 0 || dir.norm() == 0.0) {
        dir = Vector::Zero(scn.p2);
        dir(0) = 1.0;
    }
    dir.normalize();
    const double quad = (dir.transpose() * scn.parts.D22_1 * dir).value();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    RiskCurve curve;
    curve.deltas = delta_grid;
    curve.bias_norm = Matrix::Constant(delta_grid.size(), 5, nan);
    curve.qb = Matrix::Constant(delta_grid.size(), 5, nan);
    curve.risk = Matrix::Constant(delta_grid.size(), 5, nan);

    for (Index i = 0; i < delta_grid.size(); ++i) {
        AsymptoticScenario s = scn;
        // kappa' D22_1 kappa / w^2 = target
        s.kappa = dir * scn.w * std::sqrt(std::max(0.0, delta_grid(i)) / quad);
        const BiasSet bias = bias_all(s);
        const RiskSet risk = risk_all(s, formulation);
        const Vector* bvecs[5] = {&bias.fm, &bias.sm, &bias.pt,
                                  bias.s ? &*bias.s : nullptr,
                                  bias.ps ? &*bias.ps : nullptr};
        const double rvals[5] = {risk.fm, risk.sm, risk.pt, risk.s.value_or(nan),
                                 risk.ps.value_or(nan)};
        for (int e = 0; e < 5; ++e) {
            curve.risk(i, e) = rvals[e];
            if (bvecs[e]) {
                curve.bias_norm(i, e) = bvecs[e]->norm();
                curve.qb(i, e) = quadratic_bias(*bvecs[e], s.parts);
            }
        }
    }
    return curve;
}

} // namespace qrs
