#pragma once

#include <optional>
#include <vector>

#include "qrs/inference.hpp"

namespace qrs {

/// P(chi2_v(delta) <= x) by the Poisson-mixture series, truncated when the
/// Poisson tail drops below 1e-14.
double noncentral_chisq_cdf(double x, int v, double delta);

/// Noncentral chi-square density (same mixture representation).
double noncentral_chisq_pdf(double x, int v, double delta);

/// E[(chi2_v(delta))^-j] via the Poisson mixture of central inverse moments.
/// Requires v > 2j. In the source notation this is E[chi_v^{-2j}(delta)].
double inv_moment(int v, double delta, int j);

/// E[(chi2_v(delta))^-j 1{chi2_v(delta) < d}] by adaptive quadrature over
/// (0, d); the j = 0 case equals the CDF at d.
double truncated_inv_moment(int v, double delta, int j, double d);

/// Inputs for the closed-form bias/risk engine: the limit design blocks, the
/// scale w, the local-alternative direction kappa and the risk weight W.
struct AsymptoticScenario {
    DesignPartitions parts;
    double w = 1.0;
    Vector kappa;       // length p2
    Index p1 = 0;
    Index p2 = 0;
    double alpha = 0.05;
    Matrix weight;      // p1 x p1 positive definite

    // derived quantities
    Vector delta_vec() const;   // D11^-1 D12 kappa
    double noncentrality() const;  // kappa' D22_1 kappa / w^2
    Matrix phi() const;            // w^2 D11^-1 D12 D22_1^-1 D21 D11^-1
};

AsymptoticScenario make_scenario(DesignPartitions parts, double w, Vector kappa, Index p1,
                                 Index p2, double alpha = 0.05, Matrix weight = {});

/// Asymptotic bias vectors. FM is identically zero; S and PS require p2 >= 3.
struct BiasSet {
    Vector fm, sm, pt;
    std::optional<Vector> s, ps;
};

BiasSet bias_all(const AsymptoticScenario& scn);

/// Quadratic bias B' D11_2 B.
double quadratic_bias(const Vector& bias, const DesignPartitions& parts);

/// Two readings of the risk expressions: `corrected` fixes the sign and
/// covariance typos in the printed expansion (this is the default; it is the
/// only reading under which the risks coincide when D12 = 0 and the PS <= S
/// <= FM ordering holds), `as_printed` evaluates the printed lines verbatim.
enum class RiskFormulation { corrected, as_printed };

struct RiskSet {
    double fm = 0.0, sm = 0.0, pt = 0.0;
    std::optional<double> s, ps;
};

RiskSet risk_all(const AsymptoticScenario& scn,
                 RiskFormulation formulation = RiskFormulation::corrected);

/// Delta-grid sweep: kappa rescaled along a fixed unit direction so that the
/// induced noncentrality matches each grid point. Estimator column order is
/// FM, SM, PT, S, PS; S/PS columns are NaN when p2 < 3.
struct RiskCurve {
    Vector deltas;
    Matrix bias_norm;  // |grid| x 5
    Matrix qb;         // |grid| x 5
    Matrix risk;       // |grid| x 5
};

inline constexpr const char* kEstimatorNames[5] = {"FM", "SM", "PT", "S", "PS"};

RiskCurve risk_curve(const AsymptoticScenario& scn, const Vector& delta_grid,
                     RiskFormulation formulation = RiskFormulation::corrected);

} // namespace qrs
