#include "qrs/shrinkage.hpp"

#include <cmath>
#include <string>

namespace qrs {

Vector pretest(const Vector& fm, const Vector& sm, const WaldResult& wald) {
    if (fm.size() != sm.size())
        throw std::invalid_argument("pretest: fm and sm lengths differ");
    return wald.statistic < wald.critical_value ? sm : fm;
}

Vector stein(const Vector& fm, const Vector& sm, double wald_stat, Index p2) {
    if (fm.size() != sm.size())
        throw std::invalid_argument("stein: fm and sm lengths differ");
    if (p2 < 3)
        throw std::domain_error("stein: p2 >= 3 required so that d = p2 - 2 >= 1");
    if (!(wald_stat > 0.0))
        throw std::domain_error("stein: Wald statistic must be positive (take the SM branch at 0)");
    const double d = static_cast<double>(p2 - 2);
    return fm - (d / wald_stat) * (fm - sm);
}

Vector positive_stein(const Vector& fm, const Vector& sm, double wald_stat, Index p2) {
    if (fm.size() != sm.size())
        throw std::invalid_argument("positive_stein: fm and sm lengths differ");
    if (p2 < 3)
        throw std::domain_error("positive_stein: p2 >= 3 required so that d = p2 - 2 >= 1");
    if (wald_stat < 0.0)
        throw std::domain_error("positive_stein: Wald statistic must be nonnegative");
    const double d = static_cast<double>(p2 - 2);
    if (wald_stat <= d) return sm;
    return sm + (1.0 - d / wald_stat) * (fm - sm);
}

ShrinkageSet estimate_all(const PartitionedDesign& design, double alpha,
                          const SolverOptions& options) {
    ShrinkageSet set;
    set.alpha = alpha;
    set.d = design.p2 - 2;

    QuantileFit fm, sm;
    try {
        fm = fit_full(design, options);
    } catch (const std::exception& e) {
        throw non_convergence_error(std::string("estimate_all [full fit]: ") + e.what());
    }
    try {
        sm = fit_submodel(design, options);
    } catch (const std::exception& e) {
        throw non_convergence_error(std::string("estimate_all [sub-model fit]: ") + e.what());
    }

    DesignPartitions parts;
    double w = 0.0;
    try {
        parts = compute_partitions(design);
        const double s = estimate_sparsity(fm.residuals, design.tau, design.n());
        w = std::sqrt(design.tau * (1.0 - design.tau)) * s;
        set.wald = wald_statistic(fm, parts, w, design.p1, design.p2, design.n(), alpha);
        set.wald.sparsity = s;
    } catch (const std::exception& e) {
        throw degenerate_error(std::string("estimate_all [inference]: ") + e.what());
    }

    set.beta1_fm = fm.beta.head(design.p1);
    set.beta1_sm = sm.beta.head(design.p1);
    set.beta1_pt = pretest(set.beta1_fm, set.beta1_sm, set.wald);
    if (design.p2 >= 3) {
        // W = 0 exactly: continuity convention, S collapses to SM
        set.beta1_s = set.wald.statistic > 0.0
                          ? stein(set.beta1_fm, set.beta1_sm, set.wald.statistic, design.p2)
                          : set.beta1_sm;
        set.beta1_ps =
            positive_stein(set.beta1_fm, set.beta1_sm, set.wald.statistic, design.p2);
    }
    return set;
}

} // namespace qrs
