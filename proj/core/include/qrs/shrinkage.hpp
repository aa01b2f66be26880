#pragma once

#include <optional>

#include "qrs/inference.hpp"
#include "qrs/qr_solver.hpp"

namespace qrs {

/// The five beta1 estimates plus the Wald decision that produced them.
/// S and PS require p2 >= 3 (d = p2 - 2 >= 1) and are absent otherwise.
struct ShrinkageSet {
    Vector beta1_fm;
    Vector beta1_sm;
    Vector beta1_pt;
    std::optional<Vector> beta1_s;
    std::optional<Vector> beta1_ps;
    WaldResult wald;
    Index d = 0;  // p2 - 2
    double alpha = 0.05;
};

/// Hard switch: sm when the Wald statistic is below its critical value, fm
/// otherwise. Output is bitwise one of the two inputs.
Vector pretest(const Vector& fm, const Vector& sm, const WaldResult& wald);

/// fm - (d / W) (fm - sm) with d = p2 - 2; can overshoot past sm when W < d.
Vector stein(const Vector& fm, const Vector& sm, double wald_stat, Index p2);

/// Positive-part Stein: sm + max(0, 1 - d/W) (fm - sm).
Vector positive_stein(const Vector& fm, const Vector& sm, double wald_stat, Index p2);

/// Full pipeline: FM and SM fits, sparsity/Wald, then all combinators.
/// When W = 0 exactly, S is defined by continuity as SM.
ShrinkageSet estimate_all(const PartitionedDesign& design, double alpha = 0.05,
                          const SolverOptions& options = {});

} // namespace qrs
