#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrs/sim_harness.hpp"

namespace qrs {

/// A named numeric table with one response column and a declared set of
/// covariate columns forming the tested (beta2) block.
struct Dataset {
    std::string name;
    std::vector<std::string> column_names;  // covariates, response excluded
    Matrix X;
    Vector y;
    std::string response_column;
    std::vector<std::string> partition_spec;  // beta2 columns, subset of column_names
};

struct ScalingRecord {
    Vector means;
    Vector scales;  // sample standard deviations, n-1 denominator
};

struct StandardizeResult {
    Dataset data;
    ScalingRecord scaling;
};

struct DiagnosticsReport {
    double condition_ratio = 1.0;
    std::vector<Index> outlier_indices;
    Vector studentized_residuals;
    Vector bonferroni_p;
};

/// Headered numeric CSV ('.' decimal separator). The response column is
/// removed from X; partition columns must exist, be distinct and differ from
/// the response.
Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& partition_spec);

/// Variant reading from an in-memory CSV string (used by tests and stdin).
Dataset parse_csv(const std::string& text, const std::string& name,
                  const std::string& response_column,
                  const std::vector<std::string>& partition_spec);

/// Center and scale every covariate column to mean 0, variance 1
/// (n-1 denominator). Throws on constant columns, naming the offender.
StandardizeResult standardize(const Dataset& data);

/// Map coefficients fitted on [1, X_standardized] back to the raw scale.
Vector back_transform(const Vector& beta_with_intercept, const ScalingRecord& scaling);

/// lambda_max(X'X) / lambda_min(X'X) by symmetric eigendecomposition.
double condition_ratio(const Matrix& X);

/// Externally studentized least-squares residuals on [1, X], two-sided t
/// p-values, Bonferroni adjustment, flags below 0.05.
DiagnosticsReport outlier_test(const Dataset& data);

/// Design with intercept first, retained covariates next and the partition
/// (beta2) columns last.
PartitionedDesign to_design(const Dataset& data, double tau);

/// Row-bootstrap comparison: each replicate resamples n rows with
/// replacement, splits them into train/test halves, fits FM/SM/PT/S/PS at
/// each tau plus a least-squares baseline, and scores test-set mean absolute
/// prediction error. Deterministic under seed, independent of threads.
MetricsTable real_data_study(const Dataset& data, const std::vector<double>& tau_grid,
                             int bootstrap_reps, std::uint64_t seed,
                             const std::vector<double>& pretest_alphas = {0.01, 0.05,
                                                                          0.10, 0.25},
                             int threads = 0);

} // namespace qrs
