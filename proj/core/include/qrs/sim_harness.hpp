#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qrs/shrinkage.hpp"

namespace qrs {

enum class ErrorDist { normal, chisq5, t2, laplace, lognormal, skew_normal };

ErrorDist error_dist_from_string(const std::string& name);
std::string to_string(ErrorDist dist);

/// Deterministic RNG with inverse-CDF draws so that streams depend only on
/// the seed, not on library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Substream for replication r: derived from (seed, r) only.
    static Rng substream(std::uint64_t seed, std::uint64_t r);

    double uniform();                 // (0, 1)
    double normal();
    double chisq(int dof);
    double student_t2();
    double laplace();
    double lognormal();
    double skew_normal(double shape = 5.0);

private:
    std::mt19937_64 engine_;
};

struct SplitSpec {
    Index train = 0, validation = 0, test = 0;
};

struct SimConfig {
    Index n = 60;
    Index p1 = 5;
    Index p2 = 5;
    double sigma = 1.0;
    std::vector<double> tau_levels = {0.25, 0.5, 0.75};
    ErrorDist error_dist = ErrorDist::normal;
    double delta_star = 0.0;
    int replications = 500;
    std::uint64_t seed = 1;
    std::optional<SplitSpec> split;
    std::optional<Vector> beta;     // overrides make_coefficients when present
    double rho = 0.5;               // design correlation 0.5^|j-k|
    std::vector<double> pretest_alphas = {0.01, 0.05, 0.10, 0.25};
    double skew_shape = 5.0;
    int n_lambda = 100;
    std::string metric = "mad";     // "mad" (coefficient MAD) or "pmad" (test-split MAD)
    std::string aggregate = "mean"; // "mean" or "median" central value
    int threads = 0;                // 0 = hardware concurrency
};

struct MetricRow {
    double tau = 0.0;               // NaN for tau-independent rows (OLS)
    std::string estimator;
    double value = 0.0;
    double se = 0.0;
    double delta_star = 0.0;        // used by mrme_sweep rows
};

struct MetricsTable {
    std::string metric;  // "ME", "MRME", "MAD", "PMAD"
    std::vector<MetricRow> rows;
};

/// Rows of mean-zero Gaussian vectors with covariance rho^|j-k| via the
/// Cholesky factor.
Matrix generate_design(Index n, Index p, double rho, Rng& rng);

Vector sample_errors(ErrorDist dist, Index n, Rng& rng, double skew_shape = 5.0);

/// (1,...,1, 0,...,0), with the first beta2 entry set to delta_star when
/// delta_star > 0, so that ||beta - beta0|| = delta_star.
Vector make_coefficients(Index p1, Index p2, double delta_star);

/// Squared Euclidean coefficient error.
double model_error(const Vector& beta_hat, const Vector& beta_true);

/// Ratio of median model errors: median(ME_FM) / median(ME_star).
double mrme(const std::vector<double>& me_fm_samples,
            const std::vector<double>& me_star_samples);

/// Mean absolute prediction error on a test set.
double pmad(const Vector& beta_hat, const Matrix& X_test, const Vector& y_test);

/// Train/validation/test Monte Carlo study (the comparison-table protocol):
/// FM/SM/PT/S/PS plus Ridge/Lasso/ENET paths tuned by validation prediction
/// error, and an OLS baseline, aggregated per (tau, estimator).
MetricsTable run_study(const SimConfig& config);

/// MRME versus delta_star sweep for SM/PT/S/PS (single-dataset protocol).
MetricsTable mrme_sweep(const SimConfig& base, const std::vector<double>& delta_grid);

/// CSV serialization (columns: tau, estimator, metric, value, se[, delta_star]).
std::string to_csv(const MetricsTable& table);
/// Human-readable aligned table.
std::string to_text(const MetricsTable& table);

} // namespace qrs
