#include "qrs/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "qrs/qr_solver.hpp"
#include "qrs/special.hpp"

namespace qrs {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double median_of(std::vector<double> v) {
    if (v.empty()) throw degenerate_error("median of empty sample");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lo);
    }
    return m;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

ErrorDist error_dist_from_string(const std::string& name) {
    if (name == "normal") return ErrorDist::normal;
    if (name == "chisq5") return ErrorDist::chisq5;
    if (name == "t2") return ErrorDist::t2;
    if (name == "laplace") return ErrorDist::laplace;
    if (name == "lognormal") return ErrorDist::lognormal;
    if (name == "skew_normal") return ErrorDist::skew_normal;
    throw std::invalid_argument("unknown error distribution: " + name);
}

std::string to_string(ErrorDist dist) {
    switch (dist) {
        case ErrorDist::normal: return "normal";
        case ErrorDist::chisq5: return "chisq5";
        case ErrorDist::t2: return "t2";
        case ErrorDist::laplace: return "laplace";
        case ErrorDist::lognormal: return "lognormal";
        case ErrorDist::skew_normal: return "skew_normal";
    }
    return "unknown";
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t r) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(r * 0x9e3779b97f4a7c15ULL + 1)));
}

double Rng::uniform() {
    // 53-bit mantissa draw in the open interval
    const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return u;
}

double Rng::normal() { return norm_quantile(uniform()); }

double Rng::chisq(int dof) {
    double s = 0.0;
    for (int i = 0; i < dof; ++i) {
        const double z = normal();
        s += z * z;
    }
    return s;
}

double Rng::student_t2() { return normal() / std::sqrt(chisq(2) / 2.0); }

double Rng::laplace() {
    const double u = uniform();
    return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

double Rng::lognormal() { return std::exp(normal()); }

double Rng::skew_normal(double shape) {
    const double d = shape / std::sqrt(1.0 + shape * shape);
    const double z0 = normal(), z1 = normal();
    return d * std::abs(z0) + std::sqrt(1.0 - d * d) * z1;
}

Matrix generate_design(Index n, Index p, double rho, Rng& rng) {
    if (std::abs(rho) >= 1.0)
        throw std::domain_error("generate_design: |rho| < 1 required");
    Matrix sigma(p, p);
    for (Index j = 0; j < p; ++j)
        for (Index k = 0; k < p; ++k)
            sigma(j, k) = std::pow(rho, std::abs(static_cast<double>(j - k)));
    const Matrix chol = sigma.llt().matrixL();
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i) {
        Vector z(p);
        for (Index j = 0; j < p; ++j) z(j) = rng.normal();
        X.row(i) = (chol * z).transpose();
    }
    return X;
}

Vector sample_errors(ErrorDist dist, Index n, Rng& rng, double skew_shape) {
    Vector e(n);
    for (Index i = 0; i < n; ++i) {
        switch (dist) {
            case ErrorDist::normal: e(i) = rng.normal(); break;
            case ErrorDist::chisq5: e(i) = rng.chisq(5); break;
            case ErrorDist::t2: e(i) = rng.student_t2(); break;
            case ErrorDist::laplace: e(i) = rng.laplace(); break;
            case ErrorDist::lognormal: e(i) = rng.lognormal(); break;
            case ErrorDist::skew_normal: e(i) = rng.skew_normal(skew_shape); break;
        }
    }
    return e;
}

Vector make_coefficients(Index p1, Index p2, double delta_star) {
    Vector beta = Vector::Zero(p1 + p2);
    beta.head(p1).setOnes();
    if (delta_star > 0.0 && p2 > 0) beta(p1) = delta_star;
    return beta;
}

double model_error(const Vector& beta_hat, const Vector& beta_true) {
    if (beta_hat.size() != beta_true.size())
        throw std::invalid_argument("model_error: length mismatch");
    return (beta_hat - beta_true).squaredNorm();
}

double mrme(const std::vector<double>& me_fm_samples,
            const std::vector<double>& me_star_samples) {
    if (me_fm_samples.size() != me_star_samples.size() || me_fm_samples.empty())
        throw std::invalid_argument("mrme: replication counts must match and be >= 1");
    const double denom = median_of(me_star_samples);
    if (denom == 0.0) throw degenerate_error("mrme: zero median model error");
    return median_of(me_fm_samples) / denom;
}

double pmad(const Vector& beta_hat, const Matrix& X_test, const Vector& y_test) {
    if (X_test.cols() != beta_hat.size() || X_test.rows() != y_test.size())
        throw std::invalid_argument("pmad: shape mismatch");
    return (y_test - X_test * beta_hat).cwiseAbs().mean();
}

namespace {

Matrix with_intercept(const Matrix& X) {
    Matrix Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    return Z;
}

struct StudyKeys {
    std::vector<std::string> estimators;  // per-tau estimator list
};

StudyKeys study_keys(const SimConfig& cfg) {
    StudyKeys keys;
    keys.estimators = {"FM", "SM"};
    for (std::size_t a = 0; a < cfg.pretest_alphas.size(); ++a)
        keys.estimators.push_back("PT" + std::to_string(a + 1));
    if (cfg.p2 >= 3) {
        keys.estimators.emplace_back("S");
        keys.estimators.emplace_back("PS");
    }
    keys.estimators.emplace_back("Ridge");
    keys.estimators.emplace_back("Lasso");
    keys.estimators.emplace_back("ENET");
    return keys;
}

double coefficient_mad(const Vector& beta_hat, const Vector& beta_true) {
    return (beta_hat - beta_true).cwiseAbs().mean();
}

} // namespace

MetricsTable run_study(const SimConfig& cfg) {
    if (cfg.replications < 1)
        throw std::invalid_argument("run_study: replications >= 1 required");
    const SplitSpec split = cfg.split.value_or(SplitSpec{50, 50, 200});
    if (split.train <= 0 || split.validation <= 0 || split.test <= 0)
        throw std::invalid_argument("run_study: split counts must be positive");
    const Index p = cfg.p1 + cfg.p2;
    const Vector beta_true =
        cfg.beta ? *cfg.beta : make_coefficients(cfg.p1, cfg.p2, cfg.delta_star);
    if (beta_true.size() != p)
        throw std::invalid_argument("run_study: beta length must equal p1 + p2");
    const bool predictive = cfg.metric == "pmad";

    const StudyKeys keys = study_keys(cfg);
    const std::size_t n_tau = cfg.tau_levels.size();
    const std::size_t per_rep = n_tau * keys.estimators.size() + 1;  // + OLS

    std::vector<std::vector<double>> results(
        static_cast<std::size_t>(cfg.replications));

    parallel_for(cfg.replications, cfg.threads, [&](int rep) {
        Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(rep));
        auto draw = [&](Index n) {
            Matrix X = generate_design(n, p, cfg.rho, rng);
            Vector e = sample_errors(cfg.error_dist, n, rng, cfg.skew_shape);
            Vector y = X * beta_true + cfg.sigma * e;
            return std::pair<Matrix, Vector>{std::move(X), std::move(y)};
        };
        auto [X_tr, y_tr] = draw(split.train);
        auto [X_va, y_va] = draw(split.validation);
        auto [X_te, y_te] = draw(split.test);

        const Matrix Z_tr = with_intercept(X_tr);
        const Matrix Z_va = with_intercept(X_va);
        const Matrix Z_te = with_intercept(X_te);

        auto score = [&](const Vector& beta_no_intercept, const Vector& full_with_intercept) {
            return predictive ? pmad(full_with_intercept, Z_te, y_te)
                              : coefficient_mad(beta_no_intercept, beta_true);
        };

        std::vector<double> row;
        row.reserve(per_rep);

        for (double tau : cfg.tau_levels) {
            PartitionedDesign design =
                make_design(Z_tr, y_tr, tau, cfg.p1 + 1, cfg.p2);
            const QuantileFit fm = fit_full(design);
            const QuantileFit sm = fit_submodel(design);
            const DesignPartitions parts = compute_partitions(design);
            const double s = estimate_sparsity(fm.residuals, tau, design.n());
            const double w = std::sqrt(tau * (1.0 - tau)) * s;

            const Vector fm1 = fm.beta.head(design.p1);
            const Vector sm1 = sm.beta.head(design.p1);
            auto assemble = [&](const Vector& b1) {
                Vector full = Vector::Zero(p + 1);
                full.head(design.p1) = b1;
                return full;
            };
            auto strip = [&](const Vector& full) { return full.tail(p).eval(); };

            row.push_back(score(strip(fm.beta), fm.beta));
            row.push_back(score(strip(sm.beta), sm.beta));
            const WaldResult base_wald =
                wald_statistic(fm, parts, w, design.p1, design.p2, design.n(), 0.05);
            for (double alpha : cfg.pretest_alphas) {
                WaldResult wa = base_wald;
                wa.alpha = alpha;
                wa.critical_value =
                    chisq_quantile(1.0 - alpha, static_cast<double>(design.p2));
                wa.reject = wa.statistic >= wa.critical_value;
                const Vector pt1 = pretest(fm1, sm1, wa);
                const Vector full = assemble(pt1);
                row.push_back(score(strip(full), full));
            }
            if (cfg.p2 >= 3) {
                const Vector s1 = base_wald.statistic > 0.0
                                      ? stein(fm1, sm1, base_wald.statistic, design.p2)
                                      : sm1;
                const Vector ps1 =
                    positive_stein(fm1, sm1, base_wald.statistic, design.p2);
                const Vector sfull = assemble(s1);
                const Vector psfull = assemble(ps1);
                row.push_back(score(strip(sfull), sfull));
                row.push_back(score(strip(psfull), psfull));
            }

            // Penalized competitors, lambda tuned by validation prediction
            // error. ENET additionally tunes its mixing (including 1, so it
            // nests the lasso candidate set).
            Vector best_beta;
            double best_val = std::numeric_limits<double>::infinity();
            auto tune = [&](double mix, double margin) {
                const Vector grid = default_lambda_grid(design, mix, cfg.n_lambda);
                const PenaltyPath path = fit_penalized(design, mix, grid);
                for (Index k = 0; k < path.lambdas.size(); ++k) {
                    const double v = pmad(path.betas.row(k).transpose(), Z_va, y_va);
                    if (v < best_val * (1.0 - margin)) {
                        best_val = v;
                        best_beta = path.betas.row(k).transpose();
                    }
                }
            };
            auto flush = [&] {
                row.push_back(score(strip(best_beta), best_beta));
            };
            tune(0.0, 0.0);  // Ridge
            flush();
            best_val = std::numeric_limits<double>::infinity();
            tune(1.0, 0.0);  // Lasso
            flush();
            // ENET: keep the lasso candidate in the pool and let interior
            // mixes displace it only on a clear validation win, so noise in
            // the small validation split cannot select a worse mixing.
            tune(0.5, 0.02);
            tune(0.75, 0.02);
            flush();
        }

        // OLS baseline, tau-independent
        PartitionedDesign lsd = make_design(Z_tr, y_tr, 0.5, cfg.p1 + 1, cfg.p2);
        const QuantileFit ols = ls_fit(lsd);
        row.push_back(predictive ? pmad(ols.beta, Z_te, y_te)
                                 : coefficient_mad(ols.beta.tail(p), beta_true));

        results[static_cast<std::size_t>(rep)] = std::move(row);
    });

    MetricsTable table;
    table.metric = predictive ? "PMAD" : "MAD";
    const bool use_median = cfg.aggregate == "median";
    std::size_t col = 0;
    auto aggregate = [&](double tau, const std::string& name) {
        std::vector<double> vals;
        vals.reserve(results.size());
        for (const auto& r : results) vals.push_back(r.at(col));
        ++col;
        const double mean =
            std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var = vals.size() > 1 ? var / (vals.size() - 1) : 0.0;
        MetricRow r;
        r.tau = tau;
        r.estimator = name;
        r.value = use_median ? median_of(vals) : mean;
        r.se = std::sqrt(var / vals.size());
        table.rows.push_back(std::move(r));
    };
    for (double tau : cfg.tau_levels)
        for (const auto& name : keys.estimators) aggregate(tau, name);
    aggregate(std::numeric_limits<double>::quiet_NaN(), "OLS");
    return table;
}

MetricsTable mrme_sweep(const SimConfig& base, const std::vector<double>& delta_grid) {
    if (delta_grid.empty() || delta_grid.front() != 0.0)
        throw std::invalid_argument("mrme_sweep: grid must start at 0");
    for (std::size_t i = 0; i + 1 < delta_grid.size(); ++i)
        if (delta_grid[i] > delta_grid[i + 1])
            throw std::invalid_argument("mrme_sweep: grid must be sorted ascending");

    std::vector<std::string> estimators = {"SM"};
    for (std::size_t a = 0; a < base.pretest_alphas.size(); ++a)
        estimators.push_back("PT" + std::to_string(a + 1));
    if (base.p2 >= 3) {
        estimators.emplace_back("S");
        estimators.emplace_back("PS");
    }

    MetricsTable table;
    table.metric = "MRME";
    const Index p = base.p1 + base.p2;

    for (std::size_t gi = 0; gi < delta_grid.size(); ++gi) {
        const double dstar = delta_grid[gi];
        const Vector beta_true = make_coefficients(base.p1, base.p2, dstar);
        for (double tau : base.tau_levels) {
            // me[estimator][rep]
            std::vector<std::vector<double>> me(estimators.size() + 1,
                                                std::vector<double>(base.replications));
            parallel_for(base.replications, base.threads, [&](int rep) {
                Rng rng = Rng::substream(
                    base.seed ^ (0x5151u + gi), static_cast<std::uint64_t>(rep));
                const Matrix X = generate_design(base.n, p, base.rho, rng);
                const Vector e =
                    sample_errors(base.error_dist, base.n, rng, base.skew_shape);
                const Vector y = X * beta_true + base.sigma * e;
                PartitionedDesign design =
                    make_design(with_intercept(X), y, tau, base.p1 + 1, base.p2);
                const QuantileFit fm = fit_full(design);
                const QuantileFit sm = fit_submodel(design);
                const DesignPartitions parts = compute_partitions(design);
                const double sp = estimate_sparsity(fm.residuals, tau, design.n());
                const double w = std::sqrt(tau * (1.0 - tau)) * sp;
                const WaldResult wald =
                    wald_statistic(fm, parts, w, design.p1, design.p2, design.n(), 0.05);
                // beta1 block excluding the intercept
                const Vector truth1 = beta_true.head(base.p1);
                auto me1 = [&](const Vector& b1_with_icpt) {
                    return model_error(b1_with_icpt.tail(base.p1), truth1);
                };
                const Vector fm1 = fm.beta.head(design.p1);
                const Vector sm1 = sm.beta.head(design.p1);
                me[0][static_cast<std::size_t>(rep)] = me1(fm1);  // FM reference
                std::size_t slot = 1;
                me[slot++][static_cast<std::size_t>(rep)] = me1(sm1);
                for (double alpha : base.pretest_alphas) {
                    WaldResult wa = wald;
                    wa.alpha = alpha;
                    wa.critical_value =
                        chisq_quantile(1.0 - alpha, static_cast<double>(design.p2));
                    me[slot++][static_cast<std::size_t>(rep)] =
                        me1(wald.statistic < wa.critical_value ? sm1 : fm1);
                }
                if (base.p2 >= 3) {
                    const Vector s1 = wald.statistic > 0.0
                                          ? stein(fm1, sm1, wald.statistic, design.p2)
                                          : sm1;
                    me[slot++][static_cast<std::size_t>(rep)] = me1(s1);
                    me[slot++][static_cast<std::size_t>(rep)] =
                        me1(positive_stein(fm1, sm1, wald.statistic, design.p2));
                }
            });
            MetricRow fm_row;
            fm_row.tau = tau;
            fm_row.estimator = "FM";
            fm_row.value = 1.0;
            fm_row.delta_star = dstar;
            table.rows.push_back(fm_row);
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                MetricRow r;
                r.tau = tau;
                r.estimator = estimators[e];
                r.value = mrme(me[0], me[e + 1]);
                r.delta_star = dstar;
                table.rows.push_back(std::move(r));
            }
        }
    }
    return table;
}

std::string to_csv(const MetricsTable& table) {
    std::ostringstream out;
    out << "tau,estimator,metric,value,se";
    const bool sweep = table.metric == "MRME";
    if (sweep) out << ",delta_star";
    out << "\n";
    out << std::setprecision(12);
    for (const auto& r : table.rows) {
        if (std::isnan(r.tau))
            out << "mean";
        else
            out << r.tau;
        out << "," << r.estimator << "," << table.metric << "," << r.value << "," << r.se;
        if (sweep) out << "," << r.delta_star;
        out << "\n";
    }
    return out.str();
}

std::string to_text(const MetricsTable& table) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "tau" << std::setw(10) << "estimator"
        << std::setw(8) << "metric" << std::right << std::setw(12) << "value"
        << std::setw(12) << "se";
    const bool sweep = table.metric == "MRME";
    if (sweep) out << std::setw(12) << "delta*";
    out << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& r : table.rows) {
        std::ostringstream tau;
        if (std::isnan(r.tau))
            tau << "mean";
        else
            tau << std::setprecision(2) << std::fixed << r.tau;
        out << std::left << std::setw(8) << tau.str() << std::setw(10) << r.estimator
            << std::setw(8) << table.metric << std::right << std::setw(12) << r.value
            << std::setw(12) << r.se;
        if (sweep) out << std::setw(12) << r.delta_star;
        out << "\n";
    }
    return out.str();
}

} // namespace qrs
