#include "qrs/data_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "qrs/qr_solver.hpp"
#include "qrs/special.hpp"

namespace qrs {

namespace {

void run_parallel(int count, int threads, const std::function<void(int)>& body) {
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

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace and an optional CR
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        fields.push_back(first == std::string::npos
                             ? std::string()
                             : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

void validate_partition(const Dataset& data) {
    std::set<std::string> seen;
    for (const auto& col : data.partition_spec) {
        if (col == data.response_column)
            throw std::invalid_argument("partition column equals the response: " + col);
        if (std::find(data.column_names.begin(), data.column_names.end(), col) ==
            data.column_names.end())
            throw std::invalid_argument("unknown partition column: " + col);
        if (!seen.insert(col).second)
            throw std::invalid_argument("duplicate partition column: " + col);
    }
}

} // namespace

Dataset parse_csv(const std::string& text, const std::string& name,
                  const std::string& response_column,
                  const std::vector<std::string>& partition_spec) {
    std::stringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw std::invalid_argument(name + ": empty CSV, header row required");
    const std::vector<std::string> header = split_line(line);
    const auto resp_it = std::find(header.begin(), header.end(), response_column);
    if (resp_it == header.end())
        throw std::invalid_argument(name + ": missing response column '" +
                                    response_column + "'");
    const std::size_t resp_idx = static_cast<std::size_t>(resp_it - header.begin());

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> fields = split_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument(name + ": row " + std::to_string(lineno) +
                                        " has " + std::to_string(fields.size()) +
                                        " fields, expected " +
                                        std::to_string(header.size()));
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            std::size_t used = 0;
            try {
                row[j] = std::stod(fields[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != fields[j].size() || fields[j].empty())
                throw std::invalid_argument(name + ": non-numeric cell at row " +
                                            std::to_string(lineno) + ", column '" +
                                            header[j] + "'");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw insufficient_data_error(name + ": no data rows");

    Dataset data;
    data.name = name;
    data.response_column = response_column;
    data.partition_spec = partition_spec;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != resp_idx) data.column_names.push_back(header[j]);
    const Index n = static_cast<Index>(rows.size());
    const Index p = static_cast<Index>(header.size()) - 1;
    data.X.resize(n, p);
    data.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        Index k = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == resp_idx)
                data.y(i) = rows[static_cast<std::size_t>(i)][j];
            else
                data.X(i, k++) = rows[static_cast<std::size_t>(i)][j];
        }
    }
    validate_partition(data);
    return data;
}

Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& partition_spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open CSV file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path, response_column, partition_spec);
}

StandardizeResult standardize(const Dataset& data) {
    const Index n = data.X.rows(), p = data.X.cols();
    if (n < 2) throw insufficient_data_error("standardize: need at least 2 rows");
    StandardizeResult out;
    out.data = data;
    out.scaling.means.resize(p);
    out.scaling.scales.resize(p);
    for (Index j = 0; j < p; ++j) {
        const double mean = data.X.col(j).mean();
        const double var =
            (data.X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
        if (var <= 0.0)
            throw degenerate_error("standardize: constant column '" +
                                   data.column_names[static_cast<std::size_t>(j)] + "'");
        const double sd = std::sqrt(var);
        out.scaling.means(j) = mean;
        out.scaling.scales(j) = sd;
        out.data.X.col(j) = (data.X.col(j).array() - mean) / sd;
    }
    return out;
}

Vector back_transform(const Vector& beta_with_intercept, const ScalingRecord& scaling) {
    const Index p = scaling.means.size();
    if (beta_with_intercept.size() != p + 1)
        throw std::invalid_argument("back_transform: expected intercept plus " +
                                    std::to_string(p) + " slopes");
    Vector raw(p + 1);
    raw(0) = beta_with_intercept(0);
    for (Index j = 0; j < p; ++j) {
        raw(j + 1) = beta_with_intercept(j + 1) / scaling.scales(j);
        raw(0) -= raw(j + 1) * scaling.means(j);
    }
    return raw;
}

double condition_ratio(const Matrix& X) {
    if (X.rows() < X.cols())
        throw insufficient_data_error("condition_ratio: fewer rows than columns");
    const Matrix gram = X.transpose() * X;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector evals = eig.eigenvalues();
    const double lmax = evals(evals.size() - 1);
    const double lmin = evals(0);
    if (lmin <= lmax * std::numeric_limits<double>::epsilon() * X.rows())
        throw singular_design_error("condition_ratio: singular cross-product");
    return lmax / lmin;
}

DiagnosticsReport outlier_test(const Dataset& data) {
    const Index n = data.X.rows(), p = data.X.cols();
    if (n <= p + 2)
        throw insufficient_data_error("outlier_test: need n > p + 2 for studentization");
    Matrix Z(n, p + 1);
    Z.col(0).setOnes();
    Z.rightCols(p) = data.X;
    const auto qr = Z.colPivHouseholderQr();
    if (qr.rank() < p + 1)
        throw singular_design_error("outlier_test: rank-deficient design");
    const Vector beta = qr.solve(data.y);
    const Vector resid = data.y - Z * beta;
    const Matrix gram_inv = (Z.transpose() * Z).llt().solve(Matrix::Identity(p + 1, p + 1));
    const double rss = resid.squaredNorm();
    const double dof = static_cast<double>(n - p - 2);  // external studentization

    DiagnosticsReport report;
    report.condition_ratio = condition_ratio(data.X);
    report.studentized_residuals.resize(n);
    report.bonferroni_p.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double h = (Z.row(i) * gram_inv * Z.row(i).transpose())(0);
        const double leave_out_ss = rss - resid(i) * resid(i) / (1.0 - h);
        const double s_i = std::sqrt(std::max(leave_out_ss, 0.0) / dof);
        const double t = s_i > 0.0 ? resid(i) / (s_i * std::sqrt(1.0 - h))
                                   : std::numeric_limits<double>::infinity();
        report.studentized_residuals(i) = t;
        const double pval = 2.0 * (1.0 - student_t_cdf(std::abs(t), dof));
        report.bonferroni_p(i) = std::min(1.0, pval * static_cast<double>(n));
        if (report.bonferroni_p(i) < 0.05) report.outlier_indices.push_back(i);
    }
    return report;
}

PartitionedDesign to_design(const Dataset& data, double tau) {
    validate_partition(data);
    const Index n = data.X.rows();
    std::vector<Index> retained, tested;
    for (std::size_t j = 0; j < data.column_names.size(); ++j) {
        const bool in_partition =
            std::find(data.partition_spec.begin(), data.partition_spec.end(),
                      data.column_names[j]) != data.partition_spec.end();
        (in_partition ? tested : retained).push_back(static_cast<Index>(j));
    }
    Matrix Z(n, data.X.cols() + 1);
    Z.col(0).setOnes();
    Index k = 1;
    for (Index j : retained) Z.col(k++) = data.X.col(j);
    for (Index j : tested) Z.col(k++) = data.X.col(j);
    return make_design(Z, data.y, tau, static_cast<Index>(retained.size()) + 1,
                       static_cast<Index>(tested.size()));
}

MetricsTable real_data_study(const Dataset& data, const std::vector<double>& tau_grid,
                             int bootstrap_reps, std::uint64_t seed,
                             const std::vector<double>& pretest_alphas, int threads) {
    if (bootstrap_reps < 1)
        throw std::invalid_argument("real_data_study: bootstrap_reps >= 1 required");
    for (double tau : tau_grid)
        if (!(tau > 0.0 && tau < 1.0))
            throw std::domain_error("real_data_study: tau must lie in (0, 1)");
    validate_partition(data);
    const Index n = data.X.rows();
    const Index n_train = n / 2;
    const Index n_test = n - n_train;
    const Index p2 = static_cast<Index>(data.partition_spec.size());

    std::vector<std::string> estimators = {"FM", "SM"};
    for (std::size_t a = 0; a < pretest_alphas.size(); ++a)
        estimators.push_back("PT" + std::to_string(a + 1));
    if (p2 >= 3) {
        estimators.emplace_back("S");
        estimators.emplace_back("PS");
    }
    const std::size_t per_rep = tau_grid.size() * estimators.size() + 1;  // + LSE

    std::vector<std::vector<double>> results(static_cast<std::size_t>(bootstrap_reps));
    const PartitionedDesign whole = to_design(data, 0.5);

    run_parallel(bootstrap_reps, threads, [&](int rep) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(rep));
        auto resample = [&](Index count) {
            std::vector<Index> idx(static_cast<std::size_t>(count));
            for (auto& i : idx)
                i = std::min<Index>(n - 1, static_cast<Index>(rng.uniform() * n));
            return idx;
        };
        const std::vector<Index> train_idx = resample(n_train);
        const std::vector<Index> test_idx = resample(n_test);
        Matrix Z_tr(n_train, whole.X.cols()), Z_te(n_test, whole.X.cols());
        Vector y_tr(n_train), y_te(n_test);
        for (Index i = 0; i < n_train; ++i) {
            Z_tr.row(i) = whole.X.row(train_idx[static_cast<std::size_t>(i)]);
            y_tr(i) = whole.y(train_idx[static_cast<std::size_t>(i)]);
        }
        for (Index i = 0; i < n_test; ++i) {
            Z_te.row(i) = whole.X.row(test_idx[static_cast<std::size_t>(i)]);
            y_te(i) = whole.y(test_idx[static_cast<std::size_t>(i)]);
        }

        std::vector<double> row;
        row.reserve(per_rep);
        auto test_mad = [&](const Vector& beta_full) {
            return (y_te - Z_te * beta_full).cwiseAbs().mean();
        };
        try {
            for (double tau : tau_grid) {
                PartitionedDesign design =
                    make_design(Z_tr, y_tr, tau, whole.p1, whole.p2);
                const QuantileFit fm = fit_full(design);
                const QuantileFit sm = fit_submodel(design);
                const DesignPartitions parts = compute_partitions(design);
                const double s = estimate_sparsity(fm.residuals, tau, design.n());
                const double w = std::sqrt(tau * (1.0 - tau)) * s;
                const WaldResult wald = wald_statistic(fm, parts, w, design.p1,
                                                       design.p2, design.n(), 0.05);
                row.push_back(test_mad(fm.beta));
                row.push_back(test_mad(sm.beta));
                const Vector fm1 = fm.beta.head(design.p1);
                const Vector sm1 = sm.beta.head(design.p1);
                auto assemble = [&](const Vector& b1) {
                    Vector full = Vector::Zero(whole.X.cols());
                    full.head(design.p1) = b1;
                    return full;
                };
                for (double alpha : pretest_alphas) {
                    const double crit =
                        chisq_quantile(1.0 - alpha, static_cast<double>(design.p2));
                    row.push_back(
                        test_mad(wald.statistic < crit ? sm.beta : fm.beta));
                }
                if (p2 >= 3) {
                    const Vector s1 = wald.statistic > 0.0
                                          ? stein(fm1, sm1, wald.statistic, design.p2)
                                          : sm1;
                    row.push_back(test_mad(assemble(s1)));
                    row.push_back(test_mad(assemble(
                        positive_stein(fm1, sm1, wald.statistic, design.p2))));
                }
            }
            PartitionedDesign lsd = make_design(Z_tr, y_tr, 0.5, whole.p1, whole.p2);
            row.push_back(test_mad(ls_fit(lsd).beta));
        } catch (const std::exception& e) {
            throw std::runtime_error("real_data_study replicate " +
                                     std::to_string(rep) + ": " + e.what());
        }
        results[static_cast<std::size_t>(rep)] = std::move(row);
    });

    MetricsTable table;
    table.metric = "MAD";
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
        r.value = mean;
        r.se = std::sqrt(var / vals.size());
        table.rows.push_back(std::move(r));
    };
    for (double tau : tau_grid)
        for (const auto& name : estimators) aggregate(tau, name);
    aggregate(std::numeric_limits<double>::quiet_NaN(), "LSE");
    return table;
}

} // namespace qrs
