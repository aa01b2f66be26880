// Command-line front end for the quantile-regression shrinkage toolkit.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qrs/asymptotics.hpp"
#include "qrs/data_pipeline.hpp"
#include "qrs/qr_solver.hpp"
#include "qrs/shrinkage.hpp"
#include "qrs/sim_harness.hpp"

using nlohmann::json;
using namespace qrs;

namespace {

std::vector<double> parse_grid(const std::string& spec) {
    double start = 0, stop = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' ||
        step <= 0.0 || stop < start)
        throw std::invalid_argument("bad grid '" + spec + "', expected start:stop:step");
    std::vector<double> grid;
    for (double v = start; v <= stop + step / 2.0; v += step)
        grid.push_back(std::min(v, stop));
    return grid;
}

// Write output atomically: temp file in the target directory, then rename.
void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(out_path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << text;
    }
    fs::rename(tmp, target);
}

json table_to_json(const MetricsTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) {
        json row{{"estimator", r.estimator}, {"value", r.value}, {"se", r.se}};
        if (std::isnan(r.tau))
            row["tau"] = nullptr;
        else
            row["tau"] = r.tau;
        if (table.metric == "MRME") row["delta_star"] = r.delta_star;
        rows.push_back(std::move(row));
    }
    return json{{"metric", table.metric}, {"rows", rows}};
}

std::string render_table(const MetricsTable& table, const std::string& format) {
    if (format == "json") return table_to_json(table).dump(2) + "\n";
    if (format == "csv") return to_csv(table);
    return to_text(table);
}

std::string render_coefficients(const std::vector<std::string>& names, const Vector& beta,
                                const std::string& format, json extra = {}) {
    if (format == "json") {
        json coef = json::object();
        for (std::size_t j = 0; j < names.size(); ++j)
            coef[names[j]] = beta(static_cast<Index>(j));
        extra["coefficients"] = coef;
        return extra.dump(2) + "\n";
    }
    std::ostringstream out;
    if (format == "csv") {
        out << "name,value\n" << std::setprecision(12);
        for (std::size_t j = 0; j < names.size(); ++j)
            out << names[j] << "," << beta(static_cast<Index>(j)) << "\n";
    } else {
        out << std::left;
        for (std::size_t j = 0; j < names.size(); ++j)
            out << std::setw(16) << names[j] << std::setprecision(6) << std::fixed
                << beta(static_cast<Index>(j)) << "\n";
    }
    return out.str();
}

std::vector<std::string> design_names(const Dataset& data) {
    std::vector<std::string> names{"(intercept)"};
    for (const auto& c : data.column_names)
        if (std::find(data.partition_spec.begin(), data.partition_spec.end(), c) ==
            data.partition_spec.end())
            names.push_back(c);
    for (const auto& c : data.partition_spec) names.push_back(c);
    return names;
}

SimConfig config_from_json(const json& j) {
    SimConfig cfg;
    if (j.contains("n")) cfg.n = j["n"].get<Index>();
    if (j.contains("p1")) cfg.p1 = j["p1"].get<Index>();
    if (j.contains("p2")) cfg.p2 = j["p2"].get<Index>();
    if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
    if (j.contains("tau_levels")) cfg.tau_levels = j["tau_levels"].get<std::vector<double>>();
    if (j.contains("error_dist"))
        cfg.error_dist = error_dist_from_string(j["error_dist"].get<std::string>());
    if (j.contains("delta_star")) cfg.delta_star = j["delta_star"].get<double>();
    if (j.contains("replications")) cfg.replications = j["replications"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("split")) {
        SplitSpec s;
        s.train = j["split"].at("train").get<Index>();
        s.validation = j["split"].at("validation").get<Index>();
        s.test = j["split"].at("test").get<Index>();
        cfg.split = s;
    }
    if (j.contains("beta")) {
        const auto v = j["beta"].get<std::vector<double>>();
        cfg.beta = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
    if (j.contains("rho")) cfg.rho = j["rho"].get<double>();
    if (j.contains("pretest_alphas"))
        cfg.pretest_alphas = j["pretest_alphas"].get<std::vector<double>>();
    if (j.contains("skew_shape")) cfg.skew_shape = j["skew_shape"].get<double>();
    if (j.contains("n_lambda")) cfg.n_lambda = j["n_lambda"].get<int>();
    if (j.contains("metric")) cfg.metric = j["metric"].get<std::string>();
    if (j.contains("aggregate")) cfg.aggregate = j["aggregate"].get<std::string>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    return cfg;
}

SimConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config " + path);
    json j;
    f >> j;
    return config_from_json(j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile-regression pretest and Stein-type shrinkage toolkit"};
    app.require_subcommand(1);

    std::string input, response, out_path, format = "table", config_path, grid_spec;
    std::vector<std::string> partition;
    double tau = 0.5, alpha = 0.05, alpha_mix = 0.5, w_scale = 1.0, rho = 0.5;
    Index p1 = 5, p2 = 5;
    int n_lambda = 100, reps = -1, threads = 0;
    std::uint64_t seed = 1;
    bool submodel = false;
    std::vector<double> taus = {0.25, 0.5, 0.75};

    auto add_data_opts = [&](CLI::App* cmd, bool need_partition) {
        cmd->add_option("--input", input, "Input CSV with a header row")->required();
        cmd->add_option("--response", response, "Response column name")->required();
        auto* part = cmd->add_option("--partition", partition,
                                     "Columns in the tested (beta2) block");
        if (need_partition) part->required();
    };
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--format", format, "Output format")
            ->check(CLI::IsMember({"csv", "json", "table"}));
        cmd->add_option("--out", out_path, "Output file (default: stdout)");
    };

    auto* fit = app.add_subcommand("fit", "Fit a quantile regression");
    add_data_opts(fit, false);
    fit->add_option("--tau", tau, "Quantile level in (0,1)");
    fit->add_flag("--submodel", submodel, "Force the partition block to zero");
    add_common(fit);

    auto* test = app.add_subcommand("test", "Wald test of the partition block");
    add_data_opts(test, true);
    test->add_option("--tau", tau);
    test->add_option("--alpha", alpha, "Test level");
    add_common(test);

    auto* shrink = app.add_subcommand("shrink", "Pretest and Stein-type estimates");
    add_data_opts(shrink, true);
    shrink->add_option("--tau", tau);
    shrink->add_option("--alpha", alpha);
    add_common(shrink);

    auto* path_cmd = app.add_subcommand("path", "Penalized coefficient path");
    add_data_opts(path_cmd, false);
    path_cmd->add_option("--tau", tau);
    path_cmd->add_option("--alpha-mix", alpha_mix, "Elastic-net mixing in [0,1]");
    path_cmd->add_option("--n-lambda", n_lambda, "Grid size");
    add_common(path_cmd);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison study");
    simulate->add_option("--config", config_path, "JSON simulation config")->required();
    simulate->add_option("--reps", reps, "Override replication count");
    simulate->add_option("--seed", seed, "Override RNG seed")->capture_default_str();
    simulate->add_option("--threads", threads, "Worker threads (0 = all cores)");
    add_common(simulate);

    auto* sweep = app.add_subcommand("mrme-sweep", "Relative-efficiency sweep over delta*");
    sweep->add_option("--config", config_path, "JSON simulation config")->required();
    sweep->add_option("--grid", grid_spec, "delta* grid start:stop:step")->required();
    sweep->add_option("--reps", reps);
    sweep->add_option("--seed", seed)->capture_default_str();
    sweep->add_option("--threads", threads);
    add_common(sweep);

    auto* risk = app.add_subcommand("risk-curve", "Asymptotic risk versus noncentrality");
    risk->add_option("--p1", p1, "Retained block size")->required();
    risk->add_option("--p2", p2, "Tested block size")->required();
    risk->add_option("--alpha", alpha, "Pretest level");
    risk->add_option("--w", w_scale, "Scale w = sqrt(tau(1-tau)) s(tau)");
    risk->add_option("--rho", rho, "AR(1) correlation of the reference design");
    risk->add_option("--grid", grid_spec, "Delta grid start:stop:step")->required();
    add_common(risk);

    auto* analyze = app.add_subcommand("analyze", "Diagnostics plus bootstrap comparison");
    add_data_opts(analyze, true);
    analyze->add_option("--taus", taus, "Quantile levels");
    analyze->add_option("--reps", reps, "Bootstrap replicates");
    analyze->add_option("--seed", seed)->capture_default_str();
    analyze->add_option("--threads", threads);
    add_common(analyze);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (*fit) {
            Dataset data = load_csv(input, response, partition);
            PartitionedDesign design = to_design(data, tau);
            const QuantileFit f = submodel ? fit_submodel(design) : fit_full(design);
            json extra{{"tau", tau},
                       {"objective", f.objective},
                       {"iterations", f.iterations}};
            emit(out_path, render_coefficients(design_names(data), f.beta, format, extra));
        } else if (*test) {
            Dataset data = load_csv(input, response, partition);
            PartitionedDesign design = to_design(data, tau);
            const ShrinkageSet est = estimate_all(design, alpha);
            const WaldResult& wr = est.wald;
            if (format == "json") {
                emit(out_path, json{{"statistic", wr.statistic},
                                    {"dof", wr.dof},
                                    {"critical_value", wr.critical_value},
                                    {"alpha", wr.alpha},
                                    {"sparsity", wr.sparsity},
                                    {"w", wr.w},
                                    {"reject", wr.reject}}
                                       .dump(2) +
                                   "\n");
            } else {
                std::ostringstream o;
                o << std::setprecision(6) << std::fixed;
                if (format == "csv") {
                    o << "statistic,dof,critical_value,alpha,sparsity,w,reject\n"
                      << wr.statistic << "," << wr.dof << "," << wr.critical_value << ","
                      << wr.alpha << "," << wr.sparsity << "," << wr.w << ","
                      << (wr.reject ? 1 : 0) << "\n";
                } else {
                    o << "Wald statistic  " << wr.statistic << "\n"
                      << "dof             " << wr.dof << "\n"
                      << "critical value  " << wr.critical_value << " (alpha " << wr.alpha
                      << ")\n"
                      << "sparsity s(tau) " << wr.sparsity << "\n"
                      << "decision        " << (wr.reject ? "reject" : "keep") << "\n";
                }
                emit(out_path, o.str());
            }
        } else if (*shrink) {
            Dataset data = load_csv(input, response, partition);
            PartitionedDesign design = to_design(data, tau);
            const ShrinkageSet est = estimate_all(design, alpha);
            std::vector<std::string> names = design_names(data);
            names.resize(static_cast<std::size_t>(design.p1));  // beta1 block only
            std::ostringstream o;
            if (format == "json") {
                json j{{"wald", est.wald.statistic}, {"alpha", est.alpha}};
                auto put = [&](const char* key, const Vector& b) {
                    json coef = json::object();
                    for (std::size_t i = 0; i < names.size(); ++i)
                        coef[names[i]] = b(static_cast<Index>(i));
                    j[key] = coef;
                };
                put("FM", est.beta1_fm);
                put("SM", est.beta1_sm);
                put("PT", est.beta1_pt);
                if (est.beta1_s) put("S", *est.beta1_s);
                if (est.beta1_ps) put("PS", *est.beta1_ps);
                emit(out_path, j.dump(2) + "\n");
            } else {
                const char sep = format == "csv" ? ',' : ' ';
                o << std::setprecision(6) << std::fixed;
                o << "name" << sep << "FM" << sep << "SM" << sep << "PT";
                if (est.beta1_s) o << sep << "S" << sep << "PS";
                o << "\n";
                for (std::size_t i = 0; i < names.size(); ++i) {
                    const Index k = static_cast<Index>(i);
                    o << names[i] << sep << est.beta1_fm(k) << sep << est.beta1_sm(k)
                      << sep << est.beta1_pt(k);
                    if (est.beta1_s) o << sep << (*est.beta1_s)(k) << sep
                                       << (*est.beta1_ps)(k);
                    o << "\n";
                }
                emit(out_path, o.str());
            }
        } else if (*path_cmd) {
            Dataset data = load_csv(input, response, partition);
            PartitionedDesign design = to_design(data, tau);
            const Vector grid = default_lambda_grid(design, alpha_mix, n_lambda);
            const PenaltyPath pp = fit_penalized(design, alpha_mix, grid);
            const std::vector<std::string> names = design_names(data);
            if (format == "json") {
                json rows = json::array();
                for (Index k = 0; k < pp.lambdas.size(); ++k) {
                    json coef = json::object();
                    for (std::size_t j = 0; j < names.size(); ++j)
                        coef[names[j]] = pp.betas(k, static_cast<Index>(j));
                    rows.push_back(json{{"lambda", pp.lambdas(k)},
                                        {"loss", pp.losses(k)},
                                        {"coefficients", coef}});
                }
                emit(out_path,
                     json{{"alpha_mix", pp.alpha_mix}, {"path", rows}}.dump(2) + "\n");
            } else {
                std::ostringstream o;
                o << std::setprecision(10);
                o << "lambda,loss";
                for (const auto& nme : names) o << "," << nme;
                o << "\n";
                for (Index k = 0; k < pp.lambdas.size(); ++k) {
                    o << pp.lambdas(k) << "," << pp.losses(k);
                    for (Index j = 0; j < pp.betas.cols(); ++j) o << "," << pp.betas(k, j);
                    o << "\n";
                }
                emit(out_path, o.str());
            }
        } else if (*simulate) {
            SimConfig cfg = load_config(config_path);
            if (reps > 0) cfg.replications = reps;
            if (simulate->count("--seed") > 0) cfg.seed = seed;
            if (simulate->count("--threads") > 0) cfg.threads = threads;
            emit(out_path, render_table(run_study(cfg), format));
        } else if (*sweep) {
            SimConfig cfg = load_config(config_path);
            if (reps > 0) cfg.replications = reps;
            if (sweep->count("--seed") > 0) cfg.seed = seed;
            if (sweep->count("--threads") > 0) cfg.threads = threads;
            emit(out_path, render_table(mrme_sweep(cfg, parse_grid(grid_spec)), format));
        } else if (*risk) {
            const Index p = p1 + p2;
            Matrix D(p, p);
            for (Index i = 0; i < p; ++i)
                for (Index j = 0; j < p; ++j)
                    D(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
            Vector kappa = Vector::Zero(p2);
            kappa(0) = 1.0;
            AsymptoticScenario scn =
                make_scenario(partition_matrix(D, p1, p2), w_scale, kappa, p1, p2, alpha);
            const std::vector<double> grid = parse_grid(grid_spec);
            const RiskCurve curve = risk_curve(
                scn, Eigen::Map<const Vector>(grid.data(), static_cast<Index>(grid.size())));
            if (format == "json") {
                json rows = json::array();
                for (Index k = 0; k < curve.deltas.size(); ++k) {
                    json row{{"delta", curve.deltas(k)}};
                    for (int e = 0; e < 5; ++e) {
                        row[kEstimatorNames[static_cast<std::size_t>(e)]] =
                            json{{"risk", curve.risk(k, e)},
                                 {"bias_norm", curve.bias_norm(k, e)},
                                 {"quadratic_bias", curve.qb(k, e)}};
                    }
                    rows.push_back(std::move(row));
                }
                emit(out_path, json{{"alpha", alpha}, {"rows", rows}}.dump(2) + "\n");
            } else {
                std::ostringstream o;
                o << std::setprecision(10) << "delta";
                for (const auto& nme : kEstimatorNames) o << "," << nme;
                o << "\n";
                for (Index k = 0; k < curve.deltas.size(); ++k) {
                    o << curve.deltas(k);
                    for (int e = 0; e < 5; ++e) o << "," << curve.risk(k, e);
                    o << "\n";
                }
                emit(out_path, o.str());
            }
        } else if (*analyze) {
            Dataset data = load_csv(input, response, partition);
            const StandardizeResult std_data = standardize(data);
            const DiagnosticsReport diag = outlier_test(std_data.data);
            const int nreps = reps > 0 ? reps : 200;
            const MetricsTable table =
                real_data_study(std_data.data, taus, nreps, seed, {0.01, 0.05, 0.10, 0.25},
                                threads);
            if (format == "json") {
                json j{{"condition_ratio", diag.condition_ratio},
                       {"outlier_indices", diag.outlier_indices},
                       {"study", table_to_json(table)}};
                emit(out_path, j.dump(2) + "\n");
            } else {
                std::ostringstream o;
                o << "# condition_ratio," << std::setprecision(10) << diag.condition_ratio
                  << "\n# outliers";
                for (Index i : diag.outlier_indices) o << "," << i;
                o << "\n" << render_table(table, format);
                emit(out_path, o.str());
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error:input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error:compute: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
