#include <doctest.h>

#include <cmath>
#include <string>

#include "qrs/data_pipeline.hpp"
#include "qrs/quantile_core.hpp"

using namespace qrs;

namespace {

const std::string kCsv =
    "a,b,c,y\n"
    "1,2,0.5,10\n"
    "2,4,1.5,20\n"
    "3,7,2.5,30\n"
    "4,1,5.0,25\n";  // c breaks affine dependence on a so [1, a, c] has full rank

Dataset synthetic(Index n, Index p, std::uint64_t seed, double outlier = 0.0) {
    Rng rng(seed);
    Dataset d;
    d.name = "synthetic";
    d.X = generate_design(n, p, 0.3, rng);
    Vector beta = Vector::Ones(p);
    d.y = d.X * beta + sample_errors(ErrorDist::normal, n, rng);
    if (outlier != 0.0) d.y(0) += outlier;
    d.response_column = "y";
    for (Index j = 0; j < p; ++j)
        d.column_names.push_back("x" + std::to_string(j));
    d.partition_spec = {d.column_names.back()};
    return d;
}

} // namespace

TEST_CASE("parse_csv shapes and block assignment") {
    Dataset d = parse_csv(kCsv, "demo", "y", {"b", "c"});
    CHECK(d.X.rows() == 4);
    CHECK(d.X.cols() == 3);
    CHECK(d.y.size() == 4);
    CHECK(d.y(3) == 25.0);
    CHECK(d.column_names == std::vector<std::string>{"a", "b", "c"});
    CHECK(d.partition_spec == std::vector<std::string>{"b", "c"});
}

TEST_CASE("parse_csv error reporting") {
    CHECK_THROWS_AS(parse_csv(kCsv, "demo", "nope", {"b"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_csv(kCsv, "demo", "y", {"ghost"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_csv(kCsv, "demo", "y", {"y"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_csv(kCsv, "demo", "y", {"b", "b"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_csv("", "demo", "y", {}), std::invalid_argument);

    const std::string bad_cell = "a,y\n1,2\nx,4\n";
    try {
        parse_csv(bad_cell, "demo", "y", {});
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find('a') != std::string::npos);  // column named
        CHECK(msg.find('3') != std::string::npos);  // 1-based file row named
    }

    const std::string ragged = "a,y\n1,2\n3\n";
    CHECK_THROWS_AS(parse_csv(ragged, "demo", "y", {}), std::invalid_argument);
}

TEST_CASE("standardize basics") {
    Dataset d = parse_csv("x,y\n1,0\n2,0\n3,0\n", "demo", "y", {});
    StandardizeResult s = standardize(d);
    CHECK(s.data.X(0, 0) == doctest::Approx(-1.0));
    CHECK(s.data.X(1, 0) == doctest::Approx(0.0));
    CHECK(s.data.X(2, 0) == doctest::Approx(1.0));
    CHECK(s.scaling.means(0) == doctest::Approx(2.0));
    CHECK(s.scaling.scales(0) == doctest::Approx(1.0));

    StandardizeResult twice = standardize(s.data);
    CHECK((twice.data.X - s.data.X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize names a constant column") {
    Dataset d = parse_csv("u,v,y\n1,7,0\n2,7,1\n3,7,2\n", "demo", "y", {});
    try {
        standardize(d);
        CHECK(false);
    } catch (const degenerate_error& e) {
        CHECK(std::string(e.what()).find('v') != std::string::npos);
    }
}

TEST_CASE("back_transform reproduces raw-scale predictions") {
    Dataset d = synthetic(40, 3, 5);
    StandardizeResult s = standardize(d);
    Matrix Zs(40, 4);
    Zs.col(0).setOnes();
    Zs.rightCols(3) = s.data.X;
    QuantileFit fit = ls_fit(make_design(Zs, d.y, 0.5, 4, 0));
    Vector raw = back_transform(fit.beta, s.scaling);
    Matrix Z(40, 4);
    Z.col(0).setOnes();
    Z.rightCols(3) = d.X;
    CHECK((Zs * fit.beta - Z * raw).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("condition_ratio") {
    CHECK(condition_ratio(Matrix::Identity(5, 3)) == doctest::Approx(1.0));

    Matrix X(2, 2);
    X << std::sqrt(2.0), 0.0, 0.0, std::sqrt(8.0);
    CHECK(condition_ratio(X) == doctest::Approx(4.0));

    Matrix S(3, 2);
    S << 1, 2, 2, 4, 3, 6;
    CHECK_THROWS_AS(condition_ratio(S), singular_design_error);
}

TEST_CASE("outlier_test flags a gross response error") {
    Dataset d = synthetic(60, 3, 11, /*outlier=*/40.0);
    DiagnosticsReport rep = outlier_test(d);
    REQUIRE(!rep.outlier_indices.empty());
    CHECK(rep.outlier_indices.front() == 0);
    CHECK(rep.bonferroni_p(0) < 0.05);
    CHECK(std::abs(rep.studentized_residuals(0)) > 4.0);
}

TEST_CASE("outlier_test is usually quiet on clean Gaussian data") {
    int quiet = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Dataset d = synthetic(100, 3, 1000 + s);
        if (outlier_test(d).outlier_indices.empty()) ++quiet;
    }
    CHECK(quiet >= 90);
}

TEST_CASE("to_design column ordering") {
    Dataset d = parse_csv(kCsv, "demo", "y", {"a"});
    PartitionedDesign design = to_design(d, 0.5);
    CHECK(design.p1 == 3);  // intercept + b + c
    CHECK(design.p2 == 1);
    CHECK(design.X.col(0).isOnes());
    // last column is 'a' = 1..4
    CHECK(design.X(0, 3) == 1.0);
    CHECK(design.X(3, 3) == 4.0);
    // retained columns are b then c
    CHECK(design.X(0, 1) == 2.0);
    CHECK(design.X(0, 2) == 0.5);
}

TEST_CASE("real_data_study shape, determinism, thread invariance") {
    Dataset d = synthetic(80, 4, 21);
    d.partition_spec = {"x2", "x3"};
    const std::vector<double> taus = {0.25, 0.5};
    MetricsTable a = real_data_study(d, taus, 6, 77, {0.05}, 1);
    // per tau: FM SM PT1 (p2=2 so no S/PS) = 3 rows, + LSE
    CHECK(a.rows.size() == 2 * 3 + 1);
    MetricsTable b = real_data_study(d, taus, 6, 77, {0.05}, 3);
    CHECK(to_csv(a) == to_csv(b));
    MetricsTable c = real_data_study(d, taus, 6, 78, {0.05}, 1);
    CHECK(to_csv(a) != to_csv(c));
    for (const auto& row : a.rows) CHECK(row.value > 0.0);
}
