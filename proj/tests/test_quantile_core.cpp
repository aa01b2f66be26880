#include <doctest.h>

#include "qrs/quantile_core.hpp"
#include "qrs/sim_harness.hpp"

using namespace qrs;

TEST_CASE("quantile_loss basic values") {
    CHECK(quantile_loss(0.0, 0.25) == 0.0);
    CHECK(quantile_loss(2.0, 0.25) == doctest::Approx(0.5));
    CHECK(quantile_loss(-2.0, 0.25) == doctest::Approx(1.5));
    CHECK_THROWS_AS(quantile_loss(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(quantile_loss(1.0, 1.0), std::domain_error);
}

TEST_CASE("quantile_loss at tau=0.5 is |u|/2") {
    for (double u : {-3.7, -0.2, 0.0, 0.4, 9.1})
        CHECK(quantile_loss(u, 0.5) == doctest::Approx(std::abs(u) / 2.0));
}

TEST_CASE("quantile_loss convexity") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const double tau = 0.05 + 0.9 * rng.uniform();
        const double u = 10.0 * (rng.uniform() - 0.5);
        const double v = 10.0 * (rng.uniform() - 0.5);
        const double lam = rng.uniform();
        CHECK(quantile_loss(lam * u + (1 - lam) * v, tau) <=
              lam * quantile_loss(u, tau) + (1 - lam) * quantile_loss(v, tau) + 1e-12);
    }
}

TEST_CASE("sample quantile minimizes the check loss") {
    Vector y(7);
    y << 3.1, -0.4, 2.2, 0.9, 1.5, -1.1, 0.3;
    for (double tau : {0.25, 0.5, 0.75}) {
        const double q = empirical_quantile(y, tau);
        const double at_q = quantile_objective((y.array() - q).matrix(), tau);
        for (double c = -2.0; c <= 4.0; c += 0.01)
            CHECK(at_q <= quantile_objective((y.array() - c).matrix(), tau) + 1e-12);
    }
}

TEST_CASE("ls_fit intercept-only gives the mean") {
    Matrix X = Matrix::Ones(3, 1);
    Vector y(3);
    y << 1, 2, 3;
    const QuantileFit f = ls_fit(make_design(X, y, 0.5, 1, 0));
    CHECK(f.beta(0) == doctest::Approx(2.0));
}

TEST_CASE("ls_fit recovers an exact-fit model") {
    Rng rng(5);
    Matrix X = generate_design(15, 3, 0.3, rng);
    Vector b0(3);
    b0 << 1.5, -2.0, 0.25;
    Vector y = X * b0;
    const QuantileFit f = ls_fit(make_design(X, y, 0.5, 3, 0));
    CHECK((f.beta - b0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ls_fit matches the normal-equations oracle") {
    Rng rng(17);
    Matrix X = generate_design(20, 3, 0.5, rng);
    Vector y(20);
    for (Index i = 0; i < 20; ++i) y(i) = rng.normal();
    const QuantileFit f = ls_fit(make_design(X, y, 0.5, 3, 0));
    const Vector oracle = (X.transpose() * X).llt().solve(X.transpose() * y);
    CHECK((f.beta - oracle).cwiseAbs().maxCoeff() < 1e-10);
    // residuals orthogonal to the column space
    CHECK((X.transpose() * f.residuals).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank-deficient design is rejected") {
    Matrix X(4, 2);
    X << 1, 2, 2, 4, 3, 6, 4, 8;  // second column is twice the first
    Vector y(4);
    y << 1, 2, 3, 4;
    CHECK_THROWS_AS(make_design(X, y, 0.5, 2, 0), singular_design_error);
}

TEST_CASE("design invariants are validated") {
    Matrix X = Matrix::Identity(3, 3);
    Vector y = Vector::Ones(3);
    CHECK_THROWS_AS(make_design(X, y, 0.0, 3, 0), std::domain_error);
    CHECK_THROWS_AS(make_design(X, y, 0.5, 2, 0), std::invalid_argument);  // p1+p2 != p
    Vector bad_y = Vector::Ones(2);
    CHECK_THROWS_AS(make_design(X, bad_y, 0.5, 3, 0), std::invalid_argument);
}

TEST_CASE("empirical_quantile uses the left-continuous inverse") {
    Vector v(4);
    v << 1, 2, 3, 4;
    CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.0));
    Vector one(1);
    one << 5;
    CHECK(empirical_quantile(one, 0.123) == doctest::Approx(5.0));
    Vector w(3);
    w << 3, 1, 2;
    CHECK(empirical_quantile(w, 1.0) == doctest::Approx(3.0));
    Vector empty;
    CHECK_THROWS_AS(empirical_quantile(empty, 0.5), std::domain_error);
}
