#include "doctest.h"

#include <cmath>

#include "parabolab/finite_difference.hpp"

using namespace parabolab;

TEST_CASE("fornberg reproduces textbook stencils") {
    auto w = fornberg_weights<double>(0.0, {-1.0, 0.0, 1.0}, 2);
    CHECK(w[1][0] == doctest::Approx(-0.5));
    CHECK(w[1][2] == doctest::Approx(0.5));
    CHECK(w[2][0] == doctest::Approx(1.0));
    CHECK(w[2][1] == doctest::Approx(-2.0));
    auto w5 = fornberg_weights<double>(0.0, {-2, -1, 0, 1, 2}, 1);
    CHECK(w5[1][0] == doctest::Approx(1.0 / 12));
    CHECK(w5[1][1] == doctest::Approx(-2.0 / 3));
    auto os = one_sided_weights(1, 2, 1.0);
    REQUIRE(os.size() == 3);
    CHECK(os[0] == doctest::Approx(-1.5));
    CHECK(os[1] == doctest::Approx(2.0));
    CHECK(os[2] == doctest::Approx(-0.5));
}

TEST_CASE("sbp42 summation by parts property") {
    const int n = 20;
    const double h = 0.1;
    auto op = sbp42(n, h);
    Mat HD = op.H.asDiagonal() * Mat(op.D);
    Mat Q = HD + HD.transpose();
    Mat expected = Mat::Zero(n, n);
    expected(0, 0) = -1;
    expected(n - 1, n - 1) = 1;
    CHECK((Q - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(op.H.sum() == doctest::Approx((n - 1) * h));
}

TEST_CASE("sbp42 accuracy") {
    const int n = 30;
    const double h = 1.0 / (n - 1);
    auto op = sbp42(n, h);
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = i * h;
    // Boundary rows are exact for quadratics, interior rows for quartics.
    Vec q = x.array().square();
    Vec dq = op.D * q;
    CHECK((dq - 2 * x).cwiseAbs().maxCoeff() < 1e-10);
    Vec p4 = x.array().pow(4);
    Vec dp4 = op.D * p4;
    for (int i = 4; i < n - 4; ++i) CHECK(dp4(i) == doctest::Approx(4 * std::pow(x(i), 3)).epsilon(1e-9));
}

TEST_CASE("fd_matrix convergence") {
    for (int k : {1, 2, 4}) {
        double prev = 0.0;
        for (int n : {21, 41}) {
            const double h = 1.0 / (n - 1);
            SpMat D = fd_matrix(n, h, k, 6);
            Vec x(n), f(n), exact(n);
            for (int i = 0; i < n; ++i) {
                x(i) = i * h;
                f(i) = std::sin(2 * x(i));
                exact(i) = std::pow(2.0, k) * std::sin(2 * x(i) + k * kPi / 2);
            }
            const double err = (D * f - exact).cwiseAbs().maxCoeff();
            if (prev > 0) CHECK(prev / err > 20.0);  // better than 4th order under a doubling
            prev = err;
        }
    }
}
