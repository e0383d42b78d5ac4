#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "parabolab/extension.hpp"

using namespace parabolab;

namespace {

GridFunction line_field(const SpaceGrid& g, const std::function<double(double)>& f) {
    return GridFunction::sample(1, g, TimeAxis{0, 1, 1}, [&](double, const Vec& x) { return CVec::Constant(1, f(x(0))); });
}

GridFunction slab_field(const SpaceGrid& g, const std::function<double(double, const Vec&)>& f) {
    return GridFunction::sample(1, g, TimeAxis{0, 1, 1}, [&](double, const Vec& x) {
        return CVec::Constant(1, f(x(0), x.tail(x.size() - 1)));
    });
}

// Smooth cutoff equal to 1 near 0 and vanishing with all derivatives beyond `b`.
double cutoff(double x, double b) {
    if (x >= b) return 0.0;
    const double s = x / b;
    if (s <= 0.5) return 1.0;
    const double r = (s - 0.5) * 2.0;
    const double e1 = std::exp(-1.0 / (1.0 - r)), e0 = std::exp(-1.0 / r);
    return e1 / (e0 + e1);
}

}  // namespace

TEST_CASE("vandermonde coefficients") {
    auto c1 = vandermonde_coefficients(1);
    REQUIRE(c1.c.size() == 2);
    CHECK(c1.c[0] == -3.0);
    CHECK(c1.c[1] == 4.0);
    CHECK(c1.residual == 0.0);

    auto c2 = vandermonde_coefficients(2);
    CHECK(c2.residual <= 1e-12);
    double prev = 0.0;
    for (int tau = 1; tau <= 6; ++tau) {
        auto c = vandermonde_coefficients(tau);
        double sum = 0.0;
        for (double v : c.c) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        if (tau <= 4) CHECK(c.residual <= 1e-10);
        CHECK(c.residual >= prev * 0.5);  // grows with tau up to rounding noise
        prev = std::max(prev, c.residual);

        // Independent oracle: pivoted LU solve of the 2tau x 2tau system (well enough conditioned for tau <= 3).
        if (tau > 3) continue;
        const int n = 2 * tau;
        Mat V(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 1; k <= n; ++k) V(j, k - 1) = std::pow(-1.0 / k, j);
        const Vec sol = V.fullPivLu().solve(Vec::Ones(n));
        for (int k = 0; k < n; ++k)
            CHECK(std::abs(sol(k) - c.c[static_cast<std::size_t>(k)]) <= 1e-6 * std::abs(c.c[static_cast<std::size_t>(k)]));
    }
    CHECK_THROWS_AS(vandermonde_coefficients(0), DomainError);
    CHECK_THROWS_AS(vandermonde_coefficients(7), DomainError);
}

TEST_CASE("extension reproduces low-degree polynomials") {
    SpaceGrid g({Axis::interval(0.0, 2.0, 101)});
    const auto c1 = vandermonde_coefficients(1);
    auto lin = extend_tau(line_field(g, [](double x) { return x; }), c1, 2.0);
    CHECK(lin.space().axis(0).lo == doctest::Approx(-2.0));
    for (int i = 0; i < lin.space().size(); ++i)
        CHECK(std::abs(lin(0, i).real() - lin.space().point(i)(0)) < 1e-12);
    auto cst = extend_tau(line_field(g, [](double) { return 3.5; }), c1, 1.0);
    for (int i = 0; i < cst.space().size(); ++i) CHECK(std::abs(cst(0, i).real() - 3.5) < 1e-12);

    const auto c2 = vandermonde_coefficients(2);
    auto cubic = [](double x) { return 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x; };
    auto e = extend_tau(line_field(g, cubic), c2, 1.5);
    for (int i = 0; i < e.space().size(); ++i)
        CHECK(std::abs(e(0, i).real() - cubic(e.space().point(i)(0))) < 1e-10);

    CHECK_THROWS_AS(extend_tau(line_field(g, cubic), c1, 4.5), DomainError);
    SpaceGrid shifted({Axis::interval(1.0, 2.0, 11)});
    CHECK_THROWS_AS(extend_tau(line_field(shifted, cubic), c1, 0.5), DomainError);
}

TEST_CASE("one-sided derivatives match up to order 2 tau - 1") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    SpaceGrid g({Axis::interval(0.0, 3.0, 301)});
    for (int tau : {1, 2}) {
        const auto c = vandermonde_coefficients(tau);
        for (int trial = 0; trial < 5; ++trial) {
            const double a = U(rng), b = 1.5 + U(rng), ph = U(rng);
            auto f = [&](double x) { return std::exp(a * x) * std::sin(b * x + ph) * cutoff(x, 2.8); };
            auto ext = extend_tau(line_field(g, f), c, 1.0);
            auto defects = one_sided_matching(ext, 2 * tau);
            for (int j = 0; j < 2 * tau; ++j) {
                INFO("tau=" << tau << " j=" << j << " defect=" << defects[static_cast<std::size_t>(j)].defect);
                CHECK(defects[static_cast<std::size_t>(j)].pass);
            }
            // The next derivative is generally discontinuous.
            CHECK(defects[static_cast<std::size_t>(2 * tau)].defect > 10 * defects[static_cast<std::size_t>(2 * tau)].tolerance);
        }
    }
}

TEST_CASE("even extension") {
    SpaceGrid g = SpaceGrid::slab(2, 1.0, 11, 8);
    auto f = slab_field(g, [](double x1, const Vec& xp) { return x1 * x1 + std::sin(xp(0)) + x1; });
    auto e = even_extend(f);
    CHECK(e.space().axis(0).points == 21);
    const int rest = 8;
    for (int i = 0; i < 21; ++i)
        for (int r = 0; r < rest; ++r) CHECK(e(0, i * rest + r) == e(0, (20 - i) * rest + r));
    auto back = restrict_to_halfspace(e);
    CHECK(back.space() == f.space());
    CHECK((back.values() - f.values()).norm() == 0.0);
    CHECK(lp_norm(e, 2.0) <= 2.0 * lp_norm(f, 2.0));
}

TEST_CASE("interpolation inequality pieces") {
    auto slab = SpaceGrid::slab(2, 4.0, 161, 16);
    SUBCASE("independent of x_1") {
        auto u = slab_field(slab, [](double, const Vec& xp) { return std::cos(2 * xp(0)); });
        auto t = interpolation_check(u, 2, 1, 0.1);
        CHECK(t.lhs <= 1e-9 * t.rhs);
        CHECK(t.pass);
    }
    SUBCASE("independent of x'") {
        auto u = slab_field(slab, [](double x1, const Vec&) { return std::exp(-x1 * x1); });
        for (int k = 0; k < 2; ++k) CHECK(interpolation_check(u, 2, k, 0.5).lhs == 0.0);
    }
    SUBCASE("anisotropic scaling") {
        auto u = [](double x1, const Vec& xp) {
            return std::exp(-2.0 * (x1 - 0.8) * (x1 - 0.8)) * cutoff(x1, 1.8) * (std::sin(xp(0)) + 0.3 * std::cos(2 * xp(0)));
        };
        auto fine = SpaceGrid::slab(2, 4.0, 801, 16);
        for (int m : {1, 2})
            for (int k = 0; k < m; ++k) CHECK(anisotropic_exponent(u, fine, m, k, 1.0, 2.0) == doctest::Approx(m - k).epsilon(0.02));
    }
    CHECK_THROWS_AS(interpolation_check(GridFunction(1, SpaceGrid({Axis::interval(0, 1, 20)}), TimeAxis{}), 1, 0, 0.1),
                    DomainError);
    CHECK_THROWS_AS(interpolation_constant(2, 2, 0.1), DomainError);
    CHECK(interpolation_constant(2, 1, 0.02) > interpolation_constant(2, 1, 0.5));
}

TEST_CASE("boundary geometry and mollification") {
    auto tor = SpaceGrid::torus(1, 64);
    const double h = tor.axis(0).spacing();
    SUBCASE("kernel integral") {
        auto geo = make_boundary_geometry(tor, Vec::Zero(64), 1.0);
        CHECK(std::abs(geo.kernel_integral() - 1.0) <= 1e-10);
        // Independent composite midpoint sum.
        double s = 0.0;
        const int n = 200000;
        Vec y(1);
        for (int i = 0; i < n; ++i) {
            y(0) = -1.0 + (i + 0.5) * 2.0 / n;
            s += geo.kernel(y) * 2.0 / n;
        }
        CHECK(std::abs(s - 1.0) <= 1e-9);
        auto geo2 = make_boundary_geometry(SpaceGrid::torus(2, 8), Vec::Zero(64), 1.0);
        double s2 = 0.0;
        const int n2 = 1000;
        Vec y2(2);
        for (int i = 0; i < n2; ++i)
            for (int j = 0; j < n2; ++j) {
                y2 << -1.0 + (i + 0.5) * 2.0 / n2, -1.0 + (j + 0.5) * 2.0 / n2;
                s2 += geo2.kernel(y2) * 4.0 / (n2 * n2);
            }
        CHECK(std::abs(s2 - 1.0) <= 1e-5);
    }
    SUBCASE("constant graph") {
        auto geo = make_boundary_geometry(tor, Vec::Constant(64, 0.7), 0.5);
        Vec xp = Vec::Constant(1, 1.234);
        for (double x1 : {0.0, 0.01, 0.3, 2.0}) CHECK(std::abs(geo.mollified(x1, xp) - 0.7) <= 1e-14);
    }
    SUBCASE("linear pieces are preserved away from kinks") {
        // Tent: slope 0.2 on [0, pi], -0.2 on [pi, 2 pi].
        Vec phi(64);
        for (int j = 0; j < 64; ++j) {
            const double x = tor.point(j)(0);
            phi(j) = x <= kPi ? 0.2 * x : 0.2 * (2 * kPi - x);
        }
        auto geo = make_boundary_geometry(tor, phi, 0.2);
        CHECK(geo.measured_lipschitz() == doctest::Approx(0.2));
        for (double x1 : {0.05, 0.2, 0.5}) {
            Vec xp = Vec::Constant(1, 1.5);
            CHECK(std::abs(geo.mollified(x1, xp) - 0.3) <= 1e-13);
        }
        CHECK(std::abs(geo.mollified(0.0, Vec::Constant(1, 1.5)) - 0.3) <= 1e-14);
        CHECK_THROWS_AS(make_boundary_geometry(tor, phi, 0.1), DomainError);
    }
    SUBCASE("sawtooth derivative growth is uniform across decades") {
        Vec phi(64);
        for (int j = 0; j < 64; ++j) phi(j) = (j % 2 == 0) ? 0.0 : 0.3 * h;
        auto geo = make_boundary_geometry(tor, phi, 0.3);
        std::vector<double> per_depth;
        for (double x1 : {1e-3, 1e-2}) {
            double worst = 0.0;
            for (int j = 0; j < 64; j += 7)
                worst = std::max(worst, mollified_derivative(geo, x1, tor.point(j), 2) * x1 / geo.rho1);
            per_depth.push_back(worst);
        }
        CHECK(per_depth[0] > 0.0);
        CHECK(per_depth[1] > 0.0);
        CHECK(std::max(per_depth[0], per_depth[1]) / std::min(per_depth[0], per_depth[1]) < 2.0);
        auto slab = SpaceGrid::slab(2, 0.1, 5, 64);
        auto mol = boundary_mollify(geo, slab, 2, {1e-3, 1e-2});
        REQUIRE(mol.phi_tilde.has_value());
        REQUIRE(mol.growth.size() == 3);
        CHECK(mol.growth[0] <= 1.0 + 1e-12);
        CHECK(mol.growth[2] >= std::max(per_depth[0], per_depth[1]) * (1 - 1e-12));
        for (int j = 0; j < 64; ++j) CHECK(std::abs((*mol.phi_tilde)(0, j).real() - phi(j)) < 1e-15);
    }
}

TEST_CASE("flattening map") {
    auto tor = SpaceGrid::torus(1, 32);
    Vec phi(32);
    for (int j = 0; j < 32; ++j) phi(j) = 0.1 * std::sin(tor.point(j)(0));
    auto geo = make_boundary_geometry(tor, phi, 0.1);
    auto map = flatten_map(geo);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.0, 6.0);
    for (int i = 0; i < 50; ++i) {
        Vec x(2);
        x << U(rng) - 3.0, U(rng);
        CHECK((map.inverse(map.forward(x)) - x).norm() <= 1e-12);
        CHECK(map.jacobian_determinant(x) == 1.0);
        Vec b(2);
        b << geo.phi_at(x.tail(1)), x(1);
        CHECK(std::abs(map.forward(b)(0)) <= 1e-15);
    }
    auto flat = make_boundary_geometry(tor, Vec::Zero(32), 1.0);
    auto id = flatten_map(flat);
    Vec x(2);
    x << 0.3, 2.0;
    CHECK(id.forward(x) == x);
}
