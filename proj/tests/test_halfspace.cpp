#include "doctest.h"

#include <cmath>
#include <random>

#include "parabolab/halfspace.hpp"
#include "test_support.hpp"

using namespace parabolab;

namespace {

using Profile = std::function<Complex(double, const Vec&)>;

GridFunction field(const SpaceGrid& g, const TimeAxis& t, const Profile& f) {
    return GridFunction::sample(1, g, t, [&](double tt, const Vec& x) { return CVec::Constant(1, f(tt, x)); });
}

GridFunction initial_field(const SpaceGrid& g, const std::function<Complex(const Vec&)>& f) {
    return field(g, TimeAxis{0.0, 1.0, 1}, [&](double, const Vec& x) { return f(x); });
}

CoefficientTensor scalar_identity(int d, int m) { return CoefficientTensor::identity(ProblemDims{d, m, 1}); }

HalfspaceProblem problem(CoefficientTensor A, double lambda, SpaceGrid g, TimeAxis t, Form form = Form::Divergence) {
    HalfspaceProblem p;
    p.A = std::move(A);
    p.lambda = lambda;
    p.form = form;
    p.grid = std::move(g);
    p.time = t;
    return p;
}

// Relative L2 difference of two fields at the nodes of `coarse` at its final time.
double final_difference(const HalfspaceSolution& coarse, const HalfspaceSolution& fine) {
    const int K = coarse.time().steps - 1;
    const GridFunction c = coarse.to_grid();
    std::vector<Vec> pts;
    for (int j = 0; j < coarse.grid().size(); ++j) pts.push_back(coarse.grid().point(j));
    const CMat f = fine.evaluate(coarse.time().node(K), MultiIndex::zero(coarse.grid().dim()), pts);
    const CMat cs = c.slice(K);
    return (cs - f).norm() / f.norm();
}

// Composite Simpson on [a, b] with 2n panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    const double h = (b - a) / (2 * n);
    double s = f(a) + f(b);
    for (int i = 1; i < 2 * n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("heat equation on an interval decays like e^{-t}") {
    const SpaceGrid g = SpaceGrid::slab(1, kPi, 256, 1);
    auto p = problem(scalar_identity(1, 1), 0.0, g, TimeAxis{0.0, 1e-3, 1000});
    p.initial = initial_field(g, [](const Vec& x) { return Complex(std::sin(x(0))); });
    const auto sol = solve_halfspace(p);
    const GridFunction u = sol.to_grid();
    const Vec& H = sol.norm_weights();
    Complex num(0.0);
    double den = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        const double s = std::sin(g.point(i)(0));
        num += H(i) * s * u(sol.time().steps - 1, i);
        den += H(i) * s * s;
    }
    CHECK(std::abs(num / den / std::exp(-1.0) - 1.0) <= 1e-4);
}

TEST_CASE("zero forcing and zero data give zero") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 33, 8);
    const auto p = problem(scalar_identity(2, 2), 1.0, g, TimeAxis{0.0, 0.05, 4});
    const auto sol = solve_halfspace(p);
    CHECK(sol.to_grid().values().cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.trace_violation() == 0.0);
}

TEST_CASE("m = 2 self-convergence") {
    const TimeAxis t{0.0, 2e-3, 50};
    auto solve_at = [&](int M) {
        const SpaceGrid g = SpaceGrid::slab(2, 2.0, M, 8);
        auto p = problem(scalar_identity(2, 2), 1.0, g, t);
        p.forcing.emplace(MultiIndex::zero(2), field(g, t, [](double, const Vec& x) {
                              return Complex(std::exp(-4.0 * (x(0) - 1.0) * (x(0) - 1.0)) * (1.0 + std::cos(x(1))));
                          }));
        return solve_halfspace(p);
    };
    const auto coarse = solve_at(128);
    const auto fine = solve_at(1024);
    const double err = final_difference(coarse, fine);
    MESSAGE("m=2 relative difference M=128 vs 1024: " << err);
    CHECK(err <= 1e-3);
    // Doubling M shrinks the error by at least 2^{order - 1}.
    const double err2 = final_difference(solve_at(256), fine);
    CHECK(err / err2 >= 2.0);
}

TEST_CASE("clamped traces and the discrete energy identity") {
    std::mt19937_64 rng(7);
    const ProblemDims dims{2, 2, 2};
    const auto A = testsupport::random_tensor(rng, dims, 3.0);
    REQUIRE(lh_constant(A, 0.0) > 0.0);
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 48, 8);
    const TimeAxis t{0.0, 0.01, 6};
    auto p = problem(A, 0.5, g, t);
    std::normal_distribution<double> N;
    for (const auto& a : enumerate_up_to(2, 2)) {
        GridFunction f(2, g, t);
        for (Eigen::Index i = 0; i < f.values().size(); ++i) f.values().data()[i] = Complex(N(rng), N(rng));
        p.forcing.emplace(a, std::move(f));
    }
    p.initial = GridFunction::sample(2, g, TimeAxis{0.0, 1.0, 1}, [](double, const Vec& x) {
        return CVec::Constant(2, Complex(std::sin(x(0)), std::cos(x(1))));
    });
    const auto sol = solve_halfspace(p);
    CHECK(sol.trace_violation() <= 1e-10);
    double worst = 0.0;
    for (double r : sol.energy_residuals()) worst = std::max(worst, r);
    MESSAGE("energy residual " << worst);
    CHECK(worst <= 1e-8);
}

TEST_CASE("breakpoints split steps and keep the energy identity") {
    const ProblemDims dims{1, 1, 1};
    const CoefficientTensor A(dims, {0.013}, {CMat::Constant(1, 1, 1.0), CMat::Constant(1, 1, 3.0)}, 3.0);
    const SpaceGrid g = SpaceGrid::slab(1, 1.0, 40, 1);
    const TimeAxis t{0.0, 0.01, 3};
    auto p = problem(A, 0.0, g, t);
    p.forcing.emplace(MultiIndex::zero(1), field(g, t, [](double, const Vec& x) { return Complex(x(0)); }));
    const auto sol = solve_halfspace(p);
    REQUIRE(sol.pieces().size() == 4);
    CHECK(sol.pieces()[1].t1 == doctest::Approx(0.013));
    CHECK(sol.pieces()[2].interval == 1);
    for (double r : sol.energy_residuals()) CHECK(r <= 1e-8);
}

TEST_CASE("single tangential mode steady state ratio") {
    // -w'' + (1 + lambda) w = 1 on (0, X), w(0) = w(X) = 0, with u = w(x1) cos(x2).
    const double X = 2.0, lambda = 3.0, k = std::sqrt(1.0 + lambda);
    auto w = [&](double x) { return (1.0 - std::cosh(k * (x - 0.5 * X)) / std::cosh(0.5 * k * X)) / (k * k); };
    auto dw = [&](double x) { return -std::sinh(k * (x - 0.5 * X)) / (k * std::cosh(0.5 * k * X)); };
    const SpaceGrid g = SpaceGrid::slab(2, X, 400, 8);
    const TimeAxis t{0.0, 0.05, 4};
    auto p = problem(scalar_identity(2, 1), lambda, g, t);
    p.forcing.emplace(MultiIndex::zero(2), field(g, t, [](double, const Vec& x) { return Complex(std::cos(x(1))); }));
    p.initial = initial_field(g, [&](const Vec& x) { return Complex(w(x(0)) * std::cos(x(1))); });
    const auto sol = solve_halfspace(p);
    const auto r = halfspace_l2_ratio(p, sol);
    const double nw = std::sqrt(simpson([&](double x) { return w(x) * w(x); }, 0.0, X));
    const double ndw = std::sqrt(simpson([&](double x) { return dw(x) * dw(x); }, 0.0, X));
    // Common factor sqrt(T * pi) cancels; ||D_2 u|| = ||u||.
    const double expected = (lambda * nw + std::sqrt(lambda) * (ndw + nw)) / std::sqrt(X);
    MESSAGE("steady ratio " << r.ratio << " expected " << expected);
    CHECK(std::abs(r.ratio / expected - 1.0) <= 1e-3);
}

TEST_CASE("degenerate and invalid inputs") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 33, 8);
    const TimeAxis t{0.0, 0.05, 2};
    auto p = problem(scalar_identity(2, 1), 1.0, g, t);
    const auto sol = solve_halfspace(p);
    CHECK_THROWS_AS(halfspace_l2_ratio(p, sol), DegenerateInputError);
    auto q = p;
    q.lambda = 0.0;
    CHECK_THROWS_AS(halfspace_l2_ratio(q, sol), DomainError);
    auto small = problem(scalar_identity(2, 2), 1.0, SpaceGrid::slab(2, 2.0, 16, 8), t);
    CHECK_THROWS_AS(solve_halfspace(small), DomainError);
    auto bad = p;
    bad.A = CoefficientTensor(ProblemDims{2, 1, 1}, CMat(-CMat::Identity(2, 2)), 1.0);
    CHECK_THROWS_AS(solve_halfspace(bad), EllipticityError);
    const auto zero_bound = normal_derivative_bound(p, sol);
    CHECK(zero_bound.lhs == 0.0);
    CHECK(zero_bound.ratio == 0.0);
}

TEST_CASE("constant-in-x' forcing has no tangential regularity part") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 64, 8);
    const TimeAxis t{0.0, 0.05, 4};
    auto p = problem(scalar_identity(2, 1), 1.0, g, t, Form::NonDivergence);
    p.forcing.emplace(MultiIndex::zero(2), field(g, t, [](double, const Vec& x) { return Complex(std::sin(x(0))); }));
    const auto sol = solve_halfspace(p);
    const auto r = tangential_regularity_ratio(p, sol);
    CHECK(r.lhs_terms[0].second <= 1e-12 * r.lhs_terms[1].second);
    CHECK(r.lhs_terms[1].second > 0.0);
    const auto b = normal_derivative_bound(p, sol);
    CHECK(b.ratio > 0.0);
}

TEST_CASE("evaluation agrees with the grid values") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 40, 8);
    const TimeAxis t{0.0, 0.02, 5};
    auto p = problem(scalar_identity(2, 1), 1.0, g, t);
    p.initial = initial_field(g, [](const Vec& x) { return Complex(std::sin(kPi * x(0) / 2.0) * (1.0 + std::cos(x(1)))); });
    const auto sol = solve_halfspace(p);
    const auto alpha = MultiIndex({1, 1});
    const GridFunction d = sol.to_grid(alpha);
    std::vector<Vec> pts{g.point(g.flat({5, 3})), g.point(g.flat({20, 0}))};
    const CMat v = sol.evaluate(t.node(2), alpha, pts);
    CHECK(std::abs(v(0, 0) - d(2, g.flat({5, 3}))) <= 1e-12);
    CHECK(std::abs(v(0, 1) - d(2, g.flat({20, 0}))) <= 1e-12);
    // Even reflection.
    Vec mirror = pts[0];
    mirror(0) = -mirror(0);
    CHECK(std::abs(sol.evaluate(t.node(2), alpha, {mirror})(0, 0) - v(0, 0)) <= 1e-12);
    CHECK_THROWS_AS(sol.evaluate(t.end() + 1.0, alpha, pts), DomainError);
}

TEST_CASE("special operator tensor") {
    SpecialOperator op{ProblemDims{2, 2, 2}, {}, {CMat::Identity(2, 2) * Complex(1.0, 0.5)}};
    CHECK(op.probe_margin(64, 1) == doctest::Approx(1.0));
    const auto A = op.tensor();
    Vec xi(2);
    xi << 0.6, 0.8;
    const CMat s = leading_form(A, 0, xi);
    const CMat expected = std::pow(0.6, 4) * op.blocks[0] + std::pow(0.8, 4) * CMat::Identity(2, 2);
    CHECK((s - expected).norm() <= 1e-14);
    CHECK(lh_constant(A, 0.0) > 0.0);
}

TEST_CASE("boundary oscillation check: zero field and exact prefactors") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 64, 16);
    const TimeAxis t{0.0, 0.02, 30};
    auto p = problem(scalar_identity(2, 1), 1.0, g, t);
    const auto zero = solve_halfspace(p);
    const ParabolicCylinder base(0.5, Vec::Zero(2), 0.5 / 128.0, 1);
    const auto b0 = boundary_mean_osc_check(p, zero, CylinderQuery(base, 128.0));
    CHECK(b0.lhs == 0.0);
    CHECK(b0.rhs == 0.0);
    CHECK(b0.implied == 0.0);

    p.initial = initial_field(g, [](const Vec& x) { return Complex(std::sin(kPi * x(0) / 2.0) * (1.0 + std::cos(x(1)))); });
    const auto sol = solve_halfspace(p);
    const auto b1 = boundary_mean_osc_check(p, sol, CylinderQuery(base, 128.0));
    const ParabolicCylinder half(0.5, Vec::Zero(2), 0.5 / 256.0, 1);
    const auto b2 = boundary_mean_osc_check(p, sol, CylinderQuery(half, 256.0));
    CHECK(b1.kappa_decay == std::pow(128.0, -0.5));
    CHECK(b1.kappa_growth == std::pow(128.0, 2.0));
    CHECK(b2.kappa_decay / b1.kappa_decay == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(b2.kappa_growth / b1.kappa_growth == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(b1.rhs == doctest::Approx(b1.kappa_decay * b1.solution_term + b1.kappa_growth * b1.forcing_term));
    CHECK(b1.solution_term == doctest::Approx(b2.solution_term));  // same outer cylinder
    CHECK(b1.lhs > 0.0);
    CHECK_THROWS_AS(boundary_mean_osc_check(p, sol, CylinderQuery(base, 64.0)), DomainError);
    // Outer cylinder starting before the initial time.
    const ParabolicCylinder early(0.1, Vec::Zero(2), 0.5 / 128.0, 1);
    CHECK_THROWS_AS(boundary_mean_osc_check(p, sol, CylinderQuery(early, 128.0)), UnderResolvedError);
}

TEST_CASE("boundary and special-operator oscillation decay") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 96, 16);
    const TimeAxis t{0.0, 0.01, 60};
    const std::vector<double> kappas{128.0, 256.0, 512.0};
    const ParabolicCylinder outer(0.5, Vec::Zero(2), 0.5, 1);
    auto init = [](const Vec& x) { return Complex(std::sin(kPi * x(0) / 2.0) * (1.0 + 0.5 * std::cos(x(1)))); };

    auto p = problem(scalar_identity(2, 1), 1.0, g, t);
    p.initial = initial_field(g, init);
    const auto sol = solve_halfspace(p);
    const auto dec = boundary_osc_decay(p, sol, outer, kappas);
    MESSAGE("boundary decay exponent " << dec.exponent);
    CHECK(dec.exponent <= -0.4);

    SpecialOperator op{ProblemDims{2, 1, 1}, {}, {CMat::Constant(1, 1, 1.0)}};
    auto s = problem(op.tensor(), 1.0, g, t, Form::NonDivergence);
    s.initial = initial_field(g, init);
    const auto ssol = solve_halfspace(s);
    const auto sdec = special_op_osc_decay(s, ssol, outer, kappas);
    MESSAGE("special operator decay exponent " << sdec.exponent);
    CHECK(sdec.exponent <= -0.8);

    // Zero solution: vacuous.
    auto z = problem(op.tensor(), 1.0, g, t, Form::NonDivergence);
    const auto zsol = solve_halfspace(z);
    CHECK(special_op_osc_decay(z, zsol, outer, kappas).ratios == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("special operator traces vanish under refinement") {
    SpecialOperator op{ProblemDims{2, 1, 1}, {}, {CMat::Constant(1, 1, 2.0)}};
    auto run = [&](int M) {
        const SpaceGrid g = SpaceGrid::slab(2, 2.0, M, 8);
        auto s = problem(op.tensor(), 1.0, g, TimeAxis{0.0, 0.01, 10}, Form::NonDivergence);
        s.initial = initial_field(g, [](const Vec& x) { return Complex(std::sin(kPi * x(0) / 2.0) * (1.0 + std::cos(x(1)))); });
        return special_trace_violation(solve_halfspace(s));
    };
    const double coarse = run(32), fine = run(64);
    MESSAGE("trace violation " << coarse << " -> " << fine);
    CHECK(fine < coarse);
    CHECK(fine <= 1e-2);
}

TEST_CASE("holder ratio") {
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 41, 16);
    const TimeAxis t{0.0, 0.01, 60};
    const ParabolicCylinder inner(0.5, Vec::Zero(2), 0.25, 1);
    const GridFunction c = field(g, t, [](double, const Vec&) { return Complex(3.0); });
    CHECK(holder_ratio(c, inner) == 0.0);

    auto run = [&](int M, int steps) {
        const SpaceGrid gg = SpaceGrid::slab(2, 2.0, M, 16);
        auto p = problem(scalar_identity(2, 1), 0.0, gg, TimeAxis{0.0, 0.6 / steps, steps});
        p.initial = initial_field(gg, [](const Vec& x) { return Complex(std::sin(kPi * x(0) / 2.0) * (1.0 + std::cos(x(1)))); });
        return solve_halfspace(p).to_grid();
    };
    const GridFunction u1 = run(41, 60);
    const double r1 = holder_ratio(u1, inner);
    CHECK(r1 > 0.0);
    CHECK(holder_ratio(Complex(5.0) * u1, inner) == doctest::Approx(r1).epsilon(1e-12));
    const double r2 = holder_ratio(run(81, 120), inner);
    const double r3 = holder_ratio(run(161, 240), inner);
    MESSAGE("holder ratios " << r1 << " " << r2 << " " << r3);
    CHECK(std::abs(r2 / r1 - 1.0) <= 0.5);
    CHECK(std::abs(r3 / r1 - 1.0) <= 0.5);
}

TEST_CASE("Legendre-Hadamard tensor with a null-Lagrangian part") {
    // c (D_1 u^1 D_2 u^2 - D_2 u^1 D_1 u^2) integrates to zero on clamped fields, so the
    // solution must match the identity system although strong ellipticity fails.
    const ProblemDims dims{2, 1, 2};
    CMat big = CMat::Identity(4, 4);
    big(0, 2 + 1) = 3.0;   // A^{(1,0),(0,1)}_{12}
    big(2 + 0, 1) = -3.0;  // A^{(0,1),(1,0)}_{12}
    const CoefficientTensor A(dims, big, 3.0);
    REQUIRE(strong_ellipticity_constant(A, 0.0) < 0.0);
    REQUIRE(lh_constant(A, 0.0) > 0.0);
    const SpaceGrid g = SpaceGrid::slab(2, 2.0, 48, 8);
    const TimeAxis t{0.0, 0.02, 10};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    GridFunction f(2, g, t);
    for (Eigen::Index i = 0; i < f.values().size(); ++i) f.values().data()[i] = Complex(N(rng), N(rng));
    auto p = problem(A, 1.0, g, t);
    p.forcing.emplace(MultiIndex::zero(2), f);
    auto q = problem(CoefficientTensor::identity(dims), 1.0, g, t);
    q.forcing.emplace(MultiIndex::zero(2), f);
    const GridFunction u = solve_halfspace(p).to_grid(), v = solve_halfspace(q).to_grid();
    CHECK((u.values() - v.values()).norm() <= 1e-10 * v.values().norm());
}
