#include "doctest.h"

#include <cmath>
#include <random>

#include "parabolab/oscillation.hpp"
#include "parabolab/spectral.hpp"
#include "test_support.hpp"

using namespace parabolab;

namespace {

GridFunction scalar_field(const SpaceGrid& sp, const TimeAxis& ta, const std::function<Complex(double, const Vec&)>& f) {
    return GridFunction::sample(1, sp, ta, [&](double t, const Vec& x) { return CVec::Constant(1, f(t, x)); });
}

// Direct evaluation of the family sup at one node, looping over every candidate centre.
double brute_maximal(const GridFunction& g, const CylinderFamily& fam, int k0, int j0) {
    const auto& ax = g.space().axis(0);
    const int N = ax.points, K = g.time_steps();
    const double h = ax.spacing(), dt = g.time().dt;
    double best = 0.0;
    for (double r : fam.radii) {
        const double ext = std::pow(r, 2 * fam.m);
        for (int kc = 0; kc < K; ++kc)
            for (int jc = 0; jc < N; ++jc) {
                auto in_time = [&](int k) { return k <= kc && (kc - k) * dt < ext; };
                auto in_space = [&](int j) {
                    int dj = std::abs(j - jc);
                    dj = std::min(dj, N - dj);
                    return dj * h < r;
                };
                // members must fit in the (non-periodic) time range
                int depth = 0;
                while (depth * dt < ext) ++depth;
                if (kc - (depth - 1) < 0) continue;
                if (!in_time(k0) || !in_space(j0)) continue;
                double s = 0.0;
                int cnt = 0;
                for (int k = 0; k < K; ++k)
                    for (int j = 0; j < N; ++j)
                        if (in_time(k) && in_space(j)) {
                            s += std::abs(g(k, j));
                            ++cnt;
                        }
                best = std::max(best, s / cnt);
            }
    }
    return best;
}

// Random real field with spatial and temporal frequencies up to `band`, periodic in both.
GridFunction band_limited(int nx, int nt, double period, int band, std::mt19937_64& rng) {
    std::normal_distribution<double> N;
    std::vector<std::array<double, 4>> c;
    for (int a = 0; a <= band; ++a)
        for (int b = -band; b <= band; ++b)
            if (a != 0 || b != 0) c.push_back({double(a), double(b), N(rng), N(rng)});
    const SpaceGrid sp = SpaceGrid::torus(1, nx);
    const TimeAxis ta{0.0, period / nt, nt};
    return scalar_field(sp, ta, [&](double t, const Vec& x) {
        double v = 0.0;
        for (const auto& e : c) {
            const double ph = e[0] * x(0) + e[1] * 2.0 * kPi * t / period;
            v += e[2] * std::cos(ph) + e[3] * std::sin(ph);
        }
        return Complex(v, 0.0);
    });
}

SolveRequest heat_request(const SpaceGrid& sp, const TimeAxis& ta, double lambda) {
    SolveRequest r;
    r.A = CoefficientTensor::identity(ProblemDims{sp.dim(), 1, 1});
    r.lambda = lambda;
    r.grid = sp;
    r.time = ta;
    return r;
}

}  // namespace

TEST_CASE("mean oscillation on resolved cylinders") {
    const SpaceGrid sp = SpaceGrid::torus(1, 64);
    const TimeAxis ta{0.0, 0.01, 10};
    const double h = sp.axis(0).spacing();
    const ParabolicCylinder q(0.1, Vec::Constant(1, 31.5 * h), 4.0 * h, 1);

    CHECK(mean_oscillation(scalar_field(sp, ta, [](double, const Vec&) { return Complex(3.0, -1.0); }), q) == doctest::Approx(0.0));

    const auto two = scalar_field(sp, ta, [](double, const Vec& x) { return Complex(x(0) < kPi ? 1.0 : 4.0, 0.0); });
    CHECK(mean_oscillation(two, q) == doctest::Approx(1.5).epsilon(1e-14));

    // brute-force nodal sum
    const auto lin = scalar_field(sp, ta, [](double t, const Vec& x) { return Complex(x(0) + t, 0.0); });
    double s = 0.0, s1 = 0.0;
    int cnt = 0;
    for (int k = 0; k < ta.steps; ++k)
        for (int j = 0; j < sp.size(); ++j) {
            const double t = ta.node(k), x = sp.point(j)(0);
            if (t > q.t - q.r * q.r && t <= q.t && std::abs(x - q.x(0)) < q.r) {
                s += x + t;
                ++cnt;
            }
        }
    const double mean = s / cnt;
    for (int k = 0; k < ta.steps; ++k)
        for (int j = 0; j < sp.size(); ++j) {
            const double t = ta.node(k), x = sp.point(j)(0);
            if (t > q.t - q.r * q.r && t <= q.t && std::abs(x - q.x(0)) < q.r) s1 += std::abs(x + t - mean);
        }
    CHECK(mean_oscillation(lin, q) == doctest::Approx(s1 / cnt).epsilon(1e-14));

    const ParabolicCylinder tiny(0.1, Vec::Constant(1, 0.5 * h), 0.1 * h, 1);
    CHECK_THROWS_AS(mean_oscillation(lin, tiny), UnderResolvedError);
    const ParabolicCylinder late(5.0, Vec::Constant(1, 1.0), 4.0 * h, 1);
    CHECK_THROWS_AS(mean_oscillation(lin, late), UnderResolvedError);
}

TEST_CASE("mean oscillation is at most twice the best constant fit") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const SpaceGrid sp = SpaceGrid::torus(1, 32);
    const TimeAxis ta{0.0, 0.05, 8};
    GridFunction g(1, sp, ta);
    for (Eigen::Index i = 0; i < g.values().size(); ++i) g.values().data()[i] = U(rng) + (i % 5 == 0 ? 3.0 : 0.0);
    const ParabolicCylinder q(0.4, Vec::Constant(1, 2.0), 1.0, 1);
    const auto nodes = cylinder_nodes(g, q);
    double best = 1e300;
    for (int i = 0; i <= 4000; ++i) {
        const double c = -2.0 + 6.0 * i / 4000.0;
        double s = 0.0;
        for (auto [k, j] : nodes.nodes) s += std::abs(g(k, j) - c);
        best = std::min(best, s / nodes.size());
    }
    const double osc = mean_oscillation(g, q);
    CHECK(osc <= 2.0 * best);
    CHECK(osc >= best - 1e-12);
}

TEST_CASE("spatial oscillation of coefficient fields") {
    const SpaceGrid sp = SpaceGrid::torus(1, 2048);
    const TimeAxis ta{0.0, 0.01, 20};
    const ParabolicCylinder q(0.2, Vec::Constant(1, 1.0), 0.3, 1);

    const auto tonly = scalar_field(sp, ta, [](double t, const Vec&) { return Complex(std::sin(40.0 * t), t); });
    CHECK(osc_x(tonly, q) <= 1e-14);
    CHECK(mean_oscillation(tonly, q) > 0.1);

    const auto two = scalar_field(sp, ta, [](double, const Vec& x) { return Complex(x(0) < 1.0 ? -2.0 : 1.0, 0.0); });
    const ParabolicCylinder qc(0.2, Vec::Constant(1, 1.0 - 0.5 * sp.axis(0).spacing()), 0.3, 1);
    CHECK(osc_x(two, qc) == doctest::Approx(1.5).epsilon(1e-12));

    // small-r behaviour of sin: osc_x ~ c r
    const auto s = scalar_field(sp, ta, [](double, const Vec& x) { return Complex(std::sin(x(0)), 0.0); });
    std::vector<double> rs{0.2, 0.1, 0.05, 0.025}, os;
    for (double r : rs) os.push_back(osc_x(s, ParabolicCylinder(0.2, Vec::Constant(1, 0.3), r, 1)));
    CHECK(std::abs(loglog_slope(rs, os) - 1.0) <= 0.1);

    // invariance under adding a constant
    GridFunction shifted = s;
    shifted.values().array() += Complex(5.0, 2.0);
    CHECK(osc_x(shifted, q) == doctest::Approx(osc_x(s, q)).epsilon(1e-12));
    CHECK(mean_oscillation(shifted, q) == doctest::Approx(mean_oscillation(s, q)).epsilon(1e-12));
}

TEST_CASE("A sharp over a dyadic family") {
    const SpaceGrid sp = SpaceGrid::torus(1, 512);
    const TimeAxis ta{0.0, 0.05, 24};
    const auto tonly = scalar_field(sp, ta, [](double t, const Vec&) { return Complex(std::cos(9.0 * t), 0.0); });
    const auto fam = CylinderFamily::dyadic(tonly, 1.0, 1, 4);
    CHECK(fam.radii.front() == 1.0);
    CHECK(a_sharp(tonly, 1.0, fam) <= 1e-14);

    const auto s = scalar_field(sp, ta, [](double, const Vec& x) { return Complex(std::sin(x(0)), 0.0); });
    const double full = a_sharp(s, 1.0, fam);
    const double quarter = a_sharp(s, 0.25, fam);
    CHECK(a_sharp(s, 0.5, fam) <= full);
    CHECK(quarter <= a_sharp(s, 0.5, fam));
    CHECK(std::abs(full / quarter - 4.0) <= 0.8);
    // sup over a block list picks the worst block
    CHECK(a_sharp({tonly, s}, 1.0, fam) == doctest::Approx(full));
    CHECK_THROWS_AS(a_sharp(s, 1e-9, fam), UnderResolvedError);

    OscillationBudget budget{1.0, 0.5};
    budget.validate();
    CHECK(budget.admits(full));
    CHECK_FALSE(budget.admits(0.6));
    CHECK_THROWS_AS(OscillationBudget({2.0, 0.1}).validate(), DomainError);
}

TEST_CASE("sharp and maximal functions") {
    const SpaceGrid sp = SpaceGrid::torus(1, 24);
    const TimeAxis ta{0.0, 0.1, 12};
    const auto c = scalar_field(sp, ta, [](double, const Vec&) { return Complex(-2.0, 0.0); });
    const auto fam = CylinderFamily::dyadic(c, 1.2, 1);
    CHECK(fam.radii.size() >= 3);
    const auto smc = sharp_and_maximal(c, fam);
    CHECK(smc.sharp.values().cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((smc.maximal.values().array() - 2.0).abs().maxCoeff() <= 1e-14);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    GridFunction g(1, sp, ta);
    for (Eigen::Index i = 0; i < g.values().size(); ++i) g.values().data()[i] = N(rng);
    const auto sm = sharp_and_maximal(g, fam);
    // the smallest member is the node itself
    CHECK((sm.maximal.values().real().array() - g.values().cwiseAbs().array() >= -1e-14).all());

    GridFunction centred = g;
    centred.values().array() -= g.values().mean();
    const auto mc = maximal_function(centred, fam);
    CHECK((2.0 * mc.values().real().array() - sm.sharp.values().real().array() >= -1e-12).all());

    // adding a constant: sharp unchanged, maximal moves by at most |c|
    GridFunction shifted = g;
    shifted.values().array() += 0.7;
    const auto ss = sharp_and_maximal(shifted, fam);
    CHECK((ss.sharp.values() - sm.sharp.values()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((ss.maximal.values() - sm.maximal.values()).cwiseAbs().maxCoeff() <= 0.7 + 1e-12);

    // single spike against a direct sup over every candidate cylinder
    GridFunction spike(1, sp, ta);
    spike(5, 10) = 1.0;
    const auto ms = maximal_function(spike, fam);
    for (auto [k, j] : std::vector<std::pair<int, int>>{{5, 10}, {5, 11}, {6, 10}, {8, 13}, {11, 2}, {2, 10}})
        CHECK(ms(k, j).real() == doctest::Approx(brute_maximal(spike, fam, k, j)).epsilon(1e-14));
    CHECK(ms(5, 10).real() == doctest::Approx(1.0));
    CHECK(ms(5, 22).real() == 0.0);  // farther than two radii
}

TEST_CASE("Fefferman-Stein and maximal ratios") {
    std::mt19937_64 rng(11);
    const double period = 4.0;
    const auto c = band_limited(16, 16, period, 0, rng);  // band 0: identically zero
    const auto fam0 = CylinderFamily::dyadic(c, 1.5, 1, 1, true);
    CHECK_THROWS_AS(fs_ratio(c, 4.0, fam0), DegenerateInputError);

    std::vector<double> fs_lo, fs_hi, hl_lo, hl_hi;
    for (int trial = 0; trial < 6; ++trial) {
        const auto seed = rng();
        std::mt19937_64 a(seed), b(seed);
        const auto lo = band_limited(32, 32, period, 3, a);
        const auto hi = band_limited(64, 64, period, 3, b);
        const auto r_lo = fs_ratio(lo, 4.0, CylinderFamily::dyadic(lo, 1.5, 1, 1, true));
        const auto r_hi = fs_ratio(hi, 4.0, CylinderFamily::dyadic(hi, 1.5, 1, 1, true));
        CHECK(std::isfinite(r_lo.fs));
        CHECK(r_lo.hl >= 1.0);
        CHECK(r_hi.fs / r_lo.fs <= 3.0);
        CHECK(r_hi.fs / r_lo.fs >= 1.0 / 3.0);
        CHECK(r_hi.hl / r_lo.hl <= 3.0);
        CHECK(r_hi.hl / r_lo.hl >= 1.0 / 3.0);
        if (trial == 0) {
            GridFunction scaled = lo;
            scaled *= Complex(-3.5, 0.0);
            const auto r_s = fs_ratio(scaled, 4.0, CylinderFamily::dyadic(lo, 1.5, 1, 1, true));
            CHECK(r_s.fs == doctest::Approx(r_lo.fs).epsilon(1e-12));
            CHECK(r_s.hl == doctest::Approx(r_lo.hl).epsilon(1e-12));
            GridFunction biased = lo;
            biased.values().array() += 1.0;
            CHECK_THROWS_AS(fs_ratio(biased, 4.0, fam0), DomainError);
            CHECK_THROWS_AS(fs_ratio(lo, 1.0, fam0), DomainError);
        }
    }
}

TEST_CASE("whole-space mean oscillation check") {
    const SpaceGrid sp = SpaceGrid::torus(1, 64);
    const TimeAxis ta{0.0, 0.05, 30};
    SolveRequest req = heat_request(sp, ta, 2.0);
    const auto zero = solve_whole_space(req);
    const ParabolicCylinder base(1.4, Vec::Constant(1, 1.0), 0.05, 1);
    auto w = wholespace_mean_osc_check(req, zero, CylinderQuery(base, 8.0));
    CHECK(w.lhs == 0.0);
    CHECK(w.rhs == 0.0);
    CHECK(w.implied == 0.0);
    CHECK(w.kappa_decay == doctest::Approx(1.0 / 8.0));
    CHECK(w.kappa_growth == doctest::Approx(std::pow(8.0, 1.5)));
    const auto w2 = wholespace_mean_osc_check(req, zero, CylinderQuery(base, 16.0));
    CHECK(w2.kappa_decay / w.kappa_decay == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w2.kappa_growth / w.kappa_growth == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-15));
    CHECK_THROWS_AS(wholespace_mean_osc_check(req, zero, CylinderQuery(base, 4.0)), DomainError);
    CHECK_THROWS_AS(wholespace_mean_osc_check(req, zero, CylinderQuery(ParabolicCylinder(1.4, Vec::Constant(1, 1.0), 1e-4, 1), 8.0)),
                    UnderResolvedError);

    // homogeneous solution from smooth initial data: osc over Q_{R/kappa} decays like 1/kappa
    std::mt19937_64 rng(5);
    GridFunction u0(1, sp, ta);
    std::normal_distribution<double> N;
    for (Eigen::Index i = 0; i < u0.values().size(); ++i) u0.values().data()[i] = Complex(N(rng), 0.0);
    band_limit(u0, 0.2);
    req.initial = u0;
    const auto sol = solve_whole_space(req);
    const ParabolicCylinder outer(1.5, Vec::Constant(1, 2.0), 1.0, 1);
    const auto dec = wholespace_osc_decay(req, sol, outer, {8.0, 16.0, 32.0, 64.0});
    CHECK(dec.exponent <= -0.8);
    CHECK(dec.exponent >= -1.2);
    CHECK_THROWS_AS(wholespace_osc_decay(req, sol, ParabolicCylinder(0.5, Vec::Constant(1, 2.0), 1.0, 1), {8.0, 16.0}),
                    UnderResolvedError);
}

TEST_CASE("localized forcing gives a kappa-stable implied constant") {
    // bump forcing inside Q_r(X0): the kappa^{m+d/2} prefactor balances the averaging over Q_{kappa r}
    const double L = 64.0, r = 0.5, t0 = 1.0;
    const SpaceGrid sp = SpaceGrid::torus(1, 1024, L);
    const TimeAxis ta{t0 - r * r, r * r / 32.0, 32};
    const double x0 = 10.0;
    auto bump = [](double s) { return std::abs(s) < 1.0 ? std::pow(std::cos(0.5 * kPi * s), 4) : 0.0; };
    for (double lambda : {0.1, 10.0}) {
        SolveRequest req = heat_request(sp, ta, lambda);
        req.forcing[MultiIndex::zero(1)] = scalar_field(sp, ta, [&](double t, const Vec& x) {
            return Complex(bump((x(0) - x0) / r) * bump(2.0 * (t - t0) / (r * r) + 1.0), 0.0);
        });
        req.forcing[MultiIndex::unit(1, 0)] = 0.5 * req.forcing[MultiIndex::zero(1)];
        const auto sol = solve_whole_space(req);
        std::vector<double> implied;
        for (double kappa : {8.0, 16.0, 32.0, 64.0}) {
            const auto w = wholespace_mean_osc_check(req, sol, CylinderQuery(ParabolicCylinder(t0, Vec::Constant(1, x0), r, 1), kappa));
            CHECK(w.lhs > 0.0);
            implied.push_back(w.implied);
        }
        const auto [lo, hi] = std::minmax_element(implied.begin(), implied.end());
        CHECK(*hi / *lo < 3.0);
    }
}
