#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "parabolab/harness.hpp"

using namespace parabolab;

namespace {

bool same_tensor(const CoefficientTensor& a, const CoefficientTensor& b) {
    if (a.intervals() != b.intervals() || a.indices().size() != b.indices().size()) return false;
    const int k = static_cast<int>(a.indices().size());
    for (int I = 0; I < a.intervals(); ++I)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (a.block(I, i, j) != b.block(I, i, j)) return false;
    return a.breakpoints() == b.breakpoints();
}

}  // namespace

TEST_CASE("fit_constant on small rows") {
    const auto f = fit_constant({1.0, 2.0, 4.0});
    CHECK(f.sup == 4.0);
    CHECK(f.spread == 4.0);
    CHECK(f.median == 2.0);
    CHECK(f.rows == 3);
    CHECK(fit_constant({0.3, 0.3, 0.3, 0.3}).spread == 1.0);
    CHECK_THROWS_AS(fit_constant({1.0, 2.0}), DomainError);
}

TEST_CASE("fit_constant agrees with a streaming recomputation") {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> dist(0.0, 1.0);
    std::vector<double> rows(257);
    for (auto& v : rows) v = dist(rng);
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (double v : rows) {
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    auto sorted = rows;
    std::nth_element(sorted.begin(), sorted.begin() + 128, sorted.end());
    const auto f = fit_constant(rows);
    CHECK(f.sup == hi);
    CHECK(f.spread == doctest::Approx(hi / lo).epsilon(1e-15));
    CHECK(f.median == sorted[128]);
}

TEST_CASE("decay_exponent") {
    const std::vector<double> k{8, 16, 32, 64};
    std::vector<double> inv, flat, noisy;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (double x : k) {
        inv.push_back(3.0 / x);
        flat.push_back(0.7);
        noisy.push_back(std::pow(x, -0.5) * std::exp(noise(rng)));
    }
    CHECK(std::abs(decay_exponent(k, inv).slope + 1.0) < 1e-12);
    CHECK(std::abs(decay_exponent(k, flat).slope) < 1e-12);
    const auto d = decay_exponent(k, noisy);
    CHECK(d.lo <= -0.5);
    CHECK(d.hi >= -0.5);
    CHECK(d.hi - d.lo < 0.3);
    CHECK_THROWS_AS(decay_exponent(k, {1.0, 0.5, 0.0, 0.1}), DomainError);
    CHECK_THROWS_AS(decay_exponent({8, 16}, {1.0, 0.5}), DomainError);
}

TEST_CASE("strong generator honours the margin and is deterministic") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        GeneratorSpec s;
        s.kind = GeneratorKind::Strong;
        s.dims = {1, 1, 1};
        s.margin = 1.0;
        s.seed = seed;
        const auto g = generate_coefficients(s);
        REQUIRE(g.ok);
        CHECK(strong_ellipticity_constant(g.A, 0.0) >= 1.0 - 1e-9);
        CHECK(same_tensor(g.A, generate_coefficients(s).A));
    }
}

TEST_CASE("LH generator output passes the solver gate") {
    GeneratorSpec s;
    s.dims = {2, 2, 2};
    s.breakpoints = 2;
    s.seed = 9;
    const auto g = generate_coefficients(s);
    REQUIRE(g.ok);
    CHECK(g.A.breakpoints().size() == 2);
    for (int I = 0; I < g.A.intervals(); ++I) CHECK(lh_constant(g.A, interval_probe_time(g.A, I)) >= 0.25 * 0.99);
}

TEST_CASE("Petrovskii-only generator") {
    int found = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GeneratorSpec s;
        s.kind = GeneratorKind::PetrovskiiOnly;
        s.dims = {1, 1, 2};
        s.seed = seed;
        const auto g = generate_coefficients(s);
        if (!g.ok) continue;
        ++found;
        CHECK(lh_constant(g.A, 0.0) <= 1e-12);
        CHECK(petrovskii_margin(g.A, 0.0) > 0.0);
    }
    CHECK(found > 0);
    GeneratorSpec scalar;
    scalar.kind = GeneratorKind::PetrovskiiOnly;
    scalar.dims = {1, 1, 1};
    const auto g = generate_coefficients(scalar);
    CHECK_FALSE(g.ok);
    CHECK_FALSE(g.note.empty());
}

TEST_CASE("config parsing") {
    CHECK_THROWS_AS(parse_config(R"({"suite": "wholespace-estimates", "lambdas": []})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"suite": "nope"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"trials": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"suite": "halfspace-estimates", "trials": 0})"), ConfigError);
    for (const auto& name : suite_names()) {
        const auto c = default_config(name);
        const auto back = parse_config(config_json(c));
        CHECK(config_json(back) == config_json(c));
    }
    const auto c = parse_config(R"({"suite": "extension-checks", "trials": 3, "seed": 17})");
    CHECK(c.trials == 3);
    CHECK(c.seed == 17);
    CHECK(c.tolerance("exponent_band") == 0.2);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("smoke run of every suite") {
    for (const auto& name : suite_names()) {
        CAPTURE(name);
        auto c = default_config(name);
        c.trials = 1;
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_suite(c);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(secs < 60.0);
        CHECK_FALSE(r.checks.empty());
        const auto* errors = r.check(name.substr(0, name.find('-')) + ".errors");
        if (errors) CHECK(errors->pass);
        CHECK(report_hash(r) == report_hash(run_suite(c)));
        CHECK(report_csv(r).rfind(std::string("# ") + kReportSchema, 0) == 0);
    }
}

TEST_CASE("checks filter drops disabled checks") {
    auto c = default_config("extension-checks");
    c.trials = 2;
    c.checks = {"extension.tau1_exact"};
    const auto r = run_suite(c);
    CHECK(r.check("extension.tau1_exact"));
    CHECK_FALSE(r.check("extension.vandermonde_residual"));
}
