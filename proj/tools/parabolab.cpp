#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "parabolab/extension.hpp"
#include "parabolab/harness.hpp"
#include "parabolab/oscillation.hpp"

using namespace parabolab;

namespace {

struct Common {
    std::uint64_t seed = 1;
    bool seed_set = false;
    std::string out_dir;
    std::string format;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Base seed")->each([&c](const std::string&) { c.seed_set = true; });
    app->add_option("--out-dir", c.out_dir, "Report directory");
    app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
}

ProblemDims parse_dims(const std::string& s) {
    ProblemDims d;
    char sep1 = 0, sep2 = 0;
    std::istringstream in(s);
    if (!(in >> d.d >> sep1 >> d.m >> sep2 >> d.n) || sep1 != ',' || sep2 != ',')
        throw ConfigError("dims must look like d,m,n (got '" + s + "')");
    d.validate();
    return d;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int finish(const ExperimentReport& r, const Common& c, const std::string& default_dir = ".",
           const std::string& default_format = "csv") {
    const std::string dir = c.out_dir.empty() ? default_dir : c.out_dir;
    const std::string format = c.format.empty() ? default_format : c.format;
    const std::string path = write_report(r, dir, format);
    for (const auto& k : r.checks)
        std::cout << (k.pass ? "PASS " : "FAIL ") << k.name << "  measured " << g17(k.measured) << "  threshold "
                  << g17(k.threshold) << (k.detail.empty() ? "" : "  (" + k.detail + ")") << "\n";
    std::cout << "report " << path << "\n";
    return r.pass() ? 0 : 1;
}

CheckResult bound(std::string name, double measured, double threshold) {
    return {std::move(name), measured <= threshold, measured, threshold, {}};
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimates laboratory for higher-order parabolic systems"};
    app.require_subcommand(1);

    Common run_c, solve_c, ell_c, osc_c, ext_c, half_c;

    auto* run = app.add_subcommand("run", "Run an experiment suite from a JSON config or by suite name");
    std::string target;
    bool print_config = false;
    run->add_option("config", target, "Config file (.json) or suite name")->required();
    run->add_flag("--print-config", print_config, "Print the resolved config and exit");
    add_common(run, run_c);

    auto* solve = app.add_subcommand("solve", "Whole-space a priori ratios for one random coefficient family");
    std::string solve_dims = "1,1,1", form = "div", kind = "lh-positive";
    std::vector<double> lambdas{1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3};
    int points = 16, steps = 8, breakpoints = 1;
    double dt = 0.125, margin = 0.25, max_spread = 5.0;
    solve->add_option("--dims", solve_dims, "d,m,n");
    solve->add_option("--form", form, "divergence or non-divergence form")->check(CLI::IsMember({"div", "nondiv"}));
    solve->add_option("--lambda", lambdas, "lambda values");
    solve->add_option("--points", points, "grid points per axis");
    solve->add_option("--steps", steps, "time steps");
    solve->add_option("--dt", dt, "time step");
    solve->add_option("--generator", kind, "strong | lh-positive | petrovskii-only | special-op");
    solve->add_option("--margin", margin, "ellipticity margin delta");
    solve->add_option("--breakpoints", breakpoints, "coefficient jumps in time");
    solve->add_option("--max-spread", max_spread, "largest accepted max/min ratio across lambda");
    add_common(solve, solve_c);

    auto* ell = app.add_subcommand("ellipticity", "Generate coefficient tensors and compare ellipticity constants");
    std::string ell_dims = "1,1,2", ell_kind = "lh-positive";
    int count = 10, budget = 200;
    double ell_margin = 0.25;
    ell->add_option("--dims", ell_dims, "d,m,n");
    ell->add_option("--generator", ell_kind, "strong | lh-positive | petrovskii-only | special-op");
    ell->add_option("--margin", ell_margin, "ellipticity margin delta");
    ell->add_option("--count", count, "tensors to generate");
    ell->add_option("--budget", budget, "rejection attempts per tensor");
    add_common(ell, ell_c);

    auto* osc = app.add_subcommand("osc", "Whole-space mean-oscillation decay or Fefferman-Stein ratios");
    std::string mode = "decay", osc_dims = "1,1,1";
    std::vector<double> kappas{8, 16, 32, 64};
    int fields = 10;
    osc->add_option("--mode", mode, "kappa decay of homogeneous solutions, or Fefferman-Stein ratios")->check(CLI::IsMember({"decay", "fs"}));
    osc->add_option("--dims", osc_dims, "d,m,n");
    osc->add_option("--kappa", kappas, "kappa values (decay mode)");
    osc->add_option("--fields", fields, "number of random fields (fs mode)");
    add_common(osc, osc_c);

    auto* ext = app.add_subcommand("extend", "Extension coefficients and one-sided matching");
    int tau = 2, functions = 5;
    ext->add_option("--tau", tau, "extension order; one-sided matching is checked for tau <= 2 only");
    ext->add_option("--functions", functions, "random test functions");
    add_common(ext, ext_c);

    auto* half = app.add_subcommand("halfspace", "Half-space solve with trace, energy and boundary-oscillation checks");
    double depth = 2.0, half_lambda = 1.0;
    int normal_points = 96, tangential_points = 16;
    bool special = false;
    std::vector<double> bkappas{128, 256, 512};
    half->add_option("--slab-depth", depth, "slab depth X in x_1");
    half->add_option("--normal-points", normal_points, "nodes along x_1");
    half->add_option("--tangential-points", tangential_points, "points along x_2");
    half->add_flag("--special-op", special, "Use the special operator A(t) D_1^{2m} + sum D_j^{2m}");
    half->add_option("--lambda", half_lambda, "lambda");
    half->add_option("--kappa", bkappas, "boundary kappa values");
    add_common(half, half_c);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg;
            const auto& names = suite_names();
            if (std::find(names.begin(), names.end(), target) != names.end()) cfg = default_config(target);
            else cfg = load_config(target);
            if (run_c.seed_set) cfg.seed = run_c.seed;
            if (!run_c.out_dir.empty()) cfg.out_dir = run_c.out_dir;
            if (!run_c.format.empty()) cfg.format = run_c.format;
            cfg.validate();
            if (print_config) {
                std::cout << config_json(cfg) << "\n";
                return 0;
            }
            return finish(run_suite(cfg), run_c, cfg.out_dir, cfg.format);
        }

        if (*solve) {
            const ProblemDims dims = parse_dims(solve_dims);
            GeneratorSpec spec;
            spec.kind = generator_kind(kind);
            spec.dims = dims;
            spec.margin = margin;
            spec.breakpoints = breakpoints;
            spec.horizon = steps * dt;
            spec.seed = derive_seed(solve_c.seed, {1});
            const auto gen = generate_coefficients(spec);
            if (!gen.ok) throw NumericError("generator: " + gen.note);
            const SpaceGrid sp = SpaceGrid::torus(dims.d, points);
            const TimeAxis ta{0.0, dt, steps};
            ForcingSpec fs;
            fs.seed = derive_seed(solve_c.seed, {2});
            ExperimentReport r;
            r.suite = "solve";
            TrialRow row;
            row.label = solve_dims + " " + form;
            std::vector<double> ratios;
            std::uint64_t stream = 0;
            std::map<MultiIndex, GridFunction> g;
            for (const auto& a : enumerate_up_to(dims.d, dims.m)) g.emplace(a, random_field(dims.n, sp, ta, fs, stream++));
            const GridFunction f = random_field(dims.n, sp, ta, fs, stream++);
            for (double lambda : lambdas) {
                SolveRequest req;
                req.A = gen.A;
                req.lambda = lambda;
                req.grid = sp;
                req.time = ta;
                if (form == "div") {
                    for (const auto& [a, field] : g)
                        req.forcing.emplace(a, Complex(std::pow(lambda, 0.5 - a.order() / (2.0 * dims.m)), 0.0) * field);
                    ratios.push_back(divergence_estimate_ratio(req, solve_whole_space(req)).ratio);
                } else {
                    req.form = Form::NonDivergence;
                    req.forcing.emplace(MultiIndex::zero(dims.d), f);
                    ratios.push_back(nondivergence_estimate_ratio(req, solve_whole_space(req)).ratio);
                }
                row.values.push_back({"ratio.lambda=" + g17(lambda), ratios.back()});
            }
            r.rows.push_back(row);
            if (ratios.size() >= 3) r.constants.push_back({"ratio", fit_constant(ratios)});
            r.checks.push_back(bound("solve.lambda_spread", spread(ratios), max_spread));
            r.config_hash = fnv1a(solve_dims + form + std::to_string(solve_c.seed));
            return finish(r, solve_c);
        }

        if (*ell) {
            const ProblemDims dims = parse_dims(ell_dims);
            ExperimentReport r;
            r.suite = "ellipticity";
            int failures = 0, ordering = 0, generated = 0;
            for (int i = 0; i < count; ++i) {
                GeneratorSpec spec;
                spec.kind = generator_kind(ell_kind);
                spec.dims = dims;
                spec.margin = ell_margin;
                spec.budget = budget;
                spec.seed = derive_seed(ell_c.seed, {static_cast<std::uint64_t>(i)});
                const auto gen = generate_coefficients(spec);
                TrialRow row;
                row.trial = i;
                row.label = to_string(spec.kind);
                if (!gen.ok) {
                    row.error = gen.note;
                    ++failures;
                    r.rows.push_back(row);
                    continue;
                }
                ++generated;
                const double strong = strong_ellipticity_constant(gen.A, 0.0);
                const double lh = lh_constant(gen.A, 0.0);
                const double pm = petrovskii_margin(gen.A, 0.0);
                if (pm < lh - 1e-9) ++ordering;
                row.values = {{"strong", strong}, {"lh", lh}, {"petrovskii", pm}, {"attempts", gen.attempts}};
                r.rows.push_back(row);
            }
            r.checks.push_back({"ellipticity.generated", generated > 0, static_cast<double>(generated),
                                static_cast<double>(count), std::to_string(failures) + " generator failures"});
            r.checks.push_back(bound("ellipticity.petrovskii_ge_lh", ordering, 0.0));
            r.config_hash = fnv1a(ell_dims + ell_kind + std::to_string(ell_c.seed));
            return finish(r, ell_c);
        }

        if (*osc) {
            ExperimentConfig cfg = default_config("oscillation-estimates");
            if (osc_c.seed_set) cfg.seed = osc_c.seed;
            cfg.dims = {parse_dims(osc_dims)};
            cfg.kappas = kappas;
            cfg.trials = fields;
            cfg.checks = mode == "decay"
                             ? std::vector<std::string>{"oscillation.wholespace_decay", "oscillation.kappa_spread"}
                             : std::vector<std::string>{"oscillation.fs_stability", "oscillation.fs_bounded"};
            ExperimentReport r = run_suite(cfg);
            r.suite = "osc";
            return finish(r, osc_c);
        }

        if (*ext) {
            ExperimentReport r;
            r.suite = "extend";
            const auto c = vandermonde_coefficients(tau);
            TrialRow coeffs;
            coeffs.label = "tau=" + std::to_string(tau);
            coeffs.values.push_back({"residual", c.residual});
            for (std::size_t k = 0; k < c.c.size(); ++k) coeffs.values.push_back({"c" + std::to_string(k + 1), c.c[k]});
            r.rows.push_back(coeffs);
            const SpaceGrid line({Axis::interval(0.0, 3.0, 301)});
            int fails = 0;
            // For tau >= 3 the weights reach ~5e4 and the rounding in D_1^j, j = 2 tau - 1, sits far
            // above any O(h^2) tolerance, so only the coefficients are checked.
            const int checked = tau <= 2 ? functions : 0;
            if (checked < functions) std::cerr << "note: one-sided matching skipped for tau >= 3\n";
            for (int f = 0; f < checked; ++f) {
                std::mt19937_64 rng(derive_seed(ext_c.seed, {static_cast<std::uint64_t>(f)}));
                std::uniform_real_distribution<double> U(-1.0, 1.0);
                const double a = U(rng), b = 1.5 + U(rng);
                // Gaussian envelope, negligible beyond x_1 = 3
                const GridFunction w = GridFunction::sample(1, line, TimeAxis{0, 1, 1}, [&](double, const Vec& x) {
                    return CVec::Constant(1, std::sin(b * x(0) + a) * std::exp(-4.0 * x(0) * x(0)));
                });
                TrialRow row;
                row.trial = f + 1;
                row.label = "matching";
                for (const auto& d : one_sided_matching(extend_tau(w, c, 1.0), 2 * tau - 1)) {
                    row.values.push_back({"defect.j=" + std::to_string(d.order), d.defect});
                    if (!d.pass) ++fails;
                }
                r.rows.push_back(row);
            }
            r.checks.push_back(bound("extend.vandermonde_residual", c.residual, 1e-10));
            if (checked > 0) r.checks.push_back(bound("extend.matching_failures", fails, 0.0));
            r.config_hash = fnv1a(std::to_string(tau) + "/" + std::to_string(ext_c.seed));
            return finish(r, ext_c);
        }

        if (*half) {
            const SpaceGrid g = SpaceGrid::slab(2, depth, normal_points, tangential_points);
            const TimeAxis ta{0.0, 0.01, 60};
            HalfspaceProblem p;
            p.lambda = half_lambda;
            p.grid = g;
            p.time = ta;
            if (special) {
                GeneratorSpec spec;
                spec.kind = GeneratorKind::SpecialOp;
                spec.dims = ProblemDims{2, 1, 1};
                spec.seed = derive_seed(half_c.seed, {1});
                const auto gen = generate_coefficients(spec);
                p.A = gen.A;
                p.form = Form::NonDivergence;
            } else {
                p.A = CoefficientTensor::identity({2, 1, 1});
            }
            p.initial = GridFunction::sample(1, g, TimeAxis{0, 1, 1}, [&](double, const Vec& x) {
                return CVec::Constant(1, std::sin(kPi * x(0) / depth) * (1.0 + 0.5 * std::cos(x(1))));
            });
            const auto sol = solve_halfspace(p);
            const ParabolicCylinder outer(0.5, Vec::Zero(2), std::min(0.5, 0.25 * depth), 1);
            const auto dec = special ? special_op_osc_decay(p, sol, outer, bkappas) : boundary_osc_decay(p, sol, outer, bkappas);
            double energy = 0.0;
            for (double e : sol.energy_residuals()) energy = std::max(energy, e);
            ExperimentReport r;
            r.suite = "halfspace";
            TrialRow row;
            row.label = special ? "special operator" : "boundary";
            for (std::size_t i = 0; i < dec.kappas.size(); ++i) row.values.push_back({"ratio.kappa=" + g17(dec.kappas[i]), dec.ratios[i]});
            row.values.push_back({"exponent", dec.exponent});
            row.values.push_back({"trace_violation", sol.trace_violation()});
            row.values.push_back({"energy_residual", energy});
            r.rows.push_back(row);
            r.checks.push_back(bound("halfspace.trace_violation", sol.trace_violation(), 1e-10));
            r.checks.push_back(bound("halfspace.energy_residual", energy, 1e-8));
            r.checks.push_back(bound(special ? "halfspace.special_decay" : "halfspace.boundary_decay", dec.exponent,
                                     special ? -0.8 : -0.4));
            r.config_hash = fnv1a(std::to_string(depth) + "/" + std::to_string(normal_points) + (special ? "s" : "b"));
            return finish(r, half_c);
        }
    } catch (const Error& e) {
        std::cerr << "parabolab: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
