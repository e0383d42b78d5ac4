#include "parabolab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "parabolab/spectral.hpp"

namespace parabolab {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix(base);
    for (auto p : path) s = splitmix(s ^ splitmix(p + 0x632be59bd9b4e019ULL));
    return s;
}

// Generators ---------------------------------------------------------------------------

std::string to_string(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::Strong: return "strong";
        case GeneratorKind::LHPositive: return "lh-positive";
        case GeneratorKind::PetrovskiiOnly: return "petrovskii-only";
        case GeneratorKind::SpecialOp: return "special-op";
    }
    return "?";
}

GeneratorKind generator_kind(const std::string& name) {
    if (name == "strong") return GeneratorKind::Strong;
    if (name == "lh-positive" || name == "LH-positive" || name == "lh") return GeneratorKind::LHPositive;
    if (name == "petrovskii-only" || name == "Petrovskii-only") return GeneratorKind::PetrovskiiOnly;
    if (name == "special-op") return GeneratorKind::SpecialOp;
    throw ConfigError("unknown generator kind '" + name + "'");
}

CMat identity_symbol_block(const ProblemDims& dims) {
    const auto idx = enumerate_multiindices(dims.d, dims.m);
    const Eigen::Index n = dims.n, N = static_cast<Eigen::Index>(idx.size()) * n;
    CMat big = CMat::Zero(N, N);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        double w = std::tgamma(dims.m + 1.0);
        for (int e : idx[a].entries()) w /= std::tgamma(e + 1.0);
        big.block(static_cast<Eigen::Index>(a) * n, static_cast<Eigen::Index>(a) * n, n, n) = w * CMat::Identity(n, n);
    }
    return big;
}

double interval_probe_time(const CoefficientTensor& A, int interval) {
    const auto& bp = A.breakpoints();
    if (interval == 0) return bp.empty() ? 0.0 : bp.front() - 1.0;
    return bp[static_cast<std::size_t>(interval - 1)];
}

namespace {

CMat random_block(std::mt19937_64& rng, Eigen::Index n, double scale) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    CMat m(n, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * Complex(U(rng), U(rng));
    return m;
}

std::vector<double> random_breakpoints(std::mt19937_64& rng, int count, double horizon) {
    std::uniform_real_distribution<double> U(0.05, 0.95);
    std::vector<double> bp;
    for (int i = 0; i < count; ++i) bp.push_back(horizon * U(rng));
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
}

double min_over_intervals(const CoefficientTensor& A, double (*f)(const CoefficientTensor&, double, const SphereSearch&)) {
    double v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < A.intervals(); ++i) v = std::min(v, f(A, interval_probe_time(A, i), SphereSearch{}));
    return v;
}

double strong_min(const CoefficientTensor& A) {
    double v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < A.intervals(); ++i) v = std::min(v, min_hermitian_eig(A.big(i)));
    return v;
}

}  // namespace

GeneratedTensor generate_coefficients(const GeneratorSpec& spec) {
    spec.dims.validate();
    const double delta = spec.margin;
    if (spec.kind != GeneratorKind::PetrovskiiOnly && !(delta > 0.0 && delta <= 1.0))
        throw DomainError("generate_coefficients: margin must lie in (0, 1]");
    if (spec.budget < 1) throw DomainError("generate_coefficients: budget must be positive");
    const ProblemDims& dims = spec.dims;
    const Eigen::Index N = static_cast<Eigen::Index>(dims.leading_count()) * dims.n;
    std::mt19937_64 rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(dims.d),
                                                static_cast<std::uint64_t>(dims.m), static_cast<std::uint64_t>(dims.n)}));
    std::uniform_real_distribution<double> U(0.5, 1.0);
    const auto bp = random_breakpoints(rng, spec.breakpoints, spec.horizon);
    const int intervals = static_cast<int>(bp.size()) + 1;
    const double cap = delta > 0.0 ? 1.0 / delta : std::numeric_limits<double>::infinity();
    GeneratedTensor out;

    switch (spec.kind) {
        case GeneratorKind::Strong: {
            // |R_ij| <= sqrt2 a and Herm(R) >= -sqrt2 N a keep every entry of R + s I below 1/delta.
            const double a_max = (cap - delta) / (std::sqrt(2.0) * static_cast<double>(N + 1));
            std::vector<CMat> blocks;
            for (int i = 0; i < intervals; ++i) {
                CMat R = random_block(rng, N, a_max * U(rng));
                const double s = delta - min_hermitian_eig(R);
                blocks.push_back(R + s * CMat::Identity(N, N));
            }
            out.A = CoefficientTensor(dims, bp, blocks, cap);
            out.attempts = 1;
            out.achieved = strong_min(out.A);
            out.ok = out.achieved >= delta - 1e-9 && out.A.max_entry() <= cap * (1 + 1e-12);
            break;
        }
        case GeneratorKind::LHPositive: {
            const CMat I = identity_symbol_block(dims);
            // same amplitude scale as the strong kind, so entries stay below 1/delta after the shift
            double a = (cap - delta) / (std::sqrt(2.0) * static_cast<double>(N + 1));
            for (int attempt = 1; attempt <= spec.budget && !out.ok; ++attempt, a *= 0.7) {
                std::vector<CMat> blocks;
                for (int i = 0; i < intervals; ++i) blocks.push_back(random_block(rng, N, a * U(rng)));
                const CoefficientTensor R(dims, bp, blocks, std::numeric_limits<double>::max());
                for (int i = 0; i < intervals; ++i) {
                    const double lh0 = lh_constant(R, interval_probe_time(R, i));
                    blocks[static_cast<std::size_t>(i)] += (1.1 * delta - lh0) * I;
                }
                out.attempts = attempt;
                double biggest = 0.0;
                for (const auto& b : blocks) biggest = std::max(biggest, b.cwiseAbs().maxCoeff());
                if (biggest > cap) continue;
                out.A = CoefficientTensor(dims, bp, blocks, cap);
                out.achieved = min_over_intervals(out.A, lh_constant);
                out.ok = out.achieved >= delta;
            }
            if (!out.ok) out.note = "LH rejection budget exhausted";
            break;
        }
        case GeneratorKind::PetrovskiiOnly: {
            if (dims.n < 2) {
                out.note = "Petrovskii-only tensors need n >= 2 (scalar symbols have LH = Petrovskii)";
                out.attempts = 0;
                break;
            }
            const CMat I = identity_symbol_block(dims);
            for (int attempt = 1; attempt <= spec.budget && !out.ok; ++attempt) {
                std::vector<CMat> blocks;
                bool window = true;
                for (int i = 0; i < intervals && window; ++i) {
                    CMat R = random_block(rng, N, U(rng));
                    const CoefficientTensor Ri(dims, R, std::numeric_limits<double>::max());
                    const double pm = petrovskii_margin(Ri, 0.0), lh = lh_constant(Ri, 0.0);
                    // shift into the gap between the numerical range and the spectrum
                    window = pm - lh > 1e-6;
                    if (window) R += (-0.5 * (pm + lh)) * I;
                    blocks.push_back(R);
                }
                out.attempts = attempt;
                if (!window) continue;
                double biggest = 1.0;
                for (const auto& b : blocks) biggest = std::max(biggest, b.cwiseAbs().maxCoeff());
                out.A = CoefficientTensor(dims, bp, blocks, biggest);
                out.achieved = min_over_intervals(out.A, petrovskii_margin);
                out.lh = min_over_intervals(out.A, lh_constant);
                out.ok = out.achieved > 0.0 && out.lh <= 0.0;
            }
            if (!out.ok && out.note.empty()) out.note = "Petrovskii-only rejection budget exhausted";
            break;
        }
        case GeneratorKind::SpecialOp: {
            SpecialOperator op;
            op.dims = dims;
            op.breakpoints = bp;
            const double a_max = (cap - delta) / (std::sqrt(2.0) * static_cast<double>(dims.n + 1));
            for (int i = 0; i < intervals; ++i) {
                CMat R = random_block(rng, dims.n, a_max * U(rng));
                op.blocks.push_back(R + (delta - min_hermitian_eig(R)) * CMat::Identity(dims.n, dims.n));
            }
            out.A = op.tensor();
            out.attempts = 1;
            out.achieved = op.probe_margin(64, derive_seed(spec.seed, {99}));
            out.ok = out.achieved >= delta - 1e-9;
            break;
        }
    }
    return out;
}

GridFunction random_field(int components, const SpaceGrid& grid, const TimeAxis& time, const ForcingSpec& spec,
                          std::uint64_t stream, bool real) {
    std::mt19937_64 rng(derive_seed(spec.seed, {stream}));
    std::normal_distribution<double> N;
    GridFunction g(components, grid, time);
    const bool slab = !grid.axis(0).is_periodic();
    const Axis& a0 = grid.axis(0);
    const int rest = grid.size() / a0.points;
    for (int k = 0; k < time.steps; ++k)
        for (int c = 0; c < components; ++c) {
            if (!slab) {
                for (int j = 0; j < grid.size(); ++j) g(k, j, c) = Complex(N(rng), real ? 0.0 : N(rng));
                continue;
            }
            for (int r = 0; r < rest; ++r) {
                std::vector<Complex> coef;
                for (int q = 0; q < spec.normal_modes; ++q) coef.emplace_back(N(rng), real ? 0.0 : N(rng));
                for (int i = 0; i < a0.points; ++i) {
                    const double s = (a0.node(i) - a0.lo) / a0.length();
                    Complex v(0.0);
                    for (int q = 0; q < spec.normal_modes; ++q) v += coef[static_cast<std::size_t>(q)] * std::sin((q + 1) * kPi * s);
                    g(k, i * rest + r, c) = v;
                }
            }
        }
    band_limit(g, spec.keep_fraction);
    if (real) g.values() = g.values().real().cast<Complex>();
    const double scale = g.values().cwiseAbs().maxCoeff();
    if (scale > 0.0) g *= Complex(spec.amplitude / scale, 0.0);
    return g;
}

// Fits ---------------------------------------------------------------------------------

ConstantFit fit_constant(const std::vector<double>& rows) {
    if (rows.size() < 3) throw DomainError("fit_constant: at least three rows required");
    for (double r : rows)
        if (!std::isfinite(r)) throw DomainError("fit_constant: non-finite row");
    std::vector<double> v = rows;
    std::sort(v.begin(), v.end());
    ConstantFit f;
    f.rows = v.size();
    f.sup = v.back();
    const std::size_t n = v.size();
    f.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    f.spread = v.front() > 0.0 ? v.back() / v.front() : std::numeric_limits<double>::infinity();
    return f;
}

namespace {

// Two-sided 97.5% Student-t quantiles for 1..30 degrees of freedom.
double t975(std::size_t df) {
    static const double q[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                               2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                               2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    return df >= 1 && df <= 30 ? q[df - 1] : 1.96;
}

}  // namespace

DecayFit decay_exponent(const std::vector<double>& kappas, const std::vector<double>& ratios) {
    if (kappas.size() != ratios.size()) throw DomainError("decay_exponent: size mismatch");
    std::set<double> distinct(kappas.begin(), kappas.end());
    if (distinct.size() < 3) throw DomainError("decay_exponent: at least three distinct kappas required");
    for (std::size_t i = 0; i < kappas.size(); ++i)
        if (!(kappas[i] > 0.0) || !(ratios[i] > 0.0) || !std::isfinite(ratios[i]))
            throw DomainError("decay_exponent: nonpositive data refused");
    const std::size_t n = kappas.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(kappas[i]);
        my += std::log(ratios[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(kappas[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(ratios[i]) - my);
    }
    DecayFit f;
    f.slope = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::log(ratios[i]) - my - f.slope * (std::log(kappas[i]) - mx);
        sse += e * e;
    }
    f.stderr_slope = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    const double w = t975(n - 2) * f.stderr_slope;
    f.lo = f.slope - w;
    f.hi = f.slope + w;
    return f;
}

// Configuration ------------------------------------------------------------------------

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"solver-correctness",     "wholespace-estimates",
                                                "halfspace-estimates",    "oscillation-estimates",
                                                "ellipticity-certificates", "extension-checks"};
    return names;
}

double ExperimentConfig::tolerance(const std::string& key) const {
    auto it = tolerances.find(key);
    if (it == tolerances.end()) throw ConfigError("missing tolerance '" + key + "' for suite " + suite);
    return it->second;
}

bool ExperimentConfig::enabled(const std::string& check) const {
    return checks.empty() || std::find(checks.begin(), checks.end(), check) != checks.end();
}

void ExperimentConfig::validate() const {
    const auto& names = suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end()) throw ConfigError("unknown suite '" + suite + "'");
    if (lambdas.empty()) throw ConfigError("lambda list is empty");
    if (kappas.empty() || boundary_kappas.empty()) throw ConfigError("kappa list is empty");
    if (radii.empty()) throw ConfigError("r list is empty");
    if (resolutions.empty()) throw ConfigError("resolution list is empty");
    if (dims.empty()) throw ConfigError("dims list is empty");
    if (trials < 1) throw ConfigError("trials must be positive");
    if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
    for (double l : lambdas)
        if (!(l > 0.0)) throw ConfigError("lambdas must be positive");
    for (double k : kappas)
        if (!(k >= 1.0)) throw ConfigError("kappas must be >= 1");
    for (double k : boundary_kappas)
        if (!(k >= 1.0)) throw ConfigError("kappas must be >= 1");
    for (double r : radii)
        if (!(r > 0.0)) throw ConfigError("radii must be positive");
    for (int n : resolutions)
        if (n < 4) throw ConfigError("resolutions must be >= 4");
    for (const auto& d : dims) {
        try {
            d.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("bad dims: ") + e.what());
        }
    }
}

ExperimentConfig default_config(const std::string& suite) {
    ExperimentConfig c;
    c.suite = suite;
    c.lambdas = {1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3};
    c.kappas = {8, 16, 32, 64};
    c.boundary_kappas = {128, 256, 512};
    c.radii = {0.25, 0.5};
    c.resolutions = {16, 32};
    c.dims = {ProblemDims{1, 1, 1}};
    c.generator.kind = GeneratorKind::LHPositive;
    c.generator.breakpoints = 1;
    if (suite == "solver-correctness") {
        c.dims = {ProblemDims{1, 1, 1}, ProblemDims{1, 2, 1}, ProblemDims{2, 1, 1}, ProblemDims{2, 2, 1}};
        c.lambdas = {1.0, 4.0, 16.0};
        c.resolutions = {16, 256};
        c.tolerances = {{"wholespace_exactness", 1e-10}, {"agmon_residual", 1e-12}};
    } else if (suite == "wholespace-estimates") {
        for (int d : {1, 2})
            for (int m : {1, 2, 3})
                for (int n : {1, 2}) c.dims.push_back(ProblemDims{d, m, n});
        c.dims.erase(c.dims.begin());
        c.trials = 100;
        c.resolutions = {16, 8};  // points per axis for d = 1, d = 2
        c.tolerances = {{"lambda_spread", 5.0}};
    } else if (suite == "halfspace-estimates") {
        c.dims = {ProblemDims{1, 1, 1}, ProblemDims{1, 1, 2}, ProblemDims{1, 2, 1}, ProblemDims{2, 1, 1},
                  ProblemDims{2, 1, 2}, ProblemDims{2, 2, 1}};
        c.trials = 20;
        c.resolutions = {256, 8};  // normal nodes M, tangential points
        c.tolerances = {{"lambda_spread", 5.0}, {"trace_violation", 1e-10}, {"energy_residual", 1e-8}, {"halfspace_heat", 1e-4}};
    } else if (suite == "oscillation-estimates") {
        c.dims = {ProblemDims{1, 1, 1}, ProblemDims{2, 1, 2}, ProblemDims{1, 2, 1}};
        c.lambdas = {0.1, 1.0, 10.0};
        c.trials = 100;
        c.resolutions = {32, 64};
        c.tolerances = {{"wholespace_decay", -0.8}, {"kappa_spread", 3.0}, {"boundary_decay", -0.4},
                        {"special_decay", -0.8},    {"fs_stability", 3.0}};
    } else if (suite == "ellipticity-certificates") {
        c.dims = {ProblemDims{1, 1, 2}, ProblemDims{2, 1, 2}, ProblemDims{2, 2, 2}, ProblemDims{1, 2, 3}};
        c.trials = 1000;
        c.generator.budget = 400;
        c.tolerances = {{"certificate_slack", 1e-12}, {"ordering_slack", 1e-9}, {"probes", 1e4}};
    } else if (suite == "extension-checks") {
        c.dims = {ProblemDims{2, 1, 1}, ProblemDims{2, 2, 1}, ProblemDims{2, 3, 1}};
        c.trials = 50;
        c.resolutions = {401, 16};
        c.tolerances = {{"vandermonde_residual", 1e-10}, {"matching_factor", 1.0}, {"exponent_band", 0.2}};
    } else {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    return c;
}

namespace {

json dims_json(const ProblemDims& d) { return json::array({d.d, d.m, d.n}); }

ProblemDims dims_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("dims entries must be [d, m, n]");
    return ProblemDims{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["suite"] = c.suite;
    j["dims"] = json::array();
    for (const auto& d : c.dims) j["dims"].push_back(dims_json(d));
    j["generator"] = {{"kind", to_string(c.generator.kind)}, {"margin", c.generator.margin},
                      {"breakpoints", c.generator.breakpoints}, {"horizon", c.generator.horizon},
                      {"seed", c.generator.seed}, {"budget", c.generator.budget}};
    j["forcing"] = {{"keep_fraction", c.forcing.keep_fraction}, {"amplitude", c.forcing.amplitude},
                    {"normal_modes", c.forcing.normal_modes}, {"seed", c.forcing.seed}};
    j["lambdas"] = c.lambdas;
    j["kappas"] = c.kappas;
    j["boundary_kappas"] = c.boundary_kappas;
    j["radii"] = c.radii;
    j["resolutions"] = c.resolutions;
    j["trials"] = c.trials;
    j["tolerances"] = c.tolerances;
    j["out_dir"] = c.out_dir;
    j["format"] = c.format;
    j["seed"] = c.seed;
    j["checks"] = c.checks;
    return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("suite")) throw ConfigError("config must be an object with a 'suite' key");
    try {
        ExperimentConfig c = default_config(j.at("suite").get<std::string>());
        if (j.contains("dims")) {
            c.dims.clear();
            for (const auto& d : j["dims"]) c.dims.push_back(dims_from(d));
        }
        if (j.contains("generator")) {
            const auto& g = j["generator"];
            if (g.contains("kind")) c.generator.kind = generator_kind(g["kind"].get<std::string>());
            c.generator.margin = g.value("margin", c.generator.margin);
            c.generator.breakpoints = g.value("breakpoints", c.generator.breakpoints);
            c.generator.horizon = g.value("horizon", c.generator.horizon);
            c.generator.seed = g.value("seed", c.generator.seed);
            c.generator.budget = g.value("budget", c.generator.budget);
        }
        if (j.contains("forcing")) {
            const auto& f = j["forcing"];
            c.forcing.keep_fraction = f.value("keep_fraction", c.forcing.keep_fraction);
            c.forcing.amplitude = f.value("amplitude", c.forcing.amplitude);
            c.forcing.normal_modes = f.value("normal_modes", c.forcing.normal_modes);
            c.forcing.seed = f.value("seed", c.forcing.seed);
        }
        c.lambdas = j.value("lambdas", c.lambdas);
        c.kappas = j.value("kappas", c.kappas);
        c.boundary_kappas = j.value("boundary_kappas", c.boundary_kappas);
        c.radii = j.value("radii", c.radii);
        c.resolutions = j.value("resolutions", c.resolutions);
        c.trials = j.value("trials", c.trials);
        if (j.contains("tolerances"))
            for (const auto& [k, v] : j["tolerances"].items()) c.tolerances[k] = v.get<double>();
        c.out_dir = j.value("out_dir", c.out_dir);
        c.format = j.value("format", c.format);
        c.seed = j.value("seed", c.seed);
        c.checks = j.value("checks", c.checks);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_json(const ExperimentConfig& c) { return to_json(c).dump(2); }

// Reports ------------------------------------------------------------------------------

double TrialRow::value(const std::string& key) const {
    for (const auto& [k, v] : values)
        if (k == key) return v;
    return std::numeric_limits<double>::quiet_NaN();
}

bool ExperimentReport::pass() const {
    if (checks.empty()) return false;
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

const CheckResult* ExperimentReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Non-finite numbers are written as strings so the JSON stays valid.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(num(v)); }

}  // namespace

std::string report_csv(const ExperimentReport& r) {
    std::ostringstream os;
    os << "# " << kReportSchema << "\n# suite " << r.suite << "\n# config_hash " << hex(r.config_hash) << "\n";
    os << "record,trial,label,input_hash,quantity,value,threshold,pass,detail\n";
    for (const auto& row : r.rows) {
        for (const auto& [k, v] : row.values)
            os << "row," << row.trial << ',' << csv_field(row.label) << ',' << hex(row.input_hash) << ',' << csv_field(k)
               << ',' << num(v) << ",,,\n";
        if (!row.error.empty())
            os << "row," << row.trial << ',' << csv_field(row.label) << ',' << hex(row.input_hash) << ",error,,,,"
               << csv_field(row.error) << "\n";
    }
    for (const auto& c : r.constants) {
        const std::pair<const char*, double> parts[] = {
            {".sup", c.fit.sup}, {".median", c.fit.median}, {".spread", c.fit.spread},
            {".rows", static_cast<double>(c.fit.rows)}};
        for (const auto& [suffix, v] : parts)
            os << "constant,,,," << csv_field(c.name + suffix) << ',' << num(v) << ",,,\n";
    }
    for (const auto& c : r.checks)
        os << "check,,,," << csv_field(c.name) << ',' << num(c.measured) << ',' << num(c.threshold) << ','
           << (c.pass ? "pass" : "fail") << ',' << csv_field(c.detail) << "\n";
    return os.str();
}

std::string report_json(const ExperimentReport& r) {
    json j;
    j["schema"] = kReportSchema;
    j["suite"] = r.suite;
    j["config_hash"] = hex(r.config_hash);
    j["pass"] = r.pass();
    j["rows"] = json::array();
    for (const auto& row : r.rows) {
        json v = json::object();
        for (const auto& [k, x] : row.values) v[k] = jnum(x);
        json jr = {{"trial", row.trial}, {"label", row.label}, {"input_hash", hex(row.input_hash)}, {"values", v}};
        if (!row.error.empty()) jr["error"] = row.error;
        j["rows"].push_back(jr);
    }
    j["constants"] = json::array();
    for (const auto& c : r.constants)
        j["constants"].push_back({{"name", c.name}, {"sup", jnum(c.fit.sup)}, {"median", jnum(c.fit.median)},
                                  {"spread", jnum(c.fit.spread)}, {"rows", c.fit.rows}});
    j["checks"] = json::array();
    for (const auto& c : r.checks)
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"measured", jnum(c.measured)},
                               {"threshold", jnum(c.threshold)}, {"detail", c.detail}});
    return j.dump(2) + "\n";
}

std::uint64_t report_hash(const ExperimentReport& r) { return fnv1a(report_json(r)); }

std::string write_report(const ExperimentReport& r, const std::string& out_dir, const std::string& format) {
    if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / (r.suite + "." + format)).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << (format == "csv" ? report_csv(r) : report_json(r));
    return path;
}

}  // namespace parabolab
