#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "parabolab/ellipticity.hpp"
#include "parabolab/grid.hpp"
#include "parabolab/halfspace.hpp"

namespace parabolab {

inline constexpr const char* kReportSchema = "parabolab-report/1";
inline constexpr const char* kVersion = "0.1.0";

// FNV-1a over bytes.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
// Independent 64-bit stream seed from a base seed and a path of integers (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Coefficient generators -----------------------------------------------------------------

enum class GeneratorKind { Strong, LHPositive, PetrovskiiOnly, SpecialOp };
std::string to_string(GeneratorKind k);
GeneratorKind generator_kind(const std::string& name);

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::LHPositive;
    ProblemDims dims;
    double margin = 0.25;      // delta: requested ellipticity margin, entries clipped to 1/delta
    int breakpoints = 0;       // coefficient jumps in (0, horizon)
    double horizon = 1.0;
    std::uint64_t seed = 1;
    int budget = 200;          // rejection attempts
};

struct GeneratedTensor {
    CoefficientTensor A;
    bool ok = false;
    int attempts = 0;
    double achieved = 0.0;  // strong / LH / Petrovskii margin / probe margin, by kind
    double lh = 0.0;        // LH constant (Petrovskii-only kind)
    std::string note;
};

// Throws DomainError for a nonpositive margin on the LH / strong / special kinds. Budget
// exhaustion is reported through ok = false.
GeneratedTensor generate_coefficients(const GeneratorSpec& spec);

// Block matrix whose symbol is |xi|^{2m} I_n: (m!/gamma!) I_n on the diagonal blocks.
CMat identity_symbol_block(const ProblemDims& dims);

// Time at which interval i of A is probed (a point inside it).
double interval_probe_time(const CoefficientTensor& A, int interval);

struct ForcingSpec {
    double keep_fraction = 2.0 / 3.0;  // of the Nyquist index on periodic axes
    double amplitude = 1.0;
    int normal_modes = 6;              // sine modes along an interval axis 0
    std::uint64_t seed = 2;
};

// Random band-limited field: Gaussian Fourier data on periodic axes with the top frequencies
// zeroed, and a random combination of sin(k pi (x_1 - lo) / X), k <= normal_modes, along an
// interval axis 0. Real valued when `real`.
GridFunction random_field(int components, const SpaceGrid& grid, const TimeAxis& time, const ForcingSpec& spec,
                          std::uint64_t stream, bool real = false);

// Fits --------------------------------------------------------------------------------

struct ConstantFit {
    double sup = 0.0;
    double median = 0.0;
    double spread = 0.0;  // max / min
    std::size_t rows = 0;
};
// Requires at least three finite rows; spread is infinite when the minimum is not positive.
ConstantFit fit_constant(const std::vector<double>& rows);

struct DecayFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double lo = 0.0;  // 95% band
    double hi = 0.0;
};
// Least-squares slope of log ratio against log kappa with a Student-t band. Requires at least
// three distinct kappas and positive ratios.
DecayFit decay_exponent(const std::vector<double>& kappas, const std::vector<double>& ratios);

// Configuration -----------------------------------------------------------------------

struct ExperimentConfig {
    std::string suite;
    std::vector<ProblemDims> dims;
    GeneratorSpec generator;
    ForcingSpec forcing;
    std::vector<double> lambdas;
    std::vector<double> kappas;           // whole-space kappas
    std::vector<double> boundary_kappas;  // half-space kappas
    std::vector<double> radii;
    std::vector<int> resolutions;         // grid points per axis, coarse first
    int trials = 1;
    std::map<std::string, double> tolerances;
    std::string out_dir = ".";
    std::string format = "csv";
    std::uint64_t seed = 1;
    // Names of the checks to run; empty runs them all. Work feeding only disabled checks is skipped.
    std::vector<std::string> checks;

    bool enabled(const std::string& check) const;
    double tolerance(const std::string& key) const;
    // Throws ConfigError for unknown suites, empty lists or bad values.
    void validate() const;
};

const std::vector<std::string>& suite_names();
// Default sweep of a suite; tolerances are the acceptance thresholds.
ExperimentConfig default_config(const std::string& suite);
// JSON object; absent keys keep the suite defaults (so "suite" is required).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_json(const ExperimentConfig& c);

// Reports -----------------------------------------------------------------------------

struct TrialRow {
    int trial = 0;
    std::string label;
    std::uint64_t input_hash = 0;
    std::vector<std::pair<std::string, double>> values;
    std::string error;

    double value(const std::string& key) const;  // NaN when absent
};

struct FittedConstant {
    std::string name;
    ConstantFit fit;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ExperimentReport {
    std::string suite;
    std::uint64_t config_hash = 0;
    std::vector<TrialRow> rows;
    std::vector<FittedConstant> constants;
    std::vector<CheckResult> checks;

    bool pass() const;
    const CheckResult* check(const std::string& name) const;
};

ExperimentReport run_suite(const ExperimentConfig& config);

// Long-format CSV: one line per (row, quantity); constants and checks follow as
// "constant" / "check" records. Columns are fixed by kReportSchema.
std::string report_csv(const ExperimentReport& r);
std::string report_json(const ExperimentReport& r);
// FNV-1a of report_json.
std::uint64_t report_hash(const ExperimentReport& r);
// Writes <out_dir>/<suite>.<format>; returns the path.
std::string write_report(const ExperimentReport& r, const std::string& out_dir, const std::string& format);

}  // namespace parabolab
