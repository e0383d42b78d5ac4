#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parabolab/core.hpp"

namespace parabolab {

// Leading coefficients A^{ab}(t), piecewise constant in t. Interval i is
// [breakpoints[i-1], breakpoints[i]) with the outer intervals unbounded, so there are
// breakpoints.size() + 1 intervals. Each interval stores the (N n) x (N n) block matrix
// whose (a, b) block of size n x n is A^{alpha_a beta_b}, where alpha_a runs over
// enumerate_multiindices(d, m).
class CoefficientTensor {
public:
    CoefficientTensor() = default;
    CoefficientTensor(ProblemDims dims, std::vector<double> breakpoints, std::vector<CMat> blocks,
                      double delta_inv);
    // Single interval.
    CoefficientTensor(ProblemDims dims, CMat block, double delta_inv);
    // A^{ab} = delta_{ab} I_n, the identity symbol.
    static CoefficientTensor identity(ProblemDims dims);

    const ProblemDims& dims() const { return dims_; }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    int intervals() const { return static_cast<int>(blocks_.size()); }
    int interval_at(double t) const;
    double delta_inv() const { return delta_inv_; }

    const CMat& big(int interval) const { return blocks_[static_cast<std::size_t>(interval)]; }
    CMat& big(int interval) { return blocks_[static_cast<std::size_t>(interval)]; }
    const CMat& big_at(double t) const { return big(interval_at(t)); }
    CMat block(int interval, int a, int b) const;

    CoefficientTensor scaled(double c) const;
    // Largest entry modulus over all intervals.
    double max_entry() const;

private:
    ProblemDims dims_;
    std::vector<MultiIndex> indices_;
    std::vector<double> breakpoints_;
    std::vector<CMat> blocks_;
    double delta_inv_ = 1.0;
};

// sum_{|a|=|b|=m} xi^{a+b} A^{ab} on one interval. Zero matrix at xi = 0.
CMat leading_form(const CoefficientTensor& A, int interval, const Vec& xi);

struct SymbolMatrix {
    CMat value;
    double t = 0.0;
    Vec xi;
};

// |xi|^{-2m} sum xi^a xi^b A^{ab}(t). Throws DomainError at xi = 0.
SymbolMatrix symbol_matrix(const CoefficientTensor& A, double t, const Vec& xi);

// Sampling of the unit sphere followed by Nelder-Mead refinement. The minimum found is an
// upper estimate of the true sphere minimum (i.e. a lower bound is not certified).
struct SphereSearch {
    int samples = 2000;
    int refine_starts = 10;
    double tolerance = 1e-13;
    std::uint64_t seed = 0x5eed;
};

double lh_constant(const CoefficientTensor& A, double t, const SphereSearch& s = {});
double petrovskii_margin(const CoefficientTensor& A, double t, const SphereSearch& s = {});
double strong_ellipticity_constant(const CoefficientTensor& A, double t);

// Minimizer found by the sphere search together with the value.
struct SphereMinimum {
    double value = 0.0;
    Vec xi;
};
SphereMinimum lh_minimum(const CoefficientTensor& A, double t, const SphereSearch& s = {});
SphereMinimum petrovskii_minimum(const CoefficientTensor& A, double t, const SphereSearch& s = {});

// Minimal eigenvalue of (M + M^H)/2.
double min_hermitian_eig(const CMat& m);

// Solver precondition: Legendre-Hadamard constant > 0 on every interval, or (with the
// override) Petrovskii margin > 0. Throws EllipticityError naming `who` otherwise.
void require_solver_ellipticity(const CoefficientTensor& A, bool petrovskii_override, const std::string& who);

struct EnergyCertificate {
    double epsilon = 1.0;
    CMat B;
    double delta1 = 0.0;
    CMat U;
    // Present only for certificates built from a Schur decomposition, A = Q^H U Q.
    CMat Q;
    double unitarity_residual = 0.0;
    double reconstruction_residual = 0.0;

    bool has_schur() const { return Q.size() > 0; }
    // min eig Herm(B U), recomputed.
    double recheck() const;
};

// Finds the first eps in 1, 1/2, 1/4, ... (down to 2^-60) such that Herm(BU) is positive
// definite for B = diag(eps^{n-1}, ..., eps, 1), and reports delta1 = min eig Herm(BU).
// Requires U upper triangular, |U_ij| <= 1/delta and Re U_ii >= delta.
EnergyCertificate weighted_diag_certificate(const CMat& U, double delta);

// Schur decomposition of the normalized symbol at (t, xi) composed with the weighted
// diagonal certificate. Refused when the symbol has an eigenvalue with Re <= 0.
EnergyCertificate schur_energy_certificate(const CoefficientTensor& A, double t, const Vec& xi);

}  // namespace parabolab
