#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "parabolab/grid.hpp"

namespace parabolab {

// Weights c_1..c_{2 tau} with sum_k (-1/k)^j c_k = 1 for j < 2 tau.
struct ExtensionCoefficients {
    int tau = 1;
    std::vector<double> c;
    double residual = 0.0;  // max_j |sum_k (-1/k)^j c_k - 1| of the rounded c_k
};

// Beyond this the system is too ill-conditioned for double precision (c_k grows like 10^{tau}).
inline constexpr int kMaxExtensionOrder = 6;

// Exact rational solution (Lagrange basis of the nodes -1/k evaluated at 1), rounded once.
ExtensionCoefficients vandermonde_coefficients(int tau);

// Half-space fields live on grids whose axis 0 is an interval [0, X]; w is taken as zero
// for x_1 > X. The result lives on [-negative_extent, X] with the same spacing and equals
// sum_k c_k w(-x_1/k, x') for x_1 < 0. Off-node values use local Lagrange interpolation on
// `interpolation_points` nodes (0 picks max(2 tau + 4, 8)).
GridFunction extend_tau(const GridFunction& w, const ExtensionCoefficients& coeffs, double negative_extent,
                        int interpolation_points = 0);

// g(-x_1, x') = g(x_1, x') on [-X, X].
GridFunction even_extend(const GridFunction& g);
// Nodes with x_1 >= 0 of a field on [-a, X] (x_1 = 0 must be a node).
GridFunction restrict_to_halfspace(const GridFunction& full);

struct MatchingDefect {
    int order = 0;
    double left = 0.0;   // D_1^j from x_1 < 0 where the defect is largest
    double right = 0.0;  // D_1^j from x_1 > 0 at the same place
    double defect = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// One-sided derivatives of an extended field at x_1 = 0 for j = 0..max_order with
// `accuracy`-order stencils. Tolerance: tolerance_factor * h^2 * max(1, max |right|).
std::vector<MatchingDefect> one_sided_matching(const GridFunction& extended, int max_order, int accuracy = 6,
                                               double tolerance_factor = 1.0);

// D_1^j along the interval axis 0 with `accuracy`-order stencils (one-sided at the ends).
GridFunction normal_derivative(const GridFunction& u, int order, int accuracy = 6);

struct InterpolationTerms {
    double lhs = 0.0;         // sum over tangential a' with |a'| = m - k of ||D_1^k D^{a'} u||_p
    double normal = 0.0;      // ||D_1^m u||_p
    double tangential = 0.0;  // sum_{j >= 2} ||D_j^m u||_p
    double constant = 0.0;    // N(eps) used
    double rhs = 0.0;         // eps * normal + N * tangential
    bool pass = false;
};

// Module-level N(eps) for ||D_1^k D_{x'}^{m-k} u|| <= eps ||D_1^m u|| + N sum_j ||D_j^m u||.
// The eps-dependence is the Young exponent eps^{-k/(m-k)}; the prefactor was calibrated on a
// separate random corpus and carries a safety factor of 2.
double interpolation_constant(int m, int k, double epsilon);

// Requires d >= 2 and 0 <= k <= m-1. Tangential derivatives are spectral.
InterpolationTerms interpolation_check(const GridFunction& u, int m, int k, double epsilon, double p = 2.0,
                                       int accuracy = 6);

// Field on a slab given as a function of (x_1, x').
using SlabProfile = std::function<double(double, const Vec&)>;

// lhs/normal of interpolation_check for u(x_1/s, x') at s = s1 and s2, returned as the
// log-log slope. The prediction is m - k.
double anisotropic_exponent(const SlabProfile& u, const SpaceGrid& slab, int m, int k, double s1, double s2,
                            double p = 2.0);

// Lipschitz graph x_1 = phi(x') sampled on a (d-1)-torus, evaluated between nodes by
// multilinear interpolation (which keeps the nodal Lipschitz constant).
struct BoundaryGeometry {
    SpaceGrid tangential;
    Vec phi;
    double rho1 = 1.0;
    int kernel_power = 6;           // eta(y) = c (1 - |y|^2)^power on the unit ball
    double kernel_normalizer = 1.0;  // c
    std::optional<GridFunction> phi_tilde;  // mollified graph on a slab, set by boundary_mollify
    std::vector<double> growth;             // fitted N_k, set by boundary_mollify

    double phi_at(const Vec& xp) const;
    double kernel(const Vec& y) const;
    double kernel_integral() const;
    // Max slope between neighbouring nodes (axis and diagonal neighbours).
    double measured_lipschitz() const;
    // tilde phi(x_1, x') = int eta(y') phi(x' - x_1 y') dy'. Exact up to rounding for d - 1 = 1
    // (the integrand is piecewise polynomial); tensor Gauss quadrature otherwise.
    double mollified(double x1, const Vec& xp) const;
};

// Validates the Lipschitz bound and normalizes eta to unit integral.
BoundaryGeometry make_boundary_geometry(SpaceGrid tangential, Vec phi, double rho1, int kernel_power = 6);

// Samples tilde phi on `slab` and measures N_k = max |D^k tilde phi| x_1^{k-1} / rho1 for
// k = 1..max_order over x_1 in `depths` and the tangential nodes (N_0 reports
// max |tilde phi - phi| / (x_1 rho1)).
BoundaryGeometry boundary_mollify(BoundaryGeometry geo, const SpaceGrid& slab, int max_order,
                                  const std::vector<double>& depths);

// max over multi-indices |a| = k of |D^a tilde phi(x_1, x')| by central differences at scale x_1.
double mollified_derivative(const BoundaryGeometry& geo, double x1, const Vec& xp, int k);

// y_1 = x_1 - phi(x'), y_j = x_j.
struct FlatteningMap {
    const BoundaryGeometry* geo = nullptr;
    Vec forward(const Vec& x) const;
    Vec inverse(const Vec& y) const;
    // det of the Jacobian of forward, off-diagonal entries by central differences.
    double jacobian_determinant(const Vec& x, double h = 1e-6) const;
};
FlatteningMap flatten_map(const BoundaryGeometry& geo);

}  // namespace parabolab
