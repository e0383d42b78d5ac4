#pragma once

#include <string>
#include <utility>
#include <vector>

#include "parabolab/halfspace.hpp"
#include "parabolab/sampling.hpp"
#include "parabolab/wholespace.hpp"

namespace parabolab {

// Smallness budget A^#_{R0} <= rho on the spatial oscillation of the leading coefficients.
struct OscillationBudget {
    double R0 = 1.0;
    double rho = 0.0;

    void validate() const;
    bool admits(double a_sharp_value) const { return a_sharp_value <= rho; }
};

// Finite family of cylinders Q_r(t_k, x_j) centred on grid nodes: every `stride`-th node in
// time and along each axis, radii listed in `radii`. Cylinders that leave the grid (interval
// axes, or the time range unless `periodic_time`) are not members. Periodic axes wrap.
struct CylinderFamily {
    std::vector<double> radii;
    int m = 1;
    int stride = 1;
    bool periodic_time = false;

    // radii R 2^{-j} down to the first radius whose cylinder is the centre node alone
    static CylinderFamily dyadic(const GridFunction& g, double R, int m, int stride = 1,
                                 bool periodic_time = false);
    // Throws DomainError for bad radii and UnderResolvedError when no member fits the grid.
    void validate(const GridFunction& g) const;
};

// (|g - (g)_Q|)_Q over the grid nodes inside Q.
double mean_oscillation(const GridFunction& g, const ParabolicCylinder& q,
                        std::size_t min_nodes = kMinCylinderNodes);
// Time average of the spatial oscillation (|A(s,.) - (A(s,.))_{B_r}|)_{B_r}. Components of A
// are the entries of one coefficient block, measured in the Frobenius norm.
double osc_x(const GridFunction& A, const ParabolicCylinder& q, std::size_t min_nodes = kMinCylinderNodes);

// sup over family centres, radii r <= R and blocks of osc_x: a lower bound for A^#_R.
double a_sharp(const std::vector<GridFunction>& blocks, double R, const CylinderFamily& family);
double a_sharp(const GridFunction& A, double R, const CylinderFamily& family);

// Pointwise sup over the member cylinders containing each node of (|g - (g)_Q|)_Q (sharp)
// and (|g|)_Q (maximal). Nodes covered by no member get 0.
struct SharpMaximal {
    GridFunction sharp;
    GridFunction maximal;
};
SharpMaximal sharp_and_maximal(const GridFunction& g, const CylinderFamily& family);
GridFunction sharp_function(const GridFunction& g, const CylinderFamily& family);
GridFunction maximal_function(const GridFunction& g, const CylinderFamily& family);

struct FsRatio {
    double fs = 0.0;  // ||g||_p / ||g^#||_p
    double hl = 0.0;  // ||M g||_p / ||g||_p
    double g_norm = 0.0;
    double sharp_norm = 0.0;
    double maximal_norm = 0.0;
};
// g must have zero mean over the grid. Constant g is degenerate.
FsRatio fs_ratio(const GridFunction& g, double p, const CylinderFamily& family);

struct WholeSpaceOscillation {
    double lhs = 0.0;
    std::vector<std::pair<std::string, double>> lhs_terms;
    double kappa_decay = 0.0;    // kappa^{-1}
    double solution_term = 0.0;  // sum_k lambda^{e_k} (|D^k u|^2)^{1/2} over Q_{kappa r}
    double kappa_growth = 0.0;   // kappa^{m + d/2}
    double forcing_term = 0.0;
    double rhs = 0.0;  // kappa_decay * solution_term + kappa_growth * forcing_term
    double implied = 0.0;
};

// Mean oscillation estimate for a whole-space solution on Q_r(X0) against Q_{kappa r}(X0).
// Divergence form: osc D^m u + lambda^{1/2} osc u on the left, k <= m and every f_alpha on
// the right. Non-divergence form: osc D^{2m} u + lambda osc u, k <= 2m and f.
// Requires kappa >= 8. The solution is periodic in x, so Q_{kappa r} may exceed the torus;
// before S it is extended by zero unless initial data was given.
WholeSpaceOscillation wholespace_mean_osc_check(const SolveRequest& req, const WholeSpaceSolution& sol,
                                                const CylinderQuery& query, const CylinderSampling& sampling = {});

// Left side over Q_{R/kappa}(X0) divided by the solution term over the fixed Q_R(X0).
DecayMeasurement wholespace_osc_decay(const SolveRequest& req, const WholeSpaceSolution& sol,
                                      const ParabolicCylinder& outer, const std::vector<double>& kappas,
                                      const CylinderSampling& sampling = {});

}  // namespace parabolab
