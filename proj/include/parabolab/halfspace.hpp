#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "parabolab/sampling.hpp"
#include "parabolab/wholespace.hpp"

namespace parabolab {

// u_t + (-1)^m L_0 u + lambda u = forcing on (0, X) x torus^{d-1} with
// u = D_1 u = ... = D_1^{m-1} u = 0 at x_1 = 0 and x_1 = X.
struct HalfspaceProblem {
    CoefficientTensor A;
    double lambda = 0.0;
    Form form = Form::Divergence;
    SpaceGrid grid;  // axis 0: interval [0, X] with M >= 8m + 1 nodes; other axes periodic
    TimeAxis time;
    ForcingMap forcing;  // held constant over each step at its time-node value
    std::optional<GridFunction> initial;  // projected onto the clamped space
    bool petrovskii_override = false;
};

// A(t) D_1^{2m} + sum_{j >= 2} D_j^{2m} with A(t) = A^{aa}, a = (m, 0, ..., 0).
struct SpecialOperator {
    ProblemDims dims;
    std::vector<double> breakpoints;
    std::vector<CMat> blocks;  // A(t) on each interval, n x n

    CoefficientTensor tensor() const;
    // min Re(w^H A w) / |w|^2 over `probes` random w and all intervals.
    double probe_margin(int probes, std::uint64_t seed) const;
};

// Galerkin solution, nodal in x_1 and Fourier in x'. The weak form pairs the normal
// derivatives E_a = Avg^{m-a} Delta^a / h^a, all living on one staggered level (nodes for
// even m, midpoints for odd m), on a grid padded with m - 1 ghost nodes per side that the
// clamp conditions eliminate. Each time step is split into pieces at coefficient
// breakpoints; states are stored at every piece end.
class HalfspaceSolution {
public:
    struct Piece {
        double t0 = 0.0;
        double t1 = 0.0;
        int interval = 0;
        int step = 0;
    };

    const SpaceGrid& grid() const { return grid_; }
    const TimeAxis& time() const { return time_; }
    int components() const { return n_; }
    int half_order() const { return m_; }
    const std::vector<Piece>& pieces() const { return pieces_; }
    // Mixed-representation state (components x grid nodes) after piece i; i = -1 is the start.
    const CMat& piece_state(int i) const { return states_[static_cast<std::size_t>(i + 1)]; }
    // State at time node k (k = -1 for the start).
    const CMat& node_state(int k) const;
    // Forcing of step k in mixed representation.
    const CMat& step_forcing(const MultiIndex& alpha, int k) const;
    const std::vector<MultiIndex>& forcing_indices() const { return forcing_keys_; }

    // Tangential multiplier (i xi')^{alpha'} of every mode, Nyquist dropped for odd orders.
    const CVec& tangential_symbol(const MultiIndex& alpha) const;

    // Nodal D^alpha u at every time node; normal derivatives by 6th-order finite differences.
    GridFunction to_grid(const MultiIndex& alpha) const;
    GridFunction to_grid() const { return to_grid(MultiIndex::zero(grid_.dim())); }
    // Mixed-representation nodal D^alpha of a mixed state.
    CMat apply(const MultiIndex& alpha, const CMat& mixed) const;
    // D^alpha of a mixed state with the assembly operators: components x (level points * modes),
    // column j * modes + r. Requires alpha_1 <= m.
    CMat level_apply(const MultiIndex& alpha, const CMat& mixed) const;
    // Quadrature weights of the staggered level (restricted to [0, X]).
    const Vec& level_weights() const;

    // Values of D^alpha u (or of its even reflection when x_1 < 0) at arbitrary points, by
    // local Lagrange interpolation in x_1 and in time and Fourier synthesis in x'.
    CMat evaluate(double t, const MultiIndex& alpha, const std::vector<Vec>& points) const;
    // Same for a stacked family of derivatives (rows: index-major, then component).
    CMat evaluate_stack(double t, const std::vector<MultiIndex>& alphas, const std::vector<Vec>& points) const;
    CMat evaluate_forcing(double t, const MultiIndex& alpha, const std::vector<Vec>& points) const;

    // Max residual of the discrete clamp conditions over all stored states.
    double trace_violation() const;
    // Per piece |E_lhs - E_rhs| / max(|E_lhs|, |E_rhs|) of the discrete energy identity, with
    // u the piece midpoint and u_t the piece difference quotient.
    std::vector<double> energy_residuals() const;

    // L2 norm over (S, T) x slab, piecewise midpoint in time. Assembly operators and level
    // weights by default; nodal finite differences with trapezoid weights when `nodal`.
    double l2_norm(const MultiIndex& alpha, bool nodal = false) const;
    double time_derivative_l2_norm() const;
    // Forcing norm in the pairing used by the load (level weights), or nodal trapezoid.
    double forcing_l2_norm(const MultiIndex& alpha, bool nodal = false) const;

    // Trapezoid weights of the normal nodes.
    const Vec& norm_weights() const { return H_; }

    struct Shared;  // operators shared by solutions of one discretization

private:
    friend HalfspaceSolution solve_halfspace(const HalfspaceProblem&);

    SpaceGrid grid_;
    TimeAxis time_;
    int n_ = 1;
    int m_ = 1;
    double lambda_ = 0.0;
    Vec H_;
    std::shared_ptr<const Shared> shared_;
    std::vector<Piece> pieces_;
    std::vector<CMat> states_;
    std::vector<int> node_piece_;  // last piece of each step
    std::vector<MultiIndex> forcing_keys_;
    std::vector<std::vector<CMat>> forcing_;  // [key][step]
    CoefficientTensor A_;
    mutable std::map<MultiIndex, CVec> symbol_cache_;

    double piece_norm2(int piece, const std::function<CMat(const CMat&, const CMat&)>& field, bool nodal) const;
    CMat normal_apply(int order, const CMat& mixed) const;
};

HalfspaceSolution solve_halfspace(const HalfspaceProblem& prob);

// Divergence: sum_{|a|<=m} lambda^{1-|a|/2m} ||D^a u|| / sum lambda^{|a|/2m} ||f_a||, assembly
// derivatives. Nodal finite differences for the non-divergence form:
// (||u_t|| + sum_{|a|<=2m} lambda^{1-|a|/2m} ||D^a u||) / ||f||.
EstimateRatio halfspace_l2_ratio(const HalfspaceProblem& prob, const HalfspaceSolution& sol);
// (sum_{|a|=m} ||D^a D_{x'}^m u|| + lambda ||u||) / ||f|| (non-divergence data).
EstimateRatio tangential_regularity_ratio(const HalfspaceProblem& prob, const HalfspaceSolution& sol);
// ||D_1^{2m} u|| / (sum_{j=1}^{2m} ||D_1^{2m-j} D_{x'}^j u|| + ||f||).
EstimateRatio normal_derivative_bound(const HalfspaceProblem& prob, const HalfspaceSolution& sol);

struct BoundaryOscillation {
    double lhs = 0.0;
    std::vector<std::pair<std::string, double>> lhs_terms;
    double kappa_decay = 0.0;   // kappa^{-1/2}
    double solution_term = 0.0; // sum_k lambda^{...} (|E D^k u|^2)^{1/2} over Q_{kappa r}
    double kappa_growth = 0.0;  // kappa^{m + d/2}
    double forcing_term = 0.0;  // forcing sum over Q_{kappa r}
    double rhs = 0.0;           // kappa_decay * solution_term + kappa_growth * forcing_term
    double implied = 0.0;       // lhs / rhs (0 when both vanish)
};

// Mean oscillation of E(D_{x'}^m u) (divergence) or E(D_{x'}^{2m} u) (non-divergence) over
// Q_r(X0), X0 in the closed half space, against the right-hand side over Q_{kappa r}(X0).
BoundaryOscillation boundary_mean_osc_check(const HalfspaceProblem& prob, const HalfspaceSolution& sol,
                                            const CylinderQuery& query, const CylinderSampling& sampling = {});

// Mean oscillation of E(D_1^{2m} u) over Q_{R/kappa}(X0) divided by
// sum_{k<=2m} lambda^{1-k/2m} (|E D^k u|^2)^{1/2} over Q_R(X0), for each kappa.
struct DecayMeasurement {
    std::vector<double> kappas;
    std::vector<double> ratios;
    double exponent = 0.0;
};
DecayMeasurement special_op_osc_decay(const HalfspaceProblem& prob, const HalfspaceSolution& sol,
                                      const ParabolicCylinder& outer, const std::vector<double>& kappas,
                                      const CylinderSampling& sampling = {});
// Same construction for the boundary check: lhs of boundary_mean_osc_check over Q_{R/kappa}
// divided by its solution_term over Q_R.
DecayMeasurement boundary_osc_decay(const HalfspaceProblem& prob, const HalfspaceSolution& sol,
                                    const ParabolicCylinder& outer, const std::vector<double>& kappas,
                                    const CylinderSampling& sampling = {});

// max |D_1^k (D_1^{2m} u)| at x_1 = 0 for k <= m - 1 over time nodes and tangential nodes,
// relative to max |D_1^{2m} u|, by one-sided differences.
double special_trace_violation(const HalfspaceSolution& sol, int accuracy = 4);

// Discrete C^{1/2} seminorm over node pairs in Q_r^+(X0) (distance |t-s|^{1/4} + |x-y|^{1/2})
// divided by ||u||_{L2(Q_{4r}^+(X0))}. At most `max_nodes` nodes (evenly thinned) enter the seminorm.
double holder_ratio(const GridFunction& u, const ParabolicCylinder& inner, std::size_t max_nodes = 600);

}  // namespace parabolab
