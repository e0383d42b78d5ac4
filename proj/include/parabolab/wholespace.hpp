#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "parabolab/ellipticity.hpp"
#include "parabolab/grid.hpp"

namespace parabolab {

enum class Form { Divergence, NonDivergence };

// Forcing fields keyed by multi-index. Divergence form: f_alpha for |alpha| <= m (absent
// keys are zero). Non-divergence form: the single field f under the zero index.
using ForcingMap = std::map<MultiIndex, GridFunction>;

struct SolveRequest {
    CoefficientTensor A;
    double lambda = 0.0;
    Form form = Form::Divergence;
    SpaceGrid grid;
    TimeAxis time;
    ForcingMap forcing;
    // u(S); zero when absent. Only its first time slice is used.
    std::optional<GridFunction> initial;
    // Accept Petrovskii-only tensors (the default requires Legendre-Hadamard positivity).
    bool petrovskii_override = false;
};

// Per-interval matrices sum_{|a|=|b|=m} xi^{a+b} A^{ab}.
struct ModeSymbol {
    Vec xi;
    std::vector<CMat> per_interval;
};
ModeSymbol mode_symbol(const CoefficientTensor& A, const Vec& xi);

class WholeSpaceSolver;

// Exact Fourier representation of the solution: the state at every time node plus the
// held forcing of every step, so u can be re-evaluated at any time in (S, T].
class WholeSpaceSolution {
public:
    const SpaceGrid& grid() const;
    const TimeAxis& time() const { return time_; }
    int components() const { return n_; }
    int modes() const { return static_cast<int>(xi_.size()); }
    const Vec& wavevector(int mode) const { return xi_[static_cast<std::size_t>(mode)]; }
    double lambda() const;

    // Fourier coefficients (components x modes) of D^alpha u at time t. Zero before S
    // unless initial data was given (then the initial state).
    CMat coefficients(double t, const MultiIndex& alpha) const;
    CMat coefficients(double t) const;
    // u_t from the equation residual g - (m(xi) + lambda) u.
    CMat time_derivative_coefficients(double t) const;
    // Stored state after step k (k = -1 gives the initial state).
    const CMat& node_state(int k) const { return states_[static_cast<std::size_t>(k + 1)]; }

    // Values of D^alpha u at arbitrary points (components x points).
    CMat evaluate(double t, const MultiIndex& alpha, const std::vector<Vec>& points) const;
    CMat evaluate_time_derivative(double t, const std::vector<Vec>& points) const;
    // D^alpha u sampled at the time nodes of the request grid.
    GridFunction to_grid(const MultiIndex& alpha) const;
    GridFunction to_grid() const;

    // ||D^alpha u||_{L2((S,T) x torus)} by Parseval and Gauss-Legendre in time.
    double l2_norm(const MultiIndex& alpha) const;
    std::vector<double> l2_norms(const std::vector<MultiIndex>& alphas) const;
    double time_derivative_l2_norm() const;

    // Gauss points per step (and per breakpoint piece) used by the norms.
    static constexpr int kTimeQuadrature = 6;

private:
    friend class WholeSpaceSolver;
    CMat coefficients_from_symbol(const CMat& c, const MultiIndex& alpha) const;
    double time_integral(const std::function<double(double)>& f) const;

    std::shared_ptr<const WholeSpaceSolver> solver_;
    TimeAxis time_;
    int n_ = 1;
    std::vector<Vec> xi_;
    std::vector<CMat> states_;   // steps + 1 entries of n x modes
    std::vector<CMat> forcing_;  // per step, n x modes
};

// Precomputes per-mode symbols and caches propagators exp(-G h), h phi_1(-G h) with
// G = m(xi) + lambda, keyed by (interval, h). Reusable across forcing trials.
class WholeSpaceSolver : public std::enable_shared_from_this<WholeSpaceSolver> {
public:
    static std::shared_ptr<WholeSpaceSolver> create(CoefficientTensor A, double lambda, SpaceGrid grid,
                                                    bool petrovskii_override = false);

    const CoefficientTensor& coefficients() const { return A_; }
    double lambda() const { return lambda_; }
    const SpaceGrid& grid() const { return grid_; }
    int modes() const { return static_cast<int>(xi_.size()); }
    const std::vector<Vec>& wavevectors() const { return xi_; }
    // m(xi) + lambda on an interval.
    CMat generator(int mode, int interval) const;

    // Forcing coefficients per step (n x modes each, zero-order hold) and optional initial state.
    WholeSpaceSolution solve(const TimeAxis& time, std::vector<CMat> forcing, const CMat* initial = nullptr) const;

    // Advances coefficients `u` from t0 to t1 under held forcing g, splitting at breakpoints.
    CMat advance(const CMat& u, const CMat& g, double t0, double t1) const;

    // (i xi)^alpha g summed into the divergence right-hand side.
    CMat forcing_coefficients(const ForcingMap& forcing, Form form, int step) const;

private:
    WholeSpaceSolver(CoefficientTensor A, double lambda, SpaceGrid grid);
    struct Propagator {
        std::vector<CMat> E;  // exp(-G h)
        std::vector<CMat> F;  // h phi_1(-G h)
    };
    const Propagator& propagator(int interval, double h) const;

    CoefficientTensor A_;
    double lambda_;
    SpaceGrid grid_;
    std::vector<Vec> xi_;
    std::vector<std::vector<CMat>> symbols_;  // [interval][mode]
    mutable std::map<std::pair<int, double>, Propagator> cache_;
};

// Checks the ellipticity precondition and runs the solver.
WholeSpaceSolution solve_whole_space(const SolveRequest& req);

struct EstimateRatio {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    std::vector<std::pair<std::string, double>> lhs_terms;
    std::vector<std::pair<std::string, double>> rhs_terms;
};

// sum_{|a|<=m} lambda^{1-|a|/2m} ||D^a u|| / sum_{|a|<=m} lambda^{|a|/2m} ||f_a||
EstimateRatio divergence_estimate_ratio(const SolveRequest& req, const WholeSpaceSolution& sol);
// (||u_t|| + sum_{|a|<=2m} lambda^{1-|a|/2m} ||D^a u||) / ||f||
EstimateRatio nondivergence_estimate_ratio(const SolveRequest& req, const WholeSpaceSolution& sol);

// zeta(y) = cos(w y) + sin(w y), w = lambda^{1/2m}: max deviation of (-1)^m D^{2m} zeta = lambda zeta
// on `points` samples of [0, 2 pi], zeta(0) = 1 and |D^m zeta(0)| = lambda^{1/2}.
double agmon_lift_check(double lambda, int m, int points = 257);

}  // namespace parabolab
