#include "parabolab/wholespace.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>

#include <unsupported/Eigen/MatrixFunctions>

#include "parabolab/spectral.hpp"
#include "quadrature.hpp"
#include "symbols.hpp"

namespace parabolab {

namespace {

std::mutex& cache_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

ModeSymbol mode_symbol(const CoefficientTensor& A, const Vec& xi) {
    ModeSymbol s;
    s.xi = xi;
    for (int i = 0; i < A.intervals(); ++i) s.per_interval.push_back(leading_form(A, i, xi));
    return s;
}

// Solver ---------------------------------------------------------------------------------

WholeSpaceSolver::WholeSpaceSolver(CoefficientTensor A, double lambda, SpaceGrid grid)
    : A_(std::move(A)), lambda_(lambda), grid_(std::move(grid)) {
    if (!(lambda_ >= 0.0)) throw DomainError("WholeSpaceSolver: lambda must be >= 0");
    if (!grid_.all_periodic()) throw DomainError("WholeSpaceSolver: grid must be a torus");
    if (grid_.dim() != A_.dims().d) throw DomainError("WholeSpaceSolver: grid dimension differs from d");
    std::vector<std::vector<double>> k;
    for (int a = 0; a < grid_.dim(); ++a) k.push_back(wavenumbers(grid_.axis(a)));
    symbols_.assign(static_cast<std::size_t>(A_.intervals()), {});
    for (int j = 0; j < grid_.size(); ++j) {
        const auto idx = grid_.unflat(j);
        Vec xi(grid_.dim());
        for (int a = 0; a < grid_.dim(); ++a) xi(a) = k[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        xi_.push_back(xi);
        auto ms = mode_symbol(A_, xi);
        for (int i = 0; i < A_.intervals(); ++i)
            symbols_[static_cast<std::size_t>(i)].push_back(std::move(ms.per_interval[static_cast<std::size_t>(i)]));
    }
}

std::shared_ptr<WholeSpaceSolver> WholeSpaceSolver::create(CoefficientTensor A, double lambda, SpaceGrid grid,
                                                           bool petrovskii_override) {
    require_solver_ellipticity(A, petrovskii_override, "whole-space solver");
    return std::shared_ptr<WholeSpaceSolver>(new WholeSpaceSolver(std::move(A), lambda, std::move(grid)));
}

CMat WholeSpaceSolver::generator(int mode, int interval) const {
    const CMat& s = symbols_[static_cast<std::size_t>(interval)][static_cast<std::size_t>(mode)];
    return s + lambda_ * CMat::Identity(s.rows(), s.cols());
}

const WholeSpaceSolver::Propagator& WholeSpaceSolver::propagator(int interval, double h) const {
    std::lock_guard<std::mutex> lock(cache_mutex());
    const auto key = std::make_pair(interval, h);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Propagator p;
    const int n = A_.dims().n;
    p.E.reserve(xi_.size());
    p.F.reserve(xi_.size());
    for (int j = 0; j < modes(); ++j) {
        const CMat G = generator(j, interval);
        if (n == 1) {
            const Complex z = G(0, 0) * h;
            const Complex e = std::exp(-z);
            Complex phi;
            if (std::abs(z) < 1e-2) {
                // (1 - e^{-z}) / z by its Taylor series
                phi = 1.0;
                Complex term = 1.0;
                for (int k = 1; k <= 8; ++k) {
                    term *= -z / static_cast<double>(k + 1);
                    phi += term;
                }
            } else {
                phi = (1.0 - e) / z;
            }
            p.E.push_back(CMat::Constant(1, 1, e));
            p.F.push_back(CMat::Constant(1, 1, h * phi));
        } else {
            CMat aug = CMat::Zero(2 * n, 2 * n);
            aug.topLeftCorner(n, n) = -G * h;
            aug.topRightCorner(n, n) = h * CMat::Identity(n, n);
            const CMat ex = aug.exp();
            if (!ex.allFinite()) throw NumericError("whole-space solver: matrix exponential failed");
            p.E.push_back(ex.topLeftCorner(n, n));
            p.F.push_back(ex.topRightCorner(n, n));
        }
    }
    // Arbitrary-time evaluation creates one entry per distinct length; keep the cache bounded.
    if (cache_.size() > 4096) cache_.clear();
    return cache_.emplace(key, std::move(p)).first->second;
}

CMat WholeSpaceSolver::advance(const CMat& u, const CMat& g, double t0, double t1) const {
    CMat cur = u;
    double a = t0;
    while (a < t1) {
        const int iv = A_.interval_at(a);
        double b = t1;
        if (iv < static_cast<int>(A_.breakpoints().size())) b = std::min(b, A_.breakpoints()[static_cast<std::size_t>(iv)]);
        const auto& p = propagator(iv, b - a);
        for (int j = 0; j < modes(); ++j) cur.col(j) = p.E[static_cast<std::size_t>(j)] * cur.col(j) + p.F[static_cast<std::size_t>(j)] * g.col(j);
        a = b;
    }
    return cur;
}

CMat WholeSpaceSolver::forcing_coefficients(const ForcingMap& forcing, Form form, int step) const {
    const int n = A_.dims().n;
    const int m = A_.dims().m;
    CMat g = CMat::Zero(n, modes());
    for (const auto& [alpha, f] : forcing) {
        if (alpha.dim() != grid_.dim()) throw DomainError("forcing: multi-index dimension mismatch");
        if (form == Form::NonDivergence && alpha.order() != 0)
            throw DomainError("forcing: non-divergence form takes a single field f");
        if (alpha.order() > m) throw DomainError("forcing: |alpha| must be <= m");
        if (f.components() != n || !(f.space() == grid_)) throw DomainError("forcing: layout mismatch");
        const CMat c = to_fourier(f.slice(step), grid_);
        for (int j = 0; j < modes(); ++j)
            g.col(j) += detail::derivative_symbol(xi_[static_cast<std::size_t>(j)], detail::nyquist_flags(grid_, j), alpha) * c.col(j);
    }
    return g;
}

WholeSpaceSolution WholeSpaceSolver::solve(const TimeAxis& time, std::vector<CMat> forcing, const CMat* initial) const {
    if (static_cast<int>(forcing.size()) != time.steps) throw DomainError("solve: one forcing block per step required");
    const int n = A_.dims().n;
    WholeSpaceSolution sol;
    sol.solver_ = shared_from_this();
    sol.time_ = time;
    sol.n_ = n;
    sol.xi_ = xi_;
    sol.states_.reserve(static_cast<std::size_t>(time.steps + 1));
    sol.states_.push_back(initial ? *initial : CMat::Zero(n, modes()));
    if (sol.states_.front().rows() != n || sol.states_.front().cols() != modes())
        throw DomainError("solve: initial state has wrong shape");
    for (int k = 0; k < time.steps; ++k) {
        const double t0 = time.start + k * time.dt;
        sol.states_.push_back(advance(sol.states_.back(), forcing[static_cast<std::size_t>(k)], t0, time.node(k)));
    }
    sol.forcing_ = std::move(forcing);
    return sol;
}

// Solution ---------------------------------------------------------------------------------

const SpaceGrid& WholeSpaceSolution::grid() const { return solver_->grid(); }

double WholeSpaceSolution::lambda() const { return solver_->lambda(); }

CMat WholeSpaceSolution::coefficients(double t) const {
    if (t <= time_.start) return states_.front();
    if (t > time_.end() * (1.0 + 1e-14) + 1e-300) throw DomainError("solution: time beyond the horizon");
    int k = static_cast<int>(std::ceil((t - time_.start) / time_.dt)) - 1;
    k = std::clamp(k, 0, time_.steps - 1);
    const double t0 = time_.start + k * time_.dt;
    if (t == time_.node(k)) return states_[static_cast<std::size_t>(k + 1)];
    return solver_->advance(states_[static_cast<std::size_t>(k)], forcing_[static_cast<std::size_t>(k)], t0, t);
}

CMat WholeSpaceSolution::coefficients_from_symbol(const CMat& c, const MultiIndex& alpha) const {
    if (alpha.order() == 0) return c;
    CMat out = c;
    for (int j = 0; j < modes(); ++j)
        out.col(j) *= detail::derivative_symbol(xi_[static_cast<std::size_t>(j)], detail::nyquist_flags(grid(), j), alpha);
    return out;
}

CMat WholeSpaceSolution::coefficients(double t, const MultiIndex& alpha) const {
    return coefficients_from_symbol(coefficients(t), alpha);
}

CMat WholeSpaceSolution::time_derivative_coefficients(double t) const {
    const CMat u = coefficients(t);
    if (t <= time_.start) return CMat::Zero(u.rows(), u.cols());
    int k = static_cast<int>(std::ceil((t - time_.start) / time_.dt)) - 1;
    k = std::clamp(k, 0, time_.steps - 1);
    const int iv = solver_->coefficients().interval_at(t);
    CMat out = forcing_[static_cast<std::size_t>(k)];
    for (int j = 0; j < modes(); ++j) out.col(j) -= solver_->generator(j, iv) * u.col(j);
    return out;
}

CMat WholeSpaceSolution::evaluate(double t, const MultiIndex& alpha, const std::vector<Vec>& points) const {
    return detail::synthesize(grid(), xi_, coefficients(t, alpha), points);
}

CMat WholeSpaceSolution::evaluate_time_derivative(double t, const std::vector<Vec>& points) const {
    return detail::synthesize(grid(), xi_, time_derivative_coefficients(t), points);
}

GridFunction WholeSpaceSolution::to_grid(const MultiIndex& alpha) const {
    GridFunction g(n_, grid(), time_);
    for (int k = 0; k < time_.steps; ++k)
        g.slice(k) = from_fourier(coefficients_from_symbol(states_[static_cast<std::size_t>(k + 1)], alpha), grid());
    return g;
}

GridFunction WholeSpaceSolution::to_grid() const { return to_grid(MultiIndex::zero(grid().dim())); }

double WholeSpaceSolution::time_integral(const std::function<double(double)>& f) const {
    const auto& gl = detail::gauss_unit(kTimeQuadrature);
    const auto& bps = solver_->coefficients().breakpoints();
    double total = 0.0;
    for (int k = 0; k < time_.steps; ++k) {
        double a = time_.start + k * time_.dt;
        const double end = time_.node(k);
        while (a < end) {
            double b = end;
            auto it = std::upper_bound(bps.begin(), bps.end(), a);
            if (it != bps.end()) b = std::min(b, *it);
            for (const auto& [x, w] : gl) total += w * (b - a) * f(a + x * (b - a));
            a = b;
        }
    }
    return total;
}

double WholeSpaceSolution::l2_norm(const MultiIndex& alpha) const { return l2_norms({alpha}).front(); }

std::vector<double> WholeSpaceSolution::l2_norms(const std::vector<MultiIndex>& alphas) const {
    const double vol = grid().cell_volume_total();
    // |(i xi)^alpha|^2 per mode and index
    std::vector<Vec> weights;
    for (const auto& a : alphas) {
        Vec w(modes());
        for (int j = 0; j < modes(); ++j)
            w(j) = std::norm(detail::derivative_symbol(xi_[static_cast<std::size_t>(j)], detail::nyquist_flags(grid(), j), a));
        weights.push_back(std::move(w));
    }
    std::vector<double> acc(alphas.size(), 0.0);
    const auto& gl = detail::gauss_unit(kTimeQuadrature);
    const auto& bps = solver_->coefficients().breakpoints();
    for (int k = 0; k < time_.steps; ++k) {
        double a = time_.start + k * time_.dt;
        const double end = time_.node(k);
        while (a < end) {
            double b = end;
            auto it = std::upper_bound(bps.begin(), bps.end(), a);
            if (it != bps.end()) b = std::min(b, *it);
            for (const auto& [x, w] : gl) {
                const Vec col = coefficients(a + x * (b - a)).colwise().squaredNorm().transpose();
                for (std::size_t i = 0; i < alphas.size(); ++i) acc[i] += w * (b - a) * vol * weights[i].dot(col);
            }
            a = b;
        }
    }
    for (auto& v : acc) v = std::sqrt(v);
    return acc;
}

double WholeSpaceSolution::time_derivative_l2_norm() const {
    const double vol = grid().cell_volume_total();
    return std::sqrt(time_integral([&](double t) { return vol * time_derivative_coefficients(t).squaredNorm(); }));
}

// Requests -----------------------------------------------------------------------------------

WholeSpaceSolution solve_whole_space(const SolveRequest& req) {
    if (req.time.steps < 1) throw DomainError("solve_whole_space: need at least one step");
    for (const auto& [alpha, f] : req.forcing)
        if (!(f.time() == req.time)) throw DomainError("solve_whole_space: forcing time axis differs from the request");
    auto solver = WholeSpaceSolver::create(req.A, req.lambda, req.grid, req.petrovskii_override);
    std::vector<CMat> g;
    g.reserve(static_cast<std::size_t>(req.time.steps));
    for (int k = 0; k < req.time.steps; ++k) g.push_back(solver->forcing_coefficients(req.forcing, req.form, k));
    if (req.initial) {
        if (req.initial->components() != req.A.dims().n || !(req.initial->space() == req.grid))
            throw DomainError("solve_whole_space: initial data layout mismatch");
        const CMat u0 = to_fourier(req.initial->slice(0), req.grid);
        return solver->solve(req.time, std::move(g), &u0);
    }
    return solver->solve(req.time, std::move(g));
}

namespace {

double forcing_norm(const ForcingMap& f, const MultiIndex& alpha) {
    auto it = f.find(alpha);
    return it == f.end() ? 0.0 : lp_norm(it->second, 2.0);
}

}  // namespace

EstimateRatio divergence_estimate_ratio(const SolveRequest& req, const WholeSpaceSolution& sol) {
    if (!(req.lambda > 0.0)) throw DomainError("divergence_estimate_ratio: lambda must be positive");
    const int d = req.A.dims().d, m = req.A.dims().m;
    EstimateRatio r;
    const auto alphas = enumerate_up_to(d, m);
    const auto norms = sol.l2_norms(alphas);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto& a = alphas[i];
        const double lw = std::pow(req.lambda, 1.0 - a.order() / (2.0 * m));
        const double rw = std::pow(req.lambda, a.order() / (2.0 * m));
        const double du = lw * norms[i];
        const double fa = rw * forcing_norm(req.forcing, a);
        r.lhs += du;
        r.rhs += fa;
        r.lhs_terms.emplace_back("D" + a.str() + "u", du);
        r.rhs_terms.emplace_back("f" + a.str(), fa);
    }
    if (!(r.rhs > 0.0)) throw DegenerateInputError("divergence_estimate_ratio: all f_alpha vanish");
    r.ratio = r.lhs / r.rhs;
    return r;
}

EstimateRatio nondivergence_estimate_ratio(const SolveRequest& req, const WholeSpaceSolution& sol) {
    if (!(req.lambda > 0.0)) throw DomainError("nondivergence_estimate_ratio: lambda must be positive");
    const int d = req.A.dims().d, m = req.A.dims().m;
    EstimateRatio r;
    const double ut = sol.time_derivative_l2_norm();
    r.lhs += ut;
    r.lhs_terms.emplace_back("u_t", ut);
    const auto alphas = enumerate_up_to(d, 2 * m);
    const auto norms = sol.l2_norms(alphas);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto& a = alphas[i];
        const double du = std::pow(req.lambda, 1.0 - a.order() / (2.0 * m)) * norms[i];
        r.lhs += du;
        r.lhs_terms.emplace_back("D" + a.str() + "u", du);
    }
    r.rhs = forcing_norm(req.forcing, MultiIndex::zero(d));
    r.rhs_terms.emplace_back("f", r.rhs);
    if (!(r.rhs > 0.0)) throw DegenerateInputError("nondivergence_estimate_ratio: f vanishes");
    r.ratio = r.lhs / r.rhs;
    return r;
}

double agmon_lift_check(double lambda, int m, int points) {
    if (!(lambda > 0.0)) throw DomainError("agmon_lift_check: lambda must be positive");
    if (m < 1 || points < 2) throw DomainError("agmon_lift_check: bad arguments");
    const double w = std::pow(lambda, 1.0 / (2 * m));
    // zeta = a cos(wy) + b sin(wy); D maps (a, b) to w (b, -a).
    auto derive = [&](double a, double b, int times) {
        for (int k = 0; k < times; ++k) {
            const double na = w * b, nb = -w * a;
            a = na;
            b = nb;
        }
        return std::make_pair(a, b);
    };
    const auto [a2m, b2m] = derive(1.0, 1.0, 2 * m);
    const double sign = m % 2 == 0 ? 1.0 : -1.0;
    double dev = 0.0;
    for (int i = 0; i < points; ++i) {
        const double y = 2.0 * kPi * i / (points - 1);
        const double c = std::cos(w * y), s = std::sin(w * y);
        const double zeta = c + s;
        const double lhs = sign * (a2m * c + b2m * s);
        dev = std::max(dev, std::abs(lhs - lambda * zeta));
    }
    dev = std::max(dev, std::abs(std::cos(0.0) + std::sin(0.0) - 1.0));
    dev = std::max(dev, std::abs(std::abs(derive(1.0, 1.0, m).first) - std::sqrt(lambda)));
    return dev;
}

}  // namespace parabolab
