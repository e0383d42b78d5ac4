#include "parabolab/oscillation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>


namespace parabolab {

void OscillationBudget::validate() const {
    if (!(R0 > 0.0 && R0 <= 1.0)) throw DomainError("OscillationBudget: R0 must lie in (0, 1]");
    if (!(rho >= 0.0)) throw DomainError("OscillationBudget: rho must be nonnegative");
}

namespace {

// Node offsets of Q_r relative to its top-centre node. Columns are grouped by time offset,
// `per_time` spatial offsets each.
struct Stencil {
    int time_depth = 1;  // time offsets 0, -1, .., -(time_depth - 1)
    std::vector<std::vector<int>> space;
    std::vector<int> reach;
};

Stencil make_stencil(const GridFunction& g, double r, int m) {
    const auto& sp = g.space();
    const int d = sp.dim();
    Stencil s;
    const double ext = std::pow(r, 2 * m);
    while (s.time_depth * g.time().dt < ext) ++s.time_depth;
    s.reach.resize(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) s.reach[static_cast<std::size_t>(a)] = static_cast<int>(std::floor(r / sp.axis(a).spacing()));
    std::vector<int> o(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) o[static_cast<std::size_t>(a)] = -s.reach[static_cast<std::size_t>(a)];
    while (true) {
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double x = o[static_cast<std::size_t>(a)] * sp.axis(a).spacing();
            r2 += x * x;
        }
        if (r2 < r * r) s.space.push_back(o);
        int a = d - 1;
        while (a >= 0 && ++o[static_cast<std::size_t>(a)] > s.reach[static_cast<std::size_t>(a)]) {
            o[static_cast<std::size_t>(a)] = -s.reach[static_cast<std::size_t>(a)];
            --a;
        }
        if (a < 0) break;
    }
    return s;
}

void check_radius(const GridFunction& g, const Stencil& s, bool periodic_time) {
    const auto& sp = g.space();
    for (int a = 0; a < sp.dim(); ++a)
        if (sp.axis(a).is_periodic() && 2 * s.reach[static_cast<std::size_t>(a)] + 1 > sp.axis(a).points)
            throw DomainError("CylinderFamily: radius exceeds half a period");
    if (periodic_time && s.time_depth > g.time_steps())
        throw DomainError("CylinderFamily: cylinder longer than the time period");
}

// Calls f(cols, per_time) for every member of radius r, cols holding value columns of g.
template <class F>
void for_each_member(const GridFunction& g, const CylinderFamily& fam, double r, F&& f) {
    const auto& sp = g.space();
    const int d = sp.dim();
    const Stencil s = make_stencil(g, r, fam.m);
    check_radius(g, s, fam.periodic_time);
    const int steps = g.time_steps();
    const int S = sp.size();
    std::vector<int> strides(static_cast<std::size_t>(d), 1);
    for (int a = d - 2; a >= 0; --a) strides[static_cast<std::size_t>(a)] = strides[static_cast<std::size_t>(a + 1)] * sp.axis(a + 1).points;

    std::vector<int> centre(static_cast<std::size_t>(d), 0);
    std::vector<Eigen::Index> cols;
    std::vector<int> flats;
    auto advance = [&]() {
        int a = d - 1;
        while (a >= 0) {
            auto& c = centre[static_cast<std::size_t>(a)];
            c += fam.stride;
            if (c < sp.axis(a).points) return true;
            c = 0;
            --a;
        }
        return false;
    };
    while (true) {
        bool inside = true;
        for (int a = 0; a < d && inside; ++a) {
            if (sp.axis(a).is_periodic()) continue;
            const int c = centre[static_cast<std::size_t>(a)], rr = s.reach[static_cast<std::size_t>(a)];
            inside = c - rr >= 0 && c + rr < sp.axis(a).points;
        }
        if (inside) {
            flats.clear();
            for (const auto& o : s.space) {
                int flat = 0;
                for (int a = 0; a < d; ++a) {
                    const int n = sp.axis(a).points;
                    int i = centre[static_cast<std::size_t>(a)] + o[static_cast<std::size_t>(a)];
                    if (sp.axis(a).is_periodic()) i = ((i % n) + n) % n;
                    flat += i * strides[static_cast<std::size_t>(a)];
                }
                flats.push_back(flat);
            }
            for (int k = 0; k < steps; k += fam.stride) {
                if (!fam.periodic_time && k - (s.time_depth - 1) < 0) continue;
                cols.clear();
                for (int j = 0; j < s.time_depth; ++j) {
                    const int kk = ((k - j) % steps + steps) % steps;
                    for (int flat : flats) cols.push_back(static_cast<Eigen::Index>(kk) * S + flat);
                }
                f(cols, static_cast<int>(flats.size()));
            }
        }
        if (d == 0 || !advance()) break;
    }
}

CVec column_mean(const CMat& v, const std::vector<Eigen::Index>& cols, std::size_t begin, std::size_t end) {
    CVec s = CVec::Zero(v.rows());
    for (std::size_t i = begin; i < end; ++i) s += v.col(cols[i]);
    return s / static_cast<double>(end - begin);
}

double column_osc(const CMat& v, const std::vector<Eigen::Index>& cols, std::size_t begin, std::size_t end) {
    const CVec c = column_mean(v, cols, begin, end);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += (v.col(cols[i]) - c).norm();
    return acc / static_cast<double>(end - begin);
}

// Spatial oscillation per time slice, averaged over the slices.
double slice_osc(const CMat& v, const std::vector<Eigen::Index>& cols, std::size_t per_time) {
    const std::size_t slices = cols.size() / per_time;
    double acc = 0.0;
    for (std::size_t s = 0; s < slices; ++s) acc += column_osc(v, cols, s * per_time, (s + 1) * per_time);
    return acc / static_cast<double>(slices);
}

std::vector<Eigen::Index> node_columns(const GridFunction& g, const NodeSet& nodes) {
    std::vector<Eigen::Index> cols;
    cols.reserve(nodes.size());
    for (auto [k, j] : nodes.nodes) cols.push_back(static_cast<Eigen::Index>(k) * g.space().size() + j);
    return cols;
}

NodeSet resolved_nodes(const GridFunction& g, const ParabolicCylinder& q, std::size_t min_nodes, const char* who) {
    NodeSet nodes = cylinder_nodes(g, q);
    if (nodes.size() == 0 || nodes.size() < min_nodes)
        throw UnderResolvedError(std::string(who) + ": cylinder holds " + std::to_string(nodes.size()) + " nodes");
    return nodes;
}

}  // namespace

CylinderFamily CylinderFamily::dyadic(const GridFunction& g, double R, int m, int stride, bool periodic_time) {
    if (!(R > 0.0) || !std::isfinite(R)) throw DomainError("CylinderFamily::dyadic: R must be positive");
    CylinderFamily f;
    f.m = m;
    f.stride = stride;
    f.periodic_time = periodic_time;
    double r = R;
    for (int j = 0; j < 64; ++j, r *= 0.5) {
        f.radii.push_back(r);
        const Stencil s = make_stencil(g, r, m);
        if (s.time_depth == 1 && s.space.size() == 1) break;
    }
    f.validate(g);
    return f;
}

void CylinderFamily::validate(const GridFunction& g) const {
    if (radii.empty()) throw DomainError("CylinderFamily: no radii");
    if (m < 1 || stride < 1) throw DomainError("CylinderFamily: m and stride must be positive");
    if (g.time_steps() < 1 || g.space().dim() < 1) throw DomainError("CylinderFamily: empty grid");
    bool any = false;
    for (double r : radii) {
        if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("CylinderFamily: radii must be positive");
        for_each_member(g, *this, r, [&](const std::vector<Eigen::Index>&, int) { any = true; });
    }
    if (!any) throw UnderResolvedError("CylinderFamily: no member cylinder fits the grid");
}

double mean_oscillation(const GridFunction& g, const ParabolicCylinder& q, std::size_t min_nodes) {
    const auto cols = node_columns(g, resolved_nodes(g, q, min_nodes, "mean_oscillation"));
    return column_osc(g.values(), cols, 0, cols.size());
}

double osc_x(const GridFunction& A, const ParabolicCylinder& q, std::size_t min_nodes) {
    const NodeSet nodes = resolved_nodes(A, q, min_nodes, "osc_x");
    const auto cols = node_columns(A, nodes);
    // cylinder_nodes lists every ball node once per time node
    std::size_t per_time = 0;
    while (per_time < nodes.size() && nodes.nodes[per_time].first == nodes.nodes.front().first) ++per_time;
    return slice_osc(A.values(), cols, per_time);
}

double a_sharp(const std::vector<GridFunction>& blocks, double R, const CylinderFamily& family) {
    if (blocks.empty()) throw DomainError("a_sharp: no coefficient blocks");
    for (const auto& b : blocks)
        if (!b.same_layout(blocks.front())) throw DomainError("a_sharp: block layouts differ");
    family.validate(blocks.front());
    double best = 0.0;
    bool any = false;
    for (double r : family.radii) {
        if (r > R) continue;
        for (const auto& b : blocks)
            for_each_member(b, family, r, [&](const std::vector<Eigen::Index>& cols, int per_time) {
                any = true;
                best = std::max(best, slice_osc(b.values(), cols, static_cast<std::size_t>(per_time)));
            });
    }
    if (!any) throw UnderResolvedError("a_sharp: no family cylinder with r <= R");
    return best;
}

double a_sharp(const GridFunction& A, double R, const CylinderFamily& family) {
    return a_sharp(std::vector<GridFunction>{A}, R, family);
}

SharpMaximal sharp_and_maximal(const GridFunction& g, const CylinderFamily& family) {
    family.validate(g);
    const CMat& v = g.values();
    Vec sharp = Vec::Zero(v.cols()), maximal = Vec::Zero(v.cols());
    const Vec absg = v.colwise().norm().transpose();
    for (double r : family.radii)
        for_each_member(g, family, r, [&](const std::vector<Eigen::Index>& cols, int) {
            double mean_abs = 0.0;
            for (auto c : cols) mean_abs += absg(c);
            mean_abs /= static_cast<double>(cols.size());
            const double osc = column_osc(v, cols, 0, cols.size());
            for (auto c : cols) {
                sharp(c) = std::max(sharp(c), osc);
                maximal(c) = std::max(maximal(c), mean_abs);
            }
        });
    SharpMaximal out{GridFunction(1, g.space(), g.time()), GridFunction(1, g.space(), g.time())};
    out.sharp.values().row(0) = sharp.transpose().cast<Complex>();
    out.maximal.values().row(0) = maximal.transpose().cast<Complex>();
    return out;
}

GridFunction sharp_function(const GridFunction& g, const CylinderFamily& family) {
    return sharp_and_maximal(g, family).sharp;
}

GridFunction maximal_function(const GridFunction& g, const CylinderFamily& family) {
    return sharp_and_maximal(g, family).maximal;
}

FsRatio fs_ratio(const GridFunction& g, double p, const CylinderFamily& family) {
    if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("fs_ratio: p must lie in (1, inf)");
    const CMat& v = g.values();
    if (v.cols() == 0) throw DegenerateInputError("fs_ratio: empty field");
    const double scale = v.cwiseAbs().maxCoeff();
    if ((v.colwise() - v.col(0)).cwiseAbs().maxCoeff() <= 1e-14 * std::max(scale, 1e-300))
        throw DegenerateInputError("fs_ratio: constant field");
    const CVec mean = v.rowwise().mean();
    if (mean.norm() > 1e-10 * scale) throw DomainError("fs_ratio: field must have zero mean");
    const auto sm = sharp_and_maximal(g, family);
    FsRatio out;
    out.g_norm = lp_norm(g, p);
    out.sharp_norm = lp_norm(sm.sharp, p);
    out.maximal_norm = lp_norm(sm.maximal, p);
    if (out.sharp_norm == 0.0) throw NumericError("fs_ratio: sharp function vanishes for a nonconstant field");
    out.fs = out.g_norm / out.sharp_norm;
    out.hl = out.maximal_norm / out.g_norm;
    return out;
}

// Whole-space mean oscillation ---------------------------------------------------------

namespace {

double weighted(double lambda, double e, double v) { return v == 0.0 ? 0.0 : std::pow(lambda, e) * v; }

// Rows n per multi-index, stacked in order.
CMat evaluate_stack(const WholeSpaceSolution& sol, const std::vector<MultiIndex>& alphas, double t,
                    const std::vector<Vec>& pts) {
    const int n = sol.components();
    CMat out(n * static_cast<Eigen::Index>(alphas.size()), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < alphas.size(); ++i)
        out.middleRows(static_cast<Eigen::Index>(i) * n, n) = sol.evaluate(t, alphas[i], pts);
    return out;
}

SampledField sample_stack(const WholeSpaceSolution& sol, const std::vector<MultiIndex>& alphas,
                          const CylinderQuadrature& q) {
    return sample_field([&](double t, const std::vector<Vec>& pts) { return evaluate_stack(sol, alphas, t, pts); }, q);
}

// Grid nodes of a cylinder on the periodic extension of the torus. Each spatial node carries
// the number of its periodic images inside the ball; `total` counts lattice nodes of Q,
// including the time nodes before S where the zero extension vanishes.
struct NodalCylinder {
    std::vector<int> times;
    std::vector<std::pair<int, double>> space;
    double total = 0.0;
};

NodalCylinder nodal_cylinder(const SpaceGrid& grid, const TimeAxis& ta, const ParabolicCylinder& q) {
    NodalCylinder out;
    const int d = grid.dim();
    const double ext = q.time_extent();
    int virtual_times = 0;
    for (int k = static_cast<int>(std::floor((q.t - ta.start) / ta.dt)) + 1; k >= -1 - static_cast<int>(std::ceil(ext / ta.dt)); --k) {
        const double tk = ta.start + (k + 1) * ta.dt;
        if (tk > q.t || tk <= q.t - ext) continue;
        ++virtual_times;
        if (k >= 0 && k < ta.steps) out.times.push_back(k);
    }
    double lattice = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
        const Vec p = grid.point(j);
        std::vector<std::vector<double>> disp(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) {
            const double L = grid.axis(a).length();
            const double base = p(a) - q.x(a);
            for (int n = static_cast<int>(std::floor((-q.r - base) / L)); n <= static_cast<int>(std::ceil((q.r - base) / L)); ++n) {
                const double x = base + n * L;
                if (std::abs(x) < q.r) disp[static_cast<std::size_t>(a)].push_back(x * x);
            }
        }
        // images whose full displacement lies in the ball
        double mult = 0.0;
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        bool empty = false;
        for (const auto& v : disp) empty = empty || v.empty();
        while (!empty) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) r2 += disp[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
            if (r2 < q.r * q.r) mult += 1.0;
            int a = d - 1;
            while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == disp[static_cast<std::size_t>(a)].size()) idx[static_cast<std::size_t>(a--)] = 0;
            if (a < 0) break;
        }
        if (mult > 0.0) {
            out.space.emplace_back(j, mult);
            lattice += mult;
        }
    }
    out.total = lattice * virtual_times;
    return out;
}

// (|g|^2)^{1/2} over the nodal cylinder, the fields stacked.
double nodal_rms(const std::vector<const GridFunction*>& fields, const NodalCylinder& c) {
    if (!(c.total > 0.0)) throw UnderResolvedError("wholespace oscillation: empty cylinder");
    double s = 0.0;
    for (const auto* g : fields)
        for (int k : c.times)
            for (auto [j, w] : c.space) s += w * g->value(k, j).squaredNorm();
    return std::sqrt(s / c.total);
}

double derivative_rms(const WholeSpaceSolution& sol, int order, const NodalCylinder& c) {
    std::vector<GridFunction> grids;
    for (const auto& a : enumerate_multiindices(sol.grid().dim(), order)) grids.push_back(sol.to_grid(a));
    std::vector<const GridFunction*> ptrs;
    for (const auto& g : grids) ptrs.push_back(&g);
    return nodal_rms(ptrs, c);
}

// Support start of the zero extension, after checking that Q lies in the solved range and
// holds enough lattice nodes.
double check_cylinder(const SolveRequest& req, const WholeSpaceSolution& sol, const ParabolicCylinder& q) {
    const auto& ta = sol.time();
    if (q.dim() != req.grid.dim()) throw DomainError("wholespace oscillation: dimension mismatch");
    if (q.m != req.A.dims().m) throw DomainError("wholespace oscillation: cylinder order differs from m");
    if (q.t > ta.end() * (1.0 + 1e-14) + 1e-300 || q.t <= ta.start)
        throw DomainError("wholespace oscillation: cylinder top outside (S, T]");
    if (req.initial && q.t_lo() < ta.start)
        throw UnderResolvedError("wholespace oscillation: cylinder starts before the initial time");
    if (nodal_cylinder(req.grid, ta, q).total < static_cast<double>(kMinCylinderNodes))
        throw UnderResolvedError("wholespace oscillation: cylinder Q_{kappa r} holds fewer than " +
                                 std::to_string(kMinCylinderNodes) + " nodes");
    return req.initial ? -std::numeric_limits<double>::infinity() : ta.start;
}

struct Parts {
    double lhs = 0.0;
    std::vector<std::pair<std::string, double>> terms;
};

Parts lhs_parts(const SolveRequest& req, const WholeSpaceSolution& sol, const ParabolicCylinder& inner,
                const CylinderSampling& sampling, double support) {
    const int m = req.A.dims().m, d = req.A.dims().d;
    const bool div = req.form == Form::Divergence;
    const auto q = cylinder_quadrature(inner, sampling, support);
    const double t1 = sampled_mean_oscillation(sample_stack(sol, enumerate_multiindices(d, div ? m : 2 * m), q));
    const double t2 = weighted(req.lambda, div ? 0.5 : 1.0, sampled_mean_oscillation(sample_stack(sol, {MultiIndex::zero(d)}, q)));
    Parts p;
    p.lhs = t1 + t2;
    p.terms = {{div ? "osc D^m u" : "osc D^2m u", t1}, {div ? "lambda^1/2 osc u" : "lambda osc u", t2}};
    return p;
}

double solution_term(const SolveRequest& req, const WholeSpaceSolution& sol, const ParabolicCylinder& outer) {
    const int m = req.A.dims().m;
    const bool div = req.form == Form::Divergence;
    const NodalCylinder c = nodal_cylinder(req.grid, sol.time(), outer);
    double s = 0.0;
    for (int k = 0; k <= (div ? m : 2 * m); ++k)
        s += weighted(req.lambda, (div ? 0.5 : 1.0) - k / (2.0 * m), derivative_rms(sol, k, c));
    return s;
}

void check_request(const SolveRequest& req) {
    if (!(req.lambda > 0.0)) throw DomainError("wholespace oscillation: lambda must be positive");
}

}  // namespace

WholeSpaceOscillation wholespace_mean_osc_check(const SolveRequest& req, const WholeSpaceSolution& sol,
                                                const CylinderQuery& query, const CylinderSampling& sampling) {
    check_request(req);
    if (query.kappa < 8.0) throw DomainError("wholespace_mean_osc_check: kappa must be >= 8");
    const int m = req.A.dims().m, d = req.A.dims().d;
    const ParabolicCylinder outer = query.dilated();
    const double support = check_cylinder(req, sol, outer);
    WholeSpaceOscillation w;
    const Parts lhs = lhs_parts(req, sol, query.base, sampling, support);
    w.lhs = lhs.lhs;
    w.lhs_terms = lhs.terms;
    w.kappa_decay = 1.0 / query.kappa;
    w.kappa_growth = std::pow(query.kappa, m + 0.5 * d);
    w.solution_term = solution_term(req, sol, outer);
    const NodalCylinder c = nodal_cylinder(req.grid, sol.time(), outer);
    for (const auto& [alpha, f] : req.forcing) {
        const double rms = nodal_rms({&f}, c);
        w.forcing_term += req.form == Form::Divergence ? weighted(req.lambda, alpha.order() / (2.0 * m) - 0.5, rms) : rms;
    }
    w.rhs = w.kappa_decay * w.solution_term + w.kappa_growth * w.forcing_term;
    w.implied = w.rhs > 0.0 ? w.lhs / w.rhs : (w.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    return w;
}

DecayMeasurement wholespace_osc_decay(const SolveRequest& req, const WholeSpaceSolution& sol,
                                      const ParabolicCylinder& outer, const std::vector<double>& kappas,
                                      const CylinderSampling& sampling) {
    check_request(req);
    if (kappas.size() < 2) throw DomainError("wholespace_osc_decay: at least two kappa values required");
    for (double k : kappas)
        if (!(k >= 1.0)) throw DomainError("wholespace_osc_decay: kappa must be >= 1");
    const double support = check_cylinder(req, sol, outer);
    const double denom = solution_term(req, sol, outer);
    DecayMeasurement out;
    out.kappas = kappas;
    bool all_zero = true;
    for (double kappa : kappas) {
        const ParabolicCylinder inner(outer.t, outer.x, outer.r / kappa, outer.m);
        const double lhs = lhs_parts(req, sol, inner, sampling, support).lhs;
        out.ratios.push_back(lhs == 0.0 ? 0.0 : lhs / denom);
        all_zero = all_zero && lhs == 0.0;
    }
    out.exponent = all_zero ? -std::numeric_limits<double>::infinity() : loglog_slope(out.kappas, out.ratios);
    return out;
}

}  // namespace parabolab
