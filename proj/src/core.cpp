#include "parabolab/core.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace parabolab {

void ProblemDims::validate() const {
    if (d < 1 || m < 1 || n < 1) throw DomainError("ProblemDims: d, m, n must be positive");
}

int ProblemDims::leading_count() const { return static_cast<int>(binomial(m + d - 1, d - 1)); }

std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::size_t out = 1;
    for (int i = 1; i <= k; ++i) out = out * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
    return out;
}

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DomainError("MultiIndex: d must be >= 1");
    for (int e : entries_)
        if (e < 0) throw DomainError("MultiIndex: negative entry");
    order_ = std::accumulate(entries_.begin(), entries_.end(), 0);
}

MultiIndex MultiIndex::zero(int d) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(d), 0)); }

MultiIndex MultiIndex::unit(int d, int axis, int power) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e[static_cast<std::size_t>(axis)] = power;
    return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::tangential() const {
    auto e = entries_;
    e.front() = 0;
    return MultiIndex(std::move(e));
}

std::string MultiIndex::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < entries_.size(); ++i) os << (i ? "," : "") << entries_[i];
    os << ')';
    return os.str();
}

MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    if (a.dim() != b.dim()) throw DomainError("MultiIndex: dimension mismatch");
    auto e = a.entries_;
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += b.entries_[i];
    return MultiIndex(std::move(e));
}

std::vector<MultiIndex> enumerate_multiindices(int d, int order) {
    if (d < 1) throw DomainError("enumerate_multiindices: d must be >= 1");
    if (order < 0) throw DomainError("enumerate_multiindices: order must be >= 0");
    std::vector<MultiIndex> out;
    std::vector<int> cur(static_cast<std::size_t>(d), 0);
    // Depth-first with the leading entry descending gives descending lexicographic order.
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == d - 1) {
            cur[static_cast<std::size_t>(axis)] = left;
            out.emplace_back(cur);
            return;
        }
        for (int v = left; v >= 0; --v) {
            cur[static_cast<std::size_t>(axis)] = v;
            rec(axis + 1, left - v);
        }
    };
    rec(0, order);
    return out;
}

std::vector<MultiIndex> enumerate_up_to(int d, int max_order) {
    std::vector<MultiIndex> out;
    for (int k = 0; k <= max_order; ++k) {
        auto level = enumerate_multiindices(d, k);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

std::vector<MultiIndex> enumerate_tangential(int d, int order) {
    std::vector<MultiIndex> out;
    if (d < 2) return out;
    for (auto& a : enumerate_multiindices(d, order))
        if (a[0] == 0) out.push_back(a);
    return out;
}

ParabolicCylinder::ParabolicCylinder(double t_top, Vec center, double radius, int half_order)
    : t(t_top), x(std::move(center)), r(radius), m(half_order) {
    if (!(r > 0.0)) throw DomainError("ParabolicCylinder: radius must be positive");
    if (m < 1) throw DomainError("ParabolicCylinder: half order must be >= 1");
}

double ParabolicCylinder::time_extent() const { return std::pow(r, 2 * m); }

double ParabolicCylinder::volume() const {
    const int d = dim();
    // |B_r| = pi^{d/2} r^d / Gamma(d/2 + 1)
    const double ball = std::pow(kPi, 0.5 * d) * std::pow(r, d) / std::tgamma(0.5 * d + 1.0);
    return ball * time_extent();
}

bool ParabolicCylinder::contains(double time, const Vec& point) const {
    if (!(time > t_lo() && time <= t)) return false;
    return (point - x).squaredNorm() < r * r;
}

ParabolicCylinder ParabolicCylinder::dilated(double kappa) const {
    return ParabolicCylinder(t, x, r * kappa, m);
}

CylinderQuery::CylinderQuery(ParabolicCylinder q, double k) : base(std::move(q)), kappa(k) {
    if (!(kappa >= 1.0)) throw DomainError("CylinderQuery: kappa must be >= 1");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need matching samples, at least two");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("loglog_slope: data must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (!(std::abs(den) > 1e-300)) throw DomainError("loglog_slope: x values must differ");
    return (n * sxy - sx * sy) / den;
}

}  // namespace parabolab
