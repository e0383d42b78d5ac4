#include "parabolab/extension.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

#include "parabolab/finite_difference.hpp"
#include "parabolab/spectral.hpp"
#include "quadrature.hpp"

namespace parabolab {

namespace {

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const i128 r = a % b;
        a = b;
        b = r;
    }
    return a;
}

void require_halfspace_axis(const SpaceGrid& g, const char* who) {
    if (g.dim() < 1 || g.axis(0).is_periodic() || std::abs(g.axis(0).lo) > 1e-14)
        throw DomainError(std::string(who) + ": axis 0 must be an interval starting at x_1 = 0");
}

int zero_node(const Axis& a) {
    const double h = a.spacing();
    const int i0 = static_cast<int>(std::lround(-a.lo / h));
    if (i0 < 0 || i0 >= a.points || std::abs(a.node(i0)) > 1e-9 * h)
        throw DomainError("x_1 = 0 is not a grid node");
    return i0;
}

}  // namespace

ExtensionCoefficients vandermonde_coefficients(int tau) {
    if (tau < 1) throw DomainError("vandermonde_coefficients: tau must be >= 1");
    if (tau > kMaxExtensionOrder)
        throw DomainError("vandermonde_coefficients: tau > 6 refused (Vandermonde system too ill-conditioned)");
    const int n = 2 * tau;
    ExtensionCoefficients out;
    out.tau = tau;
    // c_k = prod_{l != k} (1 - x_l) / (x_k - x_l) with x_l = -1/l, i.e. prod k (l + 1) / (k - l).
    for (int k = 1; k <= n; ++k) {
        i128 num = 1, den = 1;
        for (int l = 1; l <= n; ++l) {
            if (l == k) continue;
            num *= static_cast<i128>(k) * (l + 1);
            den *= static_cast<i128>(k - l);
            const i128 g = gcd128(num, den);
            num /= g;
            den /= g;
        }
        out.c.push_back(static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)));
    }
    // Residual of the rounded coefficients, accumulated in extended precision.
    for (int j = 0; j < n; ++j) {
        long double s = 0.0L;
        for (int k = 1; k <= n; ++k)
            s += std::pow(-1.0L / k, j) * static_cast<long double>(out.c[static_cast<std::size_t>(k - 1)]);
        out.residual = std::max(out.residual, static_cast<double>(std::abs(s - 1.0L)));
    }
    return out;
}

GridFunction extend_tau(const GridFunction& w, const ExtensionCoefficients& coeffs, double negative_extent,
                        int interpolation_points) {
    const SpaceGrid& g = w.space();
    require_halfspace_axis(g, "extend_tau");
    const Axis& ax = g.axis(0);
    const double h = ax.spacing(), X = ax.hi;
    if (negative_extent < 0) throw DomainError("extend_tau: negative extent must be >= 0");
    if (negative_extent > 2.0 * coeffs.tau * X * (1 + 1e-12))
        throw DomainError("extend_tau: negative extent exceeds 2 tau times the slab depth");
    const int P = ax.points;
    const int q = std::min(P, interpolation_points > 0 ? interpolation_points : std::max(2 * coeffs.tau + 4, 8));
    const int neg = static_cast<int>(std::lround(negative_extent / h));
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < neg; ++i) {
        const double x1 = -(neg - i) * h;
        for (std::size_t k = 1; k <= coeffs.c.size(); ++k) {
            const double s = -x1 / static_cast<double>(k);
            if (s > X * (1 + 1e-14)) continue;
            const double pos = s / h;
            const int near = static_cast<int>(std::lround(pos));
            if (std::abs(pos - near) < 1e-12) {
                t.emplace_back(i, near, coeffs.c[k - 1]);
                continue;
            }
            const int start = std::clamp(static_cast<int>(std::floor(pos)) - q / 2 + 1, 0, P - q);
            std::vector<double> nodes(static_cast<std::size_t>(q));
            for (int j = 0; j < q; ++j) nodes[static_cast<std::size_t>(j)] = start + j;
            const auto wts = fornberg_weights<double>(pos, nodes, 0)[0];
            for (int j = 0; j < q; ++j) t.emplace_back(i, start + j, coeffs.c[k - 1] * wts[static_cast<std::size_t>(j)]);
        }
    }
    for (int i = 0; i < P; ++i) t.emplace_back(neg + i, i, 1.0);
    SpMat E(neg + P, P);
    E.setFromTriplets(t.begin(), t.end());
    return apply_along_axis(E, w, 0, Axis::interval(-neg * h, X, neg + P));
}

GridFunction even_extend(const GridFunction& g) {
    require_halfspace_axis(g.space(), "even_extend");
    const Axis& ax = g.space().axis(0);
    const int P = ax.points;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 2 * P - 1; ++i) t.emplace_back(i, std::abs(i - (P - 1)), 1.0);
    SpMat E(2 * P - 1, P);
    E.setFromTriplets(t.begin(), t.end());
    return apply_along_axis(E, g, 0, Axis::interval(-ax.hi, ax.hi, 2 * P - 1));
}

GridFunction restrict_to_halfspace(const GridFunction& full) {
    const Axis& ax = full.space().axis(0);
    if (ax.is_periodic()) throw DomainError("restrict_to_halfspace: axis 0 must be an interval");
    const int i0 = zero_node(ax);
    const int P = ax.points - i0;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < P; ++i) t.emplace_back(i, i0 + i, 1.0);
    SpMat R(P, ax.points);
    R.setFromTriplets(t.begin(), t.end());
    return apply_along_axis(R, full, 0, Axis::interval(0.0, ax.hi, P));
}

std::vector<MatchingDefect> one_sided_matching(const GridFunction& extended, int max_order, int accuracy,
                                               double tolerance_factor) {
    const SpaceGrid& g = extended.space();
    const Axis& ax = g.axis(0);
    if (ax.is_periodic()) throw DomainError("one_sided_matching: axis 0 must be an interval");
    const int i0 = zero_node(ax);
    const double h = ax.spacing();
    const int rest = g.size() / ax.points;
    std::vector<MatchingDefect> out;
    for (int j = 0; j <= max_order; ++j) {
        const auto w = one_sided_weights(j, accuracy, h);
        const int width = static_cast<int>(w.size());
        if (i0 < width - 1 || ax.points - 1 - i0 < width - 1)
            throw UnderResolvedError("one_sided_matching: too few nodes on one side of x_1 = 0");
        MatchingDefect md;
        md.order = j;
        double scale = 0.0;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        for (int k = 0; k < extended.time_steps(); ++k)
            for (int r = 0; r < rest; ++r)
                for (int c = 0; c < extended.components(); ++c) {
                    Complex left = 0.0, right = 0.0;
                    for (int s = 0; s < width; ++s) {
                        right += w[static_cast<std::size_t>(s)] * extended(k, (i0 + s) * rest + r, c);
                        left += w[static_cast<std::size_t>(s)] * extended(k, (i0 - s) * rest + r, c);
                    }
                    left *= sign;
                    scale = std::max(scale, std::abs(right));
                    const double d = std::abs(left - right);
                    if (d >= md.defect) {
                        md.defect = d;
                        md.left = left.real();
                        md.right = right.real();
                    }
                }
        md.tolerance = tolerance_factor * h * h * std::max(1.0, scale);
        md.pass = md.defect <= md.tolerance;
        out.push_back(md);
    }
    return out;
}

GridFunction normal_derivative(const GridFunction& u, int order, int accuracy) {
    const Axis& ax = u.space().axis(0);
    if (ax.is_periodic()) throw DomainError("normal_derivative: axis 0 must be an interval");
    if (order == 0) return u;
    return apply_along_axis(fd_matrix(ax.points, ax.spacing(), order, accuracy), u, 0);
}

double interpolation_constant(int m, int k, double epsilon) {
    if (m < 1 || k < 0 || k >= m || epsilon <= 0) throw DomainError("interpolation_constant: need 0 <= k < m, eps > 0");
    // Sharp pointwise bound a^k b^{m-k} <= eps a^m + young * b^m.
    const double young = k == 0 ? 1.0
                                : (m - k) / static_cast<double>(m) *
                                      std::pow(k / (m * epsilon), k / static_cast<double>(m - k));
    constexpr double kPrefactor = 2.0;
    return kPrefactor * young;
}

InterpolationTerms interpolation_check(const GridFunction& u, int m, int k, double epsilon, double p, int accuracy) {
    const int d = u.space().dim();
    if (d < 2) throw DomainError("interpolation_check: needs at least one tangential direction");
    if (k < 0 || k >= m) throw DomainError("interpolation_check: need 0 <= k <= m - 1");
    InterpolationTerms out;
    const GridFunction u1k = normal_derivative(u, k, accuracy);
    for (const auto& a : enumerate_tangential(d, m - k)) out.lhs += lp_norm(spectral_derivative(u1k, a), p);
    out.normal = lp_norm(normal_derivative(u, m, accuracy), p);
    for (int j = 1; j < d; ++j) out.tangential += lp_norm(spectral_derivative(u, MultiIndex::unit(d, j, m)), p);
    out.constant = interpolation_constant(m, k, epsilon);
    out.rhs = epsilon * out.normal + out.constant * out.tangential;
    out.pass = out.lhs <= out.rhs * (1 + 1e-12);
    return out;
}

double anisotropic_exponent(const SlabProfile& u, const SpaceGrid& slab, int m, int k, double s1, double s2,
                            double p) {
    if (s1 <= 0 || s2 <= 0 || s1 == s2) throw DomainError("anisotropic_exponent: need distinct positive scales");
    auto ratio = [&](double s) {
        auto g = GridFunction::sample(1, slab, TimeAxis{0.0, 1.0, 1}, [&](double, const Vec& x) {
            Vec xp = x.tail(x.size() - 1);
            return CVec::Constant(1, u(x(0) / s, xp));
        });
        const auto t = interpolation_check(g, m, k, 1.0, p);
        if (t.normal == 0.0) throw DegenerateInputError("anisotropic_exponent: D_1^m u vanishes");
        return t.lhs / t.normal;
    };
    return std::log(ratio(s2) / ratio(s1)) / std::log(s2 / s1);
}

double BoundaryGeometry::phi_at(const Vec& xp) const {
    const int dd = tangential.dim();
    std::vector<int> lo(static_cast<std::size_t>(dd));
    std::vector<double> frac(static_cast<std::size_t>(dd));
    for (int a = 0; a < dd; ++a) {
        const Axis& ax = tangential.axis(a);
        double pos = (xp(a) - ax.lo) / ax.spacing();
        pos -= ax.points * std::floor(pos / ax.points);
        int i = static_cast<int>(std::floor(pos));
        frac[static_cast<std::size_t>(a)] = pos - i;
        lo[static_cast<std::size_t>(a)] = i % ax.points;
    }
    double v = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(dd));
    for (int corner = 0; corner < (1 << dd); ++corner) {
        double wgt = 1.0;
        for (int a = 0; a < dd; ++a) {
            const bool up = (corner >> a) & 1;
            const auto ua = static_cast<std::size_t>(a);
            wgt *= up ? frac[ua] : 1.0 - frac[ua];
            idx[ua] = (lo[ua] + (up ? 1 : 0)) % tangential.axis(a).points;
        }
        if (wgt != 0.0) v += wgt * phi(tangential.flat(idx));
    }
    return v;
}

double BoundaryGeometry::kernel(const Vec& y) const {
    const double r2 = y.squaredNorm();
    return r2 >= 1.0 ? 0.0 : kernel_normalizer * std::pow(1.0 - r2, kernel_power);
}

double BoundaryGeometry::kernel_integral() const {
    // Radial integral: |S^{dd-1}| int_0^1 (1 - r^2)^p r^{dd-1} dr, a polynomial integrand.
    const int dd = tangential.dim();
    const auto& gl = detail::gauss_unit(kernel_power + dd + 2);
    double radial = 0.0;
    for (const auto& [r, w] : gl) radial += w * std::pow(1.0 - r * r, kernel_power) * std::pow(r, dd - 1);
    const double sphere = 2.0 * std::pow(kPi, dd / 2.0) / std::tgamma(dd / 2.0);
    return kernel_normalizer * sphere * radial;
}

double BoundaryGeometry::measured_lipschitz() const {
    const int dd = tangential.dim();
    double L = 0.0;
    for (int j = 0; j < tangential.size(); ++j) {
        const auto base = tangential.unflat(j);
        double s2 = 0.0;
        for (int a = 0; a < dd; ++a) {
            const Axis& ax = tangential.axis(a);
            double edge = 0.0;
            // Every edge of the cell along axis a.
            for (int corner = 0; corner < (1 << dd); ++corner) {
                if ((corner >> a) & 1) continue;
                auto i0 = base, i1 = base;
                for (int b = 0; b < dd; ++b) {
                    const auto ub = static_cast<std::size_t>(b);
                    const int step = ((corner >> b) & 1) ? 1 : 0;
                    i0[ub] = (base[ub] + step) % tangential.axis(b).points;
                    i1[ub] = i0[ub];
                }
                i1[static_cast<std::size_t>(a)] = (base[static_cast<std::size_t>(a)] + 1) % ax.points;
                edge = std::max(edge, std::abs(phi(tangential.flat(i1)) - phi(tangential.flat(i0))) / ax.spacing());
            }
            s2 += edge * edge;
        }
        L = std::max(L, std::sqrt(s2));
    }
    return L;
}

double BoundaryGeometry::mollified(double x1, const Vec& xp) const {
    if (x1 == 0.0) return phi_at(xp);
    const int dd = tangential.dim();
    // Exact for eta (degree 2p) times a linear piece of phi.
    const int q = kernel_power + 1;
    const auto& gl = detail::gauss_unit(q);
    if (dd == 1) {
        // Split y in (-1, 1) where x' - x1 y crosses a node; eta * phi is a polynomial on each piece.
        const Axis& ax = tangential.axis(0);
        const double h = ax.spacing();
        const double za = xp(0) - std::abs(x1), zb = xp(0) + std::abs(x1);
        std::vector<double> cuts{-1.0, 1.0};
        for (long i = static_cast<long>(std::ceil((za - ax.lo) / h)); i <= static_cast<long>(std::floor((zb - ax.lo) / h)); ++i) {
            const double y = (xp(0) - (ax.lo + i * h)) / x1;
            if (y > -1.0 && y < 1.0) cuts.push_back(y);
        }
        std::sort(cuts.begin(), cuts.end());
        double s = 0.0;
        Vec y(1), z(1);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c], b = cuts[c + 1];
            if (b - a <= 0) continue;
            for (const auto& [u, w] : gl) {
                y(0) = a + (b - a) * u;
                z(0) = xp(0) - x1 * y(0);
                s += (b - a) * w * kernel(y) * phi_at(z);
            }
        }
        return s;
    }
    // Tensor Gauss over [-1, 1]^dd with 16 panels per axis.
    constexpr int panels = 16;
    const int per = panels * q;
    std::vector<double> nodes, weights;
    for (int pnl = 0; pnl < panels; ++pnl)
        for (const auto& [u, w] : gl) {
            nodes.push_back(-1.0 + 2.0 * (pnl + u) / panels);
            weights.push_back(2.0 * w / panels);
        }
    std::vector<int> idx(static_cast<std::size_t>(dd), 0);
    double s = 0.0;
    Vec y(dd);
    while (true) {
        double w = 1.0;
        for (int a = 0; a < dd; ++a) {
            y(a) = nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
            w *= weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        }
        const double k = kernel(y);
        if (k != 0.0) s += w * k * phi_at(xp - x1 * y);
        int a = 0;
        while (a < dd && ++idx[static_cast<std::size_t>(a)] == per) idx[static_cast<std::size_t>(a++)] = 0;
        if (a == dd) break;
    }
    return s;
}

BoundaryGeometry make_boundary_geometry(SpaceGrid tangential, Vec phi, double rho1, int kernel_power) {
    if (!tangential.all_periodic()) throw DomainError("boundary geometry: tangential grid must be a torus");
    if (phi.size() != tangential.size()) throw DomainError("boundary geometry: phi size mismatch");
    if (rho1 <= 0) throw DomainError("boundary geometry: rho1 must be positive");
    if (kernel_power < 1) throw DomainError("boundary geometry: kernel power must be >= 1");
    BoundaryGeometry geo;
    geo.tangential = std::move(tangential);
    geo.phi = std::move(phi);
    geo.rho1 = rho1;
    geo.kernel_power = kernel_power;
    if (geo.measured_lipschitz() > rho1 * (1 + 1e-12))
        throw DomainError("boundary geometry: measured Lipschitz constant exceeds rho1");
    geo.kernel_normalizer = 1.0 / geo.kernel_integral();
    return geo;
}

double mollified_derivative(const BoundaryGeometry& geo, double x1, const Vec& xp, int k) {
    if (x1 <= 0) throw DomainError("mollified_derivative: x_1 must be positive");
    const int d = geo.tangential.dim() + 1;
    if (k == 0) return std::abs(geo.mollified(x1, xp));
    const int r = (k + 1) / 2 + 2;
    const double hs = x1 / (2.0 * r);
    std::vector<double> offs(static_cast<std::size_t>(2 * r + 1));
    for (int i = -r; i <= r; ++i) offs[static_cast<std::size_t>(i + r)] = i;
    std::vector<std::vector<double>> w1;  // w1[order][node]
    {
        const auto w = fornberg_weights<double>(0.0, offs, k);
        for (int o = 0; o <= k; ++o) {
            auto row = w[static_cast<std::size_t>(o)];
            for (auto& v : row) v *= std::pow(hs, -o);
            w1.push_back(row);
        }
    }
    double best = 0.0;
    const int width = 2 * r + 1;
    for (const auto& a : enumerate_multiindices(d, k)) {
        std::vector<int> active;
        for (int ax = 0; ax < d; ++ax)
            if (a[ax] > 0) active.push_back(ax);
        const int na = static_cast<int>(active.size());
        std::vector<int> idx(static_cast<std::size_t>(na), 0);
        double s = 0.0;
        while (true) {
            double w = 1.0;
            double y1 = x1;
            Vec y = xp;
            for (int i = 0; i < na; ++i) {
                const int ax = active[static_cast<std::size_t>(i)];
                const int node = idx[static_cast<std::size_t>(i)];
                w *= w1[static_cast<std::size_t>(a[ax])][static_cast<std::size_t>(node)];
                const double shift = (node - r) * hs;
                if (ax == 0) y1 += shift;
                else y(ax - 1) += shift;
            }
            if (w != 0.0) s += w * geo.mollified(y1, y);
            int i = 0;
            while (i < na && ++idx[static_cast<std::size_t>(i)] == width) idx[static_cast<std::size_t>(i++)] = 0;
            if (i == na) break;
        }
        best = std::max(best, std::abs(s));
    }
    return best;
}

BoundaryGeometry boundary_mollify(BoundaryGeometry geo, const SpaceGrid& slab, int max_order,
                                  const std::vector<double>& depths) {
    require_halfspace_axis(slab, "boundary_mollify");
    if (slab.dim() != geo.tangential.dim() + 1) throw DomainError("boundary_mollify: slab dimension mismatch");
    geo.phi_tilde = GridFunction::sample(1, slab, TimeAxis{0.0, 1.0, 1}, [&](double, const Vec& x) {
        return CVec::Constant(1, geo.mollified(x(0), x.tail(x.size() - 1)));
    });
    geo.growth.assign(static_cast<std::size_t>(max_order + 1), 0.0);
    for (double x1 : depths) {
        if (x1 <= 0) throw DomainError("boundary_mollify: depths must be positive");
        for (int j = 0; j < geo.tangential.size(); ++j) {
            const Vec xp = geo.tangential.point(j);
            geo.growth[0] = std::max(geo.growth[0], std::abs(geo.mollified(x1, xp) - geo.phi(j)) / (x1 * geo.rho1));
            for (int k = 1; k <= max_order; ++k)
                geo.growth[static_cast<std::size_t>(k)] =
                    std::max(geo.growth[static_cast<std::size_t>(k)],
                             mollified_derivative(geo, x1, xp, k) * std::pow(x1, k - 1) / geo.rho1);
        }
    }
    return geo;
}

Vec FlatteningMap::forward(const Vec& x) const {
    Vec y = x;
    y(0) -= geo->phi_at(x.tail(x.size() - 1));
    return y;
}

Vec FlatteningMap::inverse(const Vec& y) const {
    Vec x = y;
    x(0) += geo->phi_at(y.tail(y.size() - 1));
    return x;
}

double FlatteningMap::jacobian_determinant(const Vec& x, double h) const {
    // Only the first row of the Jacobian differs from the identity: (1, -grad phi).
    const auto d = x.size();
    Mat J = Mat::Identity(d, d);
    for (Eigen::Index j = 1; j < d; ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        J(0, j) = (forward(xp)(0) - forward(xm)(0)) / (2 * h);
    }
    return J.determinant();
}

FlatteningMap flatten_map(const BoundaryGeometry& geo) { return FlatteningMap{&geo}; }

}  // namespace parabolab
