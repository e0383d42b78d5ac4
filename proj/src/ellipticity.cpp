#include "parabolab/ellipticity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "nelder_mead.hpp"

namespace parabolab {

CoefficientTensor::CoefficientTensor(ProblemDims dims, std::vector<double> breakpoints, std::vector<CMat> blocks,
                                     double delta_inv)
    : dims_(dims), breakpoints_(std::move(breakpoints)), blocks_(std::move(blocks)), delta_inv_(delta_inv) {
    dims_.validate();
    indices_ = enumerate_multiindices(dims_.d, dims_.m);
    if (!(delta_inv_ > 0.0)) throw DomainError("CoefficientTensor: delta_inv must be positive");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
        if (!(breakpoints_[i] > breakpoints_[i - 1]))
            throw DomainError("CoefficientTensor: breakpoints must be strictly increasing");
    if (blocks_.size() != breakpoints_.size() + 1)
        throw DomainError("CoefficientTensor: need one block matrix per interval");
    const Eigen::Index size = static_cast<Eigen::Index>(indices_.size()) * dims_.n;
    for (const auto& b : blocks_)
        if (b.rows() != size || b.cols() != size) throw DomainError("CoefficientTensor: block matrix has wrong size");
    if (max_entry() > delta_inv_ * (1.0 + 1e-12))
        throw DomainError("CoefficientTensor: entry exceeds the bound delta_inv");
}

CoefficientTensor::CoefficientTensor(ProblemDims dims, CMat block, double delta_inv)
    : CoefficientTensor(dims, {}, std::vector<CMat>{std::move(block)}, delta_inv) {}

CoefficientTensor CoefficientTensor::identity(ProblemDims dims) {
    dims.validate();
    const auto N = static_cast<Eigen::Index>(binomial(dims.m + dims.d - 1, dims.d - 1));
    return CoefficientTensor(dims, CMat::Identity(N * dims.n, N * dims.n), 1.0);
}

int CoefficientTensor::interval_at(double t) const {
    return static_cast<int>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t) - breakpoints_.begin());
}

CMat CoefficientTensor::block(int interval, int a, int b) const {
    const int n = dims_.n;
    return big(interval).block(a * n, b * n, n, n);
}

CoefficientTensor CoefficientTensor::scaled(double c) const {
    auto out = *this;
    for (auto& b : out.blocks_) b *= c;
    out.delta_inv_ = std::max(delta_inv_ * std::abs(c), out.max_entry());
    return out;
}

double CoefficientTensor::max_entry() const {
    double m = 0.0;
    for (const auto& b : blocks_) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
}

CMat leading_form(const CoefficientTensor& A, int interval, const Vec& xi) {
    const auto& idx = A.indices();
    const int n = A.dims().n;
    if (xi.size() != A.dims().d) throw DomainError("leading_form: dimension mismatch");
    std::vector<double> mono(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) mono[a] = monomial_power(xi, idx[a]);
    const CMat& big = A.big(interval);
    CMat out = CMat::Zero(n, n);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        if (mono[a] == 0.0) continue;
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const double w = mono[a] * mono[b];
            if (w != 0.0)
                out += w * big.block(static_cast<Eigen::Index>(a) * n, static_cast<Eigen::Index>(b) * n, n, n);
        }
    }
    return out;
}

SymbolMatrix symbol_matrix(const CoefficientTensor& A, double t, const Vec& xi) {
    const double r = xi.norm();
    if (!(r > 0.0)) throw DomainError("symbol_matrix: xi must be nonzero");
    const Vec unit = xi / r;
    return SymbolMatrix{leading_form(A, A.interval_at(t), unit), t, xi};
}

double min_hermitian_eig(const CMat& m) {
    const CMat h = 0.5 * (m + m.adjoint());
    if (h.rows() == 1) return h(0, 0).real();
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

namespace {

double min_real_eig(const CMat& m) {
    if (m.rows() == 1) return m(0, 0).real();
    Eigen::ComplexEigenSolver<CMat> es(m, false);
    return es.eigenvalues().real().minCoeff();
}

std::vector<Vec> sphere_samples(int d, int count, std::uint64_t seed) {
    std::vector<Vec> out;
    if (d == 1) {
        out.push_back(Vec::Ones(1));
        return out;
    }
    if (d == 2) {
        // The forms are even in xi, so a half circle suffices.
        for (int i = 0; i < count; ++i) {
            const double th = kPi * i / count;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            out.push_back(v);
        }
        return out;
    }
    if (d == 3) {
        const double golden = kPi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (i + 0.5) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vec v(3);
            v << rho * std::cos(golden * i), rho * std::sin(golden * i), z;
            out.push_back(v);
        }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    for (int i = 0; i < count; ++i) {
        Vec v(d);
        for (int k = 0; k < d; ++k) v(k) = N(rng);
        out.push_back(v.normalized());
    }
    return out;
}

SphereMinimum sphere_minimize(int d, const std::function<double(const Vec&)>& f, const SphereSearch& s) {
    const int count = std::max(s.samples, 1);
    const auto pts = sphere_samples(d, count, s.seed);
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t starts = std::min<std::size_t>(static_cast<std::size_t>(std::max(s.refine_starts, 0)), pts.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(starts), order.end(),
                      [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    SphereMinimum best{vals[order[0]], pts[order[0]]};
    if (d == 1) return best;
    for (std::size_t k = 0; k < starts; ++k) {
        const Vec& p = pts[order[k]];
        if (d == 2) {
            auto g = [&](const Vec& th) {
                Vec v(2);
                v << std::cos(th(0)), std::sin(th(0));
                return f(v);
            };
            Vec th0 = Vec::Constant(1, std::atan2(p(1), p(0)));
            auto r = detail::nelder_mead(g, th0, kPi / count, s.tolerance);
            if (r.value < best.value) {
                Vec v(2);
                v << std::cos(r.x(0)), std::sin(r.x(0));
                best = {r.value, v};
            }
        } else {
            auto g = [&](const Vec& y) {
                const double nrm = y.norm();
                return nrm > 0 ? f(y / nrm) : f(p);
            };
            const double step = std::min(0.2, std::sqrt(4.0 * kPi / count) * (d == 3 ? 1.0 : 4.0));
            auto r = detail::nelder_mead(g, p, step, s.tolerance);
            if (r.value < best.value) best = {r.value, r.x.normalized()};
        }
    }
    return best;
}

}  // namespace

SphereMinimum lh_minimum(const CoefficientTensor& A, double t, const SphereSearch& s) {
    const int iv = A.interval_at(t);
    return sphere_minimize(A.dims().d, [&](const Vec& xi) { return min_hermitian_eig(leading_form(A, iv, xi)); }, s);
}

SphereMinimum petrovskii_minimum(const CoefficientTensor& A, double t, const SphereSearch& s) {
    const int iv = A.interval_at(t);
    return sphere_minimize(A.dims().d, [&](const Vec& xi) { return min_real_eig(leading_form(A, iv, xi)); }, s);
}

double lh_constant(const CoefficientTensor& A, double t, const SphereSearch& s) { return lh_minimum(A, t, s).value; }

double petrovskii_margin(const CoefficientTensor& A, double t, const SphereSearch& s) {
    return petrovskii_minimum(A, t, s).value;
}

double strong_ellipticity_constant(const CoefficientTensor& A, double t) { return min_hermitian_eig(A.big_at(t)); }

double EnergyCertificate::recheck() const { return min_hermitian_eig(B * U); }

EnergyCertificate weighted_diag_certificate(const CMat& U, double delta) {
    const Eigen::Index n = U.rows();
    if (n == 0 || U.cols() != n) throw CertificateRefused("weighted_diag_certificate: U must be square");
    if (!(delta > 0.0)) throw CertificateRefused("weighted_diag_certificate: delta must be positive");
    const double scale = std::max(1.0, U.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(U(i, j)) > 1e-13 * scale)
                throw CertificateRefused("weighted_diag_certificate: U is not upper triangular");
    if (U.cwiseAbs().maxCoeff() > (1.0 + 1e-12) / delta)
        throw CertificateRefused("weighted_diag_certificate: |U| exceeds 1/delta");
    for (Eigen::Index i = 0; i < n; ++i)
        if (U(i, i).real() < delta * (1.0 - 1e-12))
            throw CertificateRefused("weighted_diag_certificate: Re U_ii below delta");

    const CMat Ut = U.triangularView<Eigen::Upper>();
    double eps = 1.0;
    for (int halvings = 0; halvings <= 60; ++halvings, eps *= 0.5) {
        CMat B = CMat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) B(i, i) = std::pow(eps, static_cast<double>(n - 1 - i));
        const double m = min_hermitian_eig(B * Ut);
        if (m > 0.0) {
            EnergyCertificate c;
            c.epsilon = eps;
            c.B = B;
            c.delta1 = m;
            c.U = Ut;
            return c;
        }
    }
    throw CertificateRefused("weighted_diag_certificate: no eps >= 2^-60 gives a positive form");
}

EnergyCertificate schur_energy_certificate(const CoefficientTensor& A, double t, const Vec& xi) {
    const CMat S = symbol_matrix(A, t, xi).value;
    Eigen::ComplexSchur<CMat> schur(S);
    if (schur.info() != Eigen::Success) throw NumericError("schur_energy_certificate: Schur iteration failed");
    const CMat T = schur.matrixT().triangularView<Eigen::Upper>();
    const CMat Q = schur.matrixU().adjoint();
    const double margin = T.diagonal().real().minCoeff();
    if (!(margin > 0.0)) throw CertificateRefused("schur_energy_certificate: eigenvalue with Re <= 0");
    const double delta = std::min(margin, 1.0 / T.cwiseAbs().maxCoeff());
    auto cert = weighted_diag_certificate(T, delta);
    const Eigen::Index n = S.rows();
    cert.Q = Q;
    cert.unitarity_residual = (Q.adjoint() * Q - CMat::Identity(n, n)).cwiseAbs().maxCoeff();
    cert.reconstruction_residual =
        (Q.adjoint() * T * Q - S).cwiseAbs().maxCoeff() / std::max(1.0, S.cwiseAbs().maxCoeff());
    if (cert.unitarity_residual > 1e-10 || cert.reconstruction_residual > 1e-10)
        throw NumericError("schur_energy_certificate: Schur residual above 1e-10");
    return cert;
}

void require_solver_ellipticity(const CoefficientTensor& A, bool petrovskii_override, const std::string& who) {
    for (int i = 0; i < A.intervals(); ++i) {
        const double probe_t = i == 0 ? (A.breakpoints().empty() ? 0.0 : A.breakpoints().front() - 1.0)
                                      : A.breakpoints()[static_cast<std::size_t>(i - 1)];
        if (petrovskii_override) {
            if (!(petrovskii_margin(A, probe_t) > 0.0))
                throw EllipticityError(who + ": Petrovskii margin <= 0 on interval " + std::to_string(i));
        } else if (!(lh_constant(A, probe_t) > 0.0)) {
            throw EllipticityError(who + ": Legendre-Hadamard constant <= 0 on interval " + std::to_string(i));
        }
    }
}

}  // namespace parabolab
