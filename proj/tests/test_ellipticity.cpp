#include "doctest.h"

#include <cmath>
#include <random>

#include "parabolab/ellipticity.hpp"
#include "test_support.hpp"

using namespace parabolab;
using testsupport::random_complex;
using testsupport::random_tensor;

namespace {

// Independent minimum of the Hermitian quadratic form: power iteration on sigma I - H
// started from a random vector, followed by a probe check.
double rayleigh_min(const CMat& m, std::mt19937_64& rng) {
    const CMat h = 0.5 * (m + m.adjoint());
    double sigma = 0.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i) sigma = std::max(sigma, h.row(i).cwiseAbs().sum());
    sigma += 1.0;
    const CMat shifted = sigma * CMat::Identity(h.rows(), h.cols()) - h;
    CVec v = random_complex(rng, h.rows(), 1);
    v.normalize();
    double rq = 0.0;
    for (int it = 0; it < 2000000; ++it) {
        CVec w = shifted * v;
        w.normalize();
        v = w;
        const CVec hv = h * v;
        rq = v.dot(hv).real();
        if ((hv - rq * v).norm() < 1e-11) break;
    }
    return rq;
}

double form(const CMat& m, const CVec& x) { return (x.adjoint() * m * x)(0, 0).real(); }

}  // namespace

TEST_CASE("symbol matrix examples") {
    auto lap = CoefficientTensor::identity({2, 1, 1});
    Vec xi(2);
    xi << 0.3, -2.0;
    CHECK(std::abs(symbol_matrix(lap, 0.0, xi).value(0, 0) - 1.0) < 1e-14);

    auto bi = CoefficientTensor::identity({2, 2, 1});
    Vec one(2);
    one << 1, 1;
    CHECK(std::abs(symbol_matrix(bi, 0.0, one).value(0, 0) - 0.75) < 1e-14);

    CHECK_THROWS_AS(symbol_matrix(bi, 0.0, Vec::Zero(2)), DomainError);

    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        auto A = random_tensor(rng, {3, 2, 2});
        Vec x = Vec::Random(3);
        CMat a = symbol_matrix(A, 0.0, x).value;
        CMat b = symbol_matrix(A, 0.0, 2.0 * x).value;
        CMat c = symbol_matrix(A, 0.0, 7.5 * x).value;
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
        CHECK((a - c).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("coefficient tensor invariants") {
    CMat big = CMat::Identity(1, 1) * 3.0;
    CHECK_THROWS_AS(CoefficientTensor({1, 1, 1}, big, 1.0), DomainError);
    CHECK_THROWS_AS(CoefficientTensor({1, 1, 1}, {1.0, 0.5}, {big, big, big}, 5.0), DomainError);
    CoefficientTensor A({1, 1, 1}, {0.0, 1.0}, {big, 2.0 * big, big}, 6.0);
    CHECK(A.intervals() == 3);
    CHECK(A.interval_at(-1.0) == 0);
    CHECK(A.interval_at(0.0) == 1);
    CHECK(A.interval_at(0.5) == 1);
    CHECK(A.interval_at(1.0) == 2);
}

TEST_CASE("lh constant examples") {
    CHECK(lh_constant(CoefficientTensor::identity({3, 1, 2}), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    auto bi = CoefficientTensor::identity({2, 2, 1});
    auto mn = lh_minimum(bi, 0.0);
    // Dense-sampling oracle of 1 - sin^2(2 theta)/4.
    double oracle = 1e300;
    for (int i = 0; i < 200000; ++i) {
        const double th = kPi * i / 200000;
        oracle = std::min(oracle, std::pow(std::cos(th), 4) + std::pow(std::cos(th) * std::sin(th), 2) +
                                      std::pow(std::sin(th), 4));
    }
    CHECK(mn.value == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(mn.value == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(std::abs(std::abs(mn.xi(0)) - std::sqrt(0.5)) < 1e-5);
    CHECK(std::abs(std::abs(mn.xi(1)) - std::sqrt(0.5)) < 1e-5);

    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
        auto A = random_tensor(rng, {2, 2, 2}, 2.0);
        const double base = lh_constant(A, 0.0);
        CHECK(lh_constant(A.scaled(3.0), 0.0) == doctest::Approx(3.0 * base).epsilon(1e-9));
    }
}

TEST_CASE("lh constant is stable under sample refinement") {
    std::mt19937_64 rng(21);
    for (ProblemDims dims : {ProblemDims{2, 2, 2}, ProblemDims{3, 1, 2}, ProblemDims{4, 1, 1}}) {
        for (int k = 0; k < 5; ++k) {
            auto A = random_tensor(rng, dims, 1.5);
            const double coarse = lh_constant(A, 0.0, SphereSearch{2000});
            const double fine = lh_constant(A, 0.0, SphereSearch{8000});
            CHECK(std::abs(coarse - fine) <= 1e-4 * std::max(1.0, std::abs(fine)));
        }
    }
}

TEST_CASE("strong ellipticity constant") {
    CHECK(strong_ellipticity_constant(CoefficientTensor::identity({2, 2, 3}), 0.0) == doctest::Approx(1.0));
    std::mt19937_64 rng(5);
    for (int k = 0; k < 30; ++k) {
        ProblemDims dims{1 + k % 3, 1 + k % 2, 1 + k % 3};
        auto A = random_tensor(rng, dims);
        const double s = strong_ellipticity_constant(A, 0.0);
        const Eigen::Index N = A.big(0).rows();
        CoefficientTensor shifted(dims, A.big(0) + 0.7 * CMat::Identity(N, N), A.delta_inv() + 0.7);
        CHECK(strong_ellipticity_constant(shifted, 0.0) == doctest::Approx(s + 0.7).epsilon(1e-12));

        const double oracle = rayleigh_min(A.big(0), rng);
        CHECK(std::abs(oracle - s) <= 1e-8);
        double probe_min = 1e300;
        for (int p = 0; p < 10000; ++p) {
            CVec z = random_complex(rng, N, 1);
            probe_min = std::min(probe_min, form(A.big(0), z) / z.squaredNorm());
        }
        CHECK(probe_min >= s - 1e-12);
    }
}

TEST_CASE("petrovskii margin") {
    CHECK(petrovskii_margin(CoefficientTensor::identity({2, 1, 1}), 0.0) == doctest::Approx(1.0));
    CMat tri(2, 2);
    tri << 1.0, 250.0, 0.0, 1.0;
    CoefficientTensor A({1, 1, 2}, tri, 250.0);
    CHECK(petrovskii_margin(A, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lh_constant(A, 0.0) < 0.0);

    std::mt19937_64 rng(17);
    int lh_positive = 0;
    for (int k = 0; k < 200; ++k) {
        ProblemDims dims{1 + k % 2, 1 + (k / 2) % 2, 1 + (k / 4) % 2};
        auto B = random_tensor(rng, dims, 1.0);
        const double lh = lh_constant(B, 0.0, SphereSearch{400});
        if (lh <= 0) continue;
        ++lh_positive;
        CHECK(petrovskii_margin(B, 0.0, SphereSearch{400}) >= lh - 1e-9);
    }
    CHECK(lh_positive > 50);
}

TEST_CASE("ellipticity implication chain") {
    std::mt19937_64 rng(33);
    for (int k = 0; k < 200; ++k) {
        ProblemDims dims{1 + k % 2, 1 + (k / 2) % 2, 1 + (k / 4) % 2};
        auto A = random_tensor(rng, dims, 0.6);
        const double strong = strong_ellipticity_constant(A, 0.0);
        const double lh = lh_constant(A, 0.0, SphereSearch{400});
        const double pet = petrovskii_margin(A, 0.0, SphereSearch{400});
        if (strong > 0) CHECK(lh > 0);
        if (lh > 0) CHECK(pet >= lh - 1e-9);
    }
}

TEST_CASE("weighted diagonal certificate examples") {
    CMat u1(1, 1);
    u1 << 0.3;
    auto c1 = weighted_diag_certificate(u1, 0.3);
    CHECK(c1.epsilon == 1.0);
    CHECK(c1.delta1 == doctest::Approx(0.3));

    CMat U(2, 2);
    U << 1.0, 10.0, 0.0, 1.0;
    // Direct evaluation of the eps = 0.02 form: [[0.02, 0.1], [0.1, 1]].
    CMat B = CMat::Zero(2, 2);
    B(0, 0) = 0.02;
    B(1, 1) = 1.0;
    const double expected = (1.02 - std::sqrt(0.98 * 0.98 + 4 * 0.01)) / 2;
    CHECK(min_hermitian_eig(B * U) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.0099).epsilon(0.01));

    auto c = weighted_diag_certificate(U, 0.1);
    CHECK(c.epsilon == 1.0 / 32);
    CHECK(c.delta1 > 0);
    CHECK(c.recheck() >= c.delta1);

    CMat lower = U.transpose();
    CHECK_THROWS_AS(weighted_diag_certificate(lower, 0.1), CertificateRefused);
    CHECK_THROWS_AS(weighted_diag_certificate(U, 0.5), CertificateRefused);
    CMat neg = U;
    neg(1, 1) = -1.0;
    CHECK_THROWS_AS(weighted_diag_certificate(neg, 0.1), CertificateRefused);
}

TEST_CASE("weighted diagonal certificate on random admissible U") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> Ud(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const int n = 1 + k % 5;
        const double delta = 0.05 + 0.5 * Ud(rng);
        CMat U = random_complex(rng, n, n, 1.0 / (delta * std::sqrt(2.0)));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < i; ++j) U(i, j) = 0.0;
            U(i, i) = Complex(delta + (1.0 / delta - delta) * Ud(rng) * 0.5, 0.3 * (Ud(rng) - 0.5));
        }
        auto c = weighted_diag_certificate(U, delta);
        CHECK(c.delta1 > 0);
        CHECK(c.recheck() >= c.delta1);
        for (int p = 0; p < 1000; ++p) {
            CVec x = random_complex(rng, n, 1);
            CHECK(form(c.B * c.U, x) >= c.delta1 * x.squaredNorm() * (1 - 1e-12));
        }
    }
}

TEST_CASE("schur energy certificate") {
    auto id = CoefficientTensor::identity({2, 1, 3});
    Vec xi(2);
    xi << 0.6, 0.8;
    auto ci = schur_energy_certificate(id, 0.0, xi);
    CHECK(ci.delta1 == doctest::Approx(1.0));

    // Hermitian positive symbol: B = I suffices.
    std::mt19937_64 rng(3);
    CMat G = random_complex(rng, 3, 3);
    CMat H = G * G.adjoint() + 0.5 * CMat::Identity(3, 3);
    CoefficientTensor herm({1, 1, 3}, H, H.cwiseAbs().maxCoeff());
    auto ch = schur_energy_certificate(herm, 0.0, Vec::Ones(1));
    CHECK(ch.epsilon == 1.0);
    CHECK(std::abs(ch.delta1 - min_hermitian_eig(H)) < 1e-8);
    CHECK(ch.unitarity_residual <= 1e-10);
    CHECK(ch.reconstruction_residual <= 1e-10);

    int done = 0;
    for (int k = 0; k < 60 && done < 20; ++k) {
        auto A = random_tensor(rng, {2, 1, 3}, 0.3);
        Vec dir = Vec::Random(2).normalized();
        CMat S = symbol_matrix(A, 0.0, dir).value;
        Eigen::ComplexEigenSolver<CMat> es(S, false);
        if (es.eigenvalues().real().minCoeff() <= 0) {
            CHECK_THROWS_AS(schur_energy_certificate(A, 0.0, dir), CertificateRefused);
            continue;
        }
        auto c = schur_energy_certificate(A, 0.0, dir);
        ++done;
        for (int p = 0; p < 2000; ++p) {
            CVec x = random_complex(rng, 3, 1);
            CHECK(form(c.B * c.U, x) >= c.delta1 * x.squaredNorm() * (1 - 1e-12));
        }
    }
    CHECK(done > 5);
}
