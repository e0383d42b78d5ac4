#include "doctest.h"

#include "parabolab/core.hpp"

using namespace parabolab;

TEST_CASE("multi-index enumeration order and counts") {
    auto two = enumerate_multiindices(2, 2);
    REQUIRE(two.size() == 3);
    CHECK(two[0] == MultiIndex({2, 0}));
    CHECK(two[1] == MultiIndex({1, 1}));
    CHECK(two[2] == MultiIndex({0, 2}));

    auto one = enumerate_multiindices(1, 5);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == MultiIndex({5}));

    CHECK(enumerate_multiindices(3, 2).size() == 6);
}

TEST_CASE("enumeration count matches stars and bars for d, order <= 6") {
    for (int d = 1; d <= 6; ++d)
        for (int k = 0; k <= 6; ++k) {
            auto list = enumerate_multiindices(d, k);
            CHECK(list.size() == binomial(k + d - 1, d - 1));
            for (std::size_t i = 1; i < list.size(); ++i) CHECK(list[i - 1] > list[i]);
            for (const auto& a : list) CHECK(a.order() == k);
        }
}

TEST_CASE("enumeration rejects negative order") {
    CHECK_THROWS_AS(enumerate_multiindices(2, -1), DomainError);
    CHECK_THROWS_AS(MultiIndex({1, -1}), DomainError);
}

TEST_CASE("problem dims") {
    ProblemDims p{2, 3, 1};
    CHECK_NOTHROW(p.validate());
    CHECK(p.leading_count() == 4);
    CHECK_THROWS_AS((ProblemDims{0, 1, 1}).validate(), DomainError);
}

TEST_CASE("monomial power") {
    Vec xi(2);
    xi << 2, 3;
    CHECK(monomial_power(xi, MultiIndex({1, 2})) == doctest::Approx(18.0));
    CHECK(monomial_power(xi, MultiIndex::zero(2)) == 1.0);
    Vec e(2);
    e << 0, 1;
    CHECK(monomial_power(e, MultiIndex({1, 0})) == 0.0);
    CVec z(1);
    z << Complex(0, 1);
    CHECK(std::abs(monomial_power(z, MultiIndex({2})) - Complex(-1, 0)) < 1e-15);
    CHECK_THROWS_AS(monomial_power(xi, MultiIndex({1})), DomainError);
}

TEST_CASE("multi-index helpers") {
    MultiIndex a({2, 1, 0});
    CHECK(a.tangential() == MultiIndex({0, 1, 0}));
    CHECK_FALSE(a.is_tangential());
    CHECK(a.str() == "(2,1,0)");
    CHECK(a + MultiIndex({0, 1, 3}) == MultiIndex({2, 2, 3}));
    CHECK(MultiIndex::unit(3, 1, 2) == MultiIndex({0, 2, 0}));
    auto tang = enumerate_tangential(3, 2);
    CHECK(tang.size() == 3);
    auto upto = enumerate_up_to(2, 2);
    CHECK(upto.size() == 6);
    CHECK(upto.front().order() == 0);
}

TEST_CASE("parabolic cylinder geometry") {
    Vec x = Vec::Zero(1);
    ParabolicCylinder q(0.0, x, 2.0, 2);
    CHECK(q.time_extent() == doctest::Approx(16.0));
    CHECK(q.t_lo() == doctest::Approx(-16.0));
    CHECK(q.contains(-1.0, Vec::Constant(1, 1.5)));
    CHECK_FALSE(q.contains(-1.0, Vec::Constant(1, 2.5)));
    CHECK_FALSE(q.contains(0.5, Vec::Constant(1, 0.0)));
    CHECK(q.dilated(4.0).r == doctest::Approx(8.0));
    CylinderQuery cq(q, 8.0);
    CHECK(cq.dilated().r == doctest::Approx(16.0));
    CHECK_THROWS_AS(CylinderQuery(q, 0.5), DomainError);
    // |Q_1| in d = 2, m = 1 is pi.
    ParabolicCylinder q2(0.0, Vec::Zero(2), 1.0, 1);
    CHECK(q2.volume() == doctest::Approx(kPi));
}
