#pragma once

#include <compare>
#include <string>
#include <vector>

#include "parabolab/types.hpp"

namespace parabolab {

// Spatial dimension d, half-order m (the system has order 2m) and number of equations n.
struct ProblemDims {
    int d = 1;
    int m = 1;
    int n = 1;

    void validate() const;
    // Number of multi-indices with |alpha| = m.
    int leading_count() const;
    friend bool operator==(const ProblemDims&, const ProblemDims&) = default;
};

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> entries);
    static MultiIndex zero(int d);
    static MultiIndex unit(int d, int axis, int power = 1);

    int dim() const { return static_cast<int>(entries_.size()); }
    int order() const { return order_; }
    int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& entries() const { return entries_; }

    // Copy with the normal (first) entry set to zero.
    MultiIndex tangential() const;
    bool is_tangential() const { return entries_.empty() || entries_.front() == 0; }

    std::string str() const;

    friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b);
    friend bool operator==(const MultiIndex& a, const MultiIndex& b) { return a.entries_ == b.entries_; }
    friend auto operator<=>(const MultiIndex& a, const MultiIndex& b) { return a.entries_ <=> b.entries_; }

private:
    std::vector<int> entries_;
    int order_ = 0;
};

// All alpha in N^d with |alpha| = order, in descending lexicographic order:
// (2,0),(1,1),(0,2) for d = 2, order = 2.
std::vector<MultiIndex> enumerate_multiindices(int d, int order);

// All alpha with |alpha| <= max_order, grouped by increasing order.
std::vector<MultiIndex> enumerate_up_to(int d, int max_order);

// Multi-indices of the given order whose first entry is zero (tangential to x_1 = 0).
std::vector<MultiIndex> enumerate_tangential(int d, int order);

std::size_t binomial(int n, int k);

// prod_i xi_i^{alpha_i}; works for any Eigen vector expression.
template <class Derived>
typename Derived::Scalar monomial_power(const Eigen::MatrixBase<Derived>& xi, const MultiIndex& alpha) {
    using Scalar = typename Derived::Scalar;
    if (xi.size() != alpha.dim()) throw DomainError("monomial_power: dimension mismatch");
    Scalar out(1);
    for (int i = 0; i < alpha.dim(); ++i)
        for (int p = 0; p < alpha[i]; ++p) out *= xi(i);
    return out;
}

// Q_r(t, x) = (t - r^{2m}, t) x B_r(x).
struct ParabolicCylinder {
    double t = 0.0;
    Vec x;
    double r = 1.0;
    int m = 1;

    ParabolicCylinder() = default;
    ParabolicCylinder(double t_top, Vec center, double radius, int half_order);

    double time_extent() const;
    double t_lo() const { return t - time_extent(); }
    int dim() const { return static_cast<int>(x.size()); }
    double volume() const;
    // Plain Euclidean membership (no periodic wrap).
    bool contains(double time, const Vec& point) const;
    ParabolicCylinder dilated(double kappa) const;
};

// Base cylinder Q_r(X0) together with a dilation factor kappa >= 1.
struct CylinderQuery {
    ParabolicCylinder base;
    double kappa = 1.0;

    CylinderQuery(ParabolicCylinder q, double k);
    ParabolicCylinder dilated() const { return base.dilated(kappa); }
};

// Least-squares slope of log y against log x. Throws DomainError for nonpositive data or
// fewer than two distinct x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace parabolab
