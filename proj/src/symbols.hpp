#pragma once

#include <vector>

#include "parabolab/grid.hpp"

namespace parabolab::detail {

// (i xi)^alpha with the Nyquist bin dropped along axes of odd order.
inline Complex derivative_symbol(const Vec& xi, const std::vector<bool>& nyquist, const MultiIndex& alpha) {
    Complex s(1.0);
    for (int a = 0; a < alpha.dim(); ++a) {
        if (alpha[a] == 0) continue;
        if (alpha[a] % 2 == 1 && nyquist[static_cast<std::size_t>(a)]) return Complex(0.0);
        s *= std::pow(Complex(0.0, xi(a)), alpha[a]);
    }
    return s;
}

inline std::vector<bool> nyquist_flags(const SpaceGrid& grid, int flat) {
    const auto idx = grid.unflat(flat);
    std::vector<bool> out(static_cast<std::size_t>(grid.dim()));
    for (int a = 0; a < grid.dim(); ++a) {
        const int n = grid.axis(a).points;
        out[static_cast<std::size_t>(a)] = n % 2 == 0 && idx[static_cast<std::size_t>(a)] == n / 2;
    }
    return out;
}

// Values of sum_j c_j exp(i xi_j . (x - lo)) at `points`.
inline CMat synthesize(const SpaceGrid& grid, const std::vector<Vec>& xi, const CMat& c, const std::vector<Vec>& points) {
    CMat out = CMat::Zero(c.rows(), static_cast<Eigen::Index>(points.size()));
    Vec lo(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) lo(a) = grid.axis(a).lo;
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < xi.size(); ++j)
        if (c.col(static_cast<Eigen::Index>(j)).squaredNorm() > 0.0) active.push_back(j);
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Vec x = points[p] - lo;
        for (std::size_t j : active)
            out.col(static_cast<Eigen::Index>(p)) += std::exp(Complex(0.0, xi[j].dot(x))) * c.col(static_cast<Eigen::Index>(j));
    }
    return out;
}

}  // namespace parabolab::detail
