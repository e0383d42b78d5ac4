#pragma once

#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "parabolab/grid.hpp"

namespace parabolab {

using SpMat = Eigen::SparseMatrix<double>;

// Fornberg's recursion: weights w[k][j] such that f^{(k)}(x0) ~ sum_j w[k][j] f(x_j),
// for every k <= max_order.
template <class Scalar = double>
std::vector<std::vector<Scalar>> fornberg_weights(Scalar x0, const std::vector<Scalar>& x, int max_order) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<Scalar>> c(static_cast<std::size_t>(max_order + 1),
                                       std::vector<Scalar>(static_cast<std::size_t>(n), Scalar(0)));
    Scalar c1 = 1, c4 = x[0] - x0;
    c[0][0] = 1;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, max_order);
        Scalar c2 = 1;
        const Scalar c5 = c4;
        c4 = x[static_cast<std::size_t>(i)] - x0;
        for (int j = 0; j < i; ++j) {
            const Scalar c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

// Diagonal-norm summation-by-parts first derivative, 4th order interior and 2nd order
// closures, on `points` nodes with spacing h. H D + (H D)^T = diag(-1, 0, ..., 0, 1).
struct SbpOperator {
    SpMat D;
    Vec H;  // diagonal of the norm matrix
};
SbpOperator sbp42(int points, double h);

// Matrix of the k-th derivative on uniform nodes: centered stencils with `accuracy`
// order where they fit, one-sided stencils of the same width near the ends.
SpMat fd_matrix(int points, double h, int derivative, int accuracy);

// Weights for the k-th derivative at node 0 from nodes 0..width-1 (one-sided).
std::vector<double> one_sided_weights(int derivative, int accuracy, double h);

// Applies D along one axis of every time slice and component. D is points x points, or
// new_axis.points x points when the axis is replaced.
GridFunction apply_along_axis(const SpMat& D, const GridFunction& u, int axis,
                              const std::optional<Axis>& new_axis = std::nullopt);

}  // namespace parabolab
