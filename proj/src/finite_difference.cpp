#include "parabolab/finite_difference.hpp"

#include <algorithm>
#include <cmath>

namespace parabolab {

SbpOperator sbp42(int points, double h) {
    if (points < 9) throw DomainError("sbp42: need at least 9 points");
    const int n = points;
    std::vector<Eigen::Triplet<double>> t;
    const double q[4][4] = {{-24.0 / 17, 59.0 / 34, -4.0 / 17, -3.0 / 34},
                            {-1.0 / 2, 0.0, 1.0 / 2, 0.0},
                            {4.0 / 43, -59.0 / 86, 0.0, 59.0 / 86},
                            {3.0 / 98, 0.0, -59.0 / 98, 0.0}};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (q[i][j] == 0.0) continue;
            t.emplace_back(i, j, q[i][j] / h);
            t.emplace_back(n - 1 - i, n - 1 - j, -q[i][j] / h);
        }
    }
    // Row 3 also reaches nodes 4 and 5; row 2 reaches node 4.
    t.emplace_back(2, 4, -4.0 / 43 / h);
    t.emplace_back(n - 3, n - 5, 4.0 / 43 / h);
    t.emplace_back(3, 4, 32.0 / 49 / h);
    t.emplace_back(3, 5, -4.0 / 49 / h);
    t.emplace_back(n - 4, n - 5, -32.0 / 49 / h);
    t.emplace_back(n - 4, n - 6, 4.0 / 49 / h);
    const double c[5] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
    for (int i = 4; i < n - 4; ++i)
        for (int s = -2; s <= 2; ++s)
            if (c[s + 2] != 0.0) t.emplace_back(i, i + s, c[s + 2] / h);
    SbpOperator op;
    op.D.resize(n, n);
    op.D.setFromTriplets(t.begin(), t.end());
    op.H = Vec::Constant(n, h);
    const double hb[4] = {17.0 / 48, 59.0 / 48, 43.0 / 48, 49.0 / 48};
    for (int i = 0; i < 4; ++i) {
        op.H(i) = hb[i] * h;
        op.H(n - 1 - i) = hb[i] * h;
    }
    return op;
}

std::vector<double> one_sided_weights(int derivative, int accuracy, double h) {
    const int width = derivative + accuracy;
    std::vector<double> x(static_cast<std::size_t>(width));
    for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] = j;
    auto w = fornberg_weights<double>(0.0, x, derivative)[static_cast<std::size_t>(derivative)];
    const double scale = std::pow(h, -derivative);
    for (auto& v : w) v *= scale;
    return w;
}

SpMat fd_matrix(int points, double h, int derivative, int accuracy) {
    if (derivative < 0 || accuracy < 1) throw DomainError("fd_matrix: bad order");
    // Centered width for even accuracy; one-sided width derivative + accuracy.
    const int half = (derivative + 1) / 2 - 1 + (accuracy + 1) / 2;
    int width = 2 * half + 1;
    width = std::max(width, derivative + accuracy);
    if (width > points) throw DomainError("fd_matrix: too few points for the requested stencil");
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < points; ++i) {
        int start = i - width / 2;
        start = std::clamp(start, 0, points - width);
        std::vector<double> x(static_cast<std::size_t>(width));
        for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] = start + j;
        const auto w = fornberg_weights<double>(static_cast<double>(i), x, derivative)[static_cast<std::size_t>(derivative)];
        const double scale = std::pow(h, -derivative);
        for (int j = 0; j < width; ++j)
            if (w[static_cast<std::size_t>(j)] != 0.0) t.emplace_back(i, start + j, w[static_cast<std::size_t>(j)] * scale);
    }
    SpMat m(points, points);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

GridFunction apply_along_axis(const SpMat& D, const GridFunction& u, int axis, const std::optional<Axis>& new_axis) {
    const SpaceGrid& g = u.space();
    if (axis < 0 || axis >= g.dim()) throw DomainError("apply_along_axis: bad axis");
    const int p = g.axis(axis).points;
    std::vector<Axis> axes = g.axes();
    if (new_axis) axes[static_cast<std::size_t>(axis)] = *new_axis;
    const SpaceGrid og(axes);
    const int q = og.axis(axis).points;
    if (D.rows() != q || D.cols() != p) throw DomainError("apply_along_axis: operator size mismatch");
    int stride = 1;
    for (int a = axis + 1; a < g.dim(); ++a) stride *= g.axis(a).points;
    const int block = p * stride, oblock = q * stride;
    const int outer = g.size() / block;
    GridFunction out(u.components(), og, u.time());
    CMat line(u.components(), p);
    for (int k = 0; k < u.time_steps(); ++k) {
        auto in = u.slice(k);
        auto res = out.slice(k);
        for (int o = 0; o < outer; ++o)
            for (int s = 0; s < stride; ++s) {
                for (int i = 0; i < p; ++i) line.col(i) = in.col(o * block + i * stride + s);
                const CMat r = line * D.transpose();
                for (int i = 0; i < q; ++i) res.col(o * oblock + i * stride + s) = r.col(i);
            }
    }
    return out;
}

}  // namespace parabolab
