#include "parabolab/spectral.hpp"

#include <cmath>
#include <cstdlib>

#include <unsupported/Eigen/FFT>

namespace parabolab {

int signed_frequency(int i, int n) { return i < (n + 1) / 2 ? i : i - n; }

std::vector<double> wavenumbers(const Axis& a) {
    if (!a.is_periodic()) throw DomainError("wavenumbers: axis is not periodic");
    std::vector<double> k(static_cast<std::size_t>(a.points));
    for (int i = 0; i < a.points; ++i) k[static_cast<std::size_t>(i)] = 2.0 * kPi * signed_frequency(i, a.points) / a.length();
    return k;
}

void fft_axis(CMat& data, const SpaceGrid& grid, int axis, bool inverse) {
    const Axis& ax = grid.axis(axis);
    if (!ax.is_periodic()) throw DomainError("fft_axis: axis is not periodic");
    const int n = ax.points;
    int stride = 1;
    for (int i = grid.dim() - 1; i > axis; --i) stride *= grid.axis(i).points;
    const int block = stride * n;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<Complex> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < data.rows(); ++c)
        for (int base = 0; base < grid.size(); base += block)
            for (int off = 0; off < stride; ++off) {
                for (int i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = data(c, base + off + i * stride);
                if (inverse) {
                    fft.inv(out, in);
                    for (int i = 0; i < n; ++i) data(c, base + off + i * stride) = out[static_cast<std::size_t>(i)];
                } else {
                    fft.fwd(out, in);
                    for (int i = 0; i < n; ++i)
                        data(c, base + off + i * stride) = out[static_cast<std::size_t>(i)] / static_cast<double>(n);
                }
            }
}

CMat to_fourier(const CMat& slice, const SpaceGrid& grid) {
    CMat out = slice;
    for (int a = 0; a < grid.dim(); ++a)
        if (grid.axis(a).is_periodic()) fft_axis(out, grid, a, false);
    return out;
}

CMat from_fourier(const CMat& coeffs, const SpaceGrid& grid) {
    CMat out = coeffs;
    for (int a = 0; a < grid.dim(); ++a)
        if (grid.axis(a).is_periodic()) fft_axis(out, grid, a, true);
    return out;
}

GridFunction spectral_derivative(const GridFunction& u, const MultiIndex& alpha) {
    const SpaceGrid& grid = u.space();
    if (alpha.dim() != grid.dim()) throw DomainError("spectral_derivative: dimension mismatch");
    for (int a = 0; a < grid.dim(); ++a)
        if (alpha[a] > 0 && !grid.axis(a).is_periodic())
            throw DomainError("spectral_derivative: axis " + std::to_string(a) + " is not periodic");
    GridFunction out = u;
    if (alpha.order() == 0) return out;
    for (int a = 0; a < grid.dim(); ++a) {
        if (alpha[a] == 0) continue;
        const Axis& ax = grid.axis(a);
        const auto k = wavenumbers(ax);
        const int n = ax.points;
        const bool odd = alpha[a] % 2 == 1;
        std::vector<Complex> sym(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const bool nyquist = n % 2 == 0 && i == n / 2;
            sym[static_cast<std::size_t>(i)] = (odd && nyquist) ? Complex(0.0) : std::pow(Complex(0.0, k[static_cast<std::size_t>(i)]), alpha[a]);
        }
        int stride = 1;
        for (int i = grid.dim() - 1; i > a; --i) stride *= grid.axis(i).points;
        for (int kt = 0; kt < u.time_steps(); ++kt) {
            CMat s = out.slice(kt);
            fft_axis(s, grid, a, false);
            for (int j = 0; j < grid.size(); ++j) s.col(j) *= sym[static_cast<std::size_t>((j / stride) % n)];
            fft_axis(s, grid, a, true);
            out.slice(kt) = s;
        }
    }
    return out;
}

void band_limit(GridFunction& u, double keep_fraction) {
    const SpaceGrid& grid = u.space();
    for (int kt = 0; kt < u.time_steps(); ++kt) {
        CMat s = to_fourier(u.slice(kt), grid);
        for (int j = 0; j < grid.size(); ++j) {
            const auto idx = grid.unflat(j);
            for (int a = 0; a < grid.dim(); ++a) {
                const Axis& ax = grid.axis(a);
                if (!ax.is_periodic()) continue;
                const int f = std::abs(signed_frequency(idx[static_cast<std::size_t>(a)], ax.points));
                if (f > keep_fraction * (ax.points / 2)) {
                    s.col(j).setZero();
                    break;
                }
            }
        }
        u.slice(kt) = from_fourier(s, grid);
    }
}

}  // namespace parabolab
