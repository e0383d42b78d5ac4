#pragma once

#include <vector>

#include "parabolab/grid.hpp"

namespace parabolab {

// Signed frequency index of FFT bin i on an axis with n points: 0,1,..,n/2-1,-n/2,..,-1.
int signed_frequency(int i, int n);

// Angular wavenumber 2*pi*k/L for each FFT bin of a periodic axis.
std::vector<double> wavenumbers(const Axis& a);

// In-place FFT of every line of `data` (components x space nodes) along `axis`.
// Forward transforms are normalized by 1/n so bins hold Fourier coefficients of
// exp(i xi (x - lo)).
void fft_axis(CMat& data, const SpaceGrid& grid, int axis, bool inverse);

// Fourier coefficients over every periodic axis (interval axes are left untouched).
CMat to_fourier(const CMat& slice, const SpaceGrid& grid);
CMat from_fourier(const CMat& coeffs, const SpaceGrid& grid);

// D^alpha u by symbol multiplication (i xi)^alpha. Axes touched by alpha must be periodic.
// The Nyquist bin is dropped for odd derivative order along an axis.
GridFunction spectral_derivative(const GridFunction& u, const MultiIndex& alpha);

// Zero every coefficient whose |k| exceeds `keep_fraction` of the Nyquist index on some periodic axis.
void band_limit(GridFunction& u, double keep_fraction = 2.0 / 3.0);

}  // namespace parabolab
