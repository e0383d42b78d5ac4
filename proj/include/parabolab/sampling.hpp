#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "parabolab/core.hpp"

namespace parabolab {

// Midpoint quadrature of a parabolic cylinder: `time_samples` cells in time and a
// tensor grid of `space_samples` cells per axis on [-r, r]^d, kept when the cell centre
// lies in the ball. Used for fields that can be evaluated at arbitrary points.
struct CylinderSampling {
    int time_samples = 8;
    int space_samples = 16;
};

// Quadrature nodes of one cylinder. `zero_weight` is the mass of the part of Q where the
// field is known to vanish (before its support starts) and is not sampled.
struct CylinderQuadrature {
    std::vector<double> times;
    std::vector<Vec> points;
    double time_weight = 0.0;
    double space_weight = 0.0;
    double zero_weight = 0.0;

    std::size_t size() const { return times.size() * points.size(); }
    double total_weight() const;
};

// `support_start`: the field is identically zero for t <= support_start.
CylinderQuadrature cylinder_quadrature(const ParabolicCylinder& q, const CylinderSampling& s,
                                       double support_start = -std::numeric_limits<double>::infinity());

// Values (components x points) of a field at one time and a batch of points.
using FieldEvaluator = std::function<CMat(double t, const std::vector<Vec>& points)>;

// Field values at the quadrature nodes, time-major, with matching weights.
struct SampledField {
    CMat values;
    double weight = 0.0;       // weight of every sample
    double zero_weight = 0.0;  // mass where the field vanishes

    double total_weight() const { return weight * static_cast<double>(values.cols()) + zero_weight; }
};

SampledField sample_field(const FieldEvaluator& f, const CylinderQuadrature& q);

CVec sampled_mean(const SampledField& s);
// average |g - (g)_Q|
double sampled_mean_oscillation(const SampledField& s);
// (|g|^2)_Q^{1/2}
double sampled_rms(const SampledField& s);

}  // namespace parabolab
