#include "parabolab/sampling.hpp"

#include <cmath>

namespace parabolab {

double CylinderQuadrature::total_weight() const {
    return time_weight * space_weight * static_cast<double>(size()) + zero_weight;
}

CylinderQuadrature cylinder_quadrature(const ParabolicCylinder& q, const CylinderSampling& s,
                                       double support_start) {
    if (s.time_samples < 1 || s.space_samples < 1) throw DomainError("cylinder_quadrature: bad sampling");
    CylinderQuadrature out;
    const int d = q.dim();
    const double h = 2.0 * q.r / s.space_samples;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    while (true) {
        Vec off(d);
        for (int i = 0; i < d; ++i) off(i) = -q.r + (idx[static_cast<std::size_t>(i)] + 0.5) * h;
        if (off.squaredNorm() < q.r * q.r) out.points.push_back(q.x + off);
        int a = d - 1;
        while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == s.space_samples) idx[static_cast<std::size_t>(a--)] = 0;
        if (a < 0) break;
    }
    // The cell count approximates the ball; rescale so the weights sum to |B_r|.
    const double ball = std::pow(kPi, 0.5 * d) * std::pow(q.r, d) / std::tgamma(0.5 * d + 1.0);
    out.space_weight = ball / static_cast<double>(out.points.size());

    const double lo = std::max(q.t_lo(), support_start);
    const double extent = q.time_extent();
    if (lo >= q.t) {
        out.zero_weight = extent * ball;
        out.time_weight = 0.0;
        return out;
    }
    const double dt = (q.t - lo) / s.time_samples;
    for (int k = 0; k < s.time_samples; ++k) out.times.push_back(lo + (k + 0.5) * dt);
    out.time_weight = dt;
    out.zero_weight = (lo - q.t_lo()) * ball;
    return out;
}

SampledField sample_field(const FieldEvaluator& f, const CylinderQuadrature& q) {
    SampledField out;
    out.weight = q.time_weight * q.space_weight;
    out.zero_weight = q.zero_weight;
    const Eigen::Index np = static_cast<Eigen::Index>(q.points.size());
    for (std::size_t k = 0; k < q.times.size(); ++k) {
        CMat v = f(q.times[k], q.points);
        if (v.cols() != np) throw DomainError("sample_field: evaluator returned wrong point count");
        if (k == 0) out.values.resize(v.rows(), np * static_cast<Eigen::Index>(q.times.size()));
        out.values.middleCols(static_cast<Eigen::Index>(k) * np, np) = v;
    }
    return out;
}

CVec sampled_mean(const SampledField& s) {
    const double w = s.total_weight();
    if (!(w > 0.0)) throw UnderResolvedError("sampled_mean: empty quadrature");
    if (s.values.cols() == 0) return CVec::Zero(std::max<Eigen::Index>(s.values.rows(), 1));
    return s.values.rowwise().sum() * (s.weight / w);
}

double sampled_mean_oscillation(const SampledField& s) {
    const CVec c = sampled_mean(s);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) acc += (s.values.col(j) - c).norm();
    return (acc * s.weight + s.zero_weight * c.norm()) / s.total_weight();
}

double sampled_rms(const SampledField& s) {
    const double w = s.total_weight();
    if (!(w > 0.0)) throw UnderResolvedError("sampled_rms: empty quadrature");
    return std::sqrt(s.values.cwiseAbs2().sum() * s.weight / w);
}

}  // namespace parabolab
