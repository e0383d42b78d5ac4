#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parabolab/core.hpp"

namespace parabolab {

// One spatial axis. Periodic axes hold `points` nodes lo + i*L/points; interval
// axes hold `points` nodes including both end points.
struct Axis {
    enum class Kind { Periodic, Interval };
    Kind kind = Kind::Periodic;
    double lo = 0.0;
    double hi = 2.0 * kPi;
    int points = 16;

    static Axis periodic(int points, double length = 2.0 * kPi, double lo = 0.0);
    static Axis interval(double lo, double hi, int points);

    bool is_periodic() const { return kind == Kind::Periodic; }
    double length() const { return hi - lo; }
    double spacing() const;
    double node(int i) const;
    // Quadrature weight of node i (periodic: h; interval: trapezoid).
    double weight(int i) const;
    // Signed displacement a - b, wrapped to the minimal image on periodic axes.
    double displacement(double a, double b) const;
    friend bool operator==(const Axis&, const Axis&) = default;
};

// Uniform time steps. Node k sits at start + (k+1)*dt and stands for the cell (t_k - dt, t_k].
struct TimeAxis {
    double start = 0.0;
    double dt = 1.0;
    int steps = 1;

    double node(int k) const { return start + (k + 1) * dt; }
    double end() const { return start + steps * dt; }
    friend bool operator==(const TimeAxis&, const TimeAxis&) = default;
};

class SpaceGrid {
public:
    SpaceGrid() = default;
    explicit SpaceGrid(std::vector<Axis> axes);
    static SpaceGrid torus(int d, int points, double length = 2.0 * kPi);
    // (0, X) x torus^{d-1}
    static SpaceGrid slab(int d, double depth, int normal_points, int tangential_points,
                          double tangential_length = 2.0 * kPi);

    int dim() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }
    const std::vector<Axis>& axes() const { return axes_; }
    int size() const { return size_; }
    bool all_periodic() const;

    // Axis 0 varies slowest.
    int flat(const std::vector<int>& idx) const;
    std::vector<int> unflat(int flat) const;
    Vec point(int flat) const;
    double weight(int flat) const;
    double cell_volume_total() const;

    friend bool operator==(const SpaceGrid& a, const SpaceGrid& b) { return a.axes_ == b.axes_; }

private:
    std::vector<Axis> axes_;
    int size_ = 0;
};

// Complex n-vector samples on a space grid times time nodes. values() has one row per
// component and one column per (time, space) node, time-major.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(int components, SpaceGrid space, TimeAxis time);

    int components() const { return static_cast<int>(values_.rows()); }
    const SpaceGrid& space() const { return space_; }
    const TimeAxis& time() const { return time_; }
    int time_steps() const { return time_.steps; }

    Complex& operator()(int k, int flat, int comp = 0) { return values_(comp, column(k, flat)); }
    Complex operator()(int k, int flat, int comp = 0) const { return values_(comp, column(k, flat)); }
    CVec value(int k, int flat) const { return values_.col(column(k, flat)); }
    void set_value(int k, int flat, const CVec& v) { values_.col(column(k, flat)) = v; }

    CMat& values() { return values_; }
    const CMat& values() const { return values_; }
    // The spatial slice at time node k, components x space nodes.
    auto slice(int k) { return values_.middleCols(static_cast<Eigen::Index>(k) * space_.size(), space_.size()); }
    auto slice(int k) const { return values_.middleCols(static_cast<Eigen::Index>(k) * space_.size(), space_.size()); }

    bool same_layout(const GridFunction& other) const;

    template <class F>
    static GridFunction sample(int components, const SpaceGrid& space, const TimeAxis& time, F&& f) {
        GridFunction g(components, space, time);
        for (int k = 0; k < time.steps; ++k) {
            const double t = time.node(k);
            for (int j = 0; j < space.size(); ++j) g.set_value(k, j, f(t, space.point(j)));
        }
        return g;
    }

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(Complex c);
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(Complex c, GridFunction a) { return a *= c; }

private:
    Eigen::Index column(int k, int flat) const {
        return static_cast<Eigen::Index>(k) * space_.size() + flat;
    }

    SpaceGrid space_;
    TimeAxis time_;
    CMat values_;
};

// (sum |g|^p * cell volume)^{1/p}, |g| the Euclidean norm over components.
double lp_norm(const GridFunction& g, double p);
// Same, restricted to the nodes inside Q.
double lp_norm(const GridFunction& g, double p, const ParabolicCylinder& q);

// Flat indices (time k, space j) of nodes inside Q. Periodic axes use minimal-image distance.
struct NodeSet {
    std::vector<std::pair<int, int>> nodes;
    std::size_t size() const { return nodes.size(); }
};
NodeSet cylinder_nodes(const GridFunction& g, const ParabolicCylinder& q);

inline constexpr std::size_t kMinCylinderNodes = 8;

// Arithmetic mean over the nodes in Q. Throws UnderResolvedError for fewer than
// `min_nodes` nodes (at least one is always required).
CVec cylinder_mean(const GridFunction& g, const ParabolicCylinder& q,
                   std::size_t min_nodes = kMinCylinderNodes);

// Rows: t-index, x-indices..., component, re, im. Metadata on leading '#' lines.
void write_csv(std::ostream& os, const GridFunction& g);
GridFunction read_csv(std::istream& is);
void write_binary(std::ostream& os, const GridFunction& g);
GridFunction read_binary(std::istream& is);
void save(const std::string& path, const GridFunction& g);
GridFunction load(const std::string& path);

}  // namespace parabolab
