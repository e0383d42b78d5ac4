#include "parabolab/grid.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace parabolab {

Axis Axis::periodic(int points, double length, double lo) {
    if (points < 1 || !(length > 0.0)) throw DomainError("Axis::periodic: bad size");
    return Axis{Kind::Periodic, lo, lo + length, points};
}

Axis Axis::interval(double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) throw DomainError("Axis::interval: bad size");
    return Axis{Kind::Interval, lo, hi, points};
}

double Axis::spacing() const {
    return is_periodic() ? length() / points : length() / (points - 1);
}

double Axis::node(int i) const { return lo + i * spacing(); }

double Axis::weight(int i) const {
    const double h = spacing();
    if (is_periodic()) return h;
    return (i == 0 || i == points - 1) ? 0.5 * h : h;
}

double Axis::displacement(double a, double b) const {
    double dx = a - b;
    if (is_periodic()) {
        const double L = length();
        dx -= L * std::round(dx / L);
    }
    return dx;
}

SpaceGrid::SpaceGrid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw DomainError("SpaceGrid: need at least one axis");
    size_ = 1;
    for (const auto& a : axes_) size_ *= a.points;
}

SpaceGrid SpaceGrid::torus(int d, int points, double length) {
    return SpaceGrid(std::vector<Axis>(static_cast<std::size_t>(d), Axis::periodic(points, length)));
}

SpaceGrid SpaceGrid::slab(int d, double depth, int normal_points, int tangential_points,
                          double tangential_length) {
    std::vector<Axis> axes{Axis::interval(0.0, depth, normal_points)};
    for (int i = 1; i < d; ++i) axes.push_back(Axis::periodic(tangential_points, tangential_length));
    return SpaceGrid(std::move(axes));
}

bool SpaceGrid::all_periodic() const {
    for (const auto& a : axes_)
        if (!a.is_periodic()) return false;
    return true;
}

int SpaceGrid::flat(const std::vector<int>& idx) const {
    int f = 0;
    for (int i = 0; i < dim(); ++i) f = f * axis(i).points + idx[static_cast<std::size_t>(i)];
    return f;
}

std::vector<int> SpaceGrid::unflat(int flat) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int i = dim() - 1; i >= 0; --i) {
        idx[static_cast<std::size_t>(i)] = flat % axis(i).points;
        flat /= axis(i).points;
    }
    return idx;
}

Vec SpaceGrid::point(int flat) const {
    Vec p(dim());
    for (int i = dim() - 1; i >= 0; --i) {
        p(i) = axis(i).node(flat % axis(i).points);
        flat /= axis(i).points;
    }
    return p;
}

double SpaceGrid::weight(int flat) const {
    double w = 1.0;
    for (int i = dim() - 1; i >= 0; --i) {
        w *= axis(i).weight(flat % axis(i).points);
        flat /= axis(i).points;
    }
    return w;
}

double SpaceGrid::cell_volume_total() const {
    double v = 1.0;
    for (const auto& a : axes_) v *= a.length();
    return v;
}

GridFunction::GridFunction(int components, SpaceGrid space, TimeAxis time)
    : space_(std::move(space)), time_(time) {
    if (components < 1) throw DomainError("GridFunction: need at least one component");
    if (time_.steps < 1 || !(time_.dt > 0.0)) throw DomainError("GridFunction: bad time axis");
    values_ = CMat::Zero(components, static_cast<Eigen::Index>(time_.steps) * space_.size());
}

bool GridFunction::same_layout(const GridFunction& o) const {
    return components() == o.components() && space_ == o.space_ && time_ == o.time_;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
    if (!same_layout(o)) throw DomainError("GridFunction: layout mismatch");
    values_ += o.values_;
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
    if (!same_layout(o)) throw DomainError("GridFunction: layout mismatch");
    values_ -= o.values_;
    return *this;
}

GridFunction& GridFunction::operator*=(Complex c) {
    values_ *= c;
    return *this;
}

namespace {

double lp_sum(const GridFunction& g, double p, int k, int j) {
    const double w = g.time().dt * g.space().weight(j);
    return std::pow(g.value(k, j).norm(), p) * w;
}

void check_exponent(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("lp_norm: exponent must be finite and >= 1");
}

}  // namespace

double lp_norm(const GridFunction& g, double p) {
    check_exponent(p);
    double s = 0.0;
    for (int k = 0; k < g.time_steps(); ++k)
        for (int j = 0; j < g.space().size(); ++j) s += lp_sum(g, p, k, j);
    return std::pow(s, 1.0 / p);
}

double lp_norm(const GridFunction& g, double p, const ParabolicCylinder& q) {
    check_exponent(p);
    double s = 0.0;
    for (auto [k, j] : cylinder_nodes(g, q).nodes) s += lp_sum(g, p, k, j);
    return std::pow(s, 1.0 / p);
}

NodeSet cylinder_nodes(const GridFunction& g, const ParabolicCylinder& q) {
    const auto& sp = g.space();
    if (q.dim() != sp.dim()) throw DomainError("cylinder_nodes: dimension mismatch");
    NodeSet out;
    std::vector<int> times;
    for (int k = 0; k < g.time_steps(); ++k) {
        const double t = g.time().node(k);
        if (t > q.t_lo() && t <= q.t) times.push_back(k);
    }
    if (times.empty()) return out;
    std::vector<int> inside;
    for (int j = 0; j < sp.size(); ++j) {
        const Vec p = sp.point(j);
        double r2 = 0.0;
        for (int i = 0; i < sp.dim(); ++i) {
            const double dx = sp.axis(i).displacement(p(i), q.x(i));
            r2 += dx * dx;
        }
        if (r2 < q.r * q.r) inside.push_back(j);
    }
    for (int k : times)
        for (int j : inside) out.nodes.emplace_back(k, j);
    return out;
}

CVec cylinder_mean(const GridFunction& g, const ParabolicCylinder& q, std::size_t min_nodes) {
    const auto nodes = cylinder_nodes(g, q);
    if (nodes.size() == 0 || nodes.size() < min_nodes)
        throw UnderResolvedError("cylinder_mean: cylinder holds " + std::to_string(nodes.size()) +
                                 " nodes");
    CVec s = CVec::Zero(g.components());
    for (auto [k, j] : nodes.nodes) s += g.value(k, j);
    return s / static_cast<double>(nodes.size());
}

// Serialization ------------------------------------------------------------------------

namespace {

void write_header(std::ostream& os, const GridFunction& g) {
    os << std::setprecision(17);
    os << "# parabolab-gridfunction v1\n";
    os << "# components " << g.components() << "\n";
    os << "# time " << g.time().start << ' ' << g.time().dt << ' ' << g.time().steps << "\n";
    for (const auto& a : g.space().axes())
        os << "# axis " << (a.is_periodic() ? "periodic" : "interval") << ' ' << a.lo << ' ' << a.hi
           << ' ' << a.points << "\n";
}

}  // namespace

void write_csv(std::ostream& os, const GridFunction& g) {
    write_header(os, g);
    os << "t_index";
    for (int i = 0; i < g.space().dim(); ++i) os << ",x" << i << "_index";
    os << ",component,re,im\n";
    os << std::setprecision(17);
    for (int k = 0; k < g.time_steps(); ++k)
        for (int j = 0; j < g.space().size(); ++j) {
            const auto idx = g.space().unflat(j);
            for (int c = 0; c < g.components(); ++c) {
                os << k;
                for (int v : idx) os << ',' << v;
                const Complex z = g(k, j, c);
                os << ',' << c << ',' << z.real() << ',' << z.imag() << '\n';
            }
        }
}

GridFunction read_csv(std::istream& is) {
    std::string line;
    int comps = -1;
    TimeAxis time;
    std::vector<Axis> axes;
    bool have_time = false;
    while (is.peek() == '#' && std::getline(is, line)) {
        std::istringstream ls(line.substr(1));
        std::string key;
        ls >> key;
        if (key == "components") {
            ls >> comps;
        } else if (key == "time") {
            ls >> time.start >> time.dt >> time.steps;
            have_time = true;
        } else if (key == "axis") {
            std::string kind;
            double lo = 0, hi = 0;
            int pts = 0;
            ls >> kind >> lo >> hi >> pts;
            axes.push_back(kind == "periodic" ? Axis::periodic(pts, hi - lo, lo) : Axis::interval(lo, hi, pts));
        }
    }
    if (comps < 1 || !have_time || axes.empty()) throw ConfigError("read_csv: missing metadata");
    GridFunction g(comps, SpaceGrid(axes), time);
    std::getline(is, line);  // column header
    const int d = static_cast<int>(axes.size());
    std::vector<int> idx(static_cast<std::size_t>(d));
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != d + 4) throw ConfigError("read_csv: bad row '" + line + "'");
        const int k = std::stoi(cells[0]);
        for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = std::stoi(cells[static_cast<std::size_t>(i) + 1]);
        const int c = std::stoi(cells[static_cast<std::size_t>(d) + 1]);
        const double re = std::stod(cells[static_cast<std::size_t>(d) + 2]);
        const double im = std::stod(cells[static_cast<std::size_t>(d) + 3]);
        if (k < 0 || k >= time.steps || c < 0 || c >= comps) throw ConfigError("read_csv: index out of range");
        g(k, g.space().flat(idx), c) = Complex(re, im);
    }
    return g;
}

namespace {

constexpr char kMagic[4] = {'P', 'L', 'G', 'F'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("read_binary: truncated stream");
    return v;
}

}  // namespace

// Layout: magic, u32 version, i32 components, f64 start, f64 dt, i32 steps, i32 d,
// per axis (i32 kind, f64 lo, f64 hi, i32 points), then re/im f64 pairs in CSV row order.
void write_binary(std::ostream& os, const GridFunction& g) {
    os.write(kMagic, 4);
    put<std::uint32_t>(os, 1);
    put<std::int32_t>(os, g.components());
    put<double>(os, g.time().start);
    put<double>(os, g.time().dt);
    put<std::int32_t>(os, g.time().steps);
    put<std::int32_t>(os, g.space().dim());
    for (const auto& a : g.space().axes()) {
        put<std::int32_t>(os, a.is_periodic() ? 0 : 1);
        put<double>(os, a.lo);
        put<double>(os, a.hi);
        put<std::int32_t>(os, a.points);
    }
    const CMat& v = g.values();
    for (Eigen::Index col = 0; col < v.cols(); ++col)
        for (Eigen::Index c = 0; c < v.rows(); ++c) {
            put<double>(os, v(c, col).real());
            put<double>(os, v(c, col).imag());
        }
}

GridFunction read_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("read_binary: bad magic");
    if (get<std::uint32_t>(is) != 1) throw ConfigError("read_binary: unsupported version");
    const int comps = get<std::int32_t>(is);
    TimeAxis time;
    time.start = get<double>(is);
    time.dt = get<double>(is);
    time.steps = get<std::int32_t>(is);
    const int d = get<std::int32_t>(is);
    if (d < 1 || d > 16) throw ConfigError("read_binary: bad dimension");
    std::vector<Axis> axes;
    for (int i = 0; i < d; ++i) {
        const int kind = get<std::int32_t>(is);
        const double lo = get<double>(is), hi = get<double>(is);
        const int pts = get<std::int32_t>(is);
        axes.push_back(kind == 0 ? Axis::periodic(pts, hi - lo, lo) : Axis::interval(lo, hi, pts));
    }
    GridFunction g(comps, SpaceGrid(axes), time);
    CMat& v = g.values();
    for (Eigen::Index col = 0; col < v.cols(); ++col)
        for (Eigen::Index c = 0; c < v.rows(); ++c) {
            const double re = get<double>(is);
            const double im = get<double>(is);
            v(c, col) = Complex(re, im);
        }
    return g;
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

void save(const std::string& path, const GridFunction& g) {
    const bool csv = ends_with(path, ".csv");
    std::ofstream os(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path);
    csv ? write_csv(os, g) : write_binary(os, g);
}

GridFunction load(const std::string& path) {
    const bool csv = ends_with(path, ".csv");
    std::ifstream is(path, csv ? std::ios::in : std::ios::in | std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    return csv ? read_csv(is) : read_binary(is);
}

}  // namespace parabolab
