#pragma once

// Grids, circle-valued angle fields and their finite differences, the moving
// frame (V1, V2) and sampled plane curves.
//
// Angles are stored as arbitrary real representatives of R/2piZ. Every
// difference between two stored angles goes through wrapped_diff, which makes
// all derived quantities independent of the representative chosen per node.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace foliflow {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Counterclockwise quarter turn (the complex structure J).
constexpr Vec2 rotate90(Vec2 v) { return {-v.y, v.x}; }

// ---------------------------------------------------------------------------
// Circle-valued arithmetic
// ---------------------------------------------------------------------------

/// Representative of `a` in (-pi, pi]. Values already in range are returned
/// unchanged, so wrapping is idempotent bit for bit.
inline double wrap_angle(double a) {
    if (a > -pi && a <= pi) return a;
    double r = std::remainder(a, two_pi);
    if (r <= -pi) r += two_pi;
    return r;
}

/// Shortest signed arc from b to a: the representative of (a - b) in (-pi, pi].
inline double wrapped_diff(double a, double b) { return wrap_angle(a - b); }

/// Representative of `a` modulo pi in (-pi/2, pi/2]; used for unoriented
/// comparisons of line fields.
inline double wrap_half_turn(double a) {
    double r = std::remainder(a, pi);
    if (r <= -pi / 2) r += pi;
    return r;
}

// ---------------------------------------------------------------------------
// Grid2D
// ---------------------------------------------------------------------------

/// Uniform square-cell grid. nx and ny count nodes along each axis.
class Grid2D {
public:
    Grid2D(Vec2 origin, double spacing, std::size_t nx, std::size_t ny)
        : origin_(origin), h_(spacing), nx_(nx), ny_(ny) {
        if (!(spacing > 0.0) || !std::isfinite(spacing))
            throw ConfigError("grid spacing must be positive, got " + std::to_string(spacing));
        if (nx < 3 || ny < 3)
            throw ConfigError("grid needs at least 3 nodes per axis, got " + std::to_string(nx) +
                              "x" + std::to_string(ny));
    }

    /// Grid covering [xmin, xmax] x [ymin, ymax]; the extents must be integer
    /// multiples of h up to 1e-9 relative slack.
    static Grid2D from_window(double xmin, double xmax, double ymin, double ymax, double h) {
        auto count = [h](double lo, double hi, const char* axis) {
            const double cells = (hi - lo) / h;
            const double rounded = std::round(cells);
            if (!(hi > lo) || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
                throw ConfigError(std::string("window extent along ") + axis +
                                  " is not a positive multiple of the spacing");
            return static_cast<std::size_t>(rounded) + 1;
        };
        return Grid2D({xmin, ymin}, h, count(xmin, xmax, "x"), count(ymin, ymax, "y"));
    }

    Vec2 origin() const { return origin_; }
    double spacing() const { return h_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return nx_ * ny_; }
    std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }

    Vec2 node(std::size_t i, std::size_t j) const {
        return {origin_.x + static_cast<double>(i) * h_, origin_.y + static_cast<double>(j) * h_};
    }
    Vec2 upper() const { return node(nx_ - 1, ny_ - 1); }

    bool contains(Vec2 p, double margin = 0.0) const {
        const Vec2 hi = upper();
        return p.x >= origin_.x + margin && p.x <= hi.x - margin && p.y >= origin_.y + margin &&
               p.y <= hi.y - margin;
    }

    bool interior(std::size_t i, std::size_t j, std::size_t radius = 1) const {
        return i >= radius && j >= radius && i + radius < nx_ && j + radius < ny_;
    }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;

private:
    Vec2 origin_;
    double h_;
    std::size_t nx_;
    std::size_t ny_;
};

/// Index topology for stencils: bounded grids reject boundary nodes, periodic
/// grids identify node n with node 0 on both axes.
enum class Topology { bounded, periodic };

// ---------------------------------------------------------------------------
// AngleField
// ---------------------------------------------------------------------------

class AngleField {
public:
    AngleField(Grid2D grid, std::vector<double> values, double time = 0.0)
        : grid_(grid), values_(std::move(values)), time_(time) {
        if (values_.size() != grid_.size())
            throw ConfigError("angle field has " + std::to_string(values_.size()) +
                              " values for a grid of " + std::to_string(grid_.size()) + " nodes");
    }

    /// Samples f(x, y) at every node.
    template <class F>
    static AngleField sample(const Grid2D& grid, F&& f, double time = 0.0) {
        std::vector<double> v(grid.size());
        for (std::size_t j = 0; j < grid.ny(); ++j)
            for (std::size_t i = 0; i < grid.nx(); ++i) v[grid.index(i, j)] = f(grid.node(i, j));
        return AngleField(grid, std::move(v), time);
    }

    const Grid2D& grid() const { return grid_; }
    double time() const { return time_; }
    std::span<const double> values() const { return values_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }

    AngleField with_values(std::vector<double> v, double time) const {
        return AngleField(grid_, std::move(v), time);
    }

private:
    Grid2D grid_;
    std::vector<double> values_;
    double time_;
};

namespace detail {

struct Neighborhood {
    // Offsets relative to the center, each already unwrapped against it.
    const AngleField& field;
    std::size_t i, j;
    Topology topo;

    double center() const { return field(i, j); }

    double at(long di, long dj) const {
        const auto& g = field.grid();
        long ii = static_cast<long>(i) + di;
        long jj = static_cast<long>(j) + dj;
        if (topo == Topology::periodic) {
            const long nx = static_cast<long>(g.nx()), ny = static_cast<long>(g.ny());
            ii = ((ii % nx) + nx) % nx;
            jj = ((jj % ny) + ny) % ny;
        }
        return field(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
    }

    /// Value at offset minus the center value, wrapped.
    double rel(long di, long dj) const { return wrapped_diff(at(di, dj), center()); }
};

inline void require_interior(const AngleField& f, std::size_t i, std::size_t j, std::size_t radius,
                             Topology topo, const char* what) {
    if (topo == Topology::periodic) {
        if (i < f.grid().nx() && j < f.grid().ny()) return;
    } else if (f.grid().interior(i, j, radius)) {
        return;
    }
    throw DomainError(std::string(what) + ": node (" + std::to_string(i) + ", " +
                      std::to_string(j) + ") lacks a radius-" + std::to_string(radius) +
                      " stencil");
}

}  // namespace detail

/// Central-difference gradient at an interior node.
inline Vec2 central_gradient(const AngleField& f, std::size_t i, std::size_t j,
                             Topology topo = Topology::bounded) {
    detail::require_interior(f, i, j, 1, topo, "central_gradient");
    const detail::Neighborhood n{f, i, j, topo};
    const double h = f.grid().spacing();
    return {wrapped_diff(n.at(1, 0), n.at(-1, 0)) / (2.0 * h),
            wrapped_diff(n.at(0, 1), n.at(0, -1)) / (2.0 * h)};
}

struct Hessian2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    /// Quadratic form v^T H v.
    double contract(Vec2 v) const { return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y; }
    Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
};

/// Second differences against the center node; the mixed term uses the four
/// diagonal neighbours. Exact on quadratic lifts.
inline Hessian2 central_hessian(const AngleField& f, std::size_t i, std::size_t j,
                                Topology topo = Topology::bounded) {
    detail::require_interior(f, i, j, 1, topo, "central_hessian");
    const detail::Neighborhood n{f, i, j, topo};
    const double h2 = f.grid().spacing() * f.grid().spacing();
    Hessian2 H;
    H.xx = (n.rel(1, 0) + n.rel(-1, 0)) / h2;
    H.yy = (n.rel(0, 1) + n.rel(0, -1)) / h2;
    H.xy = (n.rel(1, 1) - n.rel(1, -1) - n.rel(-1, 1) + n.rel(-1, -1)) / (4.0 * h2);
    return H;
}

/// Gradient at every node: central in the interior, one-sided second order
/// on bounded edges.
inline std::vector<Vec2> gradient_field(const AngleField& f, Topology topo = Topology::bounded) {
    const auto& g = f.grid();
    const double h = g.spacing();
    std::vector<Vec2> out(g.size());
    auto one_axis = [&](std::size_t i, std::size_t j, bool along_x) {
        const std::size_t k = along_x ? i : j;
        const std::size_t n = along_x ? g.nx() : g.ny();
        auto val = [&](long d) {
            return along_x ? f(static_cast<std::size_t>(static_cast<long>(i) + d), j)
                           : f(i, static_cast<std::size_t>(static_cast<long>(j) + d));
        };
        if (topo == Topology::periodic || (k > 0 && k + 1 < n)) {
            const detail::Neighborhood nb{f, i, j, topo};
            return along_x ? wrapped_diff(nb.at(1, 0), nb.at(-1, 0)) / (2.0 * h)
                           : wrapped_diff(nb.at(0, 1), nb.at(0, -1)) / (2.0 * h);
        }
        const double c = val(0);
        if (k == 0) return (4.0 * wrapped_diff(val(1), c) - wrapped_diff(val(2), c)) / (2.0 * h);
        return (wrapped_diff(val(-2), c) - 4.0 * wrapped_diff(val(-1), c)) / (2.0 * h);
    };
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            out[g.index(i, j)] = {one_axis(i, j, true), one_axis(i, j, false)};
    return out;
}

// ---------------------------------------------------------------------------
// Frame
// ---------------------------------------------------------------------------

struct Frame {
    Vec2 v1;  // leaf tangent
    Vec2 v2;  // leaf normal, J v1
};

inline Frame frame_at(double theta) {
    const Vec2 v1{std::cos(theta), std::sin(theta)};
    return {v1, rotate90(v1)};
}

// ---------------------------------------------------------------------------
// Off-grid evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct CellLocation {
    std::size_t i, j;
    double fx, fy;
};

inline CellLocation locate(const Grid2D& g, Vec2 p, const char* what) {
    if (!g.contains(p) || !std::isfinite(p.x) || !std::isfinite(p.y))
        throw DomainError(std::string(what) + ": point (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") lies outside the grid");
    const double u = (p.x - g.origin().x) / g.spacing();
    const double v = (p.y - g.origin().y) / g.spacing();
    std::size_t i = std::min(static_cast<std::size_t>(std::floor(u)), g.nx() - 2);
    std::size_t j = std::min(static_cast<std::size_t>(std::floor(v)), g.ny() - 2);
    return {i, j, u - static_cast<double>(i), v - static_cast<double>(j)};
}

}  // namespace detail

/// Bilinear interpolation in a lift anchored at the lower-left corner of the
/// containing cell. Returns the (-pi, pi] representative.
inline double interp_angle(const AngleField& f, Vec2 p) {
    const auto c = detail::locate(f.grid(), p, "interp_angle");
    const double base = f(c.i, c.j);
    const double d10 = wrapped_diff(f(c.i + 1, c.j), base);
    const double d01 = wrapped_diff(f(c.i, c.j + 1), base);
    const double d11 = wrapped_diff(f(c.i + 1, c.j + 1), base);
    const double blended =
        (1 - c.fx) * c.fy * d01 + c.fx * (1 - c.fy) * d10 + c.fx * c.fy * d11;
    return wrap_angle(base + blended);
}

/// Bilinear interpolation of node-wise gradients.
inline Vec2 interp_vector(const Grid2D& g, std::span<const Vec2> nodal, Vec2 p) {
    const auto c = detail::locate(g, p, "interp_vector");
    const Vec2 a = nodal[g.index(c.i, c.j)];
    const Vec2 b = nodal[g.index(c.i + 1, c.j)];
    const Vec2 d = nodal[g.index(c.i, c.j + 1)];
    const Vec2 e = nodal[g.index(c.i + 1, c.j + 1)];
    return (1 - c.fx) * (1 - c.fy) * a + c.fx * (1 - c.fy) * b + (1 - c.fx) * c.fy * d +
           c.fx * c.fy * e;
}

// ---------------------------------------------------------------------------
// Curve
// ---------------------------------------------------------------------------

/// Ordered polyline sample of a plane curve. Closed curves do not repeat the
/// first point; the closing segment is implicit.
class Curve {
public:
    Curve(std::vector<Vec2> points, bool closed) : points_(std::move(points)), closed_(closed) {
        if (points_.size() < 3)
            throw InvalidCurveError("curve needs at least 3 points, got " +
                                    std::to_string(points_.size()));
        const std::size_t segs = segment_count();
        for (std::size_t k = 0; k < segs; ++k) {
            const double len = distance(points_[k], points_[(k + 1) % points_.size()]);
            if (!(len > 0.0) || !std::isfinite(len))
                throw InvalidCurveError("degenerate segment " + std::to_string(k) + " in curve");
        }
    }

    std::span<const Vec2> points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool closed() const { return closed_; }
    const Vec2& operator[](std::size_t k) const { return points_[k]; }
    std::size_t segment_count() const { return closed_ ? points_.size() : points_.size() - 1; }

    double segment_length(std::size_t k) const {
        return distance(points_[k], points_[(k + 1) % points_.size()]);
    }

    /// Cumulative polyline arclength at each point (starting at 0).
    std::vector<double> arclength() const {
        std::vector<double> s(points_.size(), 0.0);
        for (std::size_t k = 1; k < points_.size(); ++k) s[k] = s[k - 1] + segment_length(k - 1);
        return s;
    }

    double length() const {
        double L = 0.0;
        for (std::size_t k = 0; k < segment_count(); ++k) L += segment_length(k);
        return L;
    }

    double min_segment() const {
        double m = segment_length(0);
        for (std::size_t k = 1; k < segment_count(); ++k) m = std::min(m, segment_length(k));
        return m;
    }

    double max_segment() const {
        double m = 0.0;
        for (std::size_t k = 0; k < segment_count(); ++k) m = std::max(m, segment_length(k));
        return m;
    }

private:
    std::vector<Vec2> points_;
    bool closed_;
};

namespace detail {

// Weights of the second-order derivative at the middle of three samples with
// spacings dm (left) and dp (right).
inline std::array<double, 3> centered_weights(double dm, double dp) {
    return {-dp / (dm * (dm + dp)), (dp - dm) / (dm * dp), dm / (dp * (dm + dp))};
}

// Weights of the second-order derivative at the first of three samples
// spaced d1, d2.
inline std::array<double, 3> forward_weights(double d1, double d2) {
    return {-(2 * d1 + d2) / (d1 * (d1 + d2)), (d1 + d2) / (d1 * d2), -d1 / (d2 * (d1 + d2))};
}

// Weights at the last of three samples spaced d1, d2.
inline std::array<double, 3> backward_weights(double d1, double d2) {
    return {d2 / (d1 * (d1 + d2)), -(d1 + d2) / (d1 * d2), (d1 + 2 * d2) / (d2 * (d1 + d2))};
}

// Applies a three-point derivative rule along a curve's sample index, to values
// given by rel(k, ref), which must return the value at k relative to sample ref.
template <class Rel>
std::vector<double> differentiate_along(const Curve& c, Rel&& rel) {
    const std::size_t n = c.size();
    std::vector<double> out(n);
    auto seg = [&](std::size_t k) { return c.segment_length(k % n); };
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t a, b, m;
        std::array<double, 3> w;
        if (c.closed() || (k > 0 && k + 1 < n)) {
            a = (k + n - 1) % n;
            m = k;
            b = (k + 1) % n;
            w = centered_weights(seg(a), seg(k));
            out[k] = w[0] * rel(a, m) + w[2] * rel(b, m);
        } else if (k == 0) {
            w = forward_weights(seg(0), seg(1));
            out[k] = w[1] * rel(1, 0) + w[2] * rel(2, 0);
        } else {
            w = backward_weights(seg(n - 3), seg(n - 2));
            out[k] = w[0] * rel(n - 3, n - 1) + w[1] * rel(n - 2, n - 1);
        }
    }
    return out;
}

}  // namespace detail

/// Tangent angle at each sample from second-order, arclength-weighted
/// differences of the points (periodic stencils on closed curves).
inline std::vector<double> curve_tangent_angle(const Curve& c) {
    const auto px = detail::differentiate_along(
        c, [&](std::size_t k, std::size_t ref) { return c[k].x - c[ref].x; });
    const auto py = detail::differentiate_along(
        c, [&](std::size_t k, std::size_t ref) { return c[k].y - c[ref].y; });
    std::vector<double> theta(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) theta[k] = std::atan2(py[k], px[k]);
    return theta;
}

/// Unit tangents matching curve_tangent_angle.
inline std::vector<Vec2> curve_tangents(const Curve& c) {
    const auto th = curve_tangent_angle(c);
    std::vector<Vec2> t(th.size());
    for (std::size_t k = 0; k < th.size(); ++k) t[k] = {std::cos(th[k]), std::sin(th[k])};
    return t;
}

/// Signed curvature d(theta)/ds, positive when the curve turns toward J v1.
inline std::vector<double> curve_curvature(const Curve& c, std::span<const double> tangent_angle) {
    return detail::differentiate_along(c, [&](std::size_t k, std::size_t ref) {
        return wrapped_diff(tangent_angle[k], tangent_angle[ref]);
    });
}

inline std::vector<double> curve_curvature(const Curve& c) {
    const auto th = curve_tangent_angle(c);
    return curve_curvature(c, th);
}

/// Derivative of a scalar sampled on the curve, with respect to arclength.
inline std::vector<double> curve_derivative(const Curve& c, std::span<const double> values) {
    return detail::differentiate_along(
        c, [&](std::size_t k, std::size_t ref) { return values[k] - values[ref]; });
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace detail {

// Cubic Lagrange interpolation of the curve at chord-length parameter s,
// using the four samples around the containing segment.
inline Vec2 cubic_at(const Curve& c, std::span<const double> knots, double total, double s) {
    const std::size_t n = c.size();
    const long nl = static_cast<long>(n);
    const long segs = static_cast<long>(c.segment_count());
    // containing segment
    long k = static_cast<long>(std::upper_bound(knots.begin(), knots.end(), s) - knots.begin()) - 1;
    k = std::clamp<long>(k, 0, segs - 1);
    std::array<long, 4> idx;
    if (c.closed()) {
        for (int m = 0; m < 4; ++m) idx[m] = k - 1 + m;
    } else {
        const long first = std::clamp<long>(k - 1, 0, nl - 4 < 0 ? 0 : nl - 4);
        for (int m = 0; m < 4; ++m) idx[m] = first + m;
        if (nl < 4) idx = {0, 1, 2, 2};
    }
    std::array<double, 4> u;
    std::array<Vec2, 4> p;
    for (int m = 0; m < 4; ++m) {
        const long q = idx[m];
        const long wrapped = ((q % nl) + nl) % nl;
        const double lap = c.closed() ? std::floor(static_cast<double>(q) / static_cast<double>(nl)) : 0.0;
        u[m] = knots[static_cast<std::size_t>(wrapped)] + lap * total;
        p[m] = c[static_cast<std::size_t>(wrapped)];
    }
    if (!c.closed() && nl < 4) {
        // quadratic through three points
        Vec2 out{};
        for (int a = 0; a < 3; ++a) {
            double w = 1.0;
            for (int b = 0; b < 3; ++b)
                if (b != a) w *= (s - u[b]) / (u[a] - u[b]);
            out += w * p[a];
        }
        return out;
    }
    Vec2 out{};
    for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) w *= (s - u[b]) / (u[a] - u[b]);
        out += w * p[a];
    }
    return out;
}

}  // namespace detail

/// Resamples to `count` points equally spaced in chord-length parameter,
/// interpolating with local cubics. Open curves keep both endpoints; closed
/// curves keep the first point.
inline Curve resample_uniform(const Curve& c, std::size_t count) {
    if (count < 3) throw InvalidCurveError("resampling needs at least 3 points");
    auto knots = c.arclength();
    const double total = c.length();
    std::vector<Vec2> out(count);
    const double step = c.closed() ? total / static_cast<double>(count)
                                   : total / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
        const double s = step * static_cast<double>(k);
        out[k] = detail::cubic_at(c, knots, total, s);
    }
    if (!c.closed()) {
        out.front() = c.points().front();
        out.back() = c.points().back();
    } else {
        out.front() = c.points().front();
    }
    return Curve(std::move(out), c.closed());
}

/// Resamples with spacing as close as possible to `spacing`.
inline Curve resample_spacing(const Curve& c, double spacing) {
    if (!(spacing > 0.0)) throw ConfigError("resampling spacing must be positive");
    const double L = c.length();
    const double segs = std::max(c.closed() ? 3.0 : 2.0, std::round(L / spacing));
    return resample_uniform(c, static_cast<std::size_t>(segs) + (c.closed() ? 0 : 1));
}

}  // namespace foliflow
