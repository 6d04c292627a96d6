#pragma once

// Reconstruction of the moving leaves from an angle field theta(., t).
//
// A base curve solves alpha' = (grad theta . V1) V2 from the seed; at each time
// the leaf is the integral curve of V1 through alpha(t). The defect
// D = <X_t, V2> - theta_s vanishes identically for an exact solution, so its
// discrete size measures reconstruction fidelity.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "angle_pde.hpp"
#include "catalog.hpp"
#include "errors.hpp"
#include "field_core.hpp"
#include "parallel.hpp"

namespace foliflow {

/// Anything that can report theta and grad theta at (p, t), and whether p is
/// safely inside the region where those are defined.
template <class S>
concept AngleSource = requires(const S& s, Vec2 p, double t) {
    { s.angle(p, t) } -> std::convertible_to<double>;
    { s.gradient(p, t) } -> std::convertible_to<Vec2>;
    { s.contains(p, t) } -> std::convertible_to<bool>;
};

/// Axis-aligned window; an unbounded window contains every point.
struct Window {
    double xmin = -std::numeric_limits<double>::infinity();
    double xmax = std::numeric_limits<double>::infinity();
    double ymin = -std::numeric_limits<double>::infinity();
    double ymax = std::numeric_limits<double>::infinity();

    bool contains(Vec2 p, double margin = 0.0) const {
        return p.x >= xmin + margin && p.x <= xmax - margin && p.y >= ymin + margin &&
               p.y <= ymax - margin;
    }
    friend bool operator==(const Window&, const Window&) = default;
};

/// Exact catalog field, restricted to a window and kept `singular_margin`
/// away from the polar origin.
struct ExactSource {
    CatalogSolution solution;
    Window window{};
    double singular_margin = 1e-3;

    double angle(Vec2 p, double t) const { return eval_angle(solution, p, t); }
    Vec2 gradient(Vec2 p, double t) const { return eval_gradient(solution, p, t); }
    bool contains(Vec2 p, double) const {
        if (!window.contains(p)) return false;
        return solution.kind != SolutionKind::polar || norm(p) > singular_margin;
    }
};

/// Analytic field given as callables theta(p, t) and grad theta(p, t).
struct FunctionSource {
    std::function<double(Vec2, double)> theta;
    std::function<Vec2(Vec2, double)> grad;
    Window window{};

    double angle(Vec2 p, double t) const { return theta(p, t); }
    Vec2 gradient(Vec2 p, double t) const { return grad(p, t); }
    bool contains(Vec2 p, double) const { return window.contains(p); }
};

/// Time series of grid snapshots, linear in time between snapshots. Off-grid
/// gradients are bilinear interpolants of the node-wise gradients.
class GridSeries {
public:
    explicit GridSeries(std::vector<AngleField> snapshots, double margin_cells = 2.0,
                        Topology topo = Topology::bounded)
        : snaps_(std::move(snapshots)) {
        if (snaps_.empty()) throw ConfigError("grid series needs at least one snapshot");
        for (std::size_t k = 1; k < snaps_.size(); ++k) {
            if (!(snaps_[k].time() > snaps_[k - 1].time()))
                throw ConfigError("snapshot times must increase");
            if (!(snaps_[k].grid() == snaps_[0].grid()))
                throw ConfigError("all snapshots must share one grid");
        }
        grads_.reserve(snaps_.size());
        for (const auto& s : snaps_) grads_.push_back(gradient_field(s, topo));
        margin_ = margin_cells * snaps_[0].grid().spacing();
    }

    const Grid2D& grid() const { return snaps_[0].grid(); }
    std::span<const AngleField> snapshots() const { return snaps_; }
    double t_begin() const { return snaps_.front().time(); }
    double t_end() const { return snaps_.back().time(); }

    double angle(Vec2 p, double t) const {
        const auto [k, w] = bracket(t);
        const double a = interp_angle(snaps_[k], p);
        if (w == 0.0) return a;
        const double b = interp_angle(snaps_[k + 1], p);
        return wrap_angle(a + w * wrapped_diff(b, a));
    }

    Vec2 gradient(Vec2 p, double t) const {
        const auto [k, w] = bracket(t);
        const Vec2 a = interp_vector(grid(), grads_[k], p);
        if (w == 0.0) return a;
        const Vec2 b = interp_vector(grid(), grads_[k + 1], p);
        return (1.0 - w) * a + w * b;
    }

    bool contains(Vec2 p, double t) const {
        const double slack = 1e-9 * std::max(1.0, std::abs(t_end()));
        return grid().contains(p, margin_) && t >= t_begin() - slack && t <= t_end() + slack;
    }

private:
    std::pair<std::size_t, double> bracket(double t) const {
        if (snaps_.size() == 1) return {0, 0.0};
        const double slack = 1e-9 * std::max(1.0, std::abs(t_end()));
        if (t < t_begin() - slack || t > t_end() + slack)
            throw DomainError("time " + std::to_string(t) + " outside the snapshot range");
        t = std::clamp(t, t_begin(), t_end());
        std::size_t k = 0;
        while (k + 2 < snaps_.size() && snaps_[k + 1].time() <= t) ++k;
        const double t0 = snaps_[k].time(), t1 = snaps_[k + 1].time();
        double w = (t - t0) / (t1 - t0);
        if (w >= 1.0) w = 1.0;
        if (w <= 0.0) w = 0.0;
        return {k, w};
    }

    std::vector<AngleField> snaps_;
    std::vector<std::vector<Vec2>> grads_;
    double margin_ = 0.0;
};

static_assert(AngleSource<ExactSource>);
static_assert(AngleSource<FunctionSource>);
static_assert(AngleSource<GridSeries>);

// ---------------------------------------------------------------------------
// Base curve
// ---------------------------------------------------------------------------

struct BaseCurve {
    std::vector<double> times;
    std::vector<Vec2> points;
    bool truncated = false;  // left the safe region before t_max
};

/// Normal velocity of the base curve: (grad theta . V1) V2.
template <AngleSource S>
Vec2 base_velocity(const S& src, Vec2 p, double t) {
    const Frame fr = frame_at(src.angle(p, t));
    return dot(src.gradient(p, t), fr.v1) * fr.v2;
}

/// Classical RK4 for alpha' = (grad theta . V1) V2 with steps of dt (the last
/// one shortened to hit t_max). Stops early, flagging truncation, when a stage
/// leaves the safe region.
template <AngleSource S>
BaseCurve integrate_base_curve(const S& src, Vec2 y, double t_max, double dt, double t0 = 0.0) {
    if (!src.contains(y, t0)) throw DomainError("seed lies outside the field's safe region");
    if (!(dt > 0.0)) throw ConfigError("base-curve step must be positive");
    BaseCurve bc;
    bc.times.push_back(t0);
    bc.points.push_back(y);
    const auto steps = static_cast<std::size_t>(std::ceil((t_max - t0) / dt - 1e-9));
    Vec2 p = y;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        const double t_next = (k + 1 == steps) ? t_max : t0 + static_cast<double>(k + 1) * dt;
        const double hstep = t_next - t;
        auto stage = [&](Vec2 q, double tq) -> std::optional<Vec2> {
            if (!src.contains(q, tq)) return std::nullopt;
            return base_velocity(src, q, tq);
        };
        const auto k1 = stage(p, t);
        const auto k2 = k1 ? stage(p + 0.5 * hstep * *k1, t + 0.5 * hstep) : std::nullopt;
        const auto k3 = k2 ? stage(p + 0.5 * hstep * *k2, t + 0.5 * hstep) : std::nullopt;
        const auto k4 = k3 ? stage(p + hstep * *k3, t_next) : std::nullopt;
        if (!k4) {
            bc.truncated = true;
            break;
        }
        const Vec2 next = p + (hstep / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
        if (!src.contains(next, t_next)) {
            bc.truncated = true;
            break;
        }
        p = next;
        bc.times.push_back(t_next);
        bc.points.push_back(p);
    }
    return bc;
}

// ---------------------------------------------------------------------------
// Leaves
// ---------------------------------------------------------------------------

/// Integral curve of V1 sampled at s_k = k ds for k in [first, last]; the
/// point with k = 0 is the start point.
struct Leaf {
    std::vector<Vec2> points;
    double ds = 0.0;
    long first = 0;
    double time = 0.0;
    bool truncated = false;
    double max_tangency_error = 0.0;  // |angle(X_s) - theta(X)|, wrapped

    long last() const { return first + static_cast<long>(points.size()) - 1; }
    bool has(long k) const { return k >= first && k <= last(); }
    const Vec2& at(long k) const { return points[static_cast<std::size_t>(k - first)]; }
    Vec2 anchor() const { return at(0); }
    Curve curve() const { return Curve(points, false); }
};

namespace detail {

template <AngleSource S>
std::vector<Vec2> trace_direction(const S& src, double t, Vec2 start, double step,
                                  std::size_t steps, bool& truncated) {
    std::vector<Vec2> out;
    Vec2 p = start;
    auto stage = [&](Vec2 q) -> std::optional<Vec2> {
        if (!src.contains(q, t)) return std::nullopt;
        const double th = src.angle(q, t);
        return Vec2{std::cos(th), std::sin(th)};
    };
    for (std::size_t k = 0; k < steps; ++k) {
        const auto k1 = stage(p);
        const auto k2 = k1 ? stage(p + 0.5 * step * *k1) : std::nullopt;
        const auto k3 = k2 ? stage(p + 0.5 * step * *k2) : std::nullopt;
        const auto k4 = k3 ? stage(p + step * *k3) : std::nullopt;
        if (!k4) {
            truncated = true;
            break;
        }
        const Vec2 next = p + (step / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
        if (!src.contains(next, t)) {
            truncated = true;
            break;
        }
        p = next;
        out.push_back(p);
    }
    return out;
}

}  // namespace detail

/// RK4 integral curve of V1 through `start`, from s = -extent to +extent with
/// a step as close to `ds` as divides the extent. Leaving the safe region
/// truncates the leaf instead of failing. The backward half is traced first
/// when `backward_first` is set; the point set does not depend on it.
template <AngleSource S>
Leaf integrate_leaf(const S& src, double t, Vec2 start, double extent, double ds,
                    bool backward_first = false) {
    if (!src.contains(start, t)) throw DomainError("leaf start lies outside the safe region");
    if (!(extent > 0.0) || !(ds > 0.0)) throw ConfigError("leaf extent and step must be positive");
    const auto steps = static_cast<std::size_t>(std::ceil(extent / ds - 1e-9));
    const double step = extent / static_cast<double>(steps);
    Leaf leaf;
    leaf.ds = step;
    leaf.time = t;
    std::vector<Vec2> fwd, bwd;
    if (backward_first) {
        bwd = detail::trace_direction(src, t, start, -step, steps, leaf.truncated);
        fwd = detail::trace_direction(src, t, start, step, steps, leaf.truncated);
    } else {
        fwd = detail::trace_direction(src, t, start, step, steps, leaf.truncated);
        bwd = detail::trace_direction(src, t, start, -step, steps, leaf.truncated);
    }
    leaf.first = -static_cast<long>(bwd.size());
    leaf.points.reserve(bwd.size() + 1 + fwd.size());
    leaf.points.assign(bwd.rbegin(), bwd.rend());
    leaf.points.push_back(start);
    leaf.points.insert(leaf.points.end(), fwd.begin(), fwd.end());
    if (leaf.points.size() >= 3) {
        const Curve c = leaf.curve();
        const auto tang = curve_tangent_angle(c);
        for (std::size_t k = 0; k < c.size(); ++k)
            leaf.max_tangency_error = std::max(
                leaf.max_tangency_error, std::abs(wrapped_diff(tang[k], src.angle(c[k], t))));
    }
    return leaf;
}

/// Step-halving error estimate of a leaf: max distance between samples of
/// the ds and ds/2 integrations, divided by 15 (RK4 is fourth order).
template <AngleSource S>
double leaf_richardson_error(const S& src, double t, Vec2 start, double extent, double ds) {
    const Leaf coarse = integrate_leaf(src, t, start, extent, ds);
    const Leaf fine = integrate_leaf(src, t, start, extent, coarse.ds / 2.0);
    double err = 0.0;
    for (long k = coarse.first; k <= coarse.last(); ++k)
        if (fine.has(2 * k)) err = std::max(err, distance(coarse.at(k), fine.at(2 * k)));
    return err / 15.0;
}

// ---------------------------------------------------------------------------
// Sheets
// ---------------------------------------------------------------------------

struct FoliationSheet {
    Vec2 seed;
    BaseCurve base;
    std::vector<Leaf> leaves;  // one per base time sample
    double s_extent = 0.0;
    double ds = 0.0;

    bool truncated() const {
        if (base.truncated) return true;
        return std::any_of(leaves.begin(), leaves.end(), [](const Leaf& l) { return l.truncated; });
    }
};

struct SheetOptions {
    double s_extent = 1.0;
    double ds = 1.0 / 128.0;
    double dt = 1e-3;
    double t_max = 0.0;
    double t0 = 0.0;
};

/// Base curve from the seed, then one leaf through alpha(t) at each time sample.
template <AngleSource S>
FoliationSheet build_sheet(const S& src, Vec2 seed, const SheetOptions& opt) {
    FoliationSheet sheet;
    sheet.seed = seed;
    sheet.s_extent = opt.s_extent;
    sheet.base = integrate_base_curve(src, seed, opt.t_max, opt.dt, opt.t0);
    sheet.leaves.resize(sheet.base.times.size());
    parallel_for(sheet.leaves.size(), [&](std::size_t k) {
        sheet.leaves[k] =
            integrate_leaf(src, sheet.base.times[k], sheet.base.points[k], opt.s_extent, opt.ds);
    });
    sheet.ds = sheet.leaves.empty() ? opt.ds : sheet.leaves.front().ds;
    return sheet;
}

struct DiagnosticSample {
    double t;
    double s;
    double defect;        // <X_t, V2> - theta_s
    double heat_residual; // theta_t - theta_ss + (grad theta . V2) theta_s
};

struct SheetDiagnostics {
    std::vector<DiagnosticSample> samples;
    double max_defect = 0.0;
    double max_heat_residual = 0.0;
    double max_base_defect = 0.0;  // |D(0, t)|
};

/// Tabulates the normal-velocity defect and the intrinsic heat-equation
/// residual at interior (s, t) samples. X_t uses central differences in t at
/// fixed s; V2, theta_s and theta_ss come from each leaf's geometry.
template <AngleSource S>
SheetDiagnostics sheet_diagnostics(const FoliationSheet& sheet, const S& src) {
    const auto& L = sheet.leaves;
    if (L.size() < 3) throw ConfigError("sheet diagnostics need at least 3 time samples");
    for (const auto& leaf : L)
        if (leaf.points.size() < 5)
            throw ConfigError("sheet diagnostics need at least 5 samples per leaf");
    const auto& T = sheet.base.times;
    std::vector<std::vector<DiagnosticSample>> rows(L.size());
    parallel_for(L.size() - 2, [&](std::size_t m) {
        const std::size_t k = m + 1;
        const Leaf& prev = L[k - 1];
        const Leaf& cur = L[k];
        const Leaf& next = L[k + 1];
        const Curve c = cur.curve();
        const auto tang = curve_tangent_angle(c);
        const auto kappa = curve_curvature(c, tang);
        const auto kappa_s = curve_derivative(c, kappa);
        const double span = T[k + 1] - T[k - 1];
        const double dt_half = 0.5 * std::min(T[k + 1] - T[k], T[k] - T[k - 1]);
        // theta_ss needs three levels of centered stencils
        const long lo = std::max({prev.first, cur.first + 3, next.first});
        const long hi = std::min({prev.last(), cur.last() - 3, next.last()});
        for (long s = lo; s <= hi; ++s) {
            const auto idx = static_cast<std::size_t>(s - cur.first);
            const Vec2 x = cur.at(s);
            const Vec2 xt = (next.at(s) - prev.at(s)) / span;
            const Frame fr = frame_at(tang[idx]);
            const double theta_s = kappa[idx];
            const double defect = dot(xt, fr.v2) - theta_s;
            double theta_t = 0.0;
            const double ta = T[k] - dt_half, tb = T[k] + dt_half;
            if (src.contains(x, ta) && src.contains(x, tb))
                theta_t = wrapped_diff(src.angle(x, tb), src.angle(x, ta)) / (tb - ta);
            const double grad_v2 = dot(src.gradient(x, T[k]), fr.v2);
            const double heat = theta_t - kappa_s[idx] + grad_v2 * theta_s;
            rows[k].push_back({T[k], static_cast<double>(s) * cur.ds, defect, heat});
        }
    });
    SheetDiagnostics d;
    for (const auto& r : rows)
        for (const auto& smp : r) {
            d.samples.push_back(smp);
            d.max_defect = std::max(d.max_defect, std::abs(smp.defect));
            d.max_heat_residual = std::max(d.max_heat_residual, std::abs(smp.heat_residual));
            if (smp.s == 0.0) d.max_base_defect = std::max(d.max_base_defect, std::abs(smp.defect));
        }
    return d;
}

// ---------------------------------------------------------------------------
// Straight leaves of stationary fields
// ---------------------------------------------------------------------------

enum class Verdict { pass, fail, inapplicable };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inapplicable: return "inapplicable";
    }
    return "?";
}

struct StraightnessOptions {
    double s_extent = 0.4;
    double tol_curvature = 1e-8;          // |theta_s(y)| allowed
    double tol_deviation = 1e-6;          // chord deviation allowed
    std::optional<double> residual_max{}; // stationarity threshold, default 10 h^2
};

struct StraightnessReport {
    Verdict verdict = Verdict::inapplicable;
    double deviation = 0.0;
    double theta_s = 0.0;
    double residual = 0.0;
    std::string reason;
};

/// Traces the leaf through y and measures its deviation from the chord. Only
/// meaningful when the field is stationary near the leaf and the leaf's
/// curvature vanishes at y; otherwise the verdict is inapplicable.
inline StraightnessReport straightness_check(const AngleField& field, Vec2 y,
                                             StraightnessOptions opt = {}) {
    StraightnessReport rep;
    const GridSeries src({field});
    const double h = field.grid().spacing();
    if (!src.contains(y, field.time())) throw DomainError("seed lies outside the grid margin");
    const Frame fr = frame_at(src.angle(y, field.time()));
    rep.theta_s = dot(src.gradient(y, field.time()), fr.v1);
    if (std::abs(rep.theta_s) > opt.tol_curvature) {
        rep.reason = "leaf curvature at the seed is " + std::to_string(rep.theta_s);
        return rep;
    }
    const Leaf leaf = integrate_leaf(src, field.time(), y, opt.s_extent, h / 2.0);
    // stationarity near the traced leaf
    const double reach = 2.0 * h;
    auto near_leaf = [&](Vec2 p) {
        return std::any_of(leaf.points.begin(), leaf.points.end(),
                           [&](Vec2 q) { return distance(p, q) <= reach; });
    };
    const auto res = stationary_residual(field, near_leaf);
    rep.residual = res.max;
    const double threshold = opt.residual_max.value_or(10.0 * h * h);
    if (res.max > threshold) {
        rep.reason = "field is not stationary near the leaf (residual " + std::to_string(res.max) + ")";
        return rep;
    }
    const Vec2 a = leaf.points.front(), b = leaf.points.back();
    const Vec2 chord = b - a;
    const double len = norm(chord);
    for (const Vec2& p : leaf.points)
        rep.deviation = std::max(rep.deviation, std::abs(cross(chord, p - a)) / len);
    rep.verdict = rep.deviation <= opt.tol_deviation ? Verdict::pass : Verdict::fail;
    if (leaf.truncated) rep.reason = "leaf truncated at the grid margin";
    return rep;
}

}  // namespace foliflow
