#pragma once

// Parametric curve shortening flow: every sample moves along the normal
// J T with speed equal to the signed curvature, followed by uniform-arclength
// resampling (a tangential reparametrization, geometrically immaterial).
// Used as an independent ground truth for the angle-field pipeline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field_core.hpp"
#include "parallel.hpp"

namespace foliflow {

/// Prescribed endpoint position as a function of time.
using EndpointPin = std::function<Vec2(double)>;

struct FlowingCurve {
    Curve curve;
    double time = 0.0;
    double target_spacing = 1e-2;
    EndpointPin pin_start{};  // open curves only; empty = free endpoint
    EndpointPin pin_end{};
};

/// Largest admissible dt / (min segment)^2.
inline constexpr double csf_max_cfl = 0.25;
/// Fraction used when csf_advance picks substeps.
inline constexpr double csf_default_cfl = 0.2;

inline double csf_max_dt(const FlowingCurve& fc) {
    const double m = fc.curve.min_segment();
    return csf_max_cfl * m * m;
}

/// One explicit step of size dt, then uniform resampling. The sample count
/// is kept while the mean spacing stays within [0.5, 2] of the target.
inline FlowingCurve csf_step(const FlowingCurve& fc, double dt) {
    if (!(dt > 0.0) || dt > csf_max_dt(fc) * (1.0 + 1e-12))
        throw ConfigError("curve step " + std::to_string(dt) + " exceeds 0.25 (min segment)^2 = " +
                          std::to_string(csf_max_dt(fc)));
    const Curve& c = fc.curve;
    const auto theta = curve_tangent_angle(c);
    const auto kappa = curve_curvature(c, theta);
    std::vector<Vec2> moved(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        const Vec2 normal{-std::sin(theta[k]), std::cos(theta[k])};
        moved[k] = c[k] + (dt * kappa[k]) * normal;
    }
    const double t_new = fc.time + dt;
    if (!c.closed()) {
        if (fc.pin_start) moved.front() = fc.pin_start(t_new);
        if (fc.pin_end) moved.back() = fc.pin_end(t_new);
    }
    for (const Vec2& p : moved)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw NumericalAbort("non-finite curve point at t = " + std::to_string(t_new));
    std::optional<Curve> stepped;
    try {
        stepped.emplace(std::move(moved), c.closed());
    } catch (const InvalidCurveError&) {
        throw ExtinctionError("curve collapsed at t = " + std::to_string(t_new));
    }
    const double L = stepped->length();
    if (c.closed() && L < 4.0 * fc.target_spacing)
        throw ExtinctionError("closed curve shrank below 4 target spacings at t = " +
                              std::to_string(t_new));
    const double segs = static_cast<double>(stepped->segment_count());
    const double mean = L / segs;
    Curve next = (mean < 0.5 * fc.target_spacing || mean > 2.0 * fc.target_spacing)
                     ? resample_spacing(*stepped, fc.target_spacing)
                     : resample_uniform(*stepped, stepped->size());
    return FlowingCurve{std::move(next), t_new, fc.target_spacing, fc.pin_start, fc.pin_end};
}

/// Advances by dt using as many equal csf_step substeps as the stability
/// bound requires.
inline FlowingCurve csf_advance(FlowingCurve fc, double dt) {
    if (!(dt > 0.0)) throw ConfigError("advance needs a positive time span");
    const double t_end = fc.time + dt;
    while (fc.time < t_end - 1e-14 * std::max(1.0, std::abs(t_end))) {
        const double m = fc.curve.min_segment();
        const double remaining = t_end - fc.time;
        const double n = std::ceil(remaining / (csf_default_cfl * m * m) - 1e-9);
        const double sub = remaining / std::max(1.0, n);
        fc = csf_step(fc, sub);
    }
    fc.time = t_end;
    return fc;
}

/// Snapshots every dt_outer from fc.time to t_final (inclusive of both ends).
inline std::vector<FlowingCurve> csf_evolve(FlowingCurve fc, double t_final, double dt_outer) {
    if (!(dt_outer > 0.0)) throw ConfigError("snapshot interval must be positive");
    std::vector<FlowingCurve> history{fc};
    const double t0 = fc.time;
    const auto steps = static_cast<std::size_t>(std::ceil((t_final - t0) / dt_outer - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? t_final : t0 + static_cast<double>(k + 1) * dt_outer;
        fc = csf_advance(fc, t_next - fc.time);
        fc.time = t_next;
        history.push_back(fc);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Along-curve heat equation
// ---------------------------------------------------------------------------

struct HeatResidual {
    std::vector<double> times;                 // interior snapshot times
    std::vector<std::vector<double>> residual;  // per time, per sample (NaN if excluded)
    double max = 0.0;
};

/// theta_t - theta_ss along the curve, where theta_t follows the normal flow:
/// the parametric time derivative at fixed sample index minus v_tan theta_s,
/// with v_tan the tangential component of the sample velocity. Snapshots are
/// resampled to a common sample count. Open curves exclude three samples at
/// each end.
inline HeatResidual heat_residual_along_curve(std::span<const FlowingCurve> history) {
    if (history.size() < 3) throw ConfigError("heat residual needs at least 3 snapshots");
    std::size_t n = history.front().curve.size();
    for (const auto& h : history) n = std::min(n, h.curve.size());
    std::vector<Curve> curves;
    curves.reserve(history.size());
    for (const auto& h : history)
        curves.push_back(h.curve.size() == n ? h.curve : resample_uniform(h.curve, n));
    const bool closed = curves.front().closed();
    const std::size_t skip = closed ? 0 : 3;
    if (n <= 2 * skip + 1) throw ConfigError("curve too short for the heat residual");

    std::vector<std::vector<double>> theta(curves.size());
    for (std::size_t m = 0; m < curves.size(); ++m) theta[m] = curve_tangent_angle(curves[m]);

    HeatResidual out;
    for (std::size_t m = 1; m + 1 < curves.size(); ++m) {
        const double span = history[m + 1].time - history[m - 1].time;
        const Curve& c = curves[m];
        const auto kappa = curve_curvature(c, theta[m]);
        const auto kappa_s = curve_derivative(c, kappa);  // = theta_ss
        std::vector<double> row(n, std::nan(""));
        for (std::size_t i = skip; i + skip < n; ++i) {
            const Vec2 xt = (curves[m + 1][i] - curves[m - 1][i]) / span;
            const Vec2 tan{std::cos(theta[m][i]), std::sin(theta[m][i])};
            const double v_tan = dot(xt, tan);
            const double theta_t_param = wrapped_diff(theta[m + 1][i], theta[m - 1][i]) / span;
            const double theta_t = theta_t_param - v_tan * kappa[i];
            const double r = theta_t - kappa_s[i];
            row[i] = r;
            out.max = std::max(out.max, std::abs(r));
        }
        out.times.push_back(history[m].time);
        out.residual.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

struct CurveFamily {
    std::vector<FlowingCurve> leaves;
    std::vector<int> labels;
    double time = 0.0;
};

namespace detail {

/// Uniform bucket grid over a set of labelled samples.
class SampleHash {
public:
    struct Entry {
        std::uint32_t leaf;
        std::uint32_t index;
    };

    SampleHash(const std::vector<const Curve*>& curves, double cell) : cell_(cell) {
        lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        Vec2 hi = -lo_;
        for (const Curve* c : curves)
            for (const Vec2& p : c->points()) {
                lo_.x = std::min(lo_.x, p.x);
                lo_.y = std::min(lo_.y, p.y);
                hi.x = std::max(hi.x, p.x);
                hi.y = std::max(hi.y, p.y);
            }
        if (curves.empty()) lo_ = hi = {0, 0};
        nx_ = static_cast<long>(std::floor((hi.x - lo_.x) / cell_)) + 1;
        ny_ = static_cast<long>(std::floor((hi.y - lo_.y) / cell_)) + 1;
        buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
        for (std::uint32_t l = 0; l < curves.size(); ++l)
            for (std::uint32_t k = 0; k < curves[l]->size(); ++k) {
                const Vec2 p = (*curves[l])[k];
                buckets_[bucket(cx(p.x), cy(p.y))].push_back({l, k});
            }
    }

    /// Calls f(entry) for every sample in buckets overlapping the disc of radius r.
    template <class F>
    void visit(Vec2 p, double r, F&& f) const {
        const long x0 = std::max(0L, cx(p.x - r)), x1 = std::min(nx_ - 1, cx(p.x + r));
        const long y0 = std::max(0L, cy(p.y - r)), y1 = std::min(ny_ - 1, cy(p.y + r));
        for (long y = y0; y <= y1; ++y)
            for (long x = x0; x <= x1; ++x)
                for (const Entry& e : buckets_[bucket(x, y)]) f(e);
    }

private:
    long cx(double x) const { return static_cast<long>(std::floor((x - lo_.x) / cell_)); }
    long cy(double y) const { return static_cast<long>(std::floor((y - lo_.y) / cell_)); }
    std::size_t bucket(long x, long y) const { return static_cast<std::size_t>(y * nx_ + x); }

    double cell_;
    Vec2 lo_;
    long nx_ = 1, ny_ = 1;
    std::vector<std::vector<Entry>> buckets_;
};

}  // namespace detail

/// Smallest distance between samples of different leaves (infinity for fewer
/// than two leaves). Sample-based, so accurate to about the sample spacing.
inline double min_leaf_distance(const CurveFamily& fam) {
    if (fam.leaves.size() < 2) return std::numeric_limits<double>::infinity();
    std::vector<const Curve*> cs;
    double cell = 0.0;
    for (const auto& l : fam.leaves) {
        cs.push_back(&l.curve);
        cell = std::max(cell, l.curve.max_segment());
    }
    const detail::SampleHash hash(cs, cell);
    double best = std::numeric_limits<double>::infinity();
    // Search radius grows until something is found; starts at a few spacings.
    for (double r = 4.0 * cell; !std::isfinite(best) && r < 1e6; r *= 4.0) {
        for (std::uint32_t l = 0; l < cs.size(); ++l)
            for (const Vec2& p : cs[l]->points())
                hash.visit(p, r, [&](const detail::SampleHash::Entry& e) {
                    if (e.leaf != l) best = std::min(best, distance(p, (*cs[e.leaf])[e.index]));
                });
    }
    return best;
}

struct ExtinctionRecord {
    int label;
    double time;
    std::string reason;
};

struct FamilyEvolution {
    std::vector<CurveFamily> snapshots;
    std::vector<ExtinctionRecord> extinct;
    std::vector<double> min_distance;  // per snapshot
};

/// Evolves every leaf independently; leaves that go extinct are dropped from
/// later snapshots and reported. A snapshot is kept every `cadence` outer steps
/// and at t_final.
inline FamilyEvolution evolve_family(const CurveFamily& fam, double t_final, double dt_outer,
                                     std::size_t cadence = 1) {
    if (!(dt_outer > 0.0) || cadence == 0) throw ConfigError("invalid family stepping");
    FamilyEvolution out;
    CurveFamily cur = fam;
    if (cur.labels.size() != cur.leaves.size()) {
        cur.labels.resize(cur.leaves.size());
        for (std::size_t k = 0; k < cur.labels.size(); ++k) cur.labels[k] = static_cast<int>(k);
    }
    out.snapshots.push_back(cur);
    out.min_distance.push_back(min_leaf_distance(cur));
    const double t0 = cur.time;
    const auto steps = static_cast<std::size_t>(std::ceil((t_final - t0) / dt_outer - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? t_final : t0 + static_cast<double>(k + 1) * dt_outer;
        std::vector<std::optional<FlowingCurve>> next(cur.leaves.size());
        std::vector<std::string> why(cur.leaves.size());
        parallel_for(cur.leaves.size(), [&](std::size_t l) {
            try {
                auto fc = csf_advance(cur.leaves[l], t_next - cur.leaves[l].time);
                fc.time = t_next;
                next[l] = std::move(fc);
            } catch (const ExtinctionError& e) {
                why[l] = e.what();
            }
        });
        CurveFamily nf;
        nf.time = t_next;
        for (std::size_t l = 0; l < next.size(); ++l) {
            if (next[l]) {
                nf.leaves.push_back(std::move(*next[l]));
                nf.labels.push_back(cur.labels[l]);
            } else {
                out.extinct.push_back({cur.labels[l], t_next, why[l]});
            }
        }
        cur = std::move(nf);
        if ((k + 1) % cadence == 0 || k + 1 == steps) {
            out.snapshots.push_back(cur);
            out.min_distance.push_back(min_leaf_distance(cur));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pulling the leaf angle back to a grid
// ---------------------------------------------------------------------------

struct ExtractionOptions {
    double max_distance = 0.0;  // nodes farther from every leaf are masked out
    bool interpolate_between_leaves = true;
};

struct Extraction {
    AngleField field;
    std::vector<unsigned char> mask;  // 1 = covered
    std::size_t covered = 0;
};

namespace detail {

struct FootPoint {
    double angle;   // tangent angle at the foot
    double signed_distance;
    Vec2 foot;
    Vec2 normal;    // J T at the foot
    bool valid = false;
};

inline FootPoint project_onto(const Curve& c, std::span<const double> theta, std::size_t k, Vec2 p) {
    const std::size_t n = c.size();
    FootPoint best;
    double best_d = std::numeric_limits<double>::infinity();
    const double spacing = c.max_segment();
    auto try_segment = [&](std::size_t a, std::size_t b, bool open_start, bool open_end) {
        const Vec2 pa = c[a], pb = c[b];
        const Vec2 d = pb - pa;
        const double len2 = dot(d, d);
        double u = dot(p - pa, d) / len2;
        double overshoot = 0.0;
        if (u < 0.0) {
            if (open_start) overshoot = -u * std::sqrt(len2);
            u = 0.0;
        } else if (u > 1.0) {
            if (open_end) overshoot = (u - 1.0) * std::sqrt(len2);
            u = 1.0;
        }
        if (overshoot > 0.5 * spacing) return;  // beyond the end of an open leaf
        const Vec2 foot = pa + u * d;
        const double dist = distance(p, foot);
        if (dist < best_d) {
            best_d = dist;
            const double ang = theta[a] + u * wrapped_diff(theta[b], theta[a]);
            const Vec2 normal{-std::sin(ang), std::cos(ang)};
            best = {ang, dot(p - foot, normal), foot, normal, true};
        }
    };
    if (c.closed()) {
        try_segment((k + n - 1) % n, k, false, false);
        try_segment(k, (k + 1) % n, false, false);
    } else {
        if (k > 0) try_segment(k - 1, k, k - 1 == 0, false);
        if (k + 1 < n) try_segment(k, k + 1, false, k + 1 == n - 1);
    }
    return best;
}

}  // namespace detail

/// Leaf tangent angle at grid nodes. For each node the nearest sample of every
/// leaf within max_distance is refined to a foot point on the adjacent
/// segments. The nearest leaf supplies the angle; when a leaf on the other
/// side of the node is also within reach, the two angles are blended linearly
/// in normal distance (modulo pi). Nodes with no leaf within max_distance are
/// masked out.
inline Extraction extract_angle_field(const CurveFamily& fam, const Grid2D& grid,
                                      ExtractionOptions opt) {
    if (fam.leaves.empty()) throw ConfigError("cannot extract an angle field from an empty family");
    if (!(opt.max_distance > 0.0)) throw ConfigError("extraction needs a positive max distance");
    std::vector<const Curve*> cs;
    std::vector<std::vector<double>> theta;
    for (const auto& l : fam.leaves) {
        cs.push_back(&l.curve);
        theta.push_back(curve_tangent_angle(l.curve));
    }
    const detail::SampleHash hash(cs, grid.spacing());
    const double R = opt.max_distance;
    std::vector<double> values(grid.size(), 0.0);
    std::vector<unsigned char> mask(grid.size(), 0);

    parallel_for(grid.ny(), [&](std::size_t j) {
        std::vector<std::pair<double, std::uint32_t>> nearest(cs.size(),
                                                              {std::numeric_limits<double>::infinity(), 0});
        std::vector<std::uint32_t> touched;
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            const Vec2 p = grid.node(i, j);
            touched.clear();
            hash.visit(p, R + grid.spacing(), [&](const detail::SampleHash::Entry& e) {
                const double d = distance(p, (*cs[e.leaf])[e.index]);
                auto& slot = nearest[e.leaf];
                if (!std::isfinite(slot.first)) touched.push_back(e.leaf);
                if (d < slot.first) slot = {d, e.index};
            });
            std::sort(touched.begin(), touched.end());
            std::vector<detail::FootPoint> feet;
            for (std::uint32_t l : touched) {
                if (nearest[l].first <= R + cs[l]->max_segment()) {
                    auto f = detail::project_onto(*cs[l], theta[l], nearest[l].second, p);
                    if (f.valid && std::abs(f.signed_distance) <= R) feet.push_back(f);
                }
                nearest[l] = {std::numeric_limits<double>::infinity(), 0};
            }
            if (feet.empty()) continue;
            const auto first = std::min_element(feet.begin(), feet.end(), [](const auto& a, const auto& b) {
                return std::abs(a.signed_distance) < std::abs(b.signed_distance);
            });
            double angle = first->angle;
            const double d1 = std::abs(first->signed_distance);
            if (opt.interpolate_between_leaves && d1 > 0.0) {
                // a leaf on the opposite side of the node, along the first leaf's normal
                const double side1 = dot(first->foot - p, first->normal);
                const detail::FootPoint* second = nullptr;
                double d2 = std::numeric_limits<double>::infinity();
                for (const auto& f : feet) {
                    if (&f == &*first) continue;
                    const double side = dot(f.foot - p, first->normal);
                    if (side * side1 >= 0.0) continue;
                    const double d = std::abs(f.signed_distance);
                    if (d < d2) {
                        d2 = d;
                        second = &f;
                    }
                }
                if (second) angle += d1 / (d1 + d2) * wrap_half_turn(second->angle - first->angle);
            }
            values[grid.index(i, j)] = wrap_angle(angle);
            mask[grid.index(i, j)] = 1;
        }
    });
    Extraction ex{AngleField(grid, std::move(values), fam.time), std::move(mask), 0};
    ex.covered = static_cast<std::size_t>(std::count(ex.mask.begin(), ex.mask.end(), 1));
    return ex;
}

}  // namespace foliflow
