#pragma once

// Closed-form angle fields that are invariant under the flow, together with
// their exact leaves at any time.
//
//   constant(c)        straight parallel lines at angle c
//   linear(a, b, c)    theta = a x + b y + c; a rigid motion of the grim reaper
//   polar(c)           theta = atan2(y, x) + c on the punctured plane
//   grim_reaper(a, C)  theta = a x; leaves y = a t - ln(cos(a x))/a + C

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field_core.hpp"

namespace foliflow {

enum class SolutionKind { constant, linear, polar, grim_reaper };

inline const char* to_string(SolutionKind k) {
    switch (k) {
        case SolutionKind::constant: return "constant";
        case SolutionKind::linear: return "linear";
        case SolutionKind::polar: return "polar";
        case SolutionKind::grim_reaper: return "grim-reaper";
    }
    return "?";
}

inline SolutionKind solution_kind_from_string(const std::string& s) {
    if (s == "constant") return SolutionKind::constant;
    if (s == "linear") return SolutionKind::linear;
    if (s == "polar") return SolutionKind::polar;
    if (s == "grim-reaper") return SolutionKind::grim_reaper;
    throw ConfigError("unknown catalog solution id '" + s + "'");
}

/// Rigid motion carrying theta = a x + b y + c onto the grim reaper theta' = k x'.
/// x' = (p . u) + shift, y' = p . Ju with u = (a, b)/k.
struct ReaperFrame {
    double speed;     // k = |(a, b)|; leaves translate along Ju at this speed
    double rotation;  // atan2(b, a)
    double shift;     // (c - rotation)/k
    Vec2 axis;        // u
    Vec2 normal;      // Ju, direction of translation

    double xi(Vec2 p) const { return dot(p, axis) + shift; }
    double eta(Vec2 p) const { return dot(p, normal); }
    Vec2 point(double xi_, double eta_) const { return (xi_ - shift) * axis + eta_ * normal; }
};

struct CatalogSolution {
    SolutionKind kind = SolutionKind::constant;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double C = 0.0;  // grim-reaper leaf offset

    static CatalogSolution constant(double c) { return {SolutionKind::constant, 0, 0, c, 0}; }
    static CatalogSolution linear(double a, double b, double c) {
        return {SolutionKind::linear, a, b, c, 0};
    }
    static CatalogSolution polar(double c) { return {SolutionKind::polar, 0, 0, c, 0}; }
    static CatalogSolution grim_reaper(double a, double C) {
        if (!(a > 0.0)) throw ConfigError("grim reaper needs a > 0");
        return {SolutionKind::grim_reaper, a, 0, 0, C};
    }

    /// Only polar(c) for c in {0, pi/2, pi, 3pi/2} solves the stationary
    /// equation among the polar family; everything else in the catalog does.
    bool stationary() const {
        if (kind != SolutionKind::polar) return true;
        const double r = std::abs(wrap_half_turn(2.0 * c)) ;
        return r < 1e-12;
    }

    /// Rays (c = 0, pi) or circles (c = pi/2, 3pi/2).
    bool polar_rays() const { return std::abs(wrap_half_turn(c)) < 1e-12; }
    bool polar_circles() const { return std::abs(wrap_half_turn(c - pi / 2)) < 1e-12; }

    std::string singular_locus() const {
        switch (kind) {
            case SolutionKind::polar: return "origin";
            case SolutionKind::grim_reaper:
                return "vertical lines a x = pi/2 + m pi (filled by straight leaves)";
            case SolutionKind::linear:
                return (a == 0.0 && b == 0.0) ? "none"
                                                : "lines a x + b y + c = pi/2 + m pi, rotation "
                                                  "of the grim reaper asymptotes";
            case SolutionKind::constant: return "none";
        }
        return "none";
    }

    ReaperFrame reaper_frame() const {
        double aa = a, bb = b, cc = c;
        if (kind == SolutionKind::grim_reaper) cc = 0.0, bb = 0.0;
        const double k = std::hypot(aa, bb);
        if (!(k > 0.0)) throw ConfigError("reaper frame needs a nonzero gradient");
        const double rot = std::atan2(bb, aa);
        const Vec2 u{aa / k, bb / k};
        return {k, rot, (cc - rot) / k, u, rotate90(u)};
    }

    friend bool operator==(const CatalogSolution&, const CatalogSolution&) = default;
};

inline void require_valid_point(const CatalogSolution& sol, Vec2 p) {
    if (sol.kind == SolutionKind::polar && norm(p) < 1e-9)
        throw DomainError("polar solution is undefined at the origin");
}

/// Exact angle, (-pi, pi] representative. All catalog fields are independent of t.
inline double eval_angle(const CatalogSolution& sol, Vec2 p, double /*t*/ = 0.0) {
    require_valid_point(sol, p);
    switch (sol.kind) {
        case SolutionKind::constant: return wrap_angle(sol.c);
        case SolutionKind::linear: return wrap_angle(sol.a * p.x + sol.b * p.y + sol.c);
        case SolutionKind::polar: return wrap_angle(std::atan2(p.y, p.x) + sol.c);
        case SolutionKind::grim_reaper: return wrap_angle(sol.a * p.x);
    }
    return 0.0;
}

inline Vec2 eval_gradient(const CatalogSolution& sol, Vec2 p, double /*t*/ = 0.0) {
    require_valid_point(sol, p);
    switch (sol.kind) {
        case SolutionKind::constant: return {0, 0};
        case SolutionKind::linear: return {sol.a, sol.b};
        case SolutionKind::polar: {
            const double r2 = dot(p, p);
            return {-p.y / r2, p.x / r2};
        }
        case SolutionKind::grim_reaper: return {sol.a, 0};
    }
    return {0, 0};
}

inline Hessian2 eval_hessian(const CatalogSolution& sol, Vec2 p) {
    require_valid_point(sol, p);
    if (sol.kind != SolutionKind::polar) return {};
    const double r4 = dot(p, p) * dot(p, p);
    return {2 * p.x * p.y / r4, (p.y * p.y - p.x * p.x) / r4, -2 * p.x * p.y / r4};
}

/// Polar-coordinate Hessian of atan2(y, x) + c. Components are given in the
/// coordinate basis {d/dr, d/dphi}, where the mixed entry is -1/r.
struct PolarHessian {
    double rr = 0.0;
    double rphi = 0.0;
    double phiphi = 0.0;
    Vec2 at;

    /// Cartesian components. d/dphi has length r, so the orthonormal mixed
    /// entry is rphi / r.
    Hessian2 to_cartesian() const {
        const double r = norm(at);
        const Vec2 er = at / r;
        const Vec2 ephi = rotate90(er);
        const double m = rphi / r;
        const double drr = rr, dpp = phiphi / (r * r);
        return {drr * er.x * er.x + 2 * m * er.x * ephi.x + dpp * ephi.x * ephi.x,
                drr * er.x * er.y + m * (er.x * ephi.y + er.y * ephi.x) + dpp * ephi.x * ephi.y,
                drr * er.y * er.y + 2 * m * er.y * ephi.y + dpp * ephi.y * ephi.y};
    }
};

inline PolarHessian exact_hessian_polar(Vec2 p) {
    const double r = norm(p);
    if (r < 1e-9) throw DomainError("polar Hessian is undefined at the origin");
    return {0.0, -1.0 / r, 0.0, p};
}

/// How densely and how far an exact leaf is sampled.
struct LeafSampling {
    double spacing = 1e-2;     // target arclength between samples
    double half_length = 1.0;  // arclength on each side of the seed (open leaves)
};

/// Exact leaf through `seed` at time t, oriented along V1 = (cos theta, sin theta).
inline Curve eval_leaf(const CatalogSolution& sol, Vec2 seed, double t, LeafSampling ls = {}) {
    require_valid_point(sol, seed);
    if (!(ls.spacing > 0.0) || !(ls.half_length > 0.0))
        throw ConfigError("leaf sampling needs positive spacing and half length");
    const auto n_side = static_cast<long>(std::ceil(ls.half_length / ls.spacing));
    const double ds = ls.half_length / static_cast<double>(n_side);

    auto straight = [&](Vec2 through, double angle) {
        const Vec2 dir{std::cos(angle), std::sin(angle)};
        std::vector<Vec2> pts;
        for (long k = -n_side; k <= n_side; ++k) pts.push_back(through + (ds * k) * dir);
        return Curve(std::move(pts), false);
    };

    switch (sol.kind) {
        case SolutionKind::constant: return straight(seed, sol.c);
        case SolutionKind::polar: {
            if (!sol.stationary())
                throw ConfigError("polar(c) has no exact moving leaves unless c is a multiple of pi/2");
            const double r0 = norm(seed);
            const double phi0 = std::atan2(seed.y, seed.x);
            if (sol.polar_rays()) {
                // the ray is stationary as a point set
                const double dir = eval_angle(sol, seed);
                std::vector<Vec2> pts;
                const Vec2 u{std::cos(dir), std::sin(dir)};
                for (long k = -n_side; k <= n_side; ++k) {
                    const Vec2 q = seed + (ds * k) * u;
                    if (norm(q) > 1e-9 && dot(q, seed) > 0) pts.push_back(q);
                }
                return Curve(std::move(pts), false);
            }
            const double r2 = r0 * r0 - 2.0 * t;
            if (!(r2 > 0.0))
                throw ExtinctionError("circle through seed is extinct at t = " + std::to_string(t));
            const double r = std::sqrt(r2);
            const auto count = static_cast<std::size_t>(std::max(8.0, std::ceil(two_pi * r / ls.spacing)));
            // V1 = e_phi for c = pi/2 (counterclockwise), -e_phi for 3pi/2
            const double orient = std::cos(wrapped_diff(sol.c, pi / 2)) > 0 ? 1.0 : -1.0;
            std::vector<Vec2> pts(count);
            for (std::size_t k = 0; k < count; ++k) {
                const double phi = phi0 + orient * two_pi * static_cast<double>(k) / static_cast<double>(count);
                pts[k] = {r * std::cos(phi), r * std::sin(phi)};
            }
            return Curve(std::move(pts), true);
        }
        case SolutionKind::linear:
            if (sol.a == 0.0 && sol.b == 0.0) return straight(seed, sol.c);
            [[fallthrough]];
        case SolutionKind::grim_reaper: {
            const ReaperFrame fr = sol.reaper_frame();
            const double k = fr.speed;
            const double xi0 = fr.xi(seed);
            const double cs = std::cos(k * xi0);
            if (std::abs(cs) < 1e-12)
                throw DomainError("seed lies on a straight asymptote of the grim reaper foliation");
            // Unit-speed parametrization of eta = -ln|cos(k xi)|/k from the strip
            // center xi_c: xi = xi_c + gd(k s)/k, eta = ln(cosh(k s))/k.
            const double m = std::round(k * xi0 / pi);
            const double xi_c = m * pi / k;
            const double s0 = std::asinh(std::tan(k * xi0 - m * pi)) / k;
            const double eta_offset = fr.eta(seed) + std::log(std::abs(cs)) / k;
            // Orientation along V1: even strips run toward +xi, odd strips toward -xi.
            const double orient = (static_cast<long>(m) % 2 == 0) ? 1.0 : -1.0;
            std::vector<Vec2> pts;
            for (long j = -n_side; j <= n_side; ++j) {
                const double s = s0 + orient * ds * static_cast<double>(j);
                const double xi = xi_c + std::atan(std::sinh(k * s)) / k;
                const double eta = std::log(std::cosh(k * s)) / k + eta_offset + k * t;
                pts.push_back(fr.point(xi, eta));
            }
            return Curve(std::move(pts), false);
        }
    }
    throw ConfigError("unsupported solution");
}

/// Velocity of a leaf point set under the flow, when the catalog leaves move
/// rigidly (zero for stationary point sets).
inline std::optional<Vec2> leaf_translation_velocity(const CatalogSolution& sol) {
    switch (sol.kind) {
        case SolutionKind::constant: return Vec2{0, 0};
        case SolutionKind::linear:
            if (sol.a == 0.0 && sol.b == 0.0) return Vec2{0, 0};
            [[fallthrough]];
        case SolutionKind::grim_reaper: {
            const auto fr = sol.reaper_frame();
            return fr.speed * fr.normal;
        }
        case SolutionKind::polar:
            if (sol.polar_rays()) return Vec2{0, 0};
            return std::nullopt;
    }
    return std::nullopt;
}

/// Samples the exact field on a grid at time t.
inline AngleField sample_solution(const CatalogSolution& sol, const Grid2D& grid, double t = 0.0) {
    return AngleField::sample(grid, [&](Vec2 p) { return eval_angle(sol, p, t); }, t);
}

}  // namespace foliflow
