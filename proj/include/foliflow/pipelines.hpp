#pragma once

// End-to-end pipelines shared by the command-line tool and the acceptance
// suite: initial conditions built from a catalog base plus a compactly
// supported bump, and the two-way comparison between the angle PDE and the
// curve-flow oracle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "angle_pde.hpp"
#include "catalog.hpp"
#include "csf.hpp"
#include "errors.hpp"
#include "field_core.hpp"
#include "foliation.hpp"

namespace foliflow {

enum class BumpKind { sin_product, cosine_bump };

inline const char* to_string(BumpKind b) {
    return b == BumpKind::sin_product ? "sin-product" : "cosine-bump";
}

inline BumpKind bump_kind_from_string(const std::string& s) {
    if (s == "sin-product") return BumpKind::sin_product;
    if (s == "cosine-bump") return BumpKind::cosine_bump;
    throw ConfigError("unknown bump function '" + s + "'");
}

/// amplitude * bump, supported on `support` and vanishing on its boundary.
///   sin-product: sin(pi u) sin(pi v) with (u, v) the window coordinates mapped to [-1, 1]^2
///   cosine-bump: cos^2(pi rho / 2) for rho = |(u, v)| < 1
struct Perturbation {
    double amplitude = 0.0;
    BumpKind bump = BumpKind::sin_product;
    Window support{};

    double value(Vec2 p) const {
        if (!support.contains(p)) return 0.0;
        const auto [u, v, su, sv] = normalized(p);
        (void)su;
        (void)sv;
        if (bump == BumpKind::sin_product) return amplitude * std::sin(pi * u) * std::sin(pi * v);
        const double rho = std::hypot(u, v);
        if (rho >= 1.0) return 0.0;
        const double c = std::cos(0.5 * pi * rho);
        return amplitude * c * c;
    }

    Vec2 gradient(Vec2 p) const {
        if (!support.contains(p)) return {0, 0};
        const auto [u, v, su, sv] = normalized(p);
        if (bump == BumpKind::sin_product)
            return {amplitude * pi * su * std::cos(pi * u) * std::sin(pi * v),
                    amplitude * pi * sv * std::sin(pi * u) * std::cos(pi * v)};
        const double rho = std::hypot(u, v);
        if (rho >= 1.0 || rho == 0.0) return {0, 0};
        // d/drho cos^2(pi rho/2) = -(pi/2) sin(pi rho)
        const double d = -0.5 * pi * std::sin(pi * rho) * amplitude;
        return {d * (u / rho) * su, d * (v / rho) * sv};
    }

private:
    struct Norm {
        double u, v, su, sv;
    };
    Norm normalized(Vec2 p) const {
        const double su = 2.0 / (support.xmax - support.xmin);
        const double sv = 2.0 / (support.ymax - support.ymin);
        return {(p.x - support.xmin) * su - 1.0, (p.y - support.ymin) * sv - 1.0, su, sv};
    }
};

/// theta_0 = catalog base + optional perturbation.
struct InitialCondition {
    CatalogSolution base{};
    std::optional<Perturbation> perturbation{};

    double angle(Vec2 p) const {
        const double b = eval_angle(base, p);
        return perturbation ? wrap_angle(b + perturbation->value(p)) : b;
    }
    Vec2 gradient(Vec2 p) const {
        const Vec2 g = eval_gradient(base, p);
        return perturbation ? g + perturbation->gradient(p) : g;
    }
    bool exact() const { return !perturbation || perturbation->amplitude == 0.0; }

    /// Grid sample; nodes on the polar singularity get 0 (callers mask them).
    AngleField sample(const Grid2D& g) const {
        return AngleField::sample(g, [&](Vec2 p) {
            if (base.kind == SolutionKind::polar && norm(p) < 1e-9) return 0.0;
            return angle(p);
        });
    }

    FunctionSource source(Window w) const {
        return FunctionSource{[ic = *this](Vec2 p, double) { return ic.angle(p); },
                              [ic = *this](Vec2 p, double) { return ic.gradient(p); }, w};
    }
};

// ---------------------------------------------------------------------------
// Field comparison
// ---------------------------------------------------------------------------

struct FieldComparison {
    std::vector<double> error;           // |wrapped difference mod pi|; NaN outside window or mask
    std::vector<unsigned char> in_window;
    double max = 0.0;
    double l2 = 0.0;       // root mean square over compared nodes
    double coverage = 0.0; // compared nodes / window nodes
    std::size_t compared = 0;
    std::size_t window_nodes = 0;
};

/// Box, optionally intersected with an annulus about the origin.
struct Region {
    Window box{};
    double r_min = 0.0;
    double r_max = std::numeric_limits<double>::infinity();

    bool contains(Vec2 p, double slack = 0.0) const {
        const double r = norm(p);
        return box.contains(p, -slack) && r >= r_min - slack && r <= r_max + slack;
    }
    friend bool operator==(const Region&, const Region&) = default;
};

/// Compares two fields on the same grid modulo pi over the nodes of `region`
/// where `mask` (if non-empty) is set.
inline FieldComparison compare_fields_mod_pi(const AngleField& a, const AngleField& b,
                                             std::span<const unsigned char> mask, const Region& region) {
    if (!(a.grid() == b.grid())) throw ConfigError("compared fields must share a grid");
    const Grid2D& g = a.grid();
    FieldComparison c;
    c.error.assign(g.size(), std::nan(""));
    c.in_window.assign(g.size(), 0);
    double sum = 0.0;
    const double slack = 1e-9 * g.spacing();
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            if (!region.contains(g.node(i, j), slack)) continue;
            c.in_window[k] = 1;
            ++c.window_nodes;
            if (!mask.empty() && !mask[k]) continue;
            const double e = std::abs(wrap_half_turn(a(i, j) - b(i, j)));
            c.error[k] = e;
            c.max = std::max(c.max, e);
            sum += e * e;
            ++c.compared;
        }
    c.l2 = c.compared ? std::sqrt(sum / static_cast<double>(c.compared)) : 0.0;
    c.coverage = c.window_nodes ? static_cast<double>(c.compared) / static_cast<double>(c.window_nodes) : 0.0;
    return c;
}

// ---------------------------------------------------------------------------
// Cross-validation: angle PDE versus reconstructed leaves moved by the oracle
// ---------------------------------------------------------------------------

enum class Status { pass, fail, inconclusive };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::inconclusive: return "inconclusive";
    }
    return "?";
}

struct CrossValidationSetup {
    Window domain{-1, 1, -1, 1};
    double h = 1.0 / 64.0;
    InitialCondition initial{};
    BoundaryCondition boundary{};
    double t_final = 0.05;
    std::optional<double> dt{};         // PDE step, default 0.2 h^2
    std::size_t leaf_count = 50;
    Vec2 seed_from{0, -1};              // leaves are seeded evenly on this segment
    Vec2 seed_to{0, 1};
    Window trace{};                     // region the t = 0 leaves are traced in
    double leaf_extent = 3.0;           // arclength traced on each side of a seed
    double leaf_spacing = 1e-2;         // sample spacing of flowing leaves
    double outer_dt = 1e-3;             // oracle snapshot interval
    Region compare{Window{-1, 1, -1, 1}};
    double tol_max = 1e-2;
    double tol_l2 = 3e-3;
    double min_coverage = 0.8;
};

struct CrossValidationResult {
    AngleField pde;            // pipeline A at t_final
    Extraction oracle;         // pipeline B at t_final
    CurveFamily initial_leaves;
    CurveFamily final_leaves;
    FieldComparison comparison;
    std::vector<ExtinctionRecord> extinct;
    std::size_t pde_steps = 0;
    double pde_dt = 0.0;
    double max_distance = 0.0;  // extraction reach
    Status status = Status::inconclusive;
};

/// t = 0 leaves of the initial condition through the seeds, at the flow
/// spacing. Endpoints are pinned to the base solution's rigid leaf
/// motion when it has one (the perturbation is compactly supported, so leaf
/// ends outside its support follow the base foliation).
inline CurveFamily seed_family(const InitialCondition& ic, const std::vector<Vec2>& seeds, Window trace,
                               double extent, double spacing) {
    const FunctionSource src = ic.source(trace);
    const auto velocity = leaf_translation_velocity(ic.base);
    // catalog leaves are exact (closed for circles); otherwise trace V1
    const bool exact = ic.exact() && (ic.base.kind != SolutionKind::polar || ic.base.stationary());
    std::vector<std::optional<FlowingCurve>> built(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t k) {
        Curve c = exact ? eval_leaf(ic.base, seeds[k], 0.0, {spacing, extent}) : [&] {
            const Leaf leaf = integrate_leaf(src, 0.0, seeds[k], extent, spacing / 2.0);
            if (leaf.points.size() < 4)
                throw ConfigError("leaf through seed " + std::to_string(k) + " is too short to flow");
            return resample_spacing(leaf.curve(), spacing);
        }();
        FlowingCurve fc{c, 0.0, spacing, {}, {}};
        if (velocity && !c.closed()) {
            const Vec2 a = c.points().front(), b = c.points().back(), v = *velocity;
            fc.pin_start = [a, v](double t) { return a + t * v; };
            fc.pin_end = [b, v](double t) { return b + t * v; };
        }
        built[k] = std::move(fc);
    });
    CurveFamily fam;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        fam.leaves.push_back(std::move(*built[k]));
        fam.labels.push_back(static_cast<int>(k));
    }
    return fam;
}

inline std::vector<Vec2> seeds_on_segment(Vec2 from, Vec2 to, std::size_t count) {
    if (count < 2) throw ConfigError("need at least two leaves");
    std::vector<Vec2> s(count);
    for (std::size_t k = 0; k < count; ++k)
        s[k] = from + (static_cast<double>(k) / static_cast<double>(count - 1)) * (to - from);
    return s;
}

inline CrossValidationResult cross_validate(const CrossValidationSetup& cfg) {
    const Grid2D grid = Grid2D::from_window(cfg.domain.xmin, cfg.domain.xmax, cfg.domain.ymin,
                                            cfg.domain.ymax, cfg.h);
    // A: angle PDE
    const AngleField theta0 = cfg.initial.sample(grid);
    const auto evolved = evolve(make_state(theta0, cfg.boundary, cfg.dt), cfg.t_final);

    // B: leaves of theta_0 moved by curve shortening, pulled back to the grid
    const auto seeds = seeds_on_segment(cfg.seed_from, cfg.seed_to, cfg.leaf_count);
    CurveFamily fam = seed_family(cfg.initial, seeds, cfg.trace, cfg.leaf_extent, cfg.leaf_spacing);
    const std::size_t outer_steps =
        static_cast<std::size_t>(std::ceil(cfg.t_final / cfg.outer_dt - 1e-9));
    auto flowed = evolve_family(fam, cfg.t_final, cfg.outer_dt, std::max<std::size_t>(1, outer_steps));
    const double reach = 2.0 * distance(seeds[0], seeds[1]);
    Extraction ex = extract_angle_field(flowed.snapshots.back(), grid, {reach, true});

    CrossValidationResult r{evolved.state.field, std::move(ex), std::move(fam),
                            flowed.snapshots.back(), {}, std::move(flowed.extinct),
                            evolved.state.step_count, evolved.state.dt, reach, Status::inconclusive};
    r.comparison = compare_fields_mod_pi(r.pde, r.oracle.field, r.oracle.mask, cfg.compare);
    if (r.comparison.coverage < cfg.min_coverage)
        r.status = Status::inconclusive;
    else if (r.comparison.max <= cfg.tol_max && r.comparison.l2 <= cfg.tol_l2)
        r.status = Status::pass;
    else
        r.status = Status::fail;
    return r;
}

}  // namespace foliflow
