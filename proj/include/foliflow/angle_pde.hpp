#pragma once

// The degenerate evolution equation for the angle field of a foliation whose
// leaves move by curve shortening flow:
//
//   theta_t = theta_xx cos^2 + 2 theta_xy sin cos + theta_yy sin^2
//           = Hess(theta)(V1, V1)
//
// Diffusion acts only along the leaf tangent V1. Time stepping is explicit
// Euler on the Cartesian form; the frame form is kept as an independent
// evaluator.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "errors.hpp"
#include "field_core.hpp"
#include "parallel.hpp"

namespace foliflow {

/// Right-hand side at an interior node, Cartesian form.
inline double rhs_cartesian(const AngleField& f, std::size_t i, std::size_t j,
                            Topology topo = Topology::bounded) {
    const Hessian2 H = central_hessian(f, i, j, topo);
    const double th = f(i, j);
    const double c = std::cos(th), s = std::sin(th);
    return H.xx * c * c + 2.0 * H.xy * s * c + H.yy * s * s;
}

/// Right-hand side in frame form, D_{V1}(grad theta . V1) - (grad theta . V1)(grad theta . V2),
/// with the outer derivative taken by nested central differences. Needs a
/// radius-2 stencil.
inline double rhs_frame(const AngleField& f, std::size_t i, std::size_t j,
                        Topology topo = Topology::bounded) {
    detail::require_interior(f, i, j, 2, topo, "rhs_frame");
    const auto& g = f.grid();
    const long nx = static_cast<long>(g.nx()), ny = static_cast<long>(g.ny());
    auto wrap_index = [&](long v, long n) {
        return topo == Topology::periodic ? static_cast<std::size_t>(((v % n) + n) % n)
                                          : static_cast<std::size_t>(v);
    };
    // tangential derivative q = grad theta . V1 at a neighbour
    auto q = [&](long di, long dj) {
        const std::size_t ii = wrap_index(static_cast<long>(i) + di, nx);
        const std::size_t jj = wrap_index(static_cast<long>(j) + dj, ny);
        return dot(central_gradient(f, ii, jj, topo), frame_at(f(ii, jj)).v1);
    };
    const double h = g.spacing();
    const Vec2 grad_q{(q(1, 0) - q(-1, 0)) / (2.0 * h), (q(0, 1) - q(0, -1)) / (2.0 * h)};
    const Frame fr = frame_at(f(i, j));
    const Vec2 grad = central_gradient(f, i, j, topo);
    return dot(grad_q, fr.v1) - dot(grad, fr.v1) * dot(grad, fr.v2);
}

// ---------------------------------------------------------------------------
// Boundary conditions and state
// ---------------------------------------------------------------------------

enum class BoundaryKind { dirichlet_exact, periodic };

struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::dirichlet_exact;
    CatalogSolution solution{};  // boundary data for dirichlet_exact

    static BoundaryCondition dirichlet(CatalogSolution sol) {
        return {BoundaryKind::dirichlet_exact, sol};
    }
    static BoundaryCondition periodic() { return {BoundaryKind::periodic, {}}; }

    Topology topology() const {
        return kind == BoundaryKind::periodic ? Topology::periodic : Topology::bounded;
    }
};

/// Largest admissible dt / h^2 for the explicit scheme.
inline constexpr double max_cfl_fraction = 0.25;
/// Default dt / h^2.
inline constexpr double default_cfl_fraction = 0.2;

struct PdeState {
    AngleField field;
    std::size_t step_count = 0;
    double dt = 0.0;
    BoundaryCondition boundary{};
    double initial_time = 0.0;

    double cfl_number() const {
        const double h = field.grid().spacing();
        return dt / (h * h);
    }
};

inline PdeState make_state(AngleField field, BoundaryCondition bc, std::optional<double> dt = {}) {
    const double h = field.grid().spacing();
    const double t0 = field.time();
    return PdeState{std::move(field), 0, dt.value_or(default_cfl_fraction * h * h), bc, t0};
}

/// Non-finite value during stepping; carries the last finite field.
class PdeAbort : public NumericalAbort {
public:
    PdeAbort(const std::string& what, AngleField last_good)
        : NumericalAbort(what), last_good_(std::move(last_good)) {}
    const AngleField& last_good() const { return last_good_; }

private:
    AngleField last_good_;
};

namespace detail {

inline void check_cfl(const Grid2D& g, double dt) {
    const double h = g.spacing();
    if (!(dt > 0.0) || dt > max_cfl_fraction * h * h * (1.0 + 1e-12))
        throw ConfigError("time step " + std::to_string(dt) + " violates dt <= " +
                          std::to_string(max_cfl_fraction) + " h^2 = " +
                          std::to_string(max_cfl_fraction * h * h));
}

inline void check_boundary(const BoundaryCondition& bc, const Grid2D& g) {
    if (bc.kind != BoundaryKind::dirichlet_exact || bc.solution.kind != SolutionKind::polar) return;
    // the polar solution must be defined on every boundary node
    for (std::size_t i = 0; i < g.nx(); ++i)
        for (std::size_t j : {std::size_t{0}, g.ny() - 1})
            require_valid_point(bc.solution, g.node(i, j));
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i : {std::size_t{0}, g.nx() - 1})
            require_valid_point(bc.solution, g.node(i, j));
}

// One explicit Euler step of size dt; does not touch step bookkeeping.
inline AngleField advance(const PdeState& s, double dt, double t_new) {
    const AngleField& f = s.field;
    const Grid2D& g = f.grid();
    const Topology topo = s.boundary.topology();
    std::vector<double> next(g.size());
    std::vector<unsigned char> bad(g.ny(), 0);
    parallel_for(g.ny(), [&](std::size_t j) {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            double v;
            if (topo == Topology::periodic || g.interior(i, j)) {
                v = wrap_angle(f(i, j) + dt * rhs_cartesian(f, i, j, topo));
            } else {
                v = eval_angle(s.boundary.solution, g.node(i, j), t_new);
            }
            if (!std::isfinite(v)) bad[j] = 1;
            next[k] = v;
        }
    });
    for (std::size_t j = 0; j < g.ny(); ++j)
        if (bad[j])
            throw PdeAbort("non-finite angle at row " + std::to_string(j) + " at t = " +
                               std::to_string(t_new),
                           f);
    return f.with_values(std::move(next), t_new);
}

}  // namespace detail

/// One explicit Euler step at the state's dt.
inline PdeState step_euler(const PdeState& s) {
    detail::check_cfl(s.field.grid(), s.dt);
    detail::check_boundary(s.boundary, s.field.grid());
    const double t_new = s.initial_time + static_cast<double>(s.step_count + 1) * s.dt;
    PdeState out{detail::advance(s, s.dt, t_new), s.step_count + 1, s.dt, s.boundary, s.initial_time};
    return out;
}

struct EvolveResult {
    PdeState state;
    std::vector<AngleField> snapshots;  // initial, every `cadence` steps, final
    std::size_t cadence = 1;
};

/// Default snapshot cadence: ceil(T / (10 dt)) steps.
inline std::size_t default_cadence(double span, double dt) {
    if (!(span > 0.0)) return 1;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / (10.0 * dt) - 1e-9)));
}

/// Repeats step_euler until t_final; the last step is shortened to land on
/// t_final exactly. The non-finite policy surfaces as NumericalAbort.
inline EvolveResult evolve(PdeState s, double t_final, std::optional<std::size_t> cadence = {}) {
    const double t0 = s.field.time();
    if (t_final < t0) throw ConfigError("t_final precedes the current time");
    detail::check_cfl(s.field.grid(), s.dt);
    detail::check_boundary(s.boundary, s.field.grid());
    EvolveResult r{s, {s.field}, cadence.value_or(default_cadence(t_final - t0, s.dt))};
    if (r.cadence == 0) throw ConfigError("snapshot cadence must be positive");
    const auto full_steps = static_cast<std::size_t>(std::floor((t_final - t0) / s.dt + 1e-9));
    std::size_t k = 0;
    for (; k < full_steps; ++k) {
        const double t_next = t0 + static_cast<double>(k + 1) * s.dt;
        r.state.field = detail::advance(r.state, s.dt, t_next);
        ++r.state.step_count;
        if (r.state.step_count % r.cadence == 0) r.snapshots.push_back(r.state.field);
    }
    const double remaining = t_final - r.state.field.time();
    if (remaining > 1e-12 * std::max(1.0, std::abs(t_final))) {
        r.state.field = detail::advance(r.state, remaining, t_final);
        ++r.state.step_count;
    }
    if (r.snapshots.back().time() != r.state.field.time()) r.snapshots.push_back(r.state.field);
    return r;
}

struct ResidualReport {
    std::vector<double> values;        // |rhs| per node; NaN where not evaluated
    std::vector<unsigned char> used;   // 1 where evaluated
    double max = 0.0;
    double l2 = 0.0;  // root mean square over evaluated nodes
    std::size_t count = 0;
};

/// |rhs_cartesian| at every interior node accepted by `keep(node position)`.
template <class Keep>
ResidualReport stationary_residual(const AngleField& f, Keep&& keep,
                                   Topology topo = Topology::bounded) {
    const Grid2D& g = f.grid();
    ResidualReport r;
    r.values.assign(g.size(), std::nan(""));
    r.used.assign(g.size(), 0);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            if (topo == Topology::bounded && !g.interior(i, j)) continue;
            if (!keep(g.node(i, j))) continue;
            const double v = std::abs(rhs_cartesian(f, i, j, topo));
            const std::size_t k = g.index(i, j);
            r.values[k] = v;
            r.used[k] = 1;
            r.max = std::max(r.max, v);
            sum += v * v;
            ++r.count;
        }
    r.l2 = r.count ? std::sqrt(sum / static_cast<double>(r.count)) : 0.0;
    return r;
}

inline ResidualReport stationary_residual(const AngleField& f, Topology topo = Topology::bounded) {
    return stationary_residual(f, [](Vec2) { return true; }, topo);
}

}  // namespace foliflow
