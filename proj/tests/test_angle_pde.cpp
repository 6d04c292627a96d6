#include <cmath>
#include <cstdlib>
#include <limits>

#include <gtest/gtest.h>

#include "foliflow/angle_pde.hpp"

using namespace foliflow;

namespace {

Grid2D unit_grid(double h) { return Grid2D::from_window(-1, 1, -1, 1, h); }

AngleField bumpy(const Grid2D& g) {
    return AngleField::sample(g, [](Vec2 p) {
        return wrap_angle(p.x + 0.1 * std::sin(pi * p.x) * std::sin(pi * p.y));
    });
}

}  // namespace

TEST(Rhs, CartesianMatchesHessianContraction) {
    const auto g = unit_grid(1.0 / 32);
    const auto f = bumpy(g);
    for (std::size_t j = 1; j + 1 < g.ny(); j += 7)
        for (std::size_t i = 1; i + 1 < g.nx(); i += 5) {
            const Hessian2 H = central_hessian(f, i, j);
            const Frame fr = frame_at(f(i, j));
            EXPECT_NEAR(rhs_cartesian(f, i, j), H.contract(fr.v1), 1e-12);
        }
}

TEST(Rhs, LinearFieldsGiveZero) {
    const auto g = unit_grid(1.0 / 16);
    const auto f = sample_solution(CatalogSolution::linear(2, -1, 0.5), g);
    double worst = 0.0;
    for (std::size_t j = 2; j + 2 < g.ny(); ++j)
        for (std::size_t i = 2; i + 2 < g.nx(); ++i) {
            EXPECT_NEAR(rhs_cartesian(f, i, j), 0.0, 1e-10);
            worst = std::max(worst, std::abs(rhs_frame(f, i, j)));
        }
    // the frame form only vanishes up to truncation error
    EXPECT_LT(worst, 10 * g.spacing() * g.spacing() * 5.0);
}

TEST(Rhs, PiShiftAndRepresentativeInvariance) {
    const auto g = unit_grid(1.0 / 32);
    const auto f = bumpy(g);
    std::vector<double> shifted(f.values().begin(), f.values().end());
    std::vector<double> lifted = shifted;
    for (std::size_t k = 0; k < shifted.size(); ++k) {
        shifted[k] = wrap_angle(shifted[k] + pi);
        lifted[k] += two_pi * static_cast<double>(static_cast<long>(k % 5) - 2);
    }
    const auto fs = f.with_values(shifted, 0.0), fl = f.with_values(lifted, 0.0);
    // roundoff in a second difference of values of size 3 pi is about eps * 3 pi / h^2
    const double tol = 64 * std::numeric_limits<double>::epsilon() * 3 * pi / (g.spacing() * g.spacing());
    for (std::size_t j = 2; j + 2 < g.ny(); j += 3)
        for (std::size_t i = 2; i + 2 < g.nx(); i += 3) {
            const double c = rhs_cartesian(f, i, j), r = rhs_frame(f, i, j);
            EXPECT_NEAR(rhs_cartesian(fs, i, j), c, tol);
            EXPECT_NEAR(rhs_cartesian(fl, i, j), c, tol);
            EXPECT_NEAR(rhs_frame(fs, i, j), r, tol);
            EXPECT_NEAR(rhs_frame(fl, i, j), r, tol);
        }
}

TEST(Rhs, FrameFormConverges) {
    auto worst = [](double h) {
        const auto g = Grid2D::from_window(-2, 2, -2, 2, h);
        const auto sol = CatalogSolution::polar(pi / 4);
        const auto f = AngleField::sample(g, [&](Vec2 p) { return norm(p) < 1e-9 ? 0.0 : eval_angle(sol, p); });
        double m = 0.0;
        for (std::size_t j = 2; j + 2 < g.ny(); ++j)
            for (std::size_t i = 2; i + 2 < g.nx(); ++i) {
                const double r = norm(g.node(i, j));
                if (r < 0.5 || r > 2.0) continue;
                m = std::max(m, std::abs(rhs_cartesian(f, i, j) - rhs_frame(f, i, j)));
            }
        return m;
    };
    const double coarse = worst(1.0 / 16), fine = worst(1.0 / 32);
    EXPECT_GT(coarse / fine, 3.0);
}

TEST(Step, RefusesCflViolation) {
    const auto g = unit_grid(1.0 / 16);
    const auto f = bumpy(g);
    const double h2 = g.spacing() * g.spacing();
    EXPECT_THROW(step_euler(make_state(f, BoundaryCondition::dirichlet(CatalogSolution::linear(1, 0, 0)), 0.26 * h2)),
                 ConfigError);
    EXPECT_NO_THROW(step_euler(make_state(f, BoundaryCondition::dirichlet(CatalogSolution::linear(1, 0, 0)), 0.25 * h2)));
    EXPECT_DOUBLE_EQ(make_state(f, BoundaryCondition::periodic()).cfl_number(), default_cfl_fraction);
}

TEST(Step, LinearFieldIsFixed) {
    const auto sol = CatalogSolution::linear(1, 0.5, 0.2);
    const auto g = unit_grid(1.0 / 32);
    auto s = make_state(sample_solution(sol, g), BoundaryCondition::dirichlet(sol));
    const std::vector<double> before(s.field.values().begin(), s.field.values().end());
    s = step_euler(s);
    double drift = 0.0;
    for (std::size_t k = 0; k < before.size(); ++k)
        drift = std::max(drift, std::abs(wrapped_diff(s.field.values()[k], before[k])));
    EXPECT_LE(drift, 1e-12);
    EXPECT_EQ(s.step_count, 1u);
    EXPECT_DOUBLE_EQ(s.field.time(), s.dt);
}

TEST(Step, PeriodicConstantIsFixed) {
    const auto g = Grid2D({0, 0}, 0.1, 10, 10);
    auto s = make_state(AngleField::sample(g, [](Vec2) { return 1.0; }), BoundaryCondition::periodic());
    for (int k = 0; k < 5; ++k) s = step_euler(s);
    for (double v : s.field.values()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Step, OutputStaysInRange) {
    const auto g = unit_grid(1.0 / 16);
    auto s = make_state(AngleField::sample(g, [](Vec2 p) { return wrap_angle(4 * p.x + 0.3 * std::sin(5 * p.y)); }),
                        BoundaryCondition::periodic());
    for (int k = 0; k < 10; ++k) s = step_euler(s);
    for (double v : s.field.values()) {
        EXPECT_GT(v, -pi);
        EXPECT_LE(v, pi);
    }
}

TEST(Step, NonFiniteAborts) {
    const auto g = unit_grid(0.25);
    std::vector<double> v(g.size(), 0.1);
    v[g.index(4, 4)] = std::numeric_limits<double>::quiet_NaN();
    const auto s = make_state(AngleField(g, v), BoundaryCondition::periodic());
    try {
        step_euler(s);
        FAIL() << "expected an abort";
    } catch (const PdeAbort& e) {
        EXPECT_EQ(e.last_good().values().size(), g.size());
    }
}

TEST(Step, PolarBoundaryThroughOriginIsRejected) {
    const auto g = Grid2D::from_window(0, 1, 0, 1, 0.25);  // corner node at the origin
    const auto sol = CatalogSolution::polar(pi / 2);
    const auto f = AngleField::sample(g, [&](Vec2 p) { return norm(p) < 1e-9 ? 0.0 : eval_angle(sol, p); });
    EXPECT_THROW(step_euler(make_state(f, BoundaryCondition::dirichlet(sol))), DomainError);
}

TEST(Evolve, LandsOnFinalTimeWithCadence) {
    const auto g = unit_grid(1.0 / 16);
    const auto sol = CatalogSolution::linear(1, 0, 0);
    auto s = make_state(bumpy(g), BoundaryCondition::dirichlet(sol));
    const double T = 0.0101;
    const auto r = evolve(s, T, 4);
    EXPECT_DOUBLE_EQ(r.state.field.time(), T);
    EXPECT_EQ(r.snapshots.front().time(), 0.0);
    EXPECT_DOUBLE_EQ(r.snapshots.back().time(), T);
    for (std::size_t k = 1; k + 1 < r.snapshots.size(); ++k)
        EXPECT_NEAR(r.snapshots[k].time(), 4.0 * static_cast<double>(k) * s.dt, 1e-15);
    EXPECT_EQ(default_cadence(1.0, 0.01), 10u);
}

TEST(Evolve, StationaryPolarStaysPut) {
    const auto sol = CatalogSolution::polar(pi / 2);
    const auto g = Grid2D::from_window(0.5, 1.5, 0.5, 1.5, 1.0 / 32);
    const auto r = evolve(make_state(sample_solution(sol, g), BoundaryCondition::dirichlet(sol)), 0.01);
    double err = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            err = std::max(err, std::abs(wrapped_diff(r.state.field(i, j), eval_angle(sol, g.node(i, j)))));
    EXPECT_LT(err, 1e-4);
}

TEST(Evolve, DeterministicAcrossWorkerCounts) {
    const auto g = unit_grid(1.0 / 32);
    const auto s = make_state(bumpy(g), BoundaryCondition::dirichlet(CatalogSolution::linear(1, 0, 0)));
    ::setenv("FOLIFLOW_THREADS", "1", 1);
    const auto a = evolve(s, 0.005);
    ::setenv("FOLIFLOW_THREADS", "4", 1);
    const auto b = evolve(s, 0.005);
    ::unsetenv("FOLIFLOW_THREADS");
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(a.state.field.values()[k], b.state.field.values()[k]);
}

TEST(Residual, MaskAndNorms) {
    const auto g = Grid2D::from_window(-2, 2, -2, 2, 1.0 / 16);
    const auto f = sample_solution(CatalogSolution::linear(1, 0.5, 0.2), g);
    const auto all = stationary_residual(f);
    EXPECT_EQ(all.count, (g.nx() - 2) * (g.ny() - 2));
    EXPECT_LE(all.max, 1e-10);
    const auto ring = stationary_residual(f, [](Vec2 p) { return norm(p) >= 0.5 && norm(p) <= 2.0; });
    EXPECT_LT(ring.count, all.count);
    EXPECT_LE(ring.l2, ring.max);
}
