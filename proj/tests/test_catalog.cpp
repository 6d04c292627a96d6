#include <cmath>

#include <gtest/gtest.h>

#include "foliflow/catalog.hpp"

using namespace foliflow;

namespace {

// centred differences of the exact angle, through the cut
Vec2 numeric_gradient(const CatalogSolution& s, Vec2 p, double e = 1e-6) {
    return {wrapped_diff(eval_angle(s, p + Vec2{e, 0}), eval_angle(s, p - Vec2{e, 0})) / (2 * e),
            wrapped_diff(eval_angle(s, p + Vec2{0, e}), eval_angle(s, p - Vec2{0, e})) / (2 * e)};
}

}  // namespace

TEST(Catalog, IdsRoundTrip) {
    for (auto k : {SolutionKind::constant, SolutionKind::linear, SolutionKind::polar, SolutionKind::grim_reaper})
        EXPECT_EQ(solution_kind_from_string(to_string(k)), k);
    EXPECT_EQ(std::string(to_string(SolutionKind::grim_reaper)), "grim-reaper");
    EXPECT_THROW(solution_kind_from_string("paperclip"), ConfigError);
}

TEST(Catalog, GradientsMatchDifferences) {
    const CatalogSolution sols[] = {CatalogSolution::constant(1.0), CatalogSolution::linear(1, 0.5, 0.2),
                                    CatalogSolution::polar(0.3), CatalogSolution::grim_reaper(2.0, 0.1)};
    for (const auto& s : sols)
        for (Vec2 p : {Vec2{0.7, -0.4}, Vec2{-1.1, 0.9}, Vec2{0.2, 1.5}}) {
            const Vec2 g = eval_gradient(s, p), n = numeric_gradient(s, p);
            EXPECT_NEAR(g.x, n.x, 1e-7);
            EXPECT_NEAR(g.y, n.y, 1e-7);
        }
}

TEST(Catalog, PolarHessianAndSingularity) {
    const auto s = CatalogSolution::polar(pi / 4);
    const Vec2 p{0.6, -0.8};
    const Hessian2 H = eval_hessian(s, p);
    const Hessian2 P = exact_hessian_polar(p).to_cartesian();
    EXPECT_NEAR(H.xx, P.xx, 1e-14);
    EXPECT_NEAR(H.xy, P.xy, 1e-14);
    EXPECT_NEAR(H.yy, P.yy, 1e-14);
    EXPECT_DOUBLE_EQ(exact_hessian_polar({2, 0}).rphi, -0.5);
    EXPECT_THROW(eval_angle(s, {0, 0}), DomainError);
    EXPECT_THROW(exact_hessian_polar({0, 0}), DomainError);
}

TEST(Catalog, StationaryMembers) {
    EXPECT_TRUE(CatalogSolution::polar(0).stationary());
    EXPECT_TRUE(CatalogSolution::polar(pi / 2).stationary());
    EXPECT_TRUE(CatalogSolution::polar(pi).stationary());
    EXPECT_TRUE(CatalogSolution::polar(3 * pi / 2).stationary());
    EXPECT_FALSE(CatalogSolution::polar(pi / 4).stationary());
    EXPECT_TRUE(CatalogSolution::linear(1, 2, 3).stationary());
}

TEST(Catalog, StationaryResidualVanishesAnalytically) {
    // Hess theta (V1, V1) = 0 for every stationary catalog member
    for (double c : {0.0, pi / 2, pi, 3 * pi / 2}) {
        const auto s = CatalogSolution::polar(c);
        for (Vec2 p : {Vec2{0.7, 0.2}, Vec2{-1.3, 0.4}}) {
            const double th = eval_angle(s, p);
            EXPECT_NEAR(eval_hessian(s, p).contract({std::cos(th), std::sin(th)}), 0.0, 1e-14);
        }
    }
    // polar(pi/4): |Hess(V1, V1)| = 1 / r^2
    const auto q = CatalogSolution::polar(pi / 4);
    const Vec2 p{1.5, 0.0};
    const double th = eval_angle(q, p);
    EXPECT_NEAR(std::abs(eval_hessian(q, p).contract({std::cos(th), std::sin(th)})), 1.0 / 2.25, 1e-14);
}

TEST(Catalog, LeavesAreIntegralCurves) {
    const CatalogSolution sols[] = {CatalogSolution::linear(1, 0.5, 0.2), CatalogSolution::grim_reaper(1.5, 0),
                                    CatalogSolution::polar(0), CatalogSolution::polar(pi / 2),
                                    CatalogSolution::polar(3 * pi / 2), CatalogSolution::constant(0.4)};
    for (const auto& s : sols) {
        const Curve c = eval_leaf(s, {0.3, 0.4}, 0.0, {1e-3, 0.5});
        const auto tang = curve_tangent_angle(c);
        for (std::size_t k = 1; k + 1 < c.size(); ++k)
            EXPECT_NEAR(wrapped_diff(tang[k], eval_angle(s, c[k])), 0.0, 1e-5) << to_string(s.kind);
    }
}

TEST(Catalog, ReaperLeafIsTheGraph) {
    const auto s = CatalogSolution::grim_reaper(1.0, 0.0);
    const Curve c = eval_leaf(s, {0, 0}, 0.0, {1e-2, 2.0});
    for (Vec2 p : c.points()) EXPECT_NEAR(p.y, -std::log(std::cos(p.x)), 1e-12);
    // at t the leaf through the same strip position has risen by a t
    const Curve ct = eval_leaf(s, {0, 0}, 0.3, {1e-2, 2.0});
    for (Vec2 p : ct.points()) EXPECT_NEAR(p.y, -std::log(std::cos(p.x)) + 0.3, 1e-12);
    const auto v = leaf_translation_velocity(s);
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(v->x, 0.0, 1e-15);
    EXPECT_NEAR(v->y, 1.0, 1e-15);
}

TEST(Catalog, LinearIsARotatedReaper) {
    const auto s = CatalogSolution::linear(0.6, 0.8, 0.3);
    const auto fr = s.reaper_frame();
    EXPECT_NEAR(fr.speed, 1.0, 1e-15);
    // theta(p) = k xi(p) + rotation
    for (Vec2 p : {Vec2{0.1, 0.2}, Vec2{-0.4, 0.3}})
        EXPECT_NEAR(wrapped_diff(eval_angle(s, p), fr.speed * fr.xi(p) + fr.rotation), 0.0, 1e-14);
}

TEST(Catalog, CirclesShrinkAndGoExtinct) {
    const auto s = CatalogSolution::polar(pi / 2);
    const Curve c = eval_leaf(s, {1, 0}, 0.3, {1e-2, 1.0});
    EXPECT_TRUE(c.closed());
    for (Vec2 p : c.points()) EXPECT_NEAR(norm(p), std::sqrt(0.4), 1e-14);
    EXPECT_THROW(eval_leaf(s, {1, 0}, 0.5), ExtinctionError);
    EXPECT_THROW(eval_leaf(CatalogSolution::polar(pi / 4), {1, 0}, 0.0), ConfigError);
}

TEST(Catalog, SampleSolution) {
    const auto g = Grid2D::from_window(-1, 1, -1, 1, 0.5);
    const auto f = sample_solution(CatalogSolution::linear(3, 0, 0), g);
    EXPECT_NEAR(f(0, 0), wrap_angle(-3.0), 1e-15);
    for (double v : f.values()) {
        EXPECT_GT(v, -pi);
        EXPECT_LE(v, pi);
    }
}
