#include <gtest/gtest.h>

#include "bsolve/robust.hpp"
#include "test_support.hpp"

using namespace bsolve;

TEST(GemanMcClure, Values)
{
    EXPECT_EQ(gm_rho(0, 1), 0.0);
    EXPECT_EQ(gm_weight(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(gm_rho(1, 1), 0.5);
    EXPECT_DOUBLE_EQ(gm_weight(1, 1), 0.5);
    EXPECT_NEAR(gm_rho(1e6, 1), 1.0, 1e-9);
    EXPECT_NEAR(gm_weight(1e6, 1), 0.0, 1e-9);
}

TEST(GemanMcClure, WeightIsDerivativeOverResidual)
{
    for (double sigma : {0.5, 1.0, 3.0}) {
        for (double e : {-4.0, -0.3, 0.1, 1.0, 7.5}) {
            const double h = 1e-6;
            const double drho = (gm_rho(e + h, sigma) - gm_rho(e - h, sigma)) / (2 * h);
            EXPECT_NEAR(gm_weight(e, sigma), drho / e, 1e-8);
        }
    }
}

TEST(RobustSolve, ConstantTarget)
{
    const auto ref = bstest::random_rgb(12, 12, 1);
    RobustParams rp;
    rp.n_irls = 3;
    const auto r = robust_solve(ref, std::vector<double>(144, 5.0), std::vector<double>(144, 1.0), rp, {4, 16, 16}, 1.0);
    for (double x : r.output) EXPECT_NEAR(x, 5.0, 1e-6);
    for (double w : r.weights) EXPECT_NEAR(w, 2.0, 1e-6);
}

TEST(RobustSolve, ScalarOutlierIsRejected)
{
    // One vertex: 20 inliers at 3.0 and one outlier at 40 (37 sigma away).
    Raster ref(21, 1, 1, 100.0f);
    auto sp = BilateralSpace::build(ReferenceImage::from_raster(ref), {1000, 8, 8});
    std::vector<double> t(21, 3.0);
    t[7] = 40.0;
    SolverConfig inner;
    inner.n_iters = 5;
    const auto r = robust_solve(sp, t, std::vector<double>(21, 1.0), GemanMcClure{1.0}, 32, 1.0, inner);
    EXPECT_NEAR(r.output[0], 3.0, 0.01);
    EXPECT_LT(r.weights[7], 0.01 * r.weights[0]);
}

TEST(RobustSolve, ObjectiveNonIncreasing)
{
    const auto scene = bstest::voronoi_scene(32, 32, 6, 3);
    std::mt19937_64 rng(4);
    auto t = scene.depth;
    for (auto& v : t) v += bstest::uniform(rng, -2, 2);
    for (std::size_t i = 0; i < t.size(); i += 17) t[i] = bstest::uniform(rng, 0, 255);
    auto sp = BilateralSpace::build(ReferenceImage::from_raster(scene.reference), {4, 8, 8});
    const auto cfg = bstest::exact_config(sp->nverts(), 1e-13);
    const auto r = robust_solve(sp, t, std::vector<double>(t.size(), 1.0), GemanMcClure{1.0}, 32, 0.25, cfg);
    for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
        EXPECT_LE(r.objective_history[k], r.objective_history[k - 1] * (1 + 1e-9)) << k;
    }
}

TEST(RobustSolve, SquaredLossReproducesPlainSolver)
{
    const auto ref = bstest::random_rgb(10, 10, 5);
    auto sp = BilateralSpace::build(ReferenceImage::from_raster(ref), {3, 30, 30});
    Problem p = Problem::uniform(bstest::random_vector(100, 6, 0, 50));
    const auto plain = solve(sp, p, 0.7, SolverConfig{});
    const auto rob = robust_solve(sp, p.target, p.confidence, SquaredLoss{}, 4, 0.7, SolverConfig{});
    EXPECT_EQ(rob.output, plain.output);
}

TEST(VarianceConfidence, ConstantDepth)
{
    const auto ref = bstest::random_rgb(100, 10, 7);
    ConfidenceInitParams cp;
    auto c = variance_confidence(std::vector<double>(1000, 12.0), ref, cp);
    for (double v : c) EXPECT_NEAR(v, 1.0, 1e-9);
    cp.zero_left_columns = 80;
    c = variance_confidence(std::vector<double>(1000, 12.0), ref, cp);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 100; ++x) {
            if (x < 80) EXPECT_EQ(c[y * 100 + x], 0.0);
            else EXPECT_NEAR(c[y * 100 + x], 1.0, 1e-9);
        }
    }
}

TEST(VarianceConfidence, NoisyRegionIsLessConfident)
{
    Raster ref(64, 32, 3, 0.0f);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 64; ++x) {
            for (int c = 0; c < 3; ++c) ref.at(x, y, c) = x < 32 ? 60.0f : 190.0f;
        }
    }
    std::mt19937_64 rng(8);
    std::vector<double> z(64 * 32, 50.0);
    for (int y = 0; y < 32; ++y) {
        for (int x = 32; x < 64; ++x) z[y * 64 + x] = 50.0 + bstest::uniform(rng, -5, 5);
    }
    const auto c = variance_confidence(z, ref, {});
    double clean = 0, noisy = 0;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 64; ++x) (x < 32 ? clean : noisy) += c[y * 64 + x];
    }
    EXPECT_LT(noisy, clean);
    for (double v : c) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}
