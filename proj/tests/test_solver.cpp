#include <gtest/gtest.h>

#include "bsolve/solver.hpp"
#include "test_support.hpp"

using namespace bsolve;

namespace {

std::shared_ptr<const BilateralSpace> space_of(const Raster& r, GridParams p, int iters = 64, double tol = 1e-6)
{
    return BilateralSpace::build(ReferenceImage::from_raster(r), p, iters, tol);
}

std::shared_ptr<const BilateralSpace> one_vertex_space()
{
    Raster r(2, 1, 1, 128.0f);
    return space_of(r, {16, 8, 8});
}

Problem random_problem(std::size_t n, std::uint64_t seed)
{
    Problem p;
    p.target = bstest::random_vector(n, seed, 0.0, 255.0);
    p.confidence = bstest::random_vector(n, seed + 1000, 0.0, 1.0);
    return p;
}

}  // namespace

TEST(Assemble, ZeroConfidenceGivesZeroSolution)
{
    auto sp = space_of(bstest::random_rgb(6, 6, 1), {3, 40, 40});
    Problem p{bstest::random_vector(36, 2), std::vector<double>(36, 0.0)};
    const auto sys = assemble(sp, p, 1.0);
    for (double b : sys.b) EXPECT_EQ(b, 0.0);
    SolverConfig cfg;
    cfg.preconditioner = Preconditioner::jacobi;
    const auto r = solve(sp, p, 1.0, cfg);
    for (double y : r.y) EXPECT_NEAR(y, 0.0, 1e-12);
}

TEST(Assemble, OneVertexHandEvaluation)
{
    Problem p{{0.0, 2.0}, {1.0, 1.0}};
    const auto sys = assemble(one_vertex_space(), p, 1.0);
    ASSERT_EQ(sys.size(), 1u);
    EXPECT_NEAR(sys.diag_a[0], 2.0, 1e-12);
    EXPECT_NEAR(sys.b[0], 2.0, 1e-12);
    EXPECT_NEAR(sys.c_scalar, 2.0, 1e-12);
    EXPECT_NEAR(apply_A(sys, std::vector<double>{1.0})[0], 2.0, 1e-12);
    const auto r = solve(one_vertex_space(), p, 1.0, SolverConfig{});
    EXPECT_NEAR(r.y[0], 1.0, 1e-12);
}

TEST(Assemble, MatrixFreeMatchesDense)
{
    auto sp = space_of(bstest::random_rgb(8, 8, 3), {3, 40, 40});
    const auto p = random_problem(64, 5);
    const auto sys = assemble(sp, p, 2.5);
    const auto a = bstest::dense_A(sp->grid, sp->bistoch.n, p.confidence, 2.5);
    const auto y = bstest::random_vector(sys.size(), 7);
    EXPECT_LE(bstest::max_abs_diff(apply_A(sys, y), bstest::from_eigen(a * bstest::to_eigen(y))), 1e-10);
    for (std::size_t v = 0; v < sys.size(); ++v) EXPECT_NEAR(sys.diag_a[v], a(v, v), 1e-10);
}

TEST(Assemble, RejectsBadInputs)
{
    auto sp = one_vertex_space();
    EXPECT_THROW(assemble(sp, Problem{{0, 1}, {1, -1}}, 1.0), ParameterError);
    EXPECT_THROW(assemble(sp, Problem{{0, 1}, {1, 1}}, -1.0), ParameterError);
    EXPECT_THROW(assemble(sp, Problem{{0, 1, 2}, {1, 1, 1}}, 1.0), DimensionError);
    // lambda = 0 is allowed only when every vertex carries confidence.
    EXPECT_NO_THROW(assemble(sp, Problem{{0, 1}, {1, 0}}, 0.0));
    EXPECT_THROW(assemble(sp, Problem{{0, 1}, {0, 0}}, 0.0), ParameterError);
}

TEST(ApplyA, ZeroAndConstants)
{
    auto sp = space_of(bstest::random_rgb(10, 10, 8), {3, 40, 40}, 2000, 1e-10);
    const auto p = random_problem(100, 9);
    const auto sys = assemble(sp, p, 3.0);
    for (double x : apply_A(sys, std::vector<double>(sys.size(), 0.0))) EXPECT_EQ(x, 0.0);
    const auto a1 = apply_A(sys, std::vector<double>(sys.size(), 1.0));
    for (std::size_t v = 0; v < sys.size(); ++v) EXPECT_NEAR(a1[v], sys.sc[v], 1e-7);
}

TEST(ApplyA, SymmetricAndPSD)
{
    auto sp = space_of(bstest::random_rgb(12, 12, 10), {3, 30, 30});
    const auto p = random_problem(144, 11);
    const auto sys = assemble(sp, p, 1.7);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto u = bstest::random_vector(sys.size(), 100 + s), v = bstest::random_vector(sys.size(), 200 + s);
        EXPECT_LE(std::abs(dot(apply_A(sys, u), v) - dot(u, apply_A(sys, v))), 1e-10 * norm2(u) * norm2(v));
        EXPECT_GE(dot(apply_A(sys, u), u), -1e-8 * dot(u, u));
    }
}

TEST(FlatInit, Cases)
{
    EXPECT_EQ(flat_init(std::vector<double>{12.0}, std::vector<double>{4.0}), std::vector<double>({3.0}));
    EXPECT_EQ(flat_init(std::vector<double>{5.0, 0.0}, std::vector<double>{1.0, 0.0}), std::vector<double>({5.0, 0.0}));
    auto sp = one_vertex_space();
    EXPECT_EQ(flat_init(sp->grid, Problem{{0.0, 4.0}, {1.0, 3.0}}), std::vector<double>({3.0}));
    auto sp2 = space_of(bstest::random_rgb(6, 6, 2), {2, 40, 40});
    const auto y = flat_init(sp2->grid, Problem{std::vector<double>(36, 9.0), bstest::random_vector(36, 3, 0.1, 1.0)});
    for (double v : y) EXPECT_NEAR(v, 9.0, 1e-12);
}

TEST(Pcg, IdentityOneIteration)
{
    auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    const std::vector<double> b{1.0, -2.0, 3.0};
    const auto r = pcg(id, b, std::vector<double>(3, 0.0), id, PcgOptions{1, {}});
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.x, b);
}

TEST(Pcg, TwoByTwo)
{
    auto a = [](std::span<const double> v) { return std::vector<double>{4 * v[0] + v[1], v[0] + 3 * v[1]}; };
    auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    const auto r = pcg(a, std::vector<double>{1.0, 2.0}, {0.0, 0.0}, id, PcgOptions{2, {}});
    EXPECT_NEAR(r.x[0], 1.0 / 11.0, 1e-10);
    EXPECT_NEAR(r.x[1], 7.0 / 11.0, 1e-10);
}

TEST(Pcg, RandomSpdMatchesDirectSolve)
{
    std::mt19937_64 rng(42);
    for (int n : {5, 40, 200}) {
        Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return bstest::uniform(rng, -1, 1); });
        const Eigen::MatrixXd spd = m * m.transpose() + n * Eigen::MatrixXd::Identity(n, n);
        const auto b = bstest::random_vector(n, n);
        auto apply = [&](std::span<const double> v) {
            return bstest::from_eigen(spd * Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
        };
        std::vector<double> diag(n);
        for (int i = 0; i < n; ++i) diag[i] = spd(i, i);
        const auto r = pcg(apply, b, std::vector<double>(n, 0.0), jacobi_precond(diag), PcgOptions{n, {}});
        const auto direct = bstest::from_eigen(spd.ldlt().solve(bstest::to_eigen(b)));
        EXPECT_LE(bstest::rel_l2(r.x, direct), 1e-6);
    }
}

TEST(Pcg, NonFiniteIsReported)
{
    auto bad = [](std::span<const double> v) { return std::vector<double>(v.size(), std::nan("")); };
    auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    EXPECT_THROW(pcg(bad, std::vector<double>{1.0}, {0.0}, id, PcgOptions{3, {}}), NumericalError);
}

TEST(Pcg, NoCurvatureKeepsIterate)
{
    auto zero = [](std::span<const double> v) { return std::vector<double>(v.size(), 0.0); };
    auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    const auto r = pcg(zero, std::vector<double>{1.0, 2.0}, {0.5, 0.5}, id, PcgOptions{5, {}});
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.x, std::vector<double>({0.5, 0.5}));
    EXPECT_EQ(r.loss_history.size(), 1u);
}

TEST(Pcg, ToleranceStopsEarly)
{
    auto sp = space_of(bstest::random_rgb(12, 12, 12), {3, 30, 30});
    const auto sys = assemble(sp, random_problem(144, 13), 1.0);
    SolverConfig cfg;
    cfg.n_iters = 1000;
    cfg.tol = 1e-8;
    const auto r = solve_system(sys, sys.b, cfg);
    EXPECT_LT(r.iterations, 1000);
    EXPECT_LE(r.residual_norm, 1e-8 * norm2(sys.b));
}

TEST(JacobiPrecond, Basics)
{
    const auto m = jacobi_precond(std::vector<double>{2.0, 4.0});
    EXPECT_EQ(m(std::vector<double>{2.0, 4.0}), std::vector<double>({1.0, 1.0}));
    const auto id = jacobi_precond(std::vector<double>(3, 1.0));
    EXPECT_EQ(id(std::vector<double>{1, 2, 3}), std::vector<double>({1, 2, 3}));
    EXPECT_THROW(jacobi_precond(std::vector<double>{1.0, 0.0}), ParameterError);
    const auto u = bstest::random_vector(2, 1), v = bstest::random_vector(2, 2);
    EXPECT_NEAR(dot(m(u), v), dot(u, m(v)), 1e-15);
    EXPECT_GT(dot(m(u), u), 0.0);
}

TEST(Solve, ConstantTargetIsExact)
{
    const auto ref = bstest::random_rgb(16, 16, 14);
    Problem p{std::vector<double>(256, 42.0), bstest::random_vector(256, 15, 0.0, 1.0)};
    const auto r = solve(ref, p, {4, 16, 16}, SolverConfig{}, 2.0);
    for (double x : r.output) EXPECT_NEAR(x, 42.0, 1e-5);
}

TEST(Solve, TinyLambdaGivesVertexMeans)
{
    const auto ref = bstest::random_rgb(10, 10, 16);
    auto sp = space_of(ref, {3, 40, 40});
    const auto p = Problem::uniform(bstest::random_vector(100, 17, 0.0, 255.0));
    const auto r = solve(sp, p, 1e-12, bstest::exact_config(sp->nverts()));
    const auto s_t = splat(sp->grid, p.target);
    for (std::size_t i = 0; i < 100; ++i) {
        const auto v = sp->grid.pixel_to_vertex[i];
        EXPECT_NEAR(r.output[i], s_t[v] / sp->grid.splat_counts[v], 1e-6);
    }
}

TEST(Solve, MatchesDenseOracle)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ref = bstest::random_rgb(8, 8, 20 + seed);
        auto sp = space_of(ref, {2.5, 35, 35});
        const auto p = random_problem(64, 30 + seed);
        const auto r = solve(sp, p, 1.3, bstest::exact_config(sp->nverts()));
        EXPECT_LE(bstest::rel_l2(r.output, bstest::dense_solve(sp->grid, sp->bistoch.n, p, 1.3)), 1e-6);
    }
}

TEST(Solve, LossIsNonIncreasing)
{
    auto sp = space_of(bstest::random_rgb(24, 24, 40), {4, 16, 16});
    const auto p = random_problem(576, 41);
    for (auto pc : {Preconditioner::jacobi, Preconditioner::hierarchical, Preconditioner::none}) {
        SolverConfig cfg;
        cfg.preconditioner = pc;
        cfg.n_iters = 60;
        const auto r = solve(sp, p, 1.0, cfg);
        ASSERT_EQ(r.loss_history.size(), static_cast<std::size_t>(r.iterations + 1));
        for (std::size_t k = 1; k < r.loss_history.size(); ++k) {
            EXPECT_LE(r.loss_history[k], r.loss_history[k - 1] + 1e-9 * std::abs(r.loss_history[k - 1]));
        }
        EXPECT_NEAR(r.loss, quadratic_loss(assemble(sp, p, 1.0), r.y), 1e-6 * std::abs(r.loss));
    }
}

TEST(Solve, ConfidenceScaleCovariance)
{
    auto sp = space_of(bstest::random_rgb(10, 10, 50), {3, 30, 30});
    auto p = random_problem(100, 51);
    const auto a = solve(sp, p, 0.8, bstest::exact_config(sp->nverts(), 1e-14));
    for (auto& c : p.confidence) c *= 7.0;
    const auto b = solve(sp, p, 0.8 * 7.0, bstest::exact_config(sp->nverts(), 1e-14));
    EXPECT_LE(bstest::max_abs_diff(a.y, b.y), 1e-8 * 255.0);
}

TEST(Solve, DtPostKeepsConstants)
{
    const auto ref = bstest::random_rgb(16, 16, 60);
    const auto r = solve(ref, Problem::uniform(std::vector<double>(256, 3.0)), {4, 16, 16}, SolverConfig{}, 1.0,
                         DTParams{8, 8, 3});
    for (double x : r.output) EXPECT_NEAR(x, 3.0, 1e-5);
    EXPECT_GE(r.construction_ms, 0.0);
    EXPECT_GE(r.optimization_ms, 0.0);
}

TEST(SolverConfig, Validation)
{
    SolverConfig c;
    c.n_iters = 0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.precond_alpha = 1.0;
    EXPECT_THROW(c.validate(), ParameterError);
}
