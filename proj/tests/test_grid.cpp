#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "bsolve/grid.hpp"
#include "test_support.hpp"

using namespace bsolve;

namespace {

Raster gray(int w, int h, std::vector<float> v)
{
    Raster r(w, h, 1);
    r.values = std::move(v);
    return r;
}

BilateralGrid grid_of(const Raster& r, GridParams p) { return build_grid(ReferenceImage::from_raster(r), p); }

}  // namespace

TEST(BuildGrid, IdenticalPixelsCoalesce)
{
    const auto g = grid_of(gray(2, 1, {128, 128}), {16, 8, 8});
    EXPECT_EQ(g.nverts, 1);
    EXPECT_EQ(g.splat_counts, std::vector<double>({2.0}));
}

TEST(BuildGrid, DistantLumaCellsAreNotLinked)
{
    const auto g = grid_of(gray(2, 1, {0, 255}), {16, 8, 8});
    ASSERT_EQ(g.nverts, 2);
    EXPECT_EQ(g.coords(0)[2], 0);
    EXPECT_EQ(g.coords(1)[2], 31);
    EXPECT_EQ(g.splat_counts, std::vector<double>({1.0, 1.0}));
    for (int v = 0; v < 2; ++v) {
        for (int d = 0; d < 3; ++d) {
            EXPECT_EQ(g.neighbor(v, d, false), BilateralGrid::kNoNeighbor);
            EXPECT_EQ(g.neighbor(v, d, true), BilateralGrid::kNoNeighbor);
        }
    }
}

TEST(BuildGrid, ConstantColorImageGivesSpatialLattice)
{
    Raster r(4, 4, 3, 100.0f);
    const auto g = grid_of(r, {2, 4, 4});
    ASSERT_EQ(g.dims, 5);
    ASSERT_EQ(g.nverts, 4);
    for (auto c : g.splat_counts) EXPECT_EQ(c, 4.0);
    // First-visit order of a row-major scan: (0,0), (1,0), (0,1), (1,1).
    EXPECT_EQ(g.neighbor(0, 0, true), 1);
    EXPECT_EQ(g.neighbor(0, 1, true), 2);
    EXPECT_EQ(g.neighbor(3, 0, false), 2);
    EXPECT_EQ(g.neighbor(3, 1, false), 1);
    EXPECT_EQ(g.neighbor(0, 2, true), BilateralGrid::kNoNeighbor);
}

TEST(BuildGrid, RejectsBadParameters)
{
    EXPECT_THROW(grid_of(gray(2, 1, {1, 2}), {0, 8, 8}), ParameterError);
    EXPECT_THROW(grid_of(gray(2, 1, {1, 2}), {4, -1, 8}), ParameterError);
    EXPECT_THROW(build_grid(ReferenceImage{}, {}), DimensionError);
}

TEST(BuildGrid, Invariants)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = grid_of(bstest::random_rgb(13, 11, seed), {3, 20, 20});
        EXPECT_LE(static_cast<std::size_t>(g.nverts), g.npixels());
        EXPECT_EQ(std::accumulate(g.splat_counts.begin(), g.splat_counts.end(), 0.0),
                  static_cast<double>(g.npixels()));
        for (auto c : g.splat_counts) EXPECT_GE(c, 1.0);
        std::set<std::vector<std::int32_t>> seen;
        for (int v = 0; v < g.nverts; ++v) {
            auto c = g.coords(v);
            EXPECT_TRUE(seen.insert({c.begin(), c.end()}).second);
            for (int d = 0; d < g.dims; ++d) {
                const auto up = g.neighbor(v, d, true);
                if (up != BilateralGrid::kNoNeighbor) {
                    EXPECT_EQ(g.neighbor(up, d, false), v);
                }
            }
        }
    }
}

TEST(BuildGrid, Deterministic)
{
    const auto r = bstest::random_rgb(20, 20, 9);
    const auto a = grid_of(r, {4, 8, 8});
    const auto b = grid_of(r, {4, 8, 8});
    EXPECT_EQ(a.pixel_to_vertex, b.pixel_to_vertex);
    EXPECT_EQ(a.vertex_coords, b.vertex_coords);
    EXPECT_EQ(a.neighbors, b.neighbors);
}

TEST(Splat, OnesGiveCounts)
{
    const auto g = grid_of(bstest::random_rgb(9, 7, 3), {2, 30, 30});
    EXPECT_EQ(splat(g, std::vector<double>(g.npixels(), 1.0)), g.splat_counts);
}

TEST(Splat, SingleVertexSums)
{
    const auto g = grid_of(gray(2, 1, {128, 128}), {16, 8, 8});
    EXPECT_EQ(splat(g, std::vector<double>{3, 5}), std::vector<double>({8.0}));
}

TEST(SplatSlice, MatchDenseSAndAreAdjoint)
{
    const auto g = grid_of(bstest::random_rgb(8, 8, 4), {3, 40, 40});
    const auto s = bstest::dense_S(g);
    const auto p = bstest::random_vector(g.npixels(), 1);
    const auto v = bstest::random_vector(g.nverts, 2);
    EXPECT_LE(bstest::max_abs_diff(splat(g, p), bstest::from_eigen(s * bstest::to_eigen(p))), 1e-12);
    EXPECT_LE(bstest::max_abs_diff(slice(g, v), bstest::from_eigen(s.transpose() * bstest::to_eigen(v))), 0.0);
    const double lhs = dot(splat(g, p), v), rhs = dot(p, slice(g, v));
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST(Slice, ConstantStaysConstant)
{
    const auto g = grid_of(bstest::random_rgb(6, 6, 5), {2, 50, 50});
    for (double x : slice(g, std::vector<double>(g.nverts, 7.5))) EXPECT_EQ(x, 7.5);
}

TEST(SplatSlice, LengthMismatchThrows)
{
    const auto g = grid_of(gray(2, 1, {0, 255}), {16, 8, 8});
    EXPECT_THROW(splat(g, std::vector<double>(3)), DimensionError);
    EXPECT_THROW(slice(g, std::vector<double>(1)), DimensionError);
    EXPECT_THROW(blur(g, std::vector<double>(5)), DimensionError);
}

TEST(Blur, SingleVertexColor)
{
    Raster r(2, 2, 3, 50.0f);
    const auto g = grid_of(r, {8, 8, 8});
    ASSERT_EQ(g.nverts, 1);
    EXPECT_EQ(blur(g, std::vector<double>{1.0}), std::vector<double>({10.0}));
}

TEST(Blur, TwoLumaAdjacentVertices)
{
    const auto g = grid_of(gray(2, 1, {0, 8}), {16, 8, 8});
    ASSERT_EQ(g.nverts, 2);
    EXPECT_EQ(blur(g, std::vector<double>{1.0, 0.0}), std::vector<double>({6.0, 1.0}));
}

TEST(Blur, MatchesCoordinateOracleAndIsSymmetric)
{
    const auto g = grid_of(bstest::random_rgb(10, 10, 6), {3, 25, 25});
    const auto u = bstest::random_vector(g.nverts, 3), v = bstest::random_vector(g.nverts, 4);
    EXPECT_LE(bstest::max_abs_diff(blur(g, u), bstest::from_eigen(bstest::dense_blur(g) * bstest::to_eigen(u))),
              1e-12);
    EXPECT_NEAR(dot(blur(g, u), v), dot(u, blur(g, v)), 1e-10);
    for (double x : blur(g, std::vector<double>(g.nverts, 0.0))) EXPECT_EQ(x, 0.0);
}

TEST(Bistochastize, SingleVertexClosedForm)
{
    Raster r(2, 2, 3, 50.0f);
    const auto g = grid_of(r, {8, 8, 8});
    const auto bs = bistochastize(g);
    EXPECT_EQ(bs.iterations_used, 1);
    EXPECT_NEAR(bs.n[0], std::sqrt(4.0 / 10.0), 1e-12);
    EXPECT_NEAR(bs.n[0], 0.63246, 1e-5);
}

TEST(Bistochastize, ReachesFixedPoint)
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto g = grid_of(bstest::random_rgb(12, 12, seed), {3, 30, 30});
        const auto bs = bistochastize(g, 2000, 1e-8);
        EXPECT_LE(bs.residual, 1e-8);
        const auto bn = blur(g, bs.n);
        const double mmax = *std::max_element(g.splat_counts.begin(), g.splat_counts.end());
        for (int v = 0; v < g.nverts; ++v) {
            EXPECT_GT(bs.n[v], 0.0);
            EXPECT_LE(std::abs(bs.n[v] * bn[v] - g.splat_counts[v]) / mmax, 1e-8);
        }
        // Constants are annihilated by Dm - Dn B Dn.
        for (int v = 0; v < g.nverts; ++v) {
            EXPECT_LE(std::abs(g.splat_counts[v] - bs.n[v] * bn[v]), 10 * 1e-8 * mmax);
        }
    }
}

TEST(Bistochastize, RejectsZeroIterations)
{
    const auto g = grid_of(gray(2, 1, {0, 8}), {16, 8, 8});
    EXPECT_THROW(bistochastize(g, 0), ParameterError);
}

TEST(DenseWhat, SingleVertexIsUniform)
{
    Raster r(3, 1, 3, 10.0f);
    const auto g = grid_of(r, {8, 8, 8});
    const auto w = dense_what(g, bistochastize(g));
    for (double x : w.data) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(DenseWhat, SymmetricNonnegativeStochastic)
{
    const auto g = grid_of(bstest::random_rgb(8, 8, 11), {3, 40, 40});
    const auto w = dense_what(g, bistochastize(g, 64, 1e-6));
    for (std::size_t i = 0; i < w.rows; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) {
            EXPECT_GE(w(i, j), 0.0);
            EXPECT_NEAR(w(i, j), w(j, i), 1e-12);
            row += w(i, j);
        }
        EXPECT_NEAR(row, 1.0, 1e-4);
    }
}

TEST(DenseWhat, CapEnforced)
{
    const auto g = grid_of(bstest::random_gray(10, 10, 1), {4, 8, 8});
    EXPECT_THROW(dense_what(g, bistochastize(g), 50), ParameterError);
}
