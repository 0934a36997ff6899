#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "bsolve/error.hpp"
#include "bsolve/grid.hpp"
#include "bsolve/problem.hpp"

namespace bsolve {

/// Chain of splat maps obtained by repeatedly halving the grid's vertex coordinates. Level 0 is
/// the grid itself; the last level holds exactly one vertex.
struct GridPyramid {
    /// splat_maps[k][i] is the level-(k+1) vertex that level-k vertex i collapses into.
    std::vector<std::vector<std::int32_t>> splat_maps;
    std::vector<std::size_t> level_sizes;

    /// Number of splat maps (K). There are K + 1 coefficient levels.
    int num_maps() const { return static_cast<int>(splat_maps.size()); }
    int num_levels() const { return static_cast<int>(level_sizes.size()); }
};

/// One coefficient vector per level; levels[0] is a copy of the bilateral-space vector.
using PyramidVector = std::vector<std::vector<double>>;

/// Halving steps that do not merge any vertices are folded into the next step that does, so
/// level sizes are strictly decreasing.
inline GridPyramid build_pyramid(const BilateralGrid& g)
{
    const int dims = g.dims;
    GridPyramid pyr;
    pyr.level_sizes.push_back(static_cast<std::size_t>(g.nverts));

    std::vector<std::int32_t> cur(g.vertex_coords);
    std::array<std::int32_t, 5> lo, hi;
    lo.fill(INT32_MAX);
    hi.fill(INT32_MIN);
    for (std::size_t i = 0; i < cur.size(); ++i) lo[i % dims] = std::min(lo[i % dims], cur[i]);
    for (std::size_t i = 0; i < cur.size(); ++i) {
        cur[i] -= lo[i % dims];
        hi[i % dims] = std::max(hi[i % dims], cur[i]);
    }

    std::vector<std::int32_t> pending(g.nverts);
    std::iota(pending.begin(), pending.end(), 0);
    std::vector<std::int32_t> unique;
    std::unordered_map<std::uint64_t, std::int32_t> index;
    std::array<std::int32_t, 5> zero{};

    while (pyr.level_sizes.back() > 1) {
        for (auto& c : cur) c >>= 1;
        for (int d = 0; d < dims; ++d) hi[d] >>= 1;
        detail::LatticeKey key({zero.data(), static_cast<std::size_t>(dims)}, {hi.data(), static_cast<std::size_t>(dims)});
        const auto assign = detail::coalesce(cur, dims, unique, index, key);
        for (auto& p : pending) p = assign[p];
        cur = unique;
        const std::size_t count = cur.size() / dims;
        if (count < pyr.level_sizes.back()) {
            pyr.splat_maps.push_back(pending);
            pyr.level_sizes.push_back(count);
            pending.resize(count);
            std::iota(pending.begin(), pending.end(), 0);
        }
    }
    return pyr;
}

/// P(y) = [y, S0 y, S1 S0 y, ...], computed bottom-up.
inline PyramidVector lift(const GridPyramid& pyr, std::span<const double> y)
{
    detail::require_size(y.size(), pyr.level_sizes.front(), "lift");
    PyramidVector z(pyr.num_levels());
    z[0].assign(y.begin(), y.end());
    for (int k = 0; k < pyr.num_maps(); ++k) {
        z[k + 1].assign(pyr.level_sizes[k + 1], 0.0);
        const auto& map = pyr.splat_maps[k];
        for (std::size_t i = 0; i < map.size(); ++i) z[k + 1][map[i]] += z[k][i];
    }
    return z;
}

/// P^T(z) = z0 + S0^T (z1 + S1^T (z2 + ...)), computed top-down.
inline std::vector<double> project(const GridPyramid& pyr, const PyramidVector& z)
{
    if (z.size() != pyr.level_sizes.size()) {
        throw DimensionError("project: expected " + std::to_string(pyr.level_sizes.size()) + " levels, got " +
                             std::to_string(z.size()));
    }
    for (std::size_t k = 0; k < z.size(); ++k) detail::require_size(z[k].size(), pyr.level_sizes[k], "project level");
    std::vector<double> acc = z.back();
    for (int k = pyr.num_maps() - 1; k >= 0; --k) {
        const auto& map = pyr.splat_maps[k];
        std::vector<double> next(map.size());
        for (std::size_t i = 0; i < map.size(); ++i) next[i] = z[k][i] + acc[map[i]];
        acc = std::move(next);
    }
    return acc;
}

/// Per-level weight: 1 at the base level, alpha^-(beta + k) above it.
inline double zweight(int k, double alpha, double beta)
{
    if (k < 0) throw ParameterError("zweight: level must be >= 0");
    return k == 0 ? 1.0 : std::pow(alpha, -(beta + k));
}

/// y -> P^T(zweight o P(1) o P(y) / P(diag_a)). The per-coefficient multiplier is built once.
class HierarchicalPreconditioner {
public:
    HierarchicalPreconditioner(std::shared_ptr<const GridPyramid> pyr, std::span<const double> diag_a, double alpha,
                               double beta)
        : pyr_(std::move(pyr))
    {
        for (double d : diag_a) {
            if (!(d > 0.0)) throw ParameterError("HierarchicalPreconditioner: diag(A) must be positive");
        }
        const std::vector<double> ones(diag_a.size(), 1.0);
        const PyramidVector counts = lift(*pyr_, ones);
        const PyramidVector diag = lift(*pyr_, diag_a);
        scale_.resize(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k) {
            const double w = zweight(static_cast<int>(k), alpha, beta);
            scale_[k].resize(counts[k].size());
            for (std::size_t i = 0; i < counts[k].size(); ++i) scale_[k][i] = w * counts[k][i] / diag[k][i];
        }
    }

    std::vector<double> operator()(std::span<const double> y) const
    {
        PyramidVector z = lift(*pyr_, y);
        for (std::size_t k = 0; k < z.size(); ++k) {
            for (std::size_t i = 0; i < z[k].size(); ++i) z[k][i] *= scale_[k][i];
        }
        return project(*pyr_, z);
    }

    const PyramidVector& scale() const { return scale_; }

private:
    std::shared_ptr<const GridPyramid> pyr_;
    PyramidVector scale_;
};

namespace detail {

inline std::vector<double> push_pull(const GridPyramid& pyr, std::span<const double> v, const PyramidVector& counts,
                                     double alpha, double beta)
{
    PyramidVector z = lift(pyr, v);
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double w = zweight(static_cast<int>(k), alpha, beta);
        for (std::size_t i = 0; i < z[k].size(); ++i) z[k][i] *= w / counts[k][i];
    }
    return project(pyr, z);
}

}  // namespace detail

/// Push-pull fill of the confidence-weighted mean: ratio of pyramid-filtered S(c o t) and S(c).
/// Entries whose denominator is at most 1e-12 are set to 0.
inline std::vector<double> hier_init(const GridPyramid& pyr, std::span<const double> s_ct, std::span<const double> s_c,
                                     double alpha, double beta)
{
    detail::require_size(s_ct.size(), pyr.level_sizes.front(), "hier_init numerator");
    detail::require_size(s_c.size(), pyr.level_sizes.front(), "hier_init denominator");
    const std::vector<double> ones(s_c.size(), 1.0);
    const PyramidVector counts = lift(pyr, ones);
    const auto num = detail::push_pull(pyr, s_ct, counts, alpha, beta);
    const auto den = detail::push_pull(pyr, s_c, counts, alpha, beta);
    std::vector<double> y(num.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (den[i] > 1e-12) y[i] = num[i] / den[i];
    }
    return y;
}

inline std::vector<double> hier_init(const GridPyramid& pyr, const BilateralGrid& g, const Problem& problem,
                                     double alpha, double beta)
{
    problem.validate(g.npixels());
    std::vector<double> ct(problem.size());
    for (std::size_t i = 0; i < ct.size(); ++i) ct[i] = problem.confidence[i] * problem.target[i];
    return hier_init(pyr, splat(g, ct), splat(g, problem.confidence), alpha, beta);
}

}  // namespace bsolve
