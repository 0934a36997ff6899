#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsolve/domain_transform.hpp"
#include "bsolve/error.hpp"
#include "bsolve/grid.hpp"
#include "bsolve/pcg.hpp"
#include "bsolve/problem.hpp"
#include "bsolve/pyramid.hpp"

namespace bsolve {

enum class Preconditioner { none, jacobi, hierarchical };
enum class Initialization { flat, hierarchical };

struct SolverConfig {
    int n_iters = 25;
    std::optional<double> tol;
    Preconditioner preconditioner = Preconditioner::hierarchical;
    Initialization init = Initialization::hierarchical;
    double precond_alpha = 2.0;
    double precond_beta = 5.0;
    double init_alpha = 4.0;
    double init_beta = 0.0;

    void validate() const
    {
        if (n_iters < 1) throw ParameterError("SolverConfig: n_iters must be >= 1");
        if (tol && !(*tol >= 0.0)) throw ParameterError("SolverConfig: tol must be non-negative");
        if (!(precond_alpha > 1.0) || !(init_alpha > 1.0)) {
            throw ParameterError("SolverConfig: pyramid alphas must be > 1");
        }
        if (!std::isfinite(precond_beta) || !std::isfinite(init_beta)) {
            throw ParameterError("SolverConfig: pyramid betas must be finite");
        }
    }

    PcgOptions pcg_options() const { return {n_iters, tol}; }
};

/// Everything that depends only on the reference image: the grid, its bistochastization and the
/// pyramid over its vertices. Immutable once built.
struct BilateralSpace {
    BilateralGrid grid;
    Bistochastization bistoch;
    std::shared_ptr<const GridPyramid> pyramid;

    static std::shared_ptr<const BilateralSpace> build(const ReferenceImage& ref, const GridParams& params,
                                                       int bistoch_iters = 64, double bistoch_tol = 1e-10)
    {
        auto s = std::make_shared<BilateralSpace>();
        s->grid = build_grid(ref, params);
        s->bistoch = bistochastize(s->grid, bistoch_iters, bistoch_tol);
        s->pyramid = std::make_shared<const GridPyramid>(build_pyramid(s->grid));
        return s;
    }

    std::size_t nverts() const { return static_cast<std::size_t>(grid.nverts); }
    std::size_t npixels() const { return grid.npixels(); }
};

/// The bilateral-space quadratic 1/2 y^T A y - b^T y + c_scalar with
/// A = lambda (Dm - Dn B Dn) + diag(S c), b = S (c o t). A is applied matrix-free.
struct BilateralSystem {
    std::shared_ptr<const BilateralSpace> space;
    double lambda = 0.0;
    std::vector<double> diag_a;
    std::vector<double> b;
    std::vector<double> sc;
    double c_scalar = 0.0;

    std::size_t size() const { return diag_a.size(); }
};

/// Splats c o t.
inline std::vector<double> splat_weighted(const BilateralGrid& g, std::span<const double> confidence,
                                          std::span<const double> target)
{
    detail::require_size(target.size(), confidence.size(), "splat_weighted");
    std::vector<double> ct(target.size());
    for (std::size_t i = 0; i < ct.size(); ++i) ct[i] = confidence[i] * target[i];
    return splat(g, ct);
}

inline BilateralSystem assemble(std::shared_ptr<const BilateralSpace> space, const Problem& problem, double lambda)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("assemble: lambda must be finite and >= 0");
    problem.validate(space->npixels());
    const auto& g = space->grid;
    const auto& n = space->bistoch.n;

    BilateralSystem sys;
    sys.lambda = lambda;
    sys.sc = splat(g, problem.confidence);
    sys.b = splat_weighted(g, problem.confidence, problem.target);
    if (lambda == 0.0) {
        for (std::size_t v = 0; v < sys.sc.size(); ++v) {
            if (!(sys.sc[v] > 0.0)) {
                throw ParameterError("assemble: lambda = 0 requires positive confidence at every vertex (vertex " +
                                     std::to_string(v) + " has none)");
            }
        }
    }
    const double bdiag = blur_diagonal(g);
    sys.diag_a.resize(g.nverts);
    for (std::int32_t v = 0; v < g.nverts; ++v) {
        sys.diag_a[v] = lambda * (g.splat_counts[v] - bdiag * n[v] * n[v]) + sys.sc[v];
    }
    for (std::size_t i = 0; i < problem.size(); ++i) {
        sys.c_scalar += 0.5 * problem.confidence[i] * problem.target[i] * problem.target[i];
    }
    sys.space = std::move(space);
    return sys;
}

/// lambda (m o y - n o B(n o y)) + (S c) o y.
inline std::vector<double> apply_A(const BilateralSystem& sys, std::span<const double> y)
{
    detail::require_size(y.size(), sys.size(), "apply_A");
    const auto& g = sys.space->grid;
    const auto& n = sys.space->bistoch.n;
    std::vector<double> ny(y.size());
    for (std::size_t v = 0; v < y.size(); ++v) ny[v] = n[v] * y[v];
    std::vector<double> out = blur(g, ny);
    for (std::size_t v = 0; v < y.size(); ++v) {
        out[v] = sys.lambda * (g.splat_counts[v] * y[v] - n[v] * out[v]) + sys.sc[v] * y[v];
    }
    return out;
}

/// 1/2 y^T A y - b^T y + c_scalar.
inline double quadratic_loss(const BilateralSystem& sys, std::span<const double> y)
{
    const auto ay = apply_A(sys, y);
    return 0.5 * dot(y, ay) - dot(sys.b, y) + sys.c_scalar;
}

/// rhs / (S c) elementwise; vertices without confidence get 0.
inline std::vector<double> flat_init(std::span<const double> rhs, std::span<const double> sc)
{
    detail::require_size(rhs.size(), sc.size(), "flat_init");
    std::vector<double> y(rhs.size(), 0.0);
    for (std::size_t v = 0; v < y.size(); ++v) {
        if (sc[v] > 0.0) y[v] = rhs[v] / sc[v];
    }
    return y;
}

inline std::vector<double> flat_init(const BilateralGrid& g, const Problem& problem)
{
    problem.validate(g.npixels());
    return flat_init(splat_weighted(g, problem.confidence, problem.target), splat(g, problem.confidence));
}

/// y -> y / diag elementwise.
inline LinearOperator jacobi_precond(std::span<const double> diag_a)
{
    std::vector<double> inv(diag_a.size());
    for (std::size_t v = 0; v < inv.size(); ++v) {
        if (!(diag_a[v] > 0.0)) {
            throw ParameterError("jacobi_precond: non-positive diagonal entry at vertex " + std::to_string(v));
        }
        inv[v] = 1.0 / diag_a[v];
    }
    return [inv = std::move(inv)](std::span<const double> y) {
        detail::require_size(y.size(), inv.size(), "jacobi_precond");
        std::vector<double> out(y.size());
        for (std::size_t v = 0; v < y.size(); ++v) out[v] = y[v] * inv[v];
        return out;
    };
}

/// diag(A) with rows that are zero up to rounding (isolated vertices without confidence) set to 1.
/// Those rows decouple from the system and carry zero right-hand side, so any positive scaling
/// leaves the iterates unchanged.
inline std::vector<double> preconditioner_diagonal(const BilateralSystem& sys)
{
    double peak = 0.0;
    for (double d : sys.diag_a) peak = std::max(peak, std::abs(d));
    std::vector<double> d(sys.diag_a);
    for (auto& x : d) {
        if (!(x > 1e-12 * peak)) x = 1.0;
    }
    return d;
}

inline LinearOperator make_preconditioner(const BilateralSystem& sys, const SolverConfig& cfg)
{
    switch (cfg.preconditioner) {
    case Preconditioner::none:
        return [](std::span<const double> y) { return std::vector<double>(y.begin(), y.end()); };
    case Preconditioner::jacobi:
        return jacobi_precond(preconditioner_diagonal(sys));
    case Preconditioner::hierarchical:
        return HierarchicalPreconditioner(sys.space->pyramid, preconditioner_diagonal(sys), cfg.precond_alpha,
                                          cfg.precond_beta);
    }
    throw ParameterError("make_preconditioner: unknown preconditioner");
}

/// Starting point for a solve against `rhs` (either b or any other right-hand side sharing A).
inline std::vector<double> initial_state(const BilateralSystem& sys, std::span<const double> rhs,
                                         const SolverConfig& cfg)
{
    if (cfg.init == Initialization::hierarchical) {
        return hier_init(*sys.space->pyramid, rhs, sys.sc, cfg.init_alpha, cfg.init_beta);
    }
    return flat_init(rhs, sys.sc);
}

/// Solves A y = rhs with the configured initialization and preconditioner.
inline PcgResult solve_system(const BilateralSystem& sys, std::span<const double> rhs, const SolverConfig& cfg,
                              const LinearOperator& precond)
{
    cfg.validate();
    detail::require_size(rhs.size(), sys.size(), "solve_system");
    auto apply = [&sys](std::span<const double> y) { return apply_A(sys, y); };
    return pcg(apply, rhs, initial_state(sys, rhs, cfg), precond, cfg.pcg_options());
}

inline PcgResult solve_system(const BilateralSystem& sys, std::span<const double> rhs, const SolverConfig& cfg)
{
    return solve_system(sys, rhs, cfg, make_preconditioner(sys, cfg));
}

struct SolveResult {
    /// Sliced (and optionally post-filtered) per-pixel output.
    std::vector<double> output;
    /// Bilateral-space solution.
    std::vector<double> y;
    /// Final value of 1/2 y^T A y - b^T y + c_scalar.
    double loss = 0.0;
    /// Same quantity at the initial state and after every PCG iteration.
    std::vector<double> loss_history;
    /// Elapsed optimization time at each loss_history entry.
    std::vector<double> wall_ms;
    int iterations = 0;
    double construction_ms = 0.0;
    double optimization_ms = 0.0;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// Assemble, initialize, run PCG, and slice, over a prebuilt bilateral space.
inline SolveResult solve(std::shared_ptr<const BilateralSpace> space, const Problem& problem, double lambda,
                         const SolverConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const BilateralSystem sys = assemble(std::move(space), problem, lambda);
    const auto precond = make_preconditioner(sys, cfg);
    SolveResult out;
    out.construction_ms = detail::elapsed_ms(t0);

    const auto t1 = std::chrono::steady_clock::now();
    PcgResult r = solve_system(sys, sys.b, cfg, precond);
    out.output = slice(sys.space->grid, r.x);
    out.optimization_ms = detail::elapsed_ms(t1);

    out.iterations = r.iterations;
    out.loss_history = std::move(r.loss_history);
    for (auto& l : out.loss_history) l += sys.c_scalar;
    out.loss = out.loss_history.back();
    out.wall_ms = std::move(r.wall_ms);
    out.y = std::move(r.x);
    return out;
}

/// Full pipeline from a reference raster (RGB or grayscale). When `dt_post` is set, the sliced
/// output is post-filtered by the domain transform guided by the same reference.
inline SolveResult solve(const Raster& reference, const Problem& problem, const GridParams& grid_params,
                         const SolverConfig& cfg, double lambda, const std::optional<DTParams>& dt_post = {})
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto space = BilateralSpace::build(ReferenceImage::from_raster(reference), grid_params);
    const double grid_ms = detail::elapsed_ms(t0);

    SolveResult out = solve(std::move(space), problem, lambda, cfg);
    out.construction_ms += grid_ms;
    if (dt_post) {
        const auto t1 = std::chrono::steady_clock::now();
        out.output = dt_filter(out.output, reference, *dt_post);
        out.optimization_ms += detail::elapsed_ms(t1);
    }
    return out;
}

}  // namespace bsolve
