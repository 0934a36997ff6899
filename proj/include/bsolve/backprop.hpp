#pragma once

#include <span>
#include <vector>

#include "bsolve/solver.hpp"

namespace bsolve {

struct GradientBundle {
    std::vector<double> d_target;
    std::vector<double> d_confidence;
    std::vector<double> d_b;
    std::vector<double> d_diag_a;
    /// Number of linear solves performed (always 1).
    int solves = 0;
};

/// Pulls df/dx_hat back onto the target and confidence that produced `sys`.
///
/// d_b = A^-1 (S df/dx_hat) and d_diag(A) = -d_b o y_hat; these are sliced and combined with c and
/// t to give df/dt and df/dc. Only the diagonal of A depends on the inputs, so the off-diagonal
/// part of dA never needs to be formed. The only state required from the forward pass is y_hat.
inline GradientBundle solve_backward(const BilateralSystem& sys, const Problem& problem, std::span<const double> y_hat,
                                     std::span<const double> grad_xhat, const SolverConfig& cfg)
{
    const auto& g = sys.space->grid;
    problem.validate(g.npixels());
    detail::require_size(y_hat.size(), sys.size(), "solve_backward y_hat");
    detail::require_size(grad_xhat.size(), g.npixels(), "solve_backward grad");

    GradientBundle out;
    const std::vector<double> rhs = splat(g, grad_xhat);
    out.d_b = solve_system(sys, rhs, cfg).x;
    out.solves = 1;

    out.d_diag_a.resize(out.d_b.size());
    for (std::size_t v = 0; v < out.d_b.size(); ++v) out.d_diag_a[v] = -out.d_b[v] * y_hat[v];

    const auto db_px = slice(g, out.d_b);
    const auto dda_px = slice(g, out.d_diag_a);
    out.d_target.resize(db_px.size());
    out.d_confidence.resize(db_px.size());
    for (std::size_t i = 0; i < db_px.size(); ++i) {
        out.d_target[i] = problem.confidence[i] * db_px[i];
        out.d_confidence[i] = dda_px[i] + db_px[i] * problem.target[i];
    }
    return out;
}

}  // namespace bsolve
