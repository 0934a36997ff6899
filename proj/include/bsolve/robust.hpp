#pragma once

#include <cmath>
#include <concepts>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bsolve/domain_transform.hpp"
#include "bsolve/solver.hpp"

namespace bsolve {

/// A robust penalty rho(e) together with its IRLS weight rho'(e) / e.
template <class L>
concept RobustLoss = requires(const L& l, double e) {
    { l.rho(e) } -> std::convertible_to<double>;
    { l.weight(e) } -> std::convertible_to<double>;
};

struct GemanMcClure {
    double sigma = 1.0;

    double rho(double e) const
    {
        const double e2 = e * e;
        return e2 / (sigma * sigma + e2);
    }

    double weight(double e) const
    {
        const double s2 = sigma * sigma;
        const double d = s2 + e * e;
        return 2.0 * s2 / (d * d);
    }
};

/// rho(e) = e^2 / 2, constant weight 1. Reduces the robust loop to repeated plain solves.
struct SquaredLoss {
    double rho(double e) const { return 0.5 * e * e; }
    double weight(double) const { return 1.0; }
};

inline double gm_rho(double e, double sigma_gm) { return GemanMcClure{sigma_gm}.rho(e); }
inline double gm_weight(double e, double sigma_gm) { return GemanMcClure{sigma_gm}.weight(e); }

struct RobustParams {
    double sigma_gm = 1.0;
    int n_irls = 32;
    SolverConfig inner;

    void validate() const
    {
        if (!(sigma_gm > 0.0)) throw ParameterError("RobustParams: sigma_gm must be positive");
        if (n_irls < 1) throw ParameterError("RobustParams: n_irls must be >= 1");
        inner.validate();
    }
};

struct RobustResult {
    /// Final pixel-space estimate (post-filtered when requested).
    std::vector<double> output;
    std::vector<double> y;
    /// Robust objective after each outer iteration.
    std::vector<double> objective_history;
    /// IRLS weights derived from the final estimate.
    std::vector<double> weights;
};

/// 1/2 lambda y^T (Dm - Dn B Dn) y.
inline double smoothness_energy(const BilateralSpace& space, double lambda, std::span<const double> y)
{
    const auto& g = space.grid;
    const auto& n = space.bistoch.n;
    std::vector<double> ny(y.size());
    for (std::size_t v = 0; v < y.size(); ++v) ny[v] = n[v] * y[v];
    const auto bny = blur(g, ny);
    double acc = 0.0;
    for (std::size_t v = 0; v < y.size(); ++v) acc += g.splat_counts[v] * y[v] * y[v] - ny[v] * bny[v];
    return 0.5 * lambda * acc;
}

/// Robust objective in the same scale as the solver's quadratic: the smoothness half of
/// 1/2 y^T A y plus sum_i rho(x_i - t_i). Each IRLS step majorizes exactly this function, so it
/// never increases when the inner solves are exact.
template <RobustLoss Loss>
double robust_objective(const BilateralSpace& space, double lambda, std::span<const double> y,
                        std::span<const double> target, const Loss& loss)
{
    const auto x = slice(space.grid, y);
    double data = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) data += loss.rho(x[i] - target[i]);
    return smoothness_energy(space, lambda, y) + data;
}

/// Iteratively reweighted least squares around the bilateral solver. The first solve uses
/// `c_init`; every later solve uses weights computed from the previous pixel-space residual.
template <RobustLoss Loss>
RobustResult robust_solve(std::shared_ptr<const BilateralSpace> space, std::span<const double> target,
                          std::span<const double> c_init, const Loss& loss, int n_irls, double lambda,
                          const SolverConfig& inner)
{
    if (n_irls < 1) throw ParameterError("robust_solve: n_irls must be >= 1");
    detail::require_size(c_init.size(), space->npixels(), "robust_solve confidence");
    Problem problem;
    problem.target.assign(target.begin(), target.end());
    problem.confidence.assign(c_init.begin(), c_init.end());

    RobustResult out;
    for (int it = 0; it < n_irls; ++it) {
        SolveResult s = solve(space, problem, lambda, inner);
        for (std::size_t i = 0; i < s.output.size(); ++i) {
            problem.confidence[i] = loss.weight(s.output[i] - problem.target[i]);
        }
        out.objective_history.push_back(robust_objective(*space, lambda, s.y, problem.target, loss));
        out.output = std::move(s.output);
        out.y = std::move(s.y);
    }
    out.weights = std::move(problem.confidence);
    return out;
}

/// Geman-McClure robust solve from a reference raster, with optional domain-transform post-filter.
inline RobustResult robust_solve(const Raster& reference, std::span<const double> target,
                                 std::span<const double> c_init, const RobustParams& params,
                                 const GridParams& grid_params, double lambda,
                                 const std::optional<DTParams>& dt_post = {})
{
    params.validate();
    auto space = BilateralSpace::build(ReferenceImage::from_raster(reference), grid_params);
    RobustResult r = robust_solve(space, target, c_init, GemanMcClure{params.sigma_gm}, params.n_irls, lambda,
                                  params.inner);
    if (dt_post) r.output = dt_filter(r.output, reference, *dt_post);
    return r;
}

struct ConfidenceInitParams {
    double sigma_dt = 2.0;
    double dt_sigma_xy = 32.0;
    double dt_sigma_rgb = 32.0;
    int zero_left_columns = 0;

    void validate() const
    {
        if (!(sigma_dt > 0.0)) throw ParameterError("ConfidenceInitParams: sigma_dt must be positive");
        if (zero_left_columns < 0) throw ParameterError("ConfidenceInitParams: zero_left_columns must be >= 0");
    }
};

/// exp(-V / (2 sigma_dt^2)) with V the edge-aware local variance of the depth, and the leftmost
/// `zero_left_columns` columns forced to 0.
inline std::vector<double> variance_confidence(std::span<const double> depth, const Raster& guide,
                                               const ConfidenceInitParams& params)
{
    params.validate();
    const auto v = dt_variance(depth, guide, DTParams{params.dt_sigma_xy, params.dt_sigma_rgb, 3});
    std::vector<double> c(v.size());
    const double denom = 2.0 * params.sigma_dt * params.sigma_dt;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::exp(-v[i] / denom);
    const int cols = std::min(params.zero_left_columns, guide.width);
    for (int y = 0; y < guide.height; ++y) {
        for (int x = 0; x < cols; ++x) c[static_cast<std::size_t>(y) * guide.width + x] = 0.0;
    }
    return c;
}

}  // namespace bsolve
