#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsolve/error.hpp"
#include "bsolve/matrix.hpp"

namespace bsolve {

/// A symmetric linear map on per-vertex vectors.
using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

template <class F>
concept VectorOperator = requires(const F& f, std::span<const double> v) {
    { f(v) } -> std::convertible_to<std::vector<double>>;
};

struct PcgOptions {
    int n_iters = 25;
    /// Stop once ||r|| <= tol * ||b||. Disabled when empty.
    std::optional<double> tol;
};

struct PcgResult {
    std::vector<double> x;
    int iterations = 0;
    /// Quadratic loss 1/2 x^T A x - b^T x at the start and after every iteration.
    std::vector<double> loss_history;
    /// Milliseconds since the start of the solve at each loss_history entry.
    std::vector<double> wall_ms;
    double residual_norm = 0.0;
};

namespace detail {

inline double quadratic_loss(std::span<const double> x, std::span<const double> r, std::span<const double> b)
{
    // 1/2 x^T A x - b^T x = -1/2 x^T (r + b) with r = b - A x.
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * (r[i] + b[i]);
    return -0.5 * acc;
}

}  // namespace detail

/// Preconditioned conjugate gradients (Shewchuk, section B3). Runs exactly `n_iters` iterations
/// unless the optional tolerance is met first or progress stops (zero residual or no positive
/// curvature left).
template <VectorOperator ApplyA, VectorOperator Precond>
PcgResult pcg(const ApplyA& apply, std::span<const double> b, std::vector<double> x0, const Precond& precond,
              const PcgOptions& opts = {})
{
    if (opts.n_iters < 1) throw ParameterError("pcg: n_iters must be >= 1");
    detail::require_size(x0.size(), b.size(), "pcg initial state");

    const auto start = std::chrono::steady_clock::now();
    auto stamp = [&start] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };
    PcgResult res;
    res.x = std::move(x0);
    auto& x = res.x;
    const std::size_t n = b.size();

    std::vector<double> r = apply(std::span<const double>(x));
    detail::require_size(r.size(), n, "pcg operator output");
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    std::vector<double> d = precond(std::span<const double>(r));
    double delta_new = dot(r, d);
    res.loss_history.push_back(detail::quadratic_loss(x, r, b));
    res.wall_ms.push_back(stamp());

    const double b_norm = norm2(b);
    auto converged = [&] {
        if (delta_new == 0.0) return true;
        return opts.tol && norm2(r) <= *opts.tol * b_norm;
    };

    for (int it = 0; it < opts.n_iters && !converged(); ++it) {
        const std::vector<double> q = apply(std::span<const double>(d));
        const double dq = dot(d, q);
        if (!std::isfinite(dq)) {
            throw NumericalError("pcg: non-finite curvature at iteration " + std::to_string(it));
        }
        // A is positive semidefinite, so non-positive curvature only comes from roundoff once the
        // residual has stagnated, or from an exact null direction. Either way, keep the iterate.
        if (!(dq > 0.0)) break;
        const double alpha = delta_new / dq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        const std::vector<double> s = precond(std::span<const double>(r));
        const double delta_old = delta_new;
        delta_new = dot(r, s);
        if (!std::isfinite(delta_new)) {
            throw NumericalError("pcg: non-finite residual at iteration " + std::to_string(it));
        }
        const double beta = delta_new / delta_old;
        for (std::size_t i = 0; i < n; ++i) d[i] = s[i] + beta * d[i];
        res.iterations = it + 1;
        res.loss_history.push_back(detail::quadratic_loss(x, r, b));
        res.wall_ms.push_back(stamp());
    }
    res.residual_norm = norm2(r);
    return res;
}

}  // namespace bsolve
