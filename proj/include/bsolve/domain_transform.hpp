#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bsolve/error.hpp"
#include "bsolve/raster.hpp"

namespace bsolve {

struct DTParams {
    double sigma_xy_prime = 16.0;
    double sigma_rgb_prime = 16.0;
    int n_passes = 3;

    void validate() const
    {
        if (!(sigma_xy_prime > 0.0) || !(sigma_rgb_prime > 0.0) || !std::isfinite(sigma_xy_prime) ||
            !std::isfinite(sigma_rgb_prime)) {
            throw ParameterError("DTParams: bandwidths must be positive and finite");
        }
        if (n_passes < 1) throw ParameterError("DTParams: n_passes must be >= 1");
    }
};

namespace detail {

// Domain-distance increments between horizontally (dx) and vertically (dy) adjacent pixels:
// 1 + (sxy / srgb) * sum_c |dI_c|. dx[y*w + x] links x-1 and x; dy[y*w + x] links y-1 and y.
struct DomainDistances {
    std::vector<double> dx;
    std::vector<double> dy;
};

inline DomainDistances domain_distances(const Raster& guide, const DTParams& p)
{
    const int w = guide.width, h = guide.height;
    const double ratio = p.sigma_xy_prime / p.sigma_rgb_prime;
    DomainDistances dd{std::vector<double>(guide.pixels(), 1.0), std::vector<double>(guide.pixels(), 1.0)};
    for (int c = 0; c < guide.channels; ++c) {
        auto g = guide.channel(c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (x > 0) dd.dx[i] += ratio * std::abs(static_cast<double>(g[i]) - g[i - 1]);
                if (y > 0) dd.dy[i] += ratio * std::abs(static_cast<double>(g[i]) - g[i - w]);
            }
        }
    }
    return dd;
}

// One causal + anticausal sweep along every line. `step` is the stride between consecutive
// samples of a line, `line_stride` the stride between lines.
inline void recursive_sweep(std::span<double> f, std::span<const double> feedback, int len, int lines, std::size_t step,
                            std::size_t line_stride)
{
    for (int l = 0; l < lines; ++l) {
        const std::size_t base = l * line_stride;
        for (int k = 1; k < len; ++k) {
            const std::size_t i = base + k * step;
            f[i] += feedback[i] * (f[i - step] - f[i]);
        }
        for (int k = len - 2; k >= 0; --k) {
            const std::size_t i = base + k * step;
            f[i] += feedback[i + step] * (f[i + step] - f[i]);
        }
    }
}

}  // namespace detail

/// Spatial scale of pass `i` (1-based) out of `n`, chosen so the passes compose to sigma_xy.
inline double dt_pass_sigma(double sigma_xy, int i, int n)
{
    return sigma_xy * std::sqrt(3.0) * std::pow(2.0, n - i) / std::sqrt(std::pow(4.0, n) - 1.0);
}

/// Recursive-filter domain transform: alternating horizontal and vertical first-order recursions
/// whose feedback decays with the accumulated domain distance of the guide. Output is a
/// normalized weighted average of the input.
inline std::vector<double> dt_filter(std::span<const double> signal, const Raster& guide, const DTParams& params)
{
    params.validate();
    detail::require_size(signal.size(), guide.pixels(), "dt_filter");
    const int w = guide.width, h = guide.height;
    const auto dd = detail::domain_distances(guide, params);

    std::vector<double> f(signal.begin(), signal.end());
    std::vector<double> vx(f.size()), vy(f.size());
    for (int pass = 1; pass <= params.n_passes; ++pass) {
        const double sigma_h = dt_pass_sigma(params.sigma_xy_prime, pass, params.n_passes);
        const double log_a = -std::sqrt(2.0) / sigma_h;
        for (std::size_t i = 0; i < f.size(); ++i) {
            vx[i] = std::exp(log_a * dd.dx[i]);
            vy[i] = std::exp(log_a * dd.dy[i]);
        }
        detail::recursive_sweep(f, vx, w, h, 1, static_cast<std::size_t>(w));
        detail::recursive_sweep(f, vy, h, w, static_cast<std::size_t>(w), 1);
    }
    return f;
}

inline Raster dt_filter(const Raster& signal, const Raster& guide, const DTParams& params)
{
    require_same_size(guide, signal, "dt_filter");
    Raster out(signal.width, signal.height, signal.channels);
    for (int c = 0; c < signal.channels; ++c) {
        auto ch = signal.channel(c);
        const std::vector<double> in(ch.begin(), ch.end());
        const auto res = dt_filter(in, guide, params);
        std::transform(res.begin(), res.end(), out.channel(c).begin(), [](double v) { return static_cast<float>(v); });
    }
    return out;
}

/// Local edge-aware variance DT(Z^2) - DT(Z)^2, clamped at zero.
inline std::vector<double> dt_variance(std::span<const double> z, const Raster& guide, const DTParams& params)
{
    std::vector<double> z2(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) z2[i] = z[i] * z[i];
    const auto mean = dt_filter(z, guide, params);
    const auto mean_sq = dt_filter(z2, guide, params);
    std::vector<double> v(z.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, mean_sq[i] - mean[i] * mean[i]);
    return v;
}

}  // namespace bsolve
