#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "bsolve/error.hpp"
#include "bsolve/problem.hpp"
#include "bsolve/raster.hpp"

namespace bsolve {

// BT.601 full-range, chroma offset by 128 so that all channels live in [0, 255].

inline Raster rgb_to_yuv(const Raster& rgb)
{
    if (rgb.channels != 3) {
        throw DimensionError("rgb_to_yuv: expected 3 channels, got " + std::to_string(rgb.channels));
    }
    Raster out(rgb.width, rgb.height, 3);
    auto r = rgb.channel(0), g = rgb.channel(1), b = rgb.channel(2);
    auto y = out.channel(0), u = out.channel(1), v = out.channel(2);
    for (std::size_t i = 0; i < rgb.pixels(); ++i) {
        const double R = r[i], G = g[i], B = b[i];
        y[i] = static_cast<float>(0.299 * R + 0.587 * G + 0.114 * B);
        u[i] = static_cast<float>(-0.168735892 * R - 0.331264108 * G + 0.5 * B + 128.0);
        v[i] = static_cast<float>(0.5 * R - 0.418687589 * G - 0.081312411 * B + 128.0);
    }
    return out;
}

inline Raster yuv_to_rgb(const Raster& yuv)
{
    if (yuv.channels != 3) {
        throw DimensionError("yuv_to_rgb: expected 3 channels, got " + std::to_string(yuv.channels));
    }
    Raster out(yuv.width, yuv.height, 3);
    auto y = yuv.channel(0), u = yuv.channel(1), v = yuv.channel(2);
    auto r = out.channel(0), g = out.channel(1), b = out.channel(2);
    for (std::size_t i = 0; i < yuv.pixels(); ++i) {
        const double Y = y[i], U = u[i] - 128.0, V = v[i] - 128.0;
        r[i] = static_cast<float>(Y + 1.402 * V);
        g[i] = static_cast<float>(Y - 0.344136286 * U - 0.714136286 * V);
        b[i] = static_cast<float>(Y + 1.772 * U);
    }
    return out;
}

namespace detail {

// Catmull-Rom (a = -0.5) weights for fractional offset t in [0, 1).
inline std::array<double, 4> cubic_weights(double t)
{
    constexpr double a = -0.5;
    auto w = [](double x) {
        x = std::abs(x);
        if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
        if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
        return 0.0;
    };
    return {w(1.0 + t), w(t), w(1.0 - t), w(2.0 - t)};
}

// Resamples one axis of a row-major buffer holding `lines` independent lines of n_in samples.
inline void resample_axis(const std::vector<double>& src, std::vector<double>& dst, int n_in, int n_out,
                          int lines, bool along_x)
{
    const double scale = static_cast<double>(n_in) / n_out;
    for (int o = 0; o < n_out; ++o) {
        const double s = (o + 0.5) * scale - 0.5;
        const double fl = std::floor(s);
        const auto w = cubic_weights(s - fl);
        std::array<int, 4> idx{};
        for (int k = 0; k < 4; ++k) {
            idx[k] = std::clamp(static_cast<int>(fl) - 1 + k, 0, n_in - 1);
        }
        for (int l = 0; l < lines; ++l) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                const std::size_t si = along_x ? static_cast<std::size_t>(l) * n_in + idx[k]
                                               : static_cast<std::size_t>(idx[k]) * lines + l;
                acc += w[k] * src[si];
            }
            const std::size_t di = along_x ? static_cast<std::size_t>(l) * n_out + o
                                           : static_cast<std::size_t>(o) * lines + l;
            dst[di] = acc;
        }
    }
}

}  // namespace detail

/// Separable Catmull-Rom resize using pixel-center alignment and clamped borders.
inline Raster bicubic_resize(const Raster& in, int new_w, int new_h)
{
    if (new_w <= 0 || new_h <= 0) {
        throw ParameterError("bicubic_resize: target size must be positive");
    }
    if (new_w == in.width && new_h == in.height) {
        return in;
    }
    Raster out(new_w, new_h, in.channels);
    std::vector<double> src, tmp(static_cast<std::size_t>(new_w) * in.height), dst(out.pixels());
    for (int c = 0; c < in.channels; ++c) {
        auto ch = in.channel(c);
        src.assign(ch.begin(), ch.end());
        detail::resample_axis(src, tmp, in.width, new_w, in.height, true);
        detail::resample_axis(tmp, dst, in.height, new_h, new_w, false);
        std::transform(dst.begin(), dst.end(), out.channel(c).begin(),
                       [](double v) { return static_cast<float>(v); });
    }
    return out;
}

/// Smoothness weight for depth upsampling by `factor`: 4^(factor - 1/2).
inline double superres_lambda(int factor)
{
    if (factor < 2) throw ParameterError("superres_lambda: factor must be >= 2");
    return std::pow(4.0, factor - 0.5);
}

inline double superres_sigma(int factor) { return factor / 4.0; }

/// Bump value at offset (dx, dy), in high-resolution pixels, from a low-resolution sample centre.
inline double superres_bump(int factor, double dx, double dy)
{
    const double s = superres_sigma(factor);
    return std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
}

/// Tiled Gaussian bumps, one per low-resolution sample. Low-resolution pixel k is centred at
/// (k + 0.5) * factor - 0.5 in the output lattice, the same convention bicubic_resize uses.
inline std::vector<double> superres_confidence(int factor, int out_w, int out_h)
{
    if (factor < 2) throw ParameterError("superres_confidence: factor must be >= 2");
    if (out_w <= 0 || out_h <= 0) throw ParameterError("superres_confidence: size must be positive");
    auto offset = [factor](int p) {
        const double k = std::floor((p + 0.5) / factor);
        return p - ((k + 0.5) * factor - 0.5);
    };
    std::vector<double> c(static_cast<std::size_t>(out_w) * out_h);
    for (int y = 0; y < out_h; ++y) {
        const double dy = offset(y);
        for (int x = 0; x < out_w; ++x) {
            c[static_cast<std::size_t>(y) * out_w + x] = superres_bump(factor, offset(x), dy);
        }
    }
    return c;
}

struct DepthInterval {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Interval midpoint as target, exp(-(upper - lower)) as confidence.
inline Problem interval_to_target_confidence(const DepthInterval& interval)
{
    detail::require_size(interval.upper.size(), interval.lower.size(), "interval_to_target_confidence");
    Problem p;
    p.target.resize(interval.lower.size());
    p.confidence.resize(interval.lower.size());
    for (std::size_t i = 0; i < interval.lower.size(); ++i) {
        const double l = interval.lower[i], u = interval.upper[i];
        if (!(l <= u)) {
            throw ParameterError("interval_to_target_confidence: lower > upper at pixel " + std::to_string(i));
        }
        p.target[i] = 0.5 * (l + u);
        p.confidence[i] = std::exp(l - u);
    }
    return p;
}

}  // namespace bsolve
