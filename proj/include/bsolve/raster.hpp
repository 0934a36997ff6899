#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bsolve/error.hpp"

namespace bsolve {

/// Planar float image: channel c occupies values[c*width*height, (c+1)*width*height).
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> values;

    Raster() = default;
    Raster(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c), values(static_cast<std::size_t>(w) * h * c, fill)
    {
        if (w <= 0 || h <= 0 || c <= 0) {
            throw DimensionError("Raster: dimensions must be positive");
        }
    }

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    bool empty() const { return values.empty(); }

    std::span<float> channel(int c) { return {values.data() + c * pixels(), pixels()}; }
    std::span<const float> channel(int c) const { return {values.data() + c * pixels(), pixels()}; }

    float& at(int x, int y, int c = 0) { return values[c * pixels() + static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y, int c = 0) const
    {
        return values[c * pixels() + static_cast<std::size_t>(y) * width + x];
    }

    bool same_size(const Raster& o) const { return width == o.width && height == o.height; }

    bool all_finite() const
    {
        return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
    }
};

/// Copies one channel out as a double-precision vector.
inline std::vector<double> channel_as_double(const Raster& r, int c = 0)
{
    auto ch = r.channel(c);
    return {ch.begin(), ch.end()};
}

/// Builds a single-channel raster from a per-pixel vector.
inline Raster raster_from(std::span<const double> v, int width, int height)
{
    detail::require_size(v.size(), static_cast<std::size_t>(width) * height, "raster_from");
    Raster r(width, height, 1);
    std::transform(v.begin(), v.end(), r.values.begin(), [](double x) { return static_cast<float>(x); });
    return r;
}

inline void require_same_size(const Raster& a, const Raster& b, const std::string& what)
{
    if (!a.same_size(b)) {
        throw DimensionError(what + ": size " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                             " does not match " + std::to_string(a.width) + "x" + std::to_string(a.height));
    }
}

}  // namespace bsolve
