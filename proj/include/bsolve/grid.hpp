#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bsolve/error.hpp"
#include "bsolve/imaging.hpp"
#include "bsolve/matrix.hpp"
#include "bsolve/raster.hpp"

namespace bsolve {

/// Reference image in (l, u, v) form. Grayscale references leave the chroma planes empty and
/// produce a three-dimensional (x, y, l) grid.
struct ReferenceImage {
    int width = 0;
    int height = 0;
    std::vector<float> luma;
    std::vector<float> chroma_u;
    std::vector<float> chroma_v;

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    bool has_chroma() const { return !chroma_u.empty(); }
    int dims() const { return has_chroma() ? 5 : 3; }

    /// 3-channel rasters are taken as RGB and converted to YUV; 1-channel rasters are luma.
    static ReferenceImage from_raster(const Raster& r)
    {
        ReferenceImage ref;
        ref.width = r.width;
        ref.height = r.height;
        if (r.channels == 1) {
            auto l = r.channel(0);
            ref.luma.assign(l.begin(), l.end());
        } else if (r.channels == 3) {
            const Raster yuv = rgb_to_yuv(r);
            auto l = yuv.channel(0), u = yuv.channel(1), v = yuv.channel(2);
            ref.luma.assign(l.begin(), l.end());
            ref.chroma_u.assign(u.begin(), u.end());
            ref.chroma_v.assign(v.begin(), v.end());
        } else {
            throw DimensionError("ReferenceImage: expected 1 or 3 channels, got " + std::to_string(r.channels));
        }
        ref.validate();
        return ref;
    }

    void validate() const
    {
        if (width <= 0 || height <= 0) throw DimensionError("ReferenceImage: image is empty");
        detail::require_size(luma.size(), pixels(), "ReferenceImage luma");
        if (has_chroma() || !chroma_v.empty()) {
            detail::require_size(chroma_u.size(), pixels(), "ReferenceImage chroma_u");
            detail::require_size(chroma_v.size(), pixels(), "ReferenceImage chroma_v");
        }
        auto finite = [](const std::vector<float>& v) {
            return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
        };
        if (!finite(luma) || !finite(chroma_u) || !finite(chroma_v)) {
            throw NumericalError("ReferenceImage: non-finite pixel value");
        }
    }
};

struct GridParams {
    double sigma_xy = 8.0;
    double sigma_l = 4.0;
    double sigma_uv = 4.0;

    void validate() const
    {
        for (double s : {sigma_xy, sigma_l, sigma_uv}) {
            if (!(s > 0.0) || !std::isfinite(s)) {
                throw ParameterError("GridParams: sigmas must be positive and finite");
            }
        }
    }
};

/// Simplified bilateral grid: every pixel is assigned to exactly one occupied cell, so the splat
/// matrix S has one nonzero per column and S S^T is the diagonal of splat counts.
struct BilateralGrid {
    static constexpr std::int32_t kNoNeighbor = -1;

    int width = 0;
    int height = 0;
    int dims = 0;
    std::int32_t nverts = 0;
    std::vector<std::int32_t> pixel_to_vertex;
    /// nverts x dims, row-major.
    std::vector<std::int32_t> vertex_coords;
    /// nverts x dims x 2; entry [v][d][0] is the -1 neighbour along d, [v][d][1] the +1 neighbour.
    std::vector<std::int32_t> neighbors;
    /// Pixel count per vertex (integral values).
    std::vector<double> splat_counts;

    std::size_t npixels() const { return pixel_to_vertex.size(); }

    std::span<const std::int32_t> coords(std::int32_t v) const
    {
        return {vertex_coords.data() + static_cast<std::size_t>(v) * dims, static_cast<std::size_t>(dims)};
    }

    std::int32_t neighbor(std::int32_t v, int d, bool plus) const
    {
        return neighbors[(static_cast<std::size_t>(v) * dims + d) * 2 + (plus ? 1 : 0)];
    }
};

namespace detail {

/// Packs integer lattice coordinates into one 64-bit key after offsetting by the per-dimension
/// minimum. Shared by the grid and the pyramid builder.
class LatticeKey {
public:
    LatticeKey(std::span<const std::int32_t> lo, std::span<const std::int32_t> hi)
        : dims_(static_cast<int>(lo.size()))
    {
        int shift = 0;
        for (int d = 0; d < dims_; ++d) {
            lo_[d] = lo[d];
            hi_[d] = hi[d];
            const auto extent = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi[d]) - lo[d]) + 1;
            shift_[d] = shift;
            shift += std::max(1, static_cast<int>(std::bit_width(extent)));
        }
        if (shift > 64) {
            throw ParameterError("bilateral grid too fine: lattice does not fit a 64-bit key "
                                 "(increase the sigmas)");
        }
    }

    bool in_range(int d, std::int64_t c) const { return c >= lo_[d] && c <= hi_[d]; }

    std::uint64_t operator()(const std::int32_t* c) const
    {
        std::uint64_t key = 0;
        for (int d = 0; d < dims_; ++d) {
            key |= static_cast<std::uint64_t>(c[d] - lo_[d]) << shift_[d];
        }
        return key;
    }

private:
    int dims_;
    std::array<std::int32_t, 5> lo_{}, hi_{};
    std::array<int, 5> shift_{};
};

/// Deduplicates a list of points (npts x dims) in first-visit order. Returns the point-to-vertex
/// map and fills `unique` with the coordinates of each vertex.
inline std::vector<std::int32_t> coalesce(std::span<const std::int32_t> pts, int dims,
                                          std::vector<std::int32_t>& unique,
                                          std::unordered_map<std::uint64_t, std::int32_t>& index,
                                          LatticeKey& key)
{
    const std::size_t npts = pts.size() / dims;
    std::vector<std::int32_t> assign(npts);
    unique.clear();
    index.clear();
    for (std::size_t i = 0; i < npts; ++i) {
        const std::int32_t* c = pts.data() + i * dims;
        auto [it, inserted] = index.try_emplace(key(c), static_cast<std::int32_t>(index.size()));
        if (inserted) unique.insert(unique.end(), c, c + dims);
        assign[i] = it->second;
    }
    return assign;
}

inline std::vector<std::int32_t> link_neighbors(const std::vector<std::int32_t>& coords, int dims,
                                                const std::unordered_map<std::uint64_t, std::int32_t>& index,
                                                const LatticeKey& key)
{
    const std::size_t nverts = coords.size() / dims;
    std::vector<std::int32_t> nbr(nverts * dims * 2, BilateralGrid::kNoNeighbor);
    std::array<std::int32_t, 5> probe{};
    for (std::size_t v = 0; v < nverts; ++v) {
        const std::int32_t* c = coords.data() + v * dims;
        for (int d = 0; d < dims; ++d) {
            std::copy(c, c + dims, probe.begin());
            for (int dir = 0; dir < 2; ++dir) {
                const std::int64_t moved = static_cast<std::int64_t>(c[d]) + (dir ? 1 : -1);
                if (!key.in_range(d, moved)) continue;
                probe[d] = static_cast<std::int32_t>(moved);
                if (auto it = index.find(key(probe.data())); it != index.end()) {
                    nbr[(v * dims + d) * 2 + dir] = it->second;
                }
            }
        }
    }
    return nbr;
}

}  // namespace detail

/// Quantizes every pixel to floor(x/sxy), floor(y/sxy), floor(l/sl) [, floor(u/suv), floor(v/suv)]
/// and keeps the occupied cells. Vertices are numbered in first-visit order of a row-major scan.
inline BilateralGrid build_grid(const ReferenceImage& ref, const GridParams& params)
{
    params.validate();
    ref.validate();
    const int dims = ref.dims();
    const std::size_t npix = ref.pixels();

    std::vector<std::int32_t> pts(npix * dims);
    for (int y = 0; y < ref.height; ++y) {
        for (int x = 0; x < ref.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * ref.width + x;
            std::int32_t* c = pts.data() + i * dims;
            c[0] = static_cast<std::int32_t>(std::floor(x / params.sigma_xy));
            c[1] = static_cast<std::int32_t>(std::floor(y / params.sigma_xy));
            c[2] = static_cast<std::int32_t>(std::floor(ref.luma[i] / params.sigma_l));
            if (dims == 5) {
                c[3] = static_cast<std::int32_t>(std::floor(ref.chroma_u[i] / params.sigma_uv));
                c[4] = static_cast<std::int32_t>(std::floor(ref.chroma_v[i] / params.sigma_uv));
            }
        }
    }

    std::array<std::int32_t, 5> lo, hi;
    lo.fill(INT32_MAX);
    hi.fill(INT32_MIN);
    for (std::size_t i = 0; i < npix; ++i) {
        for (int d = 0; d < dims; ++d) {
            lo[d] = std::min(lo[d], pts[i * dims + d]);
            hi[d] = std::max(hi[d], pts[i * dims + d]);
        }
    }
    detail::LatticeKey key({lo.data(), static_cast<std::size_t>(dims)}, {hi.data(), static_cast<std::size_t>(dims)});

    BilateralGrid g;
    g.width = ref.width;
    g.height = ref.height;
    g.dims = dims;
    std::unordered_map<std::uint64_t, std::int32_t> index;
    index.reserve(std::min<std::size_t>(npix, 1 << 20));
    g.pixel_to_vertex = detail::coalesce(pts, dims, g.vertex_coords, index, key);
    g.nverts = static_cast<std::int32_t>(index.size());
    g.splat_counts.assign(g.nverts, 0.0);
    for (auto v : g.pixel_to_vertex) g.splat_counts[v] += 1.0;
    g.neighbors = detail::link_neighbors(g.vertex_coords, dims, index, key);
    return g;
}

/// S * values: scatter-add each pixel into its vertex.
inline std::vector<double> splat(const BilateralGrid& g, std::span<const double> pixel_values)
{
    detail::require_size(pixel_values.size(), g.npixels(), "splat");
    std::vector<double> out(g.nverts, 0.0);
    for (std::size_t i = 0; i < pixel_values.size(); ++i) {
        out[g.pixel_to_vertex[i]] += pixel_values[i];
    }
    return out;
}

/// S^T * values: every pixel reads its vertex.
inline std::vector<double> slice(const BilateralGrid& g, std::span<const double> vertex_values)
{
    detail::require_size(vertex_values.size(), static_cast<std::size_t>(g.nverts), "slice");
    std::vector<double> out(g.npixels());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = vertex_values[g.pixel_to_vertex[i]];
    }
    return out;
}

/// Diagonal entry of the blur matrix: the centre tap of D summed [1, 2, 1] kernels.
inline double blur_diagonal(const BilateralGrid& g) { return 2.0 * g.dims; }

/// B * values, where B is the sum over dimensions of a [1, 2, 1] kernel along that dimension.
/// Absent neighbours contribute zero.
inline std::vector<double> blur(const BilateralGrid& g, std::span<const double> v)
{
    detail::require_size(v.size(), static_cast<std::size_t>(g.nverts), "blur");
    std::vector<double> out(g.nverts);
    const double centre = blur_diagonal(g);
    const std::size_t stride = static_cast<std::size_t>(g.dims) * 2;
    for (std::int32_t i = 0; i < g.nverts; ++i) {
        double acc = centre * v[i];
        const std::int32_t* nb = g.neighbors.data() + i * stride;
        for (std::size_t k = 0; k < stride; ++k) {
            if (nb[k] != BilateralGrid::kNoNeighbor) acc += v[nb[k]];
        }
        out[i] = acc;
    }
    return out;
}

struct Bistochastization {
    std::vector<double> n;
    /// max |n o (B n) - m| / max(m) after the last update.
    double residual = 0.0;
    int iterations_used = 0;
};

/// Finds n such that n o (B n) = m by the multiplicative update n <- sqrt(n o m / (B n)), from n = 1.
inline Bistochastization bistochastize(const BilateralGrid& g, int max_iters = 64, double tol = 1e-10)
{
    if (max_iters < 1) throw ParameterError("bistochastize: max_iters must be >= 1");
    const auto& m = g.splat_counts;
    const double m_max = *std::max_element(m.begin(), m.end());

    Bistochastization out;
    out.n.assign(g.nverts, 1.0);
    std::vector<double> bn = blur(g, out.n);
    for (int it = 0; it < max_iters; ++it) {
        for (std::int32_t i = 0; i < g.nverts; ++i) {
            if (!(bn[i] > 0.0)) {
                throw NumericalError("bistochastize: non-positive blurred weight at vertex " + std::to_string(i));
            }
            out.n[i] = std::sqrt(out.n[i] * m[i] / bn[i]);
        }
        bn = blur(g, out.n);
        double worst = 0.0;
        for (std::int32_t i = 0; i < g.nverts; ++i) {
            worst = std::max(worst, std::abs(out.n[i] * bn[i] - m[i]));
        }
        out.residual = worst / m_max;
        out.iterations_used = it + 1;
        if (out.residual <= tol) break;
    }
    return out;
}

/// Materializes W_hat = S^T Dm^-1 Dn B Dn Dm^-1 S. Test oracle only; refuses images above `cap`
/// pixels.
inline Matrix dense_what(const BilateralGrid& g, const Bistochastization& bs, std::size_t cap = 4096)
{
    const std::size_t np = g.npixels();
    if (np > cap) {
        throw ParameterError("dense_what: " + std::to_string(np) + " pixels exceeds cap " + std::to_string(cap));
    }
    detail::require_size(bs.n.size(), static_cast<std::size_t>(g.nverts), "dense_what");
    // Vertex-space core C = Dm^-1 Dn B Dn Dm^-1, then W_hat(i, j) = C(v(i), v(j)).
    Matrix core(g.nverts, g.nverts);
    const double centre = blur_diagonal(g);
    for (std::int32_t a = 0; a < g.nverts; ++a) {
        const double sa = bs.n[a] / g.splat_counts[a];
        core(a, a) += sa * centre * sa;
        for (int k = 0; k < g.dims * 2; ++k) {
            const std::int32_t b = g.neighbors[static_cast<std::size_t>(a) * g.dims * 2 + k];
            if (b == BilateralGrid::kNoNeighbor) continue;
            core(a, b) += sa * (bs.n[b] / g.splat_counts[b]);
        }
    }
    Matrix w(np, np);
    for (std::size_t j = 0; j < np; ++j) {
        for (std::size_t i = 0; i < np; ++i) {
            w(i, j) = core(g.pixel_to_vertex[i], g.pixel_to_vertex[j]);
        }
    }
    return w;
}

}  // namespace bsolve
