#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "bsolve/error.hpp"

namespace bsolve {

/// Column-major dense matrix. Columns are contiguous so that each right-hand side of a
/// multi-channel system can be handed to the solver as a span.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[j * rows + i]; }
    double operator()(std::size_t i, std::size_t j) const { return data[j * rows + i]; }

    std::span<double> col(std::size_t j) { return {data.data() + j * rows, rows}; }
    std::span<const double> col(std::size_t j) const { return {data.data() + j * rows, rows}; }
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
    detail::require_size(b.size(), a.size(), "dot");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace bsolve
