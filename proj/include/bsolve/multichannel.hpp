#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "bsolve/matrix.hpp"
#include "bsolve/parallel.hpp"
#include "bsolve/solver.hpp"

namespace bsolve {

struct PivotedQR {
    Matrix q;                       ///< rows x rank, orthonormal columns
    Matrix r;                       ///< rank x cols, upper trapezoidal in pivot order
    std::vector<std::size_t> perm;  ///< column j of r corresponds to column perm[j] of the input
    std::size_t rank = 0;
};

/// Householder QR with column pivoting: B P = Q R. The pivot is the remaining column of largest
/// norm; ties go to the lowest original column index. Stops when every remaining column is zero.
inline PivotedQR pivoted_qr(const Matrix& b)
{
    const std::size_t m = b.rows, n = b.cols;
    Matrix a = b;
    PivotedQR out;
    out.perm.resize(n);
    std::iota(out.perm.begin(), out.perm.end(), 0);
    std::vector<std::vector<double>> reflectors;

    auto tail_norm2 = [&](std::size_t col, std::size_t from) {
        double s = 0.0;
        for (std::size_t i = from; i < m; ++i) s += a(i, col) * a(i, col);
        return s;
    };

    std::size_t k = 0;
    for (; k < std::min(m, n); ++k) {
        std::size_t piv = k;
        double best = tail_norm2(k, k);
        for (std::size_t j = k + 1; j < n; ++j) {
            const double nj = tail_norm2(j, k);
            if (nj > best || (nj == best && out.perm[j] < out.perm[piv])) {
                best = nj;
                piv = j;
            }
        }
        if (best == 0.0) break;
        if (piv != k) {
            std::swap_ranges(a.col(k).begin(), a.col(k).end(), a.col(piv).begin());
            std::swap(out.perm[k], out.perm[piv]);
        }
        // Reflector v with H = I - 2 v v^T / (v^T v) mapping a(k:, k) to (-sign * norm) e_k.
        const double alpha = std::sqrt(best);
        const double sign = a(k, k) >= 0.0 ? 1.0 : -1.0;
        std::vector<double> v(m - k);
        for (std::size_t i = k; i < m; ++i) v[i - k] = a(i, k);
        v[0] += sign * alpha;
        const double vtv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i - k] * a(i, j);
            s *= 2.0 / vtv;
            for (std::size_t i = k; i < m; ++i) a(i, j) -= s * v[i - k];
        }
        for (std::size_t i = k + 1; i < m; ++i) a(i, k) = 0.0;
        reflectors.push_back(std::move(v));
    }
    out.rank = k;

    out.r = Matrix(k, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < std::min(k, j + 1); ++i) out.r(i, j) = a(i, j);
    }
    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of the identity.
    out.q = Matrix(m, k);
    for (std::size_t j = 0; j < k; ++j) out.q(j, j) = 1.0;
    for (std::size_t h = k; h-- > 0;) {
        const auto& v = reflectors[h];
        const double vtv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t i = h; i < m; ++i) s += v[i - h] * out.q(i, j);
            s *= 2.0 / vtv;
            for (std::size_t i = h; i < m; ++i) out.q(i, j) -= s * v[i - h];
        }
    }
    return out;
}

struct ReducedRHS {
    Matrix q_tilde;  ///< nverts x t
    Matrix r_tilde;  ///< t x nchannels
    std::size_t t = 0;
    double epsilon = 0.0;
    /// Squared Frobenius mass of B not represented by q_tilde * r_tilde, as a fraction of the total.
    double dropped_mass_fraction = 0.0;
};

/// Low-rank reduction of a multi-column right-hand side. Rows of R P^T are ordered by
/// non-increasing squared norm ("mass") and the smallest prefix holding at least (1 - epsilon) of
/// the total mass is kept.
inline ReducedRHS reduce_rhs(const Matrix& b, double epsilon)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ParameterError("reduce_rhs: epsilon must be in [0, 1)");
    const PivotedQR qr = pivoted_qr(b);

    // R' = R P^T: undo the column pivoting.
    Matrix rp(qr.rank, b.cols);
    for (std::size_t j = 0; j < b.cols; ++j) {
        for (std::size_t i = 0; i < qr.rank; ++i) rp(i, qr.perm[j]) = qr.r(i, j);
    }
    std::vector<double> mass(qr.rank, 0.0);
    for (std::size_t j = 0; j < b.cols; ++j) {
        for (std::size_t i = 0; i < qr.rank; ++i) mass[i] += rp(i, j) * rp(i, j);
    }
    std::vector<std::size_t> order(qr.rank);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return mass[x] > mass[y]; });

    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    std::size_t t = 0;
    double kept = 0.0;
    while (t < order.size() && kept < (1.0 - epsilon) * total) kept += mass[order[t++]];

    ReducedRHS out;
    out.epsilon = epsilon;
    out.t = t;
    out.dropped_mass_fraction = total > 0.0 ? std::max(0.0, (total - kept) / total) : 0.0;
    out.q_tilde = Matrix(b.rows, t);
    out.r_tilde = Matrix(t, b.cols);
    for (std::size_t k = 0; k < t; ++k) {
        std::copy(qr.q.col(order[k]).begin(), qr.q.col(order[k]).end(), out.q_tilde.col(k).begin());
        for (std::size_t j = 0; j < b.cols; ++j) out.r_tilde(k, j) = rp(order[k], j);
    }
    return out;
}

struct MultiSolveResult {
    Matrix y;  ///< nverts x nchannels
    std::optional<ReducedRHS> reduced;
    /// Number of linear solves run (nchannels, or t after reduction).
    std::size_t solves = 0;
    /// Loss and elapsed time per PCG iteration for each solved column.
    std::vector<std::vector<double>> loss_histories;
    std::vector<std::vector<double>> wall_ms;
};

/// Solves A Y = B sharing A and its preconditioner across columns. With epsilon > 0 the columns
/// are first reduced by pivoted QR and Y = (A^-1 Q~) R~. Columns may be solved on `threads`
/// workers; results do not depend on the worker count.
inline MultiSolveResult solve_multi(const BilateralSystem& sys, const Matrix& b, double epsilon,
                                    const SolverConfig& cfg, int threads = 1)
{
    cfg.validate();
    detail::require_size(b.rows, sys.size(), "solve_multi");
    const LinearOperator precond = make_preconditioner(sys, cfg);

    MultiSolveResult out;
    auto solve_columns = [&](const Matrix& rhs) {
        Matrix y(rhs.rows, rhs.cols);
        out.loss_histories.assign(rhs.cols, {});
        out.wall_ms.assign(rhs.cols, {});
        parallel_for(rhs.cols, threads, [&](std::size_t j) {
            PcgResult r = solve_system(sys, rhs.col(j), cfg, precond);
            std::copy(r.x.begin(), r.x.end(), y.col(j).begin());
            out.loss_histories[j] = std::move(r.loss_history);
            out.wall_ms[j] = std::move(r.wall_ms);
        });
        return y;
    };

    if (epsilon == 0.0) {
        out.y = solve_columns(b);
        out.solves = b.cols;
        return out;
    }
    ReducedRHS red = reduce_rhs(b, epsilon);
    const Matrix yq = solve_columns(red.q_tilde);
    out.y = Matrix(b.rows, b.cols);
    for (std::size_t j = 0; j < b.cols; ++j) {
        for (std::size_t k = 0; k < red.t; ++k) {
            const double w = red.r_tilde(k, j);
            if (w == 0.0) continue;
            for (std::size_t i = 0; i < b.rows; ++i) out.y(i, j) += yq(i, k) * w;
        }
    }
    out.solves = red.t;
    out.reduced = std::move(red);
    return out;
}

}  // namespace bsolve
