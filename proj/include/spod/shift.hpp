#pragma once

// Transport-compensating transformation T^Δ. Applied to a frame field it
// produces the lab-frame view: column j of T^Δ[f] is f(x - Δ(t_j), t_j),
// i.e. the content of the frame is displaced by Δ(t_j). T^{-Δ} aligns lab
// data with the frame.

#include "spod/types.hpp"

#include <array>
#include <cmath>
#include <string>

namespace spod {

enum class ShiftMode { interpolated, exact };

/// Value used when an interpolation stencil leaves a non-periodic grid.
struct EdgePolicy {
    enum class Kind { replicate, constant };
    Kind kind = Kind::replicate;
    double value = 0.0;

    static EdgePolicy replicate() { return {Kind::replicate, 0.0}; }
    static EdgePolicy constant(double v) { return {Kind::constant, v}; }
};

struct ShiftConfig {
    int order = 2;  ///< Lagrange stencil size p (even, >= 2)
    ShiftMode mode = ShiftMode::interpolated;
    EdgePolicy edge = EdgePolicy::replicate();

    static constexpr int max_order = 16;

    ShiftConfig with_edge(EdgePolicy e) const {
        ShiftConfig c = *this;
        c.edge = e;
        return c;
    }

    /// Extra cells a stencil reaches beyond ceil(|shift| / dx).
    Index stencil_reach() const noexcept {
        return mode == ShiftMode::exact ? 0 : order / 2 - 1;
    }

    void validate() const {
        if (order < 2 || order % 2 != 0 || order > max_order)
            throw DataError("interpolation order must be even and in [2, " +
                            std::to_string(max_order) + "]");
    }
};

namespace detail {

// Tolerance (in cells) under which a shift counts as a whole number of cells.
inline constexpr double integer_shift_tol = 1e-9;

/// Lagrange weights for evaluating at `theta` in [0, 1) from nodes at offsets
/// -p/2 + 1, ..., p/2.
inline void lagrange_weights(double theta, int order, double* weights) {
    const int first = -order / 2 + 1;
    for (int a = 0; a < order; ++a) {
        const double xa = first + a;
        double w = 1.0;
        for (int b = 0; b < order; ++b) {
            if (b == a)
                continue;
            const double xb = first + b;
            w *= (theta - xb) / (xa - xb);
        }
        weights[a] = w;
    }
}

inline Index wrap(Index i, Index size) {
    const Index r = i % size;
    return r < 0 ? r + size : r;
}

// Value at row `i` of column `col`, honouring periodicity and the edge policy.
template <class Col>
double sample(const Col& col, Index i, bool periodic, const EdgePolicy& edge) {
    const Index size = col.size();
    if (i >= 0 && i < size)
        return col[i];
    if (periodic)
        return col[wrap(i, size)];
    if (edge.kind == EdgePolicy::Kind::constant)
        return edge.value;
    return col[i < 0 ? 0 : size - 1];
}

/// Shift of column j in cells, signed so that output(i) = input(i - cells).
inline double cells(const GridSpec& grid, const FramePath& path, int sign,
                    Index j) {
    return static_cast<double>(sign) * path.shifts[j] / grid.dx;
}

}  // namespace detail

/// Apply T^{sign·Δ} to a field given as a matrix on `grid`.
inline Matrix shift_apply(const Matrix& f, const GridSpec& grid,
                          const FramePath& path, int sign,
                          const ShiftConfig& cfg) {
    cfg.validate();
    if (sign != 1 && sign != -1)
        throw DataError("shift sign must be +1 or -1");
    if (f.rows() != grid.rows() || f.cols() != grid.n)
        throw DataError("shift input does not match its grid");
    path.validate(grid.n);
    if (!f.allFinite())
        throw DataError("shift input contains non-finite values");

    const Index rows = f.rows();
    Matrix out(rows, f.cols());
    std::array<double, ShiftConfig::max_order> weights{};

    for (Index j = 0; j < f.cols(); ++j) {
        const auto in = f.col(j);
        auto dst = out.col(j);
        const double c = detail::cells(grid, path, sign, j);
        const double whole = std::round(c);
        const bool integral =
            std::abs(c - whole) <= detail::integer_shift_tol * std::max(1.0, std::abs(c));

        if (cfg.mode == ShiftMode::exact && !integral)
            throw DataError("exact shift mode: shift at time index " +
                            std::to_string(j) + " is " + std::to_string(c) +
                            " cells, not a whole number");

        if (integral) {
            const auto s = static_cast<Index>(whole);
            for (Index i = 0; i < rows; ++i)
                dst[i] = detail::sample(in, i - s, grid.periodic, cfg.edge);
            continue;
        }

        // Evaluate at fractional row i - c = (i + base) + theta.
        const double pos = -c;
        const double fl = std::floor(pos);
        const auto base = static_cast<Index>(fl);
        const double theta = pos - fl;
        detail::lagrange_weights(theta, cfg.order, weights.data());
        const Index first = -cfg.order / 2 + 1;
        for (Index i = 0; i < rows; ++i) {
            double acc = 0.0;
            for (int a = 0; a < cfg.order; ++a)
                acc += weights[a] * detail::sample(in, i + base + first + a,
                                                   grid.periodic, cfg.edge);
            dst[i] = acc;
        }
    }
    return out;
}

inline SnapshotField shift_apply(const SnapshotField& f, const FramePath& path,
                                 int sign, const ShiftConfig& cfg) {
    return SnapshotField(f.grid, shift_apply(f.values, f.grid, path, sign, cfg));
}

/// ||T^{-Δ} T^{Δ} f - f||_F / ||f||_F; zero for a zero field.
inline double shift_roundtrip_error(const Matrix& f, const GridSpec& grid,
                                    const FramePath& path,
                                    const ShiftConfig& cfg) {
    const Matrix there = shift_apply(f, grid, path, +1, cfg);
    const Matrix back = shift_apply(there, grid, path, -1, cfg);
    const double fn = f.norm();
    if (fn == 0.0)
        return 0.0;
    return (back - f).norm() / fn;
}

inline double shift_roundtrip_error(const SnapshotField& f,
                                    const FramePath& path,
                                    const ShiftConfig& cfg) {
    return shift_roundtrip_error(f.values, f.grid, path, cfg);
}

/// True when every shift of `path` is a whole number of cells.
inline bool has_integer_shifts(const FramePath& path, const GridSpec& grid) {
    for (Index j = 0; j < path.size(); ++j) {
        const double c = path.shifts[j] / grid.dx;
        if (std::abs(c - std::round(c)) >
            detail::integer_shift_tol * std::max(1.0, std::abs(c)))
            return false;
    }
    return true;
}

}  // namespace spod
