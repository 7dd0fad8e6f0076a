#pragma once

#include "spod/lowrank.hpp"
#include "spod/shift.hpp"
#include "spod/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace spod {

/// How the rows added by extend_domain are initialised.
struct ExtensionFill {
    enum class Kind { replicate, constant };
    Kind kind = Kind::replicate;
    double value = 0.0;

    static ExtensionFill replicate() { return {Kind::replicate, 0.0}; }
    static ExtensionFill constant(double v) { return {Kind::constant, v}; }

    /// Matching edge policy for stencils that leave the grid.
    EdgePolicy edge_policy() const {
        return kind == Kind::constant ? EdgePolicy::constant(value)
                                      : EdgePolicy::replicate();
    }
};

enum class ReconstructMode { full, lowrank };

/// Extension sizes (left, right) that keep every stencil used to map frame
/// data into the original domain on the grid.
inline std::pair<Index, Index> extension_size(std::span<const FramePath> paths,
                                              const GridSpec& grid,
                                              const ShiftConfig& cfg) {
    double max_pos = 0.0;
    double max_neg = 0.0;
    for (const auto& p : paths) {
        p.validate(grid.n);
        max_pos = std::max(max_pos, p.shifts.maxCoeff());
        max_neg = std::max(max_neg, -p.shifts.minCoeff());
    }
    auto cells = [&](double shift) -> Index {
        if (shift <= 0.0)
            return 0;
        const double c = shift / grid.dx;
        const double whole = std::round(c);
        const bool integral =
            std::abs(c - whole) <= detail::integer_shift_tol * std::max(1.0, c);
        const auto base = static_cast<Index>(integral ? whole : std::ceil(c));
        return base + (integral ? 0 : cfg.stencil_reach());
    };
    return {cells(max_pos), cells(max_neg)};
}

/// Embed q in a grid large enough for all paths. Rows of the original domain
/// are copied bit for bit; added rows follow `fill`. `margin` adds extra rows
/// on both sides.
inline SnapshotField extend_domain(const SnapshotField& q,
                                   std::span<const FramePath> paths,
                                   ExtensionFill fill = ExtensionFill::replicate(),
                                   const ShiftConfig& cfg = {},
                                   Index margin = 0) {
    q.validate();
    if (q.grid.extended())
        throw DataError("extend_domain expects a field on the original grid");
    if (margin < 0)
        throw DataError("extension margin must be non-negative");
    for (const auto& p : paths)
        p.validate(q.grid.n);

    if (q.grid.periodic) {
        if (margin > 0)
            throw DataError("periodic grids cannot be extended");
        return q;
    }

    auto [left, right] = extension_size(paths, q.grid, cfg);
    left += margin;
    right += margin;

    GridSpec g = q.grid;
    g.ext_left = left;
    g.ext_right = right;
    Matrix v(g.rows(), g.n);
    v.middleRows(left, g.m) = q.values;
    if (fill.kind == ExtensionFill::Kind::constant) {
        v.topRows(left).setConstant(fill.value);
        v.bottomRows(right).setConstant(fill.value);
    } else {
        v.topRows(left) = q.values.row(0).replicate(left, 1);
        v.bottomRows(right) = q.values.row(g.m - 1).replicate(right, 1);
    }
    return SnapshotField(g, std::move(v));
}

namespace detail {

inline void check_paths(std::span<const FramePath> paths, const GridSpec& grid) {
    if (paths.empty())
        throw DataError("at least one frame path is required");
    for (const auto& p : paths)
        p.validate(grid.n);
}

// Masked lab data is zero outside the original domain, including off-grid.
inline ShiftConfig masked(const ShiftConfig& cfg) {
    return cfg.with_edge(EdgePolicy::constant(0.0));
}

}  // namespace detail

/// Sum over frames of T^{Δ^k}[frames[k]] (lab-frame view of a frame set).
inline Matrix lab_sum(const std::vector<Matrix>& frames,
                      std::span<const FramePath> paths, const GridSpec& grid,
                      const ShiftConfig& cfg) {
    if (frames.size() != paths.size())
        throw DataError("one path per frame required");
    Matrix sum = Matrix::Zero(grid.rows(), grid.n);
    for (std::size_t k = 0; k < frames.size(); ++k)
        sum += shift_apply(frames[k], grid, paths[k], +1, cfg);
    return sum;
}

/// Equal split of the data over the frames: q^k = T^{-Δ^k}[q] / K.
inline Decomposition initial_guess(const SnapshotField& q,
                                   std::vector<FramePath> paths,
                                   const ShiftConfig& cfg,
                                   std::vector<Index> ranks = {}) {
    detail::check_paths(paths, q.grid);
    const auto K = static_cast<double>(paths.size());
    if (ranks.empty())
        ranks.assign(paths.size(), 1);
    // Zero edge: nothing beyond the grid is data, and a replicated edge row
    // would add spurious rank to the frames.
    const ShiftConfig back = cfg.with_edge(EdgePolicy::constant(0.0));
    Decomposition d;
    for (const auto& p : paths)
        d.frames.emplace_back(q.grid, shift_apply(q.values, q.grid, p, -1, back) / K);
    d.paths = std::move(paths);
    d.ranks = std::move(ranks);
    d.validate();
    return d;
}

namespace detail {

// Leading-r approximation used by the lowrank reconstruction.
inline Matrix truncate(const Matrix& a, Index r) {
    if (a.isZero(0.0))
        return a;
    return svd_truncated(a, r).triple.reconstruct();
}

inline std::vector<Matrix> frame_values(const Decomposition& d) {
    std::vector<Matrix> v;
    v.reserve(d.frames.size());
    for (const auto& f : d.frames)
        v.push_back(f.values);
    return v;
}

}  // namespace detail

/// Σ_k T^{Δ^k}[q^k], with each q^k optionally replaced by its rank-r_k
/// truncated SVD.
inline SnapshotField reconstruct(const Decomposition& d, ReconstructMode mode,
                                 const ShiftConfig& cfg) {
    d.validate();
    std::vector<Matrix> frames = detail::frame_values(d);
    if (mode == ReconstructMode::lowrank)
        for (std::size_t k = 0; k < frames.size(); ++k)
            frames[k] = detail::truncate(frames[k], d.ranks[k]);
    return SnapshotField(d.grid(), lab_sum(frames, d.paths, d.grid(), cfg));
}

inline void check_matching(const SnapshotField& q, const Decomposition& d,
                           const WeightMask& weights) {
    d.validate();
    if (!q.grid.same_shape(d.grid()))
        throw DataError("data and decomposition grids differ");
    if (weights.size() != q.grid.rows())
        throw DataError("weight mask length does not match the grid");
}

/// w ⊙ (q - reconstruct(d, lowrank)).
inline SnapshotField residual(const SnapshotField& q, const Decomposition& d,
                              const WeightMask& weights, const ShiftConfig& cfg) {
    check_matching(q, d, weights);
    const SnapshotField rec = reconstruct(d, ReconstructMode::lowrank, cfg);
    return SnapshotField(q.grid, weights.apply(q.values - rec.values));
}

/// ||w ⊙ (q - Σ T^{Δ^k} q^k)||_F for raw frame matrices.
inline double constraint_violation(const SnapshotField& q,
                                   const std::vector<Matrix>& frames,
                                   std::span<const FramePath> paths,
                                   const WeightMask& weights,
                                   const ShiftConfig& cfg) {
    return weights.apply(q.values - lab_sum(frames, paths, q.grid, cfg)).norm();
}

inline double constraint_violation(const SnapshotField& q,
                                   const Decomposition& d,
                                   const WeightMask& weights,
                                   const ShiftConfig& cfg) {
    check_matching(q, d, weights);
    return constraint_violation(q, detail::frame_values(d), d.paths, weights, cfg);
}

/// q^k = q̄^k + (1/K) T^{-Δ^k}[w ⊙ (q - Σ_k' T^{Δ^k'} q̄^k')] on raw matrices.
inline std::vector<Matrix> project_frames(const std::vector<Matrix>& bar_frames,
                                          const SnapshotField& q,
                                          std::span<const FramePath> paths,
                                          const WeightMask& weights,
                                          const ShiftConfig& cfg) {
    if (bar_frames.empty())
        throw DataError("projection needs at least one frame");
    if (bar_frames.size() != paths.size())
        throw DataError("one path per frame required");
    const Matrix gap =
        weights.apply(q.values - lab_sum(bar_frames, paths, q.grid, cfg));
    const auto K = static_cast<double>(bar_frames.size());
    const ShiftConfig back = detail::masked(cfg);
    std::vector<Matrix> out(bar_frames.size());
    for (std::size_t k = 0; k < bar_frames.size(); ++k)
        out[k] = bar_frames[k] + shift_apply(gap, q.grid, paths[k], -1, back) / K;
    return out;
}

inline Decomposition project_constraint(const std::vector<SnapshotField>& bar_frames,
                                        const SnapshotField& q,
                                        std::vector<FramePath> paths,
                                        const WeightMask& weights,
                                        const ShiftConfig& cfg,
                                        std::vector<Index> ranks = {}) {
    if (bar_frames.empty())
        throw DataError("projection needs at least one frame");
    std::vector<Matrix> raw;
    for (const auto& f : bar_frames) {
        if (!f.grid.same_shape(q.grid))
            throw DataError("frame grid differs from data grid");
        raw.push_back(f.values);
    }
    std::vector<Matrix> out = project_frames(raw, q, paths, weights, cfg);
    if (ranks.empty())
        ranks.assign(out.size(), 1);
    Decomposition d;
    for (auto& m : out)
        d.frames.emplace_back(q.grid, std::move(m));
    d.paths = std::move(paths);
    d.ranks = std::move(ranks);
    d.validate();
    return d;
}

/// Data, frame paths, domain mask and shift settings of one decomposition
/// problem. `q` lives on the extended grid.
struct Problem {
    SnapshotField q;
    std::vector<FramePath> paths;
    WeightMask weights;
    ShiftConfig shift;

    static Problem make(SnapshotField q, std::vector<FramePath> paths,
                        ShiftConfig shift) {
        q.validate();
        detail::check_paths(paths, q.grid);
        shift.validate();
        if (shift.mode == ShiftMode::exact)
            for (const auto& p : paths)
                if (!has_integer_shifts(p, q.grid))
                    throw DataError("exact shift mode requires whole-cell shifts (path '" +
                                    p.label + "')");
        WeightMask w = WeightMask::for_grid(q.grid);
        return Problem{std::move(q), std::move(paths), std::move(w), shift};
    }

    Index frames() const noexcept { return static_cast<Index>(paths.size()); }
    const GridSpec& grid() const noexcept { return q.grid; }

    /// ||w ⊙ q||_F, the reference for relative errors.
    double data_norm() const { return weights.apply(q.values).norm(); }
};

}  // namespace spod
