#pragma once

#include "spod/core.hpp"
#include "spod/lowrank.hpp"
#include "spod/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spod {

struct FrontDetector {
    enum class Mode { threshold, peak };
    enum class Direction { rising, falling };

    Mode mode = Mode::peak;
    double level = 0.5;                       ///< threshold mode only
    Direction direction = Direction::rising;  ///< in +x, threshold mode only
    /// Row range [first, last) searched in each column; empty: whole domain.
    std::vector<std::pair<Index, Index>> search_window;

    static FrontDetector threshold(double level, Direction dir = Direction::rising) {
        FrontDetector d;
        d.mode = Mode::threshold;
        d.level = level;
        d.direction = dir;
        return d;
    }
    static FrontDetector peak() { return FrontDetector{}; }

    /// Same window for every column.
    FrontDetector within(Index first, Index last, Index columns) const {
        FrontDetector d = *this;
        d.search_window.assign(columns, {first, last});
        return d;
    }
};

namespace detail {

inline std::string column_msg(Index j) { return "column " + std::to_string(j); }

// Sub-grid row of the threshold crossing in rows [lo, hi).
inline double threshold_row(const Eigen::Ref<const Vector>& col, Index lo, Index hi,
                            const FrontDetector& det, bool windowed, Index j) {
    std::optional<double> found;
    for (Index i = lo; i + 1 < hi; ++i) {
        const double a = col[i] - det.level;
        const double b = col[i + 1] - det.level;
        const bool crosses = det.direction == FrontDetector::Direction::rising
                                 ? (a < 0.0 && b >= 0.0)
                                 : (a > 0.0 && b <= 0.0);
        if (!crosses)
            continue;
        if (found && !windowed)
            throw DataError("front detection ambiguous: several crossings in " +
                            column_msg(j) + "; give a search window");
        if (!found)
            found = static_cast<double>(i) + a / (a - b);
    }
    if (!found)
        throw DataError("front detection: no threshold crossing in " + column_msg(j));
    return *found;
}

// Sub-grid row of the maximum in rows [lo, hi) from a three-point parabola.
inline double peak_row(const Eigen::Ref<const Vector>& col, Index lo, Index hi,
                       bool windowed, Index j) {
    Index best = lo;
    for (Index i = lo; i < hi; ++i)
        if (col[i] > col[best])
            best = i;
    const double top = col[best];
    const double bottom = col.segment(lo, hi - lo).minCoeff();
    if (!(top > bottom))
        throw DataError("front detection: no peak in " + column_msg(j));
    if (!windowed) {
        // A second strict local maximum of equal height makes the choice arbitrary.
        for (Index i = lo + 1; i + 1 < hi; ++i)
            if (i != best && col[i] >= top * (1.0 - 1e-12) && col[i] > col[i - 1] &&
                col[i] >= col[i + 1])
                throw DataError("front detection ambiguous: several peaks in " +
                                column_msg(j) + "; give a search window");
    }
    if (best == lo || best + 1 >= hi)
        return static_cast<double>(best);
    const double ym = col[best - 1], y0 = col[best], yp = col[best + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (denom >= 0.0)
        return static_cast<double>(best);
    return static_cast<double>(best) + 0.5 * (ym - yp) / denom;
}

}  // namespace detail

/// Front location per column, relative to its position in the first column.
inline FramePath detect_front_path(const SnapshotField& q, const FrontDetector& det) {
    q.validate();
    const bool windowed = !det.search_window.empty();
    if (windowed && static_cast<Index>(det.search_window.size()) != q.grid.n)
        throw DataError("search window needs one row range per column");
    Vector rows(q.grid.n);
    for (Index j = 0; j < q.grid.n; ++j) {
        Index lo = 0, hi = q.rows();
        if (windowed) {
            lo = std::max<Index>(0, det.search_window[j].first);
            hi = std::min<Index>(q.rows(), det.search_window[j].second);
            if (hi - lo < 2)
                throw DataError("search window of " + detail::column_msg(j) + " is empty");
        }
        const Vector col = q.values.col(j);
        rows[j] = det.mode == FrontDetector::Mode::threshold
                      ? detail::threshold_row(col, lo, hi, det, windowed, j)
                      : detail::peak_row(col, lo, hi, windowed, j);
    }
    FramePath p;
    p.shifts = (rows.array() - rows[0]) * q.grid.dx;
    p.label = det.mode == FrontDetector::Mode::peak ? "peak" : "threshold";
    return p;
}

/// Least-squares slope of a path against time.
inline double path_velocity(const FramePath& p, const GridSpec& grid) {
    const Index n = p.size();
    double st = 0.0, ss = 0.0, stt = 0.0, sts = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double t = grid.t(j);
        st += t;
        ss += p.shifts[j];
        stt += t * t;
        sts += t * p.shifts[j];
    }
    const double nn = static_cast<double>(n);
    return (nn * sts - st * ss) / (nn * stt - st * st);
}

struct ReportSummary {
    double rel_error = 0.0;  ///< ||w (q - lowrank reconstruction)|| / ||w q||
    std::vector<Vector> spectra;            ///< full singular spectrum per frame
    std::vector<Matrix> lab_views;          ///< T^{Δ^k}[q^k] on the extended grid
    std::vector<Matrix> lab_views_lowrank;  ///< same for the rank-r_k parts
    Index total_rank = 0;
    double pod_rel_error = 0.0;  ///< POD of w q at rank Σ r_k
    double constraint_violation = 0.0;
};

inline ReportSummary report(const Decomposition& d, const SnapshotField& q,
                            const WeightMask& weights, const ShiftConfig& cfg,
                            const SvdOptions& opts = {}) {
    check_matching(q, d, weights);
    ReportSummary out;
    const double qn = weights.apply(q.values).norm();
    const SnapshotField res = residual(q, d, weights, cfg);
    out.rel_error = qn > 0.0 ? res.values.norm() / qn : res.values.norm();
    out.constraint_violation = constraint_violation(q, d, weights, cfg);
    for (std::size_t k = 0; k < d.frames.size(); ++k) {
        const Matrix& f = d.frames[k].values;
        const Index cap = std::max(f.rows(), f.cols());
        out.spectra.push_back(cap <= opts.full_spectrum_cap ? singular_values(f)
                                                            : svd_ranked(f, std::min<Index>(
                                                                  std::min(f.rows(), f.cols()),
                                                                  d.ranks[k] + 10), opts)
                                                                  .triple.S);
        out.lab_views.push_back(shift_apply(f, q.grid, d.paths[k], +1, cfg));
        const Matrix low = f.isZero(0.0) ? f : detail::truncate(f, d.ranks[k]);
        out.lab_views_lowrank.push_back(shift_apply(low, q.grid, d.paths[k], +1, cfg));
        out.total_rank += d.ranks[k];
    }
    const Matrix wq = q.values.middleRows(q.grid.omega_begin(), q.grid.m);
    const Index pr = std::min<Index>(out.total_rank, std::min(wq.rows(), wq.cols()));
    out.pod_rel_error = wq.isZero(0.0) ? 0.0 : pod_baseline(wq, pr, opts).rel_error;
    return out;
}

}  // namespace spod
