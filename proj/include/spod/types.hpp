#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spod {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Malformed or inconsistent data: shape mismatches, non-finite entries,
/// shifts that violate the requested shift mode.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform space-time grid. Rows of a snapshot matrix are spatial points,
/// columns are time steps. The original domain occupies rows
/// [ext_left, ext_left + m); the remaining rows form the extension.
struct GridSpec {
    Index m = 0;          ///< spatial points of the original domain
    Index n = 0;          ///< time steps
    double dx = 1.0;
    double dt = 1.0;
    double length = 0.0;  ///< domain length; m * dx when periodic
    bool periodic = false;
    Index ext_left = 0;
    Index ext_right = 0;

    /// Grid with dx = length / m and dt = total_time / (n - 1).
    static GridSpec uniform(Index m, Index n, double length, double total_time,
                            bool periodic) {
        GridSpec g;
        g.m = m;
        g.n = n;
        g.length = length;
        g.periodic = periodic;
        g.dx = length / static_cast<double>(m);
        g.dt = n > 1 ? total_time / static_cast<double>(n - 1) : 1.0;
        return g;
    }

    Index rows() const noexcept { return m + ext_left + ext_right; }
    Index omega_begin() const noexcept { return ext_left; }
    Index omega_end() const noexcept { return ext_left + m; }
    bool in_omega(Index row) const noexcept {
        return row >= ext_left && row < ext_left + m;
    }
    bool extended() const noexcept { return ext_left > 0 || ext_right > 0; }

    /// Physical position of (extended) row `row`; row ext_left sits at x = 0.
    double x(Index row) const noexcept {
        return static_cast<double>(row - ext_left) * dx;
    }
    double t(Index col) const noexcept { return static_cast<double>(col) * dt; }

    /// Same grid without its extension.
    GridSpec unextended() const {
        GridSpec g = *this;
        g.ext_left = 0;
        g.ext_right = 0;
        return g;
    }

    bool same_shape(const GridSpec& o) const noexcept {
        return m == o.m && n == o.n && ext_left == o.ext_left &&
               ext_right == o.ext_right && periodic == o.periodic;
    }

    void validate() const {
        if (m < 2 || n < 2)
            throw DataError("grid needs m >= 2 and n >= 2");
        if (!(dx > 0.0) || !(dt > 0.0) || !std::isfinite(dx) ||
            !std::isfinite(dt))
            throw DataError("grid spacings dx and dt must be positive");
        if (ext_left < 0 || ext_right < 0)
            throw DataError("extension sizes must be non-negative");
        if (periodic) {
            if (ext_left != 0 || ext_right != 0)
                throw DataError("periodic grids carry no extension");
            const double expected = static_cast<double>(m) * dx;
            if (std::abs(length - expected) > 1e-9 * std::max(1.0, expected))
                throw DataError("periodic grid requires length == m * dx");
        }
    }
};

/// Scalar field sampled on a (possibly extended) grid.
struct SnapshotField {
    GridSpec grid;
    Matrix values;

    SnapshotField() = default;
    SnapshotField(GridSpec g, Matrix v) : grid(g), values(std::move(v)) {
        validate();
    }

    Index rows() const noexcept { return values.rows(); }
    Index cols() const noexcept { return values.cols(); }

    /// Rows belonging to the original domain.
    auto omega() const { return values.middleRows(grid.omega_begin(), grid.m); }
    auto omega() { return values.middleRows(grid.omega_begin(), grid.m); }

    void validate() const {
        grid.validate();
        if (values.rows() != grid.rows() || values.cols() != grid.n)
            throw DataError("field shape " + std::to_string(values.rows()) +
                            "x" + std::to_string(values.cols()) +
                            " does not match grid " +
                            std::to_string(grid.rows()) + "x" +
                            std::to_string(grid.n));
        if (!values.allFinite())
            throw DataError("field contains non-finite values");
    }
};

/// Time-dependent shift of one co-moving frame, in length units.
struct FramePath {
    Vector shifts;
    std::string label;

    Index size() const noexcept { return shifts.size(); }

    /// shifts[j] = velocity * t_j.
    static FramePath constant_velocity(double velocity, const GridSpec& grid,
                                       std::string label = {}) {
        FramePath p;
        p.shifts.resize(grid.n);
        for (Index j = 0; j < grid.n; ++j)
            p.shifts[j] = velocity * grid.t(j);
        p.label = std::move(label);
        return p;
    }

    static FramePath zero(Index n, std::string label = {}) {
        return FramePath{Vector::Zero(n), std::move(label)};
    }

    void validate(Index n) const {
        if (shifts.size() != n)
            throw DataError("path '" + label + "' has " +
                            std::to_string(shifts.size()) + " shifts, expected " +
                            std::to_string(n));
        if (!shifts.allFinite())
            throw DataError("path '" + label + "' contains non-finite shifts");
    }
};

/// Indicator of the original domain on the extended grid.
struct WeightMask {
    Vector w;

    static WeightMask for_grid(const GridSpec& grid) {
        WeightMask mask{Vector::Zero(grid.rows())};
        mask.w.segment(grid.omega_begin(), grid.m).setOnes();
        return mask;
    }

    Index size() const noexcept { return w.size(); }

    /// w applied to every time column.
    Matrix apply(const Matrix& field) const {
        return w.asDiagonal() * field;
    }
};

/// K co-moving frame fields on a shared extended grid.
struct Decomposition {
    std::vector<SnapshotField> frames;
    std::vector<FramePath> paths;
    std::vector<Index> ranks;

    Index size() const noexcept { return static_cast<Index>(frames.size()); }
    const GridSpec& grid() const { return frames.front().grid; }

    void validate() const {
        if (frames.empty())
            throw DataError("decomposition needs at least one frame");
        if (paths.size() != frames.size() || ranks.size() != frames.size())
            throw DataError("frames, paths and ranks must have equal length");
        const GridSpec& g = frames.front().grid;
        const Index max_rank = std::min(g.rows(), g.n);
        for (std::size_t k = 0; k < frames.size(); ++k) {
            if (!frames[k].grid.same_shape(g))
                throw DataError("frame " + std::to_string(k) +
                                " has a different grid");
            frames[k].validate();
            paths[k].validate(g.n);
            if (ranks[k] < 1 || ranks[k] > max_rank)
                throw DataError("rank of frame " + std::to_string(k) +
                                " out of range [1, " + std::to_string(max_rank) +
                                "]");
        }
    }
};

// Frame-set arithmetic over the flattened optimization variable.

inline double dot(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a[k].cwiseProduct(b[k]).sum();
    return s;
}

inline double norm(const std::vector<Matrix>& a) { return std::sqrt(dot(a, a)); }

/// a + alpha * b
inline std::vector<Matrix> axpy(const std::vector<Matrix>& a, double alpha,
                                const std::vector<Matrix>& b) {
    std::vector<Matrix> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        out[k] = a[k] + alpha * b[k];
    return out;
}

inline std::vector<Matrix> scaled(const std::vector<Matrix>& a, double alpha) {
    std::vector<Matrix> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        out[k] = alpha * a[k];
    return out;
}

}  // namespace spod
