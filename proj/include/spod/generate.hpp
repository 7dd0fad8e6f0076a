#pragma once

// Synthetic datasets with known frame contents and paths.

#include "spod/core.hpp"
#include "spod/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace spod {

/// One transported profile a·φ((x - x0 - c t)) · τ(t).
struct WaveSpec {
    enum class Shape { gaussian, gaussian_second_derivative };
    enum class TimeFactor { constant, linear };

    double center = 0.0;
    double width = 1.0;  ///< σ in exp(-(x - x0)^2 / σ^2)
    double velocity = 0.0;
    double amplitude = 1.0;
    Shape shape = Shape::gaussian;
    TimeFactor time_factor = TimeFactor::constant;
    double mu = 0.0;  ///< slope of the linear time factor τ(t) = μ t

    void validate() const {
        if (!(width > 0.0) || !std::isfinite(width))
            throw DataError("wave width must be positive");
        if (!std::isfinite(center) || !std::isfinite(velocity) ||
            !std::isfinite(amplitude) || !std::isfinite(mu))
            throw DataError("wave parameters must be finite");
    }

    /// Profile at offset s from the centre, without the time factor.
    double profile(double s) const {
        const double g = amplitude * std::exp(-s * s / (width * width));
        if (shape == Shape::gaussian)
            return g;
        const double w2 = width * width;
        return g * (4.0 * s * s / (w2 * w2) - 2.0 / w2);
    }

    double time_value(double t) const {
        return time_factor == TimeFactor::constant ? 1.0 : mu * t;
    }

    /// Frame-frame value at x (no transport); three periodic images when
    /// `period` > 0.
    double frame_value(double x, double t, double period) const {
        double v = profile(x - center);
        if (period > 0.0)
            v += profile(x - center - period) + profile(x - center + period);
        return v * time_value(t);
    }

    /// Lab-frame value at (x, t).
    double value(double x, double t, double period) const {
        return frame_value(x - velocity * t, t, period);
    }
};

/// Generated field plus the decomposition it was built from.
struct GeneratedCase {
    SnapshotField field;
    Decomposition truth;
};

namespace detail {

inline void check_sizes(Index m, Index n) {
    if (m < 2 || n < 2)
        throw DataError("generators need m >= 2 and n >= 2");
}

// Frame q^k of a set of waves sharing one velocity, sampled on `grid`.
inline Matrix frame_field(const std::vector<WaveSpec>& waves, const GridSpec& grid) {
    const double period = grid.periodic ? grid.length : 0.0;
    Matrix f = Matrix::Zero(grid.rows(), grid.n);
    for (Index j = 0; j < grid.n; ++j)
        for (Index i = 0; i < grid.rows(); ++i)
            for (const auto& w : waves)
                f(i, j) += w.frame_value(grid.x(i), grid.t(j), period);
    return f;
}

inline Matrix lab_field(const std::vector<WaveSpec>& waves, const GridSpec& grid) {
    const double period = grid.periodic ? grid.length : 0.0;
    Matrix q = Matrix::Zero(grid.rows(), grid.n);
    for (Index j = 0; j < grid.n; ++j)
        for (Index i = 0; i < grid.rows(); ++i)
            for (const auto& w : waves)
                q(i, j) += w.value(grid.x(i), grid.t(j), period);
    return q;
}

// Groups of waves, one group per frame, into a case on `grid`.
inline GeneratedCase build_case(const std::vector<std::vector<WaveSpec>>& groups,
                                const GridSpec& grid, std::vector<Index> ranks) {
    GeneratedCase c;
    Matrix q = Matrix::Zero(grid.rows(), grid.n);
    for (std::size_t k = 0; k < groups.size(); ++k) {
        for (const auto& w : groups[k])
            w.validate();
        q += lab_field(groups[k], grid);
        c.truth.frames.emplace_back(grid, frame_field(groups[k], grid));
        c.truth.paths.push_back(FramePath::constant_velocity(
            groups[k].front().velocity, grid, "c=" + std::to_string(groups[k].front().velocity)));
    }
    c.truth.ranks = std::move(ranks);
    c.field = SnapshotField(grid, std::move(q));
    return c;
}

}  // namespace detail

/// Default time span: every wave of unit speed moves one cell per step.
inline double unit_cell_time(Index m, Index n, double length) {
    return static_cast<double>(n - 1) * length / static_cast<double>(m);
}

/// Two Gaussians (σ = 0.06 L) at L/4 and 3L/4 travelling with c = +1 and -1
/// on a periodic domain. `total_time` <= 0 selects one cell per step.
inline GeneratedCase gen_two_wave(Index m = 100, Index n = 50,
                                  double length = 2.0 * std::numbers::pi,
                                  double total_time = 0.0) {
    detail::check_sizes(m, n);
    if (total_time <= 0.0)
        total_time = unit_cell_time(m, n, length);
    const GridSpec grid = GridSpec::uniform(m, n, length, total_time, true);
    const double sigma = 0.06 * length;
    WaveSpec a{0.25 * length, sigma, 1.0};
    WaveSpec b{0.75 * length, sigma, -1.0};
    return detail::build_case({{a}, {b}}, grid, {1, 1});
}

/// μ giving a diffusive term of 30 % of the pulse amplitude at the final time.
inline double default_mu(double length, double total_time) {
    const double sigma = 0.06 * length;
    // max |∂²p| = amplitude · 2/σ² with amplitude 1/2.
    return 0.3 * 0.5 / (total_time * (1.0 / (sigma * sigma)));
}

/// p_α(x - c t) + t μ ∂²p_α(x - c t) for two pulses of amplitude 1/2.
/// Each frame is exactly rank two when μ != 0. `mu` NaN selects default_mu.
inline GeneratedCase gen_two_wave_diffusive(Index m = 100, Index n = 50,
                                            double length = 2.0 * std::numbers::pi,
                                            double total_time = 0.0,
                                            double mu = std::numeric_limits<double>::quiet_NaN()) {
    detail::check_sizes(m, n);
    if (total_time <= 0.0)
        total_time = unit_cell_time(m, n, length);
    if (std::isnan(mu))
        mu = default_mu(length, total_time);
    if (!std::isfinite(mu))
        throw DataError("diffusion constant must be finite");
    const GridSpec grid = GridSpec::uniform(m, n, length, total_time, true);
    const double sigma = 0.06 * length;
    auto group = [&](double x0, double c) {
        WaveSpec p{x0, sigma, c, 0.5};
        WaveSpec d = p;
        d.shape = WaveSpec::Shape::gaussian_second_derivative;
        d.time_factor = WaveSpec::TimeFactor::linear;
        d.mu = mu;
        return std::vector<WaveSpec>{p, d};
    };
    const Index r = mu == 0.0 ? 1 : 2;
    return detail::build_case({group(0.25 * length, 1.0), group(0.75 * length, -1.0)},
                              grid, {r, r});
}

enum class BoundaryKind { leaving, reflected };

struct BoundaryCase {
    SnapshotField field;  ///< original domain only, non-periodic
    std::vector<FramePath> paths;
    std::vector<WaveSpec> waves;  ///< pulses the field was sampled from
};

/// Pulse(s) meeting the right boundary of a non-periodic domain.
/// leaving: one Gaussian from L/2 with c = +1, cut off at x = L.
/// reflected: the same pulse plus its mirror image about x = L (c = -1).
/// The pulse reaches the boundary at t = L/2; the reflected case runs until
/// t = L so the mirror pulse travels back to the centre. `n` <= 0 selects
/// m/2 + 1 (leaving) or m + 1 (reflected) steps, `total_time` <= 0 one cell
/// per step.
inline BoundaryCase gen_boundary_case(BoundaryKind kind, Index m = 100, Index n = 0,
                                      double length = 2.0 * std::numbers::pi,
                                      double total_time = 0.0) {
    if (n <= 0)
        n = kind == BoundaryKind::leaving ? m / 2 + 1 : m + 1;
    detail::check_sizes(m, n);
    if (total_time <= 0.0)
        total_time = unit_cell_time(m, n, length);
    const GridSpec grid = GridSpec::uniform(m, n, length, total_time, false);
    const double sigma = 0.06 * length;
    BoundaryCase c;
    c.waves.push_back(WaveSpec{0.5 * length, sigma, 1.0});
    c.paths.push_back(FramePath::constant_velocity(1.0, grid, "incoming"));
    if (kind == BoundaryKind::reflected) {
        c.waves.push_back(WaveSpec{1.5 * length, sigma, -1.0});
        c.paths.push_back(FramePath::constant_velocity(-1.0, grid, "reflected"));
    }
    c.field = SnapshotField(grid, detail::lab_field(c.waves, grid));
    return c;
}

inline BoundaryKind boundary_kind_from_string(const std::string& s) {
    if (s == "leaving") return BoundaryKind::leaving;
    if (s == "reflected") return BoundaryKind::reflected;
    throw DataError("unknown boundary case '" + s + "' (expected leaving, reflected)");
}

/// d x d identity with unit spacings (non-periodic).
inline SnapshotField gen_identity(Index d) {
    if (d < 2)
        throw DataError("identity needs d >= 2");
    GridSpec g = GridSpec::uniform(d, d, static_cast<double>(d),
                                   static_cast<double>(d - 1), false);
    return SnapshotField(g, Matrix::Identity(d, d));
}

/// The path that moves the identity's diagonal onto one row: Δ(t_j) = j dx.
inline FramePath identity_path(const GridSpec& grid) {
    FramePath p = FramePath::constant_velocity(grid.dx / grid.dt, grid, "diagonal");
    return p;
}

/// Parameters of the multi-front surrogate: one stationary frame of rank
/// `static_rank` and several moving rank-one plateaus with tanh edges on a
/// periodic domain. Velocities are in cells per time step.
struct SurrogateSpec {
    Index m = 1024;
    Index n = 500;
    Index static_rank = 4;
    std::vector<double> velocities{3.0, -2.0, 1.0};
    double edge_width = 3.0;  ///< tanh width in cells
};

inline double tanh_plateau(double x, double a, double b, double w, double period) {
    auto one = [&](double s) { return 0.5 * (std::tanh((s - a) / w) - std::tanh((s - b) / w)); };
    return one(x) + one(x - period) + one(x + period);
}

/// Surrogate with known frames. Frame 0 (zero path) carries static_rank
/// separable terms with sharp spatial structure; frames 1.. carry a single
/// plateau each with a smooth time amplitude.
inline GeneratedCase gen_multifront_surrogate(const SurrogateSpec& s = {}) {
    detail::check_sizes(s.m, s.n);
    if (s.static_rank < 1 || s.velocities.empty())
        throw DataError("surrogate needs a positive static rank and at least one moving frame");
    const double L = static_cast<double>(s.m);
    GridSpec g = GridSpec::uniform(s.m, s.n, L, static_cast<double>(s.n - 1), true);
    const double w = s.edge_width;
    const double pi = std::numbers::pi;

    GeneratedCase c;
    // Stationary frame: plateaus of different lengths with distinct time signals.
    Matrix f0 = Matrix::Zero(s.m, s.n);
    for (Index l = 0; l < s.static_rank; ++l) {
        const double a = L * (0.08 + 0.21 * static_cast<double>(l));
        const double b = a + L * (0.05 + 0.02 * static_cast<double>(l));
        const double amp = 1.0 / (1.0 + static_cast<double>(l));
        for (Index j = 0; j < s.n; ++j) {
            const double tau = static_cast<double>(j) / static_cast<double>(s.n - 1);
            const double temporal =
                amp * (1.2 + std::sin(2.0 * pi * (static_cast<double>(l) + 1.0) * tau +
                                      0.7 * static_cast<double>(l)));
            for (Index i = 0; i < s.m; ++i)
                f0(i, j) += temporal * tanh_plateau(static_cast<double>(i), a, b, w, L);
        }
    }
    c.truth.frames.emplace_back(g, std::move(f0));
    c.truth.paths.push_back(FramePath::zero(s.n, "static"));
    c.truth.ranks.push_back(s.static_rank);

    for (std::size_t k = 0; k < s.velocities.size(); ++k) {
        const double a = L * (0.15 + 0.27 * static_cast<double>(k));
        const double b = a + L * 0.06;
        Matrix f = Matrix::Zero(s.m, s.n);
        for (Index j = 0; j < s.n; ++j) {
            const double tau = static_cast<double>(j) / static_cast<double>(s.n - 1);
            const double amp = 0.8 + 0.3 * std::cos(pi * tau * (1.0 + static_cast<double>(k)));
            for (Index i = 0; i < s.m; ++i)
                f(i, j) = amp * tanh_plateau(static_cast<double>(i), a, b, w, L);
        }
        c.truth.frames.emplace_back(g, std::move(f));
        c.truth.paths.push_back(FramePath::constant_velocity(
            s.velocities[k], g, "front" + std::to_string(k + 1)));
        c.truth.ranks.push_back(1);
    }

    Matrix q = Matrix::Zero(s.m, s.n);
    const ShiftConfig exact{2, ShiftMode::exact};
    const bool whole = std::all_of(c.truth.paths.begin(), c.truth.paths.end(),
                                   [&](const FramePath& p) { return has_integer_shifts(p, g); });
    const ShiftConfig cfg = whole ? exact : ShiftConfig{6, ShiftMode::interpolated};
    for (std::size_t k = 0; k < c.truth.frames.size(); ++k)
        q += shift_apply(c.truth.frames[k].values, g, c.truth.paths[k], +1, cfg);
    c.field = SnapshotField(g, std::move(q));
    return c;
}

}  // namespace spod
