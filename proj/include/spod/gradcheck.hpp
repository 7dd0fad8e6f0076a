#pragma once

// Finite-difference check of the redistributed gradient. The check runs on
// grids with whole-cell shifts, where the constraint projection
//   P(q̄)^k = q̄^k + (1/K) T^{-Δ^k}[w ⊙ (q - Σ T^{Δ^k'} q̄^k')]
// is affine with a symmetric linear part, so d/dq̄ J(P(q̄)) at a feasible
// point equals the redistributed gradient.

#include "spod/core.hpp"
#include "spod/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace spod {

struct GradcheckCase {
    Problem problem;
    std::vector<Matrix> frames;  ///< feasible point
    std::vector<Index> ranks;
};

struct GradcheckResult {
    ObjectiveType type = ObjectiveType::J2;
    double rel_error = 0.0;  ///< ||g_fd - g|| / max(||g_fd||, ||g||)
    bool skipped = false;    ///< J1 at a non-smooth point
    std::string note;
};

/// Random feasible instance: m x n (m <= 30, n <= 20 typical), K frames with
/// whole-cell shift paths. Periodic grids are used unless `extended`, in which
/// case the grid is extended to hold every shift.
inline GradcheckCase random_gradcheck_case(std::mt19937_64& rng, Index m, Index n, Index K,
                                           bool extended) {
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> step(-2, 2);
    GridSpec g = GridSpec::uniform(m, n, static_cast<double>(m), static_cast<double>(n - 1),
                                   !extended);
    std::vector<FramePath> paths;
    for (Index k = 0; k < K; ++k) {
        // Whole cells per step; first frame may rest.
        const int v = k == 0 ? 0 : step(rng);
        FramePath p = FramePath::constant_velocity(v, g, "f" + std::to_string(k));
        paths.push_back(p);
    }
    const ShiftConfig exact{2, ShiftMode::exact};
    SnapshotField base(g, Matrix::Zero(m, n));
    if (extended) {
        // Margin so that a single frame still has free entries.
        base = extend_domain(base, paths, ExtensionFill::constant(0.0), exact, 2);
        g = base.grid;
    }
    std::vector<Matrix> bar;
    for (Index k = 0; k < K; ++k)
        bar.push_back(Matrix::NullaryExpr(g.rows(), g.n, [&] { return normal(rng); }));
    const Matrix lab = lab_sum(bar, paths, g, exact);
    const WeightMask w = WeightMask::for_grid(g);
    SnapshotField q(g, w.apply(lab));
    Problem prob = Problem::make(q, paths, exact);
    // Frames satisfy the weighted constraint exactly since q = w Σ T q̄.
    std::vector<Index> ranks;
    const Index d = std::min(g.rows(), g.n);
    std::uniform_int_distribution<Index> rk(1, std::max<Index>(1, d / 3));
    for (Index k = 0; k < K; ++k)
        ranks.push_back(rk(rng));
    return {std::move(prob), std::move(bar), std::move(ranks)};
}

/// Compare the assembled gradient with central differences of J(P(q̄)) with
/// step `h` (relative to the largest frame entry). Differences are taken for
/// every entry when there are at most `max_entries`, else for a random sample
/// of that many entries; the directional derivative along the gradient itself
/// is always checked. The reported error is the worse of the two.
inline GradcheckResult gradcheck(const GradcheckCase& c, ObjectiveKind kind, double h = 1e-6,
                                 Index max_entries = 256, std::uint64_t seed = 0) {
    kind.ranks = c.ranks;
    kind.validate();
    GradcheckResult res;
    res.type = kind.type;
    const auto& prob = c.problem;

    auto value = [&](const std::vector<Matrix>& bar) {
        const auto f = project_frames(bar, prob.q, prob.paths, prob.weights, prob.shift);
        return total_value(frame_terms(f, kind, kind.ranks), kind);
    };

    const auto terms = frame_terms(c.frames, kind, kind.ranks);
    if (kind.type == ObjectiveType::J1 || kind.type == ObjectiveType::J12) {
        for (const auto& t : terms) {
            const bool j1_rough = kind.type == ObjectiveType::J1 &&
                                  (t.svd.size() == 0 || t.svd.S.minCoeff() <= 1e-3);
            const bool j12_rough = kind.type == ObjectiveType::J12 && t.tail <= 1e-12;
            if (j1_rough || j12_rough) {
                res.skipped = true;
                res.note = "non-smooth point (vanishing singular value)";
                return res;
            }
        }
    }
    const auto g = assemble_gradient(prob, c.frames, terms, kind);

    double scale = 0.0;
    for (const auto& f : c.frames)
        scale = std::max(scale, f.cwiseAbs().maxCoeff());
    const double step = h * std::max(scale, 1.0);

    // (frame, flat index) of every entry, then the sample.
    std::vector<std::pair<std::size_t, Index>> entries;
    for (std::size_t k = 0; k < c.frames.size(); ++k)
        for (Index i = 0; i < c.frames[k].size(); ++i)
            entries.emplace_back(k, i);
    if (static_cast<Index>(entries.size()) > max_entries) {
        std::mt19937_64 pick(seed);
        std::shuffle(entries.begin(), entries.end(), pick);
        entries.resize(static_cast<std::size_t>(max_entries));
    }

    std::vector<Matrix> bar = c.frames;
    Vector fd(static_cast<Index>(entries.size())), an(fd.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const auto [k, i] = entries[e];
        double& x = bar[k].data()[i];
        const double orig = x;
        x = orig + step;
        const double up = value(bar);
        x = orig - step;
        const double down = value(bar);
        x = orig;
        fd[static_cast<Index>(e)] = (up - down) / (2.0 * step);
        an[static_cast<Index>(e)] = g[k].data()[i];
    }
    const double denom = std::max({fd.norm(), an.norm(), 1e-300});
    res.rel_error = (fd - an).norm() / denom;
    if (fd.norm() < 1e-12 && an.norm() < 1e-12)
        res.rel_error = 0.0;

    const double gn = norm(g);
    if (gn > 1e-12) {
        // Along d = g / |g| the derivative is |g|.
        const double t = step / gn;
        const double up = value(axpy(c.frames, t, g));
        const double down = value(axpy(c.frames, -t, g));
        const double dir = (up - down) / (2.0 * step);
        res.rel_error = std::max(res.rel_error, std::abs(dir - gn) / std::max(std::abs(dir), gn));
    } else if (res.rel_error == 0.0) {
        res.note = "no free directions";
    }
    return res;
}

}  // namespace spod
