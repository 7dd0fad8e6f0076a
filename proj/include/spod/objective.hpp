#pragma once

// Singular-value based objectives over a set of co-moving frames, their
// per-frame (sub-)gradients and the redistribution that keeps the
// reconstruction constraint intact.

#include "spod/core.hpp"
#include "spod/lowrank.hpp"
#include "spod/shift.hpp"
#include "spod/types.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace spod {

enum class ObjectiveType {
    J2,     ///< Σ_k (1 - Σ_{l<=r_k} s_l^2 / n_k^2)
    barJ2,  ///< Σ_k (n_k^2 - Σ_{l<=r_k} s_l^2)
    J1,     ///< Σ_k ||q^k||_*
    J12     ///< Σ_k (Σ_{l<=r_k} s_l + sqrt(d - r_k) sqrt(n_k^2 - Σ_{l<=r_k} s_l^2))
};

inline const char* to_string(ObjectiveType t) {
    switch (t) {
    case ObjectiveType::J2: return "J2";
    case ObjectiveType::barJ2: return "barJ2";
    case ObjectiveType::J1: return "J1";
    case ObjectiveType::J12: return "J12";
    }
    return "?";
}

inline ObjectiveType objective_from_string(const std::string& s) {
    if (s == "J2") return ObjectiveType::J2;
    if (s == "barJ2" || s == "J2bar") return ObjectiveType::barJ2;
    if (s == "J1") return ObjectiveType::J1;
    if (s == "J12") return ObjectiveType::J12;
    throw DataError("unknown objective '" + s + "' (expected J2, barJ2, J1, J12)");
}

/// Norm penalty ε Σ_k ||q^k||_F^2 (squared) or ε Σ_k ||q^k||_F (norm).
enum class PenaltyForm { squared, norm };

inline const char* to_string(PenaltyForm f) {
    return f == PenaltyForm::squared ? "squared" : "norm";
}

inline PenaltyForm penalty_form_from_string(const std::string& s) {
    if (s == "squared") return PenaltyForm::squared;
    if (s == "norm") return PenaltyForm::norm;
    throw DataError("unknown penalty form '" + s + "' (expected squared, norm)");
}

struct ObjectiveKind {
    ObjectiveType type = ObjectiveType::J2;
    std::vector<Index> ranks;      ///< per frame; empty means "use the decomposition's"
    double penalty_epsilon = 0.0;  ///< penalty weight; 0 disables
    PenaltyForm penalty_form = PenaltyForm::squared;
    double zero_singular_tol = 1e-10;  ///< J1 cutoff, relative to s_1

    void validate() const {
        if (!(penalty_epsilon >= 0.0))
            throw DataError("penalty epsilon must be non-negative");
        if (type == ObjectiveType::J1 && !(zero_singular_tol > 0.0))
            throw DataError("J1 needs a positive zero-singular-value tolerance");
    }

    Index rank(std::size_t k) const { return ranks.at(k); }
};

/// Per-frame state at one evaluation point.
struct FrameTerm {
    double value = 0.0;    ///< objective contribution, penalty excluded
    double norm_sq = 0.0;  ///< n_k^2
    double tail = 0.0;     ///< ||R^k||_F^2 = n_k^2 - Σ_{l<=r} s_l^2
    Index rank = 1;
    SVDTriple svd;         ///< leading r triples; the full spectrum for J1
    Matrix residual;       ///< R^k: part of q^k outside its leading-r subspace
    double next_singular_value = -1.0;
    bool clustered = false;  ///< s_r and s_{r+1} closer than 1e-8 s_1
};

struct ObjectiveReport {
    double total = 0.0;
    std::vector<double> per_frame;
    std::vector<Vector> leading_singular_values;
    std::vector<double> frobenius_norms;
    double constraint_violation = std::numeric_limits<double>::quiet_NaN();
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

/// Counts SVD evaluations made on behalf of an optimizer or a report.
struct EvalStats {
    Index svd_count = 0;
};

/// Evaluate one frame. Throws DataError for J2 on a zero-norm frame.
inline FrameTerm frame_term(const Matrix& f, ObjectiveType type, Index r,
                            const SvdOptions& opts = {}, EvalStats* stats = nullptr,
                            Index frame_index = 0) {
    FrameTerm t;
    t.rank = r;
    t.norm_sq = f.squaredNorm();
    const Index d = std::min(f.rows(), f.cols());
    if (r < 1 || r > d)
        throw DataError("rank " + std::to_string(r) + " of frame " +
                        std::to_string(frame_index) + " outside [1, " +
                        std::to_string(d) + "]");
    if (type == ObjectiveType::J2 && t.norm_sq == 0.0)
        throw DataError("J2 undefined: frame " + std::to_string(frame_index) +
                        " has zero norm");

    if (t.norm_sq == 0.0) {
        // Zero frame: every singular value vanishes.
        t.svd = {Matrix::Zero(f.rows(), 0), Vector::Zero(0), Matrix::Zero(f.cols(), 0)};
        t.residual = Matrix::Zero(f.rows(), f.cols());
        t.next_singular_value = 0.0;
        t.value = 0.0;
        return t;
    }

    if (stats)
        ++stats->svd_count;
    SVDTriple lead;
    if (type == ObjectiveType::J1) {
        t.svd = svd_full(f, opts);
        lead = t.svd.leading(r);
        if (t.svd.size() > r)
            t.next_singular_value = t.svd.S[r];
    } else {
        RankedSVD s = svd_ranked(f, r, opts);
        t.next_singular_value = s.next_singular_value;
        t.svd = std::move(s.triple);
        lead = t.svd;
    }
    t.residual = f - lead.U * (lead.U.transpose() * f);
    t.tail = t.residual.squaredNorm();

    const double s1 = t.svd.S.size() ? t.svd.S[0] : 0.0;
    if (t.next_singular_value >= 0.0 && lead.size() == r &&
        std::abs(lead.S[r - 1] - t.next_singular_value) < 1e-8 * s1)
        t.clustered = true;

    switch (type) {
    case ObjectiveType::J2:
        t.value = t.tail / t.norm_sq;
        break;
    case ObjectiveType::barJ2:
        t.value = t.tail;
        break;
    case ObjectiveType::J1:
        t.value = t.svd.S.sum();
        break;
    case ObjectiveType::J12:
        t.value = lead.S.sum() + std::sqrt(static_cast<double>(d - r)) * std::sqrt(t.tail);
        break;
    }
    return t;
}

/// Gradient of one frame's term, from the state computed by frame_term.
inline Matrix frame_gradient(const Matrix& f, const FrameTerm& t, ObjectiveType type,
                             double zero_singular_tol = 1e-10) {
    if (t.norm_sq == 0.0)
        return Matrix::Zero(f.rows(), f.cols());
    switch (type) {
    case ObjectiveType::J2:
        // 2 Σ_l (-s_l u_l v_l^T / n^2 + s_l^2 q / n^4) rewritten through R.
        return 2.0 * (t.residual - t.value * f) / t.norm_sq;
    case ObjectiveType::barJ2:
        return 2.0 * t.residual;
    case ObjectiveType::J1: {
        const double cutoff = zero_singular_tol * t.svd.S[0];
        Index keep = 0;
        while (keep < t.svd.size() && t.svd.S[keep] > cutoff)
            ++keep;
        return t.svd.U.leftCols(keep) * t.svd.V.leftCols(keep).transpose();
    }
    case ObjectiveType::J12: {
        const Index r = t.rank;
        const Index d = std::min(f.rows(), f.cols());
        Matrix g = t.svd.U.leftCols(r) * t.svd.V.leftCols(r).transpose();
        if (t.tail > 0.0)
            g += std::sqrt(static_cast<double>(d - r)) / std::sqrt(t.tail) * t.residual;
        return g;
    }
    }
    return Matrix();
}

/// Unconstrained gradient of one frame's term.
inline Matrix grad_frame(const Matrix& frame, const ObjectiveKind& kind, Index r,
                         const SvdOptions& opts = {}) {
    kind.validate();
    const FrameTerm t = frame_term(frame, kind.type, r, opts);
    return frame_gradient(frame, t, kind.type, kind.zero_singular_tol);
}

/// Equal redistribution of per-frame gradients so that their lab-frame sum
/// vanishes on the original domain:
///   g̃^k = g^k - (1/K) T^{-Δ^k}[w ⊙ Σ_k' T^{Δ^k'}[g^k']].
inline std::vector<Matrix> redistribute(const std::vector<Matrix>& grads,
                                        std::span<const FramePath> paths,
                                        const WeightMask& weights,
                                        const GridSpec& grid,
                                        const ShiftConfig& cfg) {
    if (grads.size() != paths.size())
        throw DataError("redistribute: " + std::to_string(grads.size()) +
                        " gradients for " + std::to_string(paths.size()) + " paths");
    if (grads.empty())
        return {};
    const Matrix lab = weights.apply(lab_sum(grads, paths, grid, cfg));
    const auto K = static_cast<double>(grads.size());
    const ShiftConfig back = detail::masked(cfg);
    std::vector<Matrix> out(grads.size());
    for (std::size_t k = 0; k < grads.size(); ++k)
        out[k] = grads[k] - shift_apply(lab, grid, paths[k], -1, back) / K;
    return out;
}

namespace detail {

inline std::vector<Index> resolve_ranks(const ObjectiveKind& kind,
                                        const std::vector<Index>& fallback) {
    const auto& r = kind.ranks.empty() ? fallback : kind.ranks;
    if (r.size() != fallback.size())
        throw DataError("objective ranks do not match the number of frames");
    return r;
}

}  // namespace detail

inline std::vector<FrameTerm> frame_terms(const std::vector<Matrix>& frames,
                                          const ObjectiveKind& kind,
                                          const std::vector<Index>& ranks,
                                          const SvdOptions& opts = {},
                                          EvalStats* stats = nullptr) {
    std::vector<FrameTerm> terms;
    terms.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k)
        terms.push_back(frame_term(frames[k], kind.type, ranks[k], opts, stats,
                                   static_cast<Index>(k)));
    return terms;
}

/// Total objective including the norm penalty.
inline double total_value(const std::vector<FrameTerm>& terms, const ObjectiveKind& kind) {
    double v = 0.0;
    for (const auto& t : terms)
        v += t.value;
    if (kind.penalty_epsilon > 0.0) {
        double p = 0.0;
        for (const auto& t : terms)
            p += kind.penalty_form == PenaltyForm::squared ? t.norm_sq : std::sqrt(t.norm_sq);
        v += kind.penalty_epsilon * p;
    }
    return v;
}

/// Redistributed gradient, penalty included, from precomputed frame terms.
inline std::vector<Matrix> assemble_gradient(const Problem& problem,
                                             const std::vector<Matrix>& frames,
                                             const std::vector<FrameTerm>& terms,
                                             const ObjectiveKind& kind) {
    std::vector<Matrix> grads(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        grads[k] = frame_gradient(frames[k], terms[k], kind.type, kind.zero_singular_tol);
        if (kind.penalty_epsilon > 0.0) {
            if (kind.penalty_form == PenaltyForm::squared)
                grads[k] += 2.0 * kind.penalty_epsilon * frames[k];
            else if (terms[k].norm_sq > 0.0)
                grads[k] += kind.penalty_epsilon / std::sqrt(terms[k].norm_sq) * frames[k];
        }
    }
    return redistribute(grads, problem.paths, problem.weights, problem.grid(),
                        problem.shift);
}

inline std::vector<Matrix> assemble_gradient(const Decomposition& d,
                                             const Problem& problem,
                                             const ObjectiveKind& kind,
                                             const SvdOptions& opts = {}) {
    kind.validate();
    check_matching(problem.q, d, problem.weights);
    const std::vector<Matrix> frames = detail::frame_values(d);
    const auto ranks = detail::resolve_ranks(kind, d.ranks);
    return assemble_gradient(problem, frames, frame_terms(frames, kind, ranks, opts), kind);
}

/// Lab-frame residual w ⊙ (q - Σ T^{Δ^k}[q^k - R^k]) of the low-rank
/// reconstruction implied by the frame terms.
inline Matrix lowrank_residual(const Problem& problem, const std::vector<Matrix>& frames,
                               const std::vector<FrameTerm>& terms) {
    std::vector<Matrix> low(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k)
        low[k] = frames[k] - terms[k].residual;
    return problem.weights.apply(
        problem.q.values - lab_sum(low, problem.paths, problem.grid(), problem.shift));
}

namespace detail {

inline ObjectiveReport make_report(const std::vector<FrameTerm>& terms,
                                   const ObjectiveKind& kind) {
    ObjectiveReport rep;
    rep.total = total_value(terms, kind);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& t = terms[k];
        rep.per_frame.push_back(t.value);
        rep.leading_singular_values.push_back(t.svd.S.head(std::min(t.rank, t.svd.size())));
        rep.frobenius_norms.push_back(std::sqrt(t.norm_sq));
        if (t.clustered)
            rep.warnings.push_back("frame " + std::to_string(k) +
                                   ": singular values s_r and s_{r+1} nearly coincide; "
                                   "gradient not unique");
    }
    return rep;
}

}  // namespace detail

/// Objective of a decomposition without reference data; constraint fields
/// stay NaN.
inline ObjectiveReport eval(const Decomposition& d, const ObjectiveKind& kind,
                            const SvdOptions& opts = {}) {
    kind.validate();
    d.validate();
    const std::vector<Matrix> frames = detail::frame_values(d);
    const auto ranks = detail::resolve_ranks(kind, d.ranks);
    return detail::make_report(frame_terms(frames, kind, ranks, opts), kind);
}

/// Objective plus constraint violation and low-rank residual norm.
inline ObjectiveReport eval(const Problem& problem, const Decomposition& d,
                            const ObjectiveKind& kind, const SvdOptions& opts = {}) {
    kind.validate();
    check_matching(problem.q, d, problem.weights);
    const std::vector<Matrix> frames = detail::frame_values(d);
    const auto ranks = detail::resolve_ranks(kind, d.ranks);
    const auto terms = frame_terms(frames, kind, ranks, opts);
    ObjectiveReport rep = detail::make_report(terms, kind);
    rep.constraint_violation = constraint_violation(problem.q, frames, problem.paths,
                                                    problem.weights, problem.shift);
    rep.residual_norm = lowrank_residual(problem, frames, terms).norm();
    return rep;
}

}  // namespace spod
