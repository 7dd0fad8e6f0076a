#pragma once

#include "spod/core.hpp"
#include "spod/objective.hpp"
#include "spod/types.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spod {

/// The objective does not decrease along the search direction.
class StationaryPoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Method { steepest, lbfgs };
enum class StepEstimator { exact_eval, svd_update };

/// When a rank stage hands over to the next one.
struct StageTrigger {
    enum class Kind { iterations, saturation };
    Kind kind = Kind::saturation;
    Index iterations = 50;       ///< stage length for Kind::iterations
    double rel_decrease = 1e-3;  ///< saturation: relative decrease over `window`
    Index window = 10;

    static StageTrigger after(Index iters) {
        return {Kind::iterations, iters, 1e-3, 10};
    }
    static StageTrigger saturation(double rel = 1e-3, Index window = 10) {
        return {Kind::saturation, 0, rel, window};
    }
};

struct RankStage {
    std::vector<Index> ranks;
    StageTrigger trigger;
};

struct OptimizerConfig {
    Method method = Method::steepest;
    StepEstimator step_estimator = StepEstimator::exact_eval;
    Index max_iters = 200;
    /// Stop when ||g||_F ||q||_F <= grad_tol * scale, scale being the
    /// objective's natural magnitude (1 for J2, ||q||^2 for barJ2, ||q|| for J1/J12).
    double grad_tol = 1e-9;
    double objective_tol = 0.0;  ///< stop when the objective drops to this value
    double error_tol = 0.0;      ///< stop when the relative low-rank error drops below
    Index lbfgs_memory = 25;
    std::vector<RankStage> rank_schedule;  ///< empty: single stage with the initial ranks
    Index reproject_every = 10;            ///< interpolated shift mode only
    double violation_cap = 1e-6;           ///< relative to ||w q||_F, interpolated mode
    Index divergence_window = 5;
    Index max_svd_evals = 0;  ///< 0: unlimited

    void validate() const {
        if (max_iters < 1)
            throw DataError("max_iters must be at least 1");
        if (lbfgs_memory < 1)
            throw DataError("lbfgs_memory must be at least 1");
        for (const auto& s : rank_schedule)
            if (s.trigger.kind == StageTrigger::Kind::saturation &&
                !(s.trigger.rel_decrease > 0.0))
                throw DataError("saturation trigger needs a positive relative decrease");
    }
};

struct TraceRecord {
    Index iteration = 0;
    double objective = 0.0;
    double rel_error = 0.0;
    double grad_norm = 0.0;
    double constraint_violation = 0.0;
    Index svd_count = 0;
    double wall_time = 0.0;  ///< seconds since the start of the run
    Index stage = 0;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;

    /// First iteration at which the relative error is below `tol`, if any.
    std::optional<TraceRecord> first_below(double tol) const {
        for (const auto& r : records)
            if (r.rel_error < tol)
                return r;
        return std::nullopt;
    }
    const TraceRecord& last() const { return records.back(); }
};

enum class RunStatus { converged, max_iters, diverged, stalled };

inline const char* to_string(RunStatus s) {
    switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::diverged: return "diverged";
    case RunStatus::stalled: return "stalled";
    }
    return "?";
}

struct RunResult {
    Decomposition decomposition;
    ConvergenceTrace trace;
    RunStatus status = RunStatus::max_iters;
    std::string message;
};

struct StepResult {
    double step = 0.0;
    double value = 0.0;  ///< objective (or prediction) at `step`
    Index evals = 0;
    bool sampled = true;  ///< step is one of the evaluated trial points
};

/// Doubling search along a line followed by a parabolic fit through the last
/// three samples. `phi(eta)` returns the objective at step eta.
template <class Phi>
StepResult parabolic_step_search(Phi&& phi, double f0, double eta0,
                                 int max_halvings = 30, int max_doublings = 60) {
    if (!(eta0 > 0.0) || !std::isfinite(eta0))
        throw StationaryPoint("no usable initial step (zero direction?)");

    StepResult res;
    auto fit = [&](double ea, double fa, double eb, double fb, double ec, double fc) {
        // Best sample, then the vertex of the interpolating parabola if convex.
        StepResult best{eb, fb, res.evals, true};
        if (fa < best.value && ea > 0.0)
            best = {ea, fa, res.evals, true};
        if (fc < best.value)
            best = {ec, fc, res.evals, true};
        const double d1 = (fb - fa) / (eb - ea);
        const double d2 = (fc - fb) / (ec - eb);
        const double curvature = (d2 - d1) / (ec - ea);
        if (!(curvature > 0.0))
            return best;
        const double vertex = 0.5 * (ea + eb) - d1 / (2.0 * curvature);
        if (!(vertex > ea && vertex < ec) || !std::isfinite(vertex))
            return best;
        const double predicted = fb + d1 * (vertex - eb) +
                                 curvature * (vertex - ea) * (vertex - eb);
        return StepResult{vertex, predicted, res.evals, false};
    };

    double e1 = eta0;
    double f1 = phi(e1);
    ++res.evals;
    if (!(f1 < f0)) {
        double e2 = e1, f2 = f1;
        for (int h = 0; h < max_halvings; ++h) {
            e1 = 0.5 * e2;
            f1 = phi(e1);
            ++res.evals;
            if (f1 < f0)
                return fit(0.0, f0, e1, f1, e2, f2);
            e2 = e1;
            f2 = f1;
        }
        throw StationaryPoint("objective does not decrease along the direction");
    }

    double ea = 0.0, fa = f0, eb = e1, fb = f1;
    for (int k = 0; k < max_doublings; ++k) {
        const double ec = 2.0 * eb;
        const double fc = phi(ec);
        ++res.evals;
        if (!(fc < fb))
            return fit(ea, fa, eb, fb, ec, fc);
        ea = eb;
        fa = fb;
        eb = ec;
        fb = fc;
    }
    return {eb, fb, res.evals, true};
}

/// Objective, frame terms and (optionally) gradient at one point.
struct Point {
    std::vector<Matrix> frames;
    std::vector<FrameTerm> terms;
    double value = 0.0;
    std::vector<Matrix> grad;
};

/// Evaluates the objective of a problem for the current stage's ranks and
/// counts SVDs.
class Evaluator {
public:
    Evaluator(const Problem& problem, ObjectiveKind kind, SvdOptions opts = {})
        : problem_(problem), kind_(std::move(kind)), opts_(opts) {
        kind_.validate();
        if (kind_.ranks.size() != problem_.paths.size())
            throw DataError("objective needs one rank per frame");
    }

    const Problem& problem() const noexcept { return problem_; }
    const ObjectiveKind& kind() const noexcept { return kind_; }
    void set_ranks(std::vector<Index> ranks) { kind_.ranks = std::move(ranks); }
    Index svd_count() const noexcept { return stats_.svd_count; }
    EvalStats& stats() noexcept { return stats_; }

    Point evaluate(std::vector<Matrix> frames) {
        Point p;
        p.terms = frame_terms(frames, kind_, kind_.ranks, opts_, &stats_);
        p.value = total_value(p.terms, kind_);
        p.frames = std::move(frames);
        return p;
    }

    void add_gradient(Point& p) const {
        p.grad = assemble_gradient(problem_, p.frames, p.terms, kind_);
    }

    double rel_error(const Point& p) const {
        const double ref = problem_.data_norm();
        const double res = lowrank_residual(problem_, p.frames, p.terms).norm();
        return ref > 0.0 ? res / ref : res;
    }

    double violation(const Point& p) const {
        return constraint_violation(problem_.q, p.frames, problem_.paths,
                                    problem_.weights, problem_.shift);
    }

    /// Natural magnitude of the objective, used to make grad_tol scale-free.
    double scale() const {
        const double qn = problem_.data_norm();
        switch (kind_.type) {
        case ObjectiveType::J2: return 1.0;
        case ObjectiveType::barJ2: return qn * qn;
        case ObjectiveType::J1:
        case ObjectiveType::J12: return qn;
        }
        return 1.0;
    }

    /// First-order prediction of the objective along `dir` from the frame
    /// terms at `p`; no SVD is computed. Singular values move by
    /// δs = diag(U^T D V), the Frobenius norms are exact.
    struct Prediction {
        struct Frame {
            double norm_sq, fd, dd;    // n^2, <f,D>, <D,D>
            double tail, rd, tail_dd;  // ||R||^2, <R,D>, ||D||^2 - Σ δs^2
            Vector s, ds;
            Index rank, d;
        };
        std::vector<Frame> frames;
        ObjectiveKind kind;

        double operator()(double eta) const {
            double total = 0.0, pen = 0.0;
            for (const auto& f : frames) {
                const double n2 = f.norm_sq + 2.0 * eta * f.fd + eta * eta * f.dd;
                const double tail =
                    std::max(0.0, f.tail + 2.0 * eta * f.rd + eta * eta * f.tail_dd);
                pen += kind.penalty_form == PenaltyForm::squared ? n2 : std::sqrt(std::max(0.0, n2));
                switch (kind.type) {
                case ObjectiveType::J2: total += n2 > 0.0 ? tail / n2 : 0.0; break;
                case ObjectiveType::barJ2: total += tail; break;
                case ObjectiveType::J1:
                    total += (f.s + eta * f.ds).cwiseAbs().sum();
                    break;
                case ObjectiveType::J12: {
                    const Index r = std::min(f.rank, f.s.size());
                    total += (f.s.head(r) + eta * f.ds.head(r)).sum() +
                             std::sqrt(static_cast<double>(f.d - f.rank)) * std::sqrt(tail);
                    break;
                }
                }
            }
            return total + kind.penalty_epsilon * pen;
        }
    };

    Prediction predict(const Point& p, const std::vector<Matrix>& dir) const {
        Prediction pred;
        pred.kind = kind_;
        for (std::size_t k = 0; k < dir.size(); ++k) {
            const auto& t = p.terms[k];
            const Matrix& D = dir[k];
            Prediction::Frame f;
            f.norm_sq = t.norm_sq;
            f.fd = p.frames[k].cwiseProduct(D).sum();
            f.dd = D.squaredNorm();
            f.s = t.svd.S;
            f.ds = t.svd.size() ? singular_value_update(t.svd, D) : Vector();
            const Index r = std::min(t.rank, f.ds.size());
            f.tail = t.tail;
            f.rd = t.residual.cwiseProduct(D).sum();
            f.tail_dd = std::max(0.0, f.dd - f.ds.head(r).squaredNorm());
            f.rank = t.rank;
            f.d = std::min(D.rows(), D.cols());
            pred.frames.push_back(std::move(f));
        }
        return pred;
    }

private:
    const Problem& problem_;
    ObjectiveKind kind_;
    SvdOptions opts_;
    EvalStats stats_;
};

/// Step along `dir` from the parabolic search on exactly evaluated objective
/// values. Returns the accepted point; every trial costs one SVD per frame.
inline std::pair<StepResult, Point> step_parabolic(Evaluator& ev, const Point& at,
                                                   const std::vector<Matrix>& dir,
                                                   double eta0) {
    std::map<double, Point> cache;
    auto phi = [&](double eta) {
        Point p = ev.evaluate(axpy(at.frames, eta, dir));
        const double v = p.value;
        cache.emplace(eta, std::move(p));
        return v;
    };
    StepResult s = parabolic_step_search(phi, at.value, eta0);
    if (!s.sampled) {
        // The vertex is only a model minimum; keep the best evaluated point.
        Point p = ev.evaluate(axpy(at.frames, s.step, dir));
        ++s.evals;
        double best = p.value;
        double best_eta = s.step;
        for (auto& [eta, q] : cache)
            if (q.value < best) {
                best = q.value;
                best_eta = eta;
            }
        if (best_eta == s.step) {
            s.value = p.value;
            return {s, std::move(p)};
        }
        s.step = best_eta;
        s.value = best;
        s.sampled = true;
    }
    return {s, std::move(cache.at(s.step))};
}

/// Same search as step_parabolic on the first-order singular-value
/// prediction; performs no SVD.
inline StepResult step_cheap(const Evaluator& ev, const Point& at,
                             const std::vector<Matrix>& dir, double eta0) {
    const auto pred = ev.predict(at, dir);
    return parabolic_step_search(pred, at.value, eta0);
}

namespace detail {

// Weak Wolfe line search with cubic interpolation inside the bracket.
struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    std::optional<Point> point;
};

inline LineSearchResult wolfe_search(Evaluator& ev, const Point& at,
                                     const std::vector<Matrix>& dir, double t,
                                     double c1 = 1e-4, double c2 = 0.9,
                                     int max_evals = 30) {
    const double f0 = at.value;
    const double d0 = dot(at.grad, dir);
    double lo = 0.0, flo = f0, dlo = d0;
    double hi = std::numeric_limits<double>::infinity(), fhi = 0.0, dhi = 0.0;
    LineSearchResult out;
    std::optional<Point> best;

    for (int it = 0; it < max_evals; ++it) {
        Point p = ev.evaluate(axpy(at.frames, t, dir));
        ev.add_gradient(p);
        const double ft = p.value;
        const double dt = dot(p.grad, dir);
        if (std::isfinite(ft) && ft < f0 && (!best || ft < best->value)) {
            best = p;
            out.step = t;
        }
        if (!std::isfinite(ft) || ft > f0 + c1 * t * d0) {
            hi = t;
            fhi = ft;
            dhi = dt;
        } else if (dt < c2 * d0) {
            lo = t;
            flo = ft;
            dlo = dt;
        } else {
            out.ok = true;
            out.step = t;
            out.point = std::move(p);
            return out;
        }
        if (!std::isfinite(hi)) {
            t = 2.0 * t;
            continue;
        }
        // Cubic minimiser between lo and hi, safeguarded towards the middle.
        double next = 0.5 * (lo + hi);
        if (std::isfinite(fhi)) {
            const double d1 = dlo + dhi - 3.0 * (flo - fhi) / (lo - hi);
            const double disc = d1 * d1 - dlo * dhi;
            if (disc >= 0.0) {
                const double d2 = std::copysign(std::sqrt(disc), hi - lo);
                const double denom = dhi - dlo + 2.0 * d2;
                if (denom != 0.0) {
                    const double c = hi - (hi - lo) * (dhi + d2 - d1) / denom;
                    if (std::isfinite(c))
                        next = c;
                }
            }
        }
        const double width = hi - lo;
        next = std::clamp(next, lo + 0.1 * width, hi - 0.1 * width);
        t = next;
        if (width <= 1e-16 * std::max(1.0, hi))
            break;
    }
    out.point = std::move(best);
    return out;
}

}  // namespace detail

/// Minimize the objective from `start` (which should satisfy the
/// reconstruction constraint). Updates stay in the span of redistributed
/// gradients, so the constraint is preserved in exact shift mode.
inline RunResult run(const Problem& problem, const Decomposition& start,
                     const ObjectiveKind& kind_in, const OptimizerConfig& cfg,
                     const SvdOptions& svd_opts = {}) {
    cfg.validate();
    check_matching(problem.q, start, problem.weights);

    std::vector<RankStage> stages = cfg.rank_schedule;
    if (stages.empty()) {
        RankStage only;
        only.ranks = kind_in.ranks.empty() ? start.ranks : kind_in.ranks;
        stages.push_back(only);
    }
    for (const auto& s : stages)
        if (s.ranks.size() != start.frames.size())
            throw DataError("rank stage does not match the number of frames");

    ObjectiveKind kind = kind_in;
    kind.ranks = stages.front().ranks;
    Evaluator ev(problem, kind, svd_opts);

    const auto t_start = std::chrono::steady_clock::now();
    const double qn = problem.data_norm();
    const bool interpolated = problem.shift.mode == ShiftMode::interpolated;

    RunResult result;
    Point cur = ev.evaluate(detail::frame_values(start));
    ev.add_gradient(cur);

    std::deque<std::pair<std::vector<Matrix>, std::vector<Matrix>>> memory;
    std::size_t stage = 0;
    Index stage_begin = 0;
    Index rising = 0;
    bool fresh_direction = true;

    auto finish = [&](RunStatus status, std::string msg) {
        result.status = status;
        result.message = std::move(msg);
    };

    auto reproject = [&] {
        for (int pass = 0; pass < 3; ++pass) {
            cur.frames = project_frames(cur.frames, problem.q, problem.paths,
                                        problem.weights, problem.shift);
            cur = ev.evaluate(std::move(cur.frames));
            if (ev.violation(cur) <= 0.1 * cfg.violation_cap * qn)
                break;
        }
        ev.add_gradient(cur);
        memory.clear();
        fresh_direction = true;
    };

    if (interpolated && ev.violation(cur) > cfg.violation_cap * qn)
        reproject();

    for (Index it = 0;; ++it) {
        const double gnorm = norm(cur.grad);
        TraceRecord rec;
        rec.iteration = it;
        rec.objective = cur.value;
        rec.rel_error = ev.rel_error(cur);
        rec.grad_norm = gnorm;
        rec.constraint_violation = ev.violation(cur);
        rec.svd_count = ev.svd_count();
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        rec.stage = static_cast<Index>(stage);
        result.trace.records.push_back(rec);

        // Divergence: objective rising over consecutive iterations.
        if (it > 0) {
            const auto& prev = result.trace.records[result.trace.records.size() - 2];
            rising = rec.objective > prev.objective && prev.stage == rec.stage ? rising + 1 : 0;
            if (rising >= cfg.divergence_window) {
                finish(RunStatus::diverged, "objective increased over " +
                                                std::to_string(rising) + " iterations");
                break;
            }
        }

        const bool last_stage = stage + 1 == stages.size();
        const bool converged =
            gnorm * qn <= cfg.grad_tol * ev.scale() ||
            (cfg.objective_tol > 0.0 && cur.value <= cfg.objective_tol) ||
            (cfg.error_tol > 0.0 && rec.rel_error < cfg.error_tol);

        bool advance = !last_stage && converged;
        if (!last_stage && !advance) {
            const auto& trig = stages[stage].trigger;
            const Index in_stage = it - stage_begin;
            if (trig.kind == StageTrigger::Kind::iterations) {
                advance = in_stage >= trig.iterations;
            } else if (in_stage >= trig.window) {
                const double before =
                    result.trace.records[result.trace.records.size() - 1 - trig.window].objective;
                advance = before - cur.value <= trig.rel_decrease * std::abs(before);
            }
        }
        if (advance) {
            ++stage;
            stage_begin = it;
            ev.set_ranks(stages[stage].ranks);
            cur = ev.evaluate(std::move(cur.frames));
            ev.add_gradient(cur);
            memory.clear();
            fresh_direction = true;
            rising = 0;
            continue;
        }
        if (converged) {
            finish(RunStatus::converged, "converged");
            break;
        }
        if (it >= cfg.max_iters) {
            finish(RunStatus::max_iters, "iteration limit reached");
            break;
        }
        if (cfg.max_svd_evals > 0 && ev.svd_count() >= cfg.max_svd_evals) {
            finish(RunStatus::max_iters, "SVD evaluation budget exhausted");
            break;
        }

        if (cfg.method == Method::steepest) {
            const std::vector<Matrix> dir = scaled(cur.grad, -1.0);
            const double eta0 = 0.1 * problem.q.values.norm() / gnorm;
            try {
                std::optional<Point> next;
                double eta = 0.0;
                if (cfg.step_estimator == StepEstimator::exact_eval) {
                    auto [s, p] = step_parabolic(ev, cur, dir, eta0);
                    eta = s.step;
                    next = std::move(p);
                } else {
                    eta = step_cheap(ev, cur, dir, eta0).step;
                    next = ev.evaluate(axpy(cur.frames, eta, dir));
                }
                // Guard: the accepted step must decrease the true objective.
                int halvings = 0;
                while (!(next->value < cur.value) && halvings < 30) {
                    eta *= 0.5;
                    next = ev.evaluate(axpy(cur.frames, eta, dir));
                    ++halvings;
                }
                if (!(next->value < cur.value)) {
                    finish(RunStatus::stalled, "no decrease along the gradient");
                    break;
                }
                cur = std::move(*next);
                ev.add_gradient(cur);
            } catch (const StationaryPoint& e) {
                finish(RunStatus::stalled, e.what());
                break;
            }
        } else {
            // Two-loop recursion over the flattened frame variables.
            std::vector<Matrix> d = scaled(cur.grad, -1.0);
            std::vector<double> alpha(memory.size());
            for (std::size_t i = memory.size(); i-- > 0;) {
                const auto& [s, y] = memory[i];
                alpha[i] = dot(s, d) / dot(y, s);
                d = axpy(d, -alpha[i], y);
            }
            if (!memory.empty()) {
                const auto& [s, y] = memory.back();
                d = scaled(d, dot(s, y) / dot(y, y));
            }
            for (std::size_t i = 0; i < memory.size(); ++i) {
                const auto& [s, y] = memory[i];
                const double beta = dot(y, d) / dot(y, s);
                d = axpy(d, alpha[i] - beta, s);
            }
            if (!(dot(d, cur.grad) < 0.0)) {
                memory.clear();
                d = scaled(cur.grad, -1.0);
                fresh_direction = true;
            }
            const double t0 = fresh_direction ? 0.1 * problem.q.values.norm() / norm(d) : 1.0;
            auto ls = detail::wolfe_search(ev, cur, d, t0);
            if (!ls.point) {
                if (fresh_direction) {
                    finish(RunStatus::stalled, "line search found no decrease");
                    break;
                }
                memory.clear();
                fresh_direction = true;
                continue;
            }
            Point next = std::move(*ls.point);
            std::vector<Matrix> s = axpy(next.frames, -1.0, cur.frames);
            std::vector<Matrix> y = axpy(next.grad, -1.0, cur.grad);
            const double sy = dot(s, y);
            if (ls.ok && sy > 1e-12 * norm(s) * norm(y)) {
                memory.emplace_back(std::move(s), std::move(y));
                if (static_cast<Index>(memory.size()) > cfg.lbfgs_memory)
                    memory.pop_front();
                fresh_direction = false;
            } else {
                memory.clear();
                fresh_direction = true;
            }
            cur = std::move(next);
        }

        if (interpolated) {
            const Index since = it + 1 - stage_begin;
            if ((cfg.reproject_every > 0 && since % cfg.reproject_every == 0) ||
                ev.violation(cur) > 0.5 * cfg.violation_cap * qn)
                reproject();
        }
    }

    result.decomposition = start;
    for (std::size_t k = 0; k < cur.frames.size(); ++k)
        result.decomposition.frames[k].values = std::move(cur.frames[k]);
    result.decomposition.ranks = stages[stage].ranks;
    return result;
}

}  // namespace spod
