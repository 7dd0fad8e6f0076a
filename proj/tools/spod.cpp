// spod command-line tool: generate data, decompose, check gradients, POD, report.

#include "spod/spod.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <regex>
#include <random>
#include <sstream>
#include <string>
#include <vector>


namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace spod;

namespace {

enum Exit : int { ok = 0, usage = 1, data = 2, not_converged = 3, diverged = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

json default_config() {
    return json::parse(R"({
      "input": {},
      "grid": {"length": 0, "time": 0, "periodic": false},
      "paths": {},
      "objective": {"kind": "J2", "ranks": [], "penalty_epsilon": 0.0,
                    "penalty_form": "squared", "zero_singular_tol": 1e-10},
      "optimizer": {"method": "steepest", "step_estimator": "svd_update",
                    "max_iters": 200, "grad_tol": 1e-9, "objective_tol": 0.0,
                    "error_tol": 0.0, "lbfgs_memory": 25, "rank_schedule": [],
                    "reproject_every": 10, "violation_cap": 1e-6,
                    "max_svd_evals": 0},
      "shift": {"mode": "interpolated", "order": 2},
      "extension": {"fill": "replicate", "margin": 0},
      "output": {"dir": "spod_out", "format": "csv",
                 "emit": {"matrices": true, "spectra": true, "trace": true, "report": true}}
    })");
}

// Parse the right-hand side of --set: JSON when it parses, else a string.
json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

void set_key(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError("--set expects key.path=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    json::json_pointer ptr("/" + std::regex_replace(key, std::regex("\\."), "/"));
    cfg[ptr] = parse_value(assignment.substr(eq + 1));
}

json load_config(const std::string& file) {
    json cfg = default_config();
    if (file.empty())
        return cfg;
    std::ifstream in(file);
    if (!in)
        throw DataError("cannot read config " + file);
    json user;
    try {
        user = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("config " + file + ": " + e.what());
    }
    cfg.merge_patch(user);
    return cfg;
}

std::vector<Index> ranks_from(const json& j) {
    std::vector<Index> r;
    for (const auto& v : j)
        r.push_back(v.get<Index>());
    return r;
}

ShiftConfig shift_from(const json& j) {
    ShiftConfig c;
    const std::string mode = j.value("mode", "interpolated");
    if (mode == "exact")
        c.mode = ShiftMode::exact;
    else if (mode != "interpolated")
        throw UsageError("shift.mode must be exact or interpolated");
    c.order = j.value("order", 2);
    c.validate();
    return c;
}

ObjectiveKind objective_from(const json& j) {
    ObjectiveKind k;
    k.type = objective_from_string(j.value("kind", "J2"));
    k.ranks = ranks_from(j.value("ranks", json::array()));
    k.penalty_epsilon = j.value("penalty_epsilon", 0.0);
    k.penalty_form = penalty_form_from_string(j.value("penalty_form", "squared"));
    k.zero_singular_tol = j.value("zero_singular_tol", 1e-10);
    k.validate();
    return k;
}

OptimizerConfig optimizer_from(const json& j) {
    OptimizerConfig c;
    const std::string method = j.value("method", "steepest");
    if (method == "lbfgs")
        c.method = Method::lbfgs;
    else if (method != "steepest")
        throw UsageError("optimizer.method must be steepest or lbfgs");
    const std::string step = j.value("step_estimator", "svd_update");
    if (step == "exact_eval")
        c.step_estimator = StepEstimator::exact_eval;
    else if (step != "svd_update")
        throw UsageError("optimizer.step_estimator must be exact_eval or svd_update");
    c.max_iters = j.value("max_iters", Index{200});
    c.grad_tol = j.value("grad_tol", 1e-9);
    c.objective_tol = j.value("objective_tol", 0.0);
    c.error_tol = j.value("error_tol", 0.0);
    c.lbfgs_memory = j.value("lbfgs_memory", Index{25});
    c.reproject_every = j.value("reproject_every", Index{10});
    c.violation_cap = j.value("violation_cap", 1e-6);
    c.max_svd_evals = j.value("max_svd_evals", Index{0});
    for (const auto& s : j.value("rank_schedule", json::array())) {
        RankStage stage;
        stage.ranks = ranks_from(s.at("ranks"));
        const json trig = s.value("trigger", json::object());
        if (trig.contains("iterations")) {
            stage.trigger = StageTrigger::after(trig.at("iterations").get<Index>());
        } else {
            const json sat = trig.value("saturation", json::object());
            stage.trigger = StageTrigger::saturation(sat.value("rel_decrease", 1e-3),
                                                     sat.value("window", Index{10}));
        }
        c.rank_schedule.push_back(stage);
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Generators shared by `generate` and generator inputs of `decompose`.

struct Generated {
    SnapshotField field;                  // original domain
    std::vector<FramePath> paths;
    std::optional<Decomposition> truth;   // frames on the generator grid
};

Generated run_generator(const json& g) {
    const std::string name = g.at("name").get<std::string>();
    const Index m = g.value("m", Index{100});
    const double length = g.value("length", 2.0 * std::numbers::pi);
    const double time = g.value("time", 0.0);
    Generated out;
    if (name == "two-wave" || name == "two-wave-diffusive") {
        const Index n = g.value("n", Index{50});
        GeneratedCase c = name == "two-wave"
                              ? gen_two_wave(m, n, length, time)
                              : gen_two_wave_diffusive(m, n, length, time,
                                                       g.value("mu", std::numeric_limits<double>::quiet_NaN()));
        out.field = c.field;
        out.paths = c.truth.paths;
        out.truth = std::move(c.truth);
    } else if (name == "leaving" || name == "reflected") {
        BoundaryCase c = gen_boundary_case(boundary_kind_from_string(name), m,
                                           g.value("n", Index{0}), length, time);
        out.field = c.field;
        out.paths = c.paths;
    } else if (name == "identity") {
        const Index d = g.value("d", Index{50});
        out.field = gen_identity(d);
        out.paths = {identity_path(out.field.grid)};
    } else if (name == "surrogate") {
        SurrogateSpec s;
        s.m = g.value("m", s.m);
        s.n = g.value("n", s.n);
        s.static_rank = g.value("static_rank", s.static_rank);
        if (g.contains("velocities"))
            s.velocities = g.at("velocities").get<std::vector<double>>();
        s.edge_width = g.value("edge_width", s.edge_width);
        GeneratedCase c = gen_multifront_surrogate(s);
        out.field = c.field;
        out.paths = c.truth.paths;
        out.truth = std::move(c.truth);
    } else {
        throw UsageError("unknown generator '" + name +
                         "' (two-wave, two-wave-diffusive, leaving, reflected, identity, surrogate)");
    }
    return out;
}

std::string matrix_ext(const json& cfg) {
    const std::string f = cfg.at("output").value("format", "csv");
    if (f == "csv")
        return ".csv";
    if (f == "bin" || f == "binary")
        return ".bin";
    throw UsageError("output.format must be csv or bin");
}

json grid_json(const GridSpec& g) {
    return {{"m", g.m}, {"n", g.n}, {"dx", g.dx}, {"dt", g.dt}, {"length", g.length},
            {"periodic", g.periodic}, {"ext_left", g.ext_left}, {"ext_right", g.ext_right}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.m = j.at("m");
    g.n = j.at("n");
    g.dx = j.at("dx");
    g.dt = j.at("dt");
    g.length = j.at("length");
    g.periodic = j.at("periodic");
    g.ext_left = j.value("ext_left", Index{0});
    g.ext_right = j.value("ext_right", Index{0});
    g.validate();
    return g;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out)
        throw DataError("cannot write " + p.string());
    out << std::setw(2) << j << '\n';
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p))
        throw DataError("cannot create output directory " + dir);
    return p;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_generate(const std::string& name, const json& params, const std::string& dir,
                 const std::string& format) {
    json g = params;
    g["name"] = name;
    const Generated gen = run_generator(g);
    const fs::path out = prepare_dir(dir);
    const std::string ext = format == "bin" ? ".bin" : ".csv";
    io::write_matrix(out / ("q" + ext), gen.field.values);
    io::write_paths(out / "paths.csv", gen.paths);
    if (gen.truth)
        for (std::size_t k = 0; k < gen.truth->frames.size(); ++k)
            io::write_matrix(out / ("truth_" + std::to_string(k) + ext),
                             gen.truth->frames[k].values);
    write_json(out / "grid.json", grid_json(gen.field.grid));
    std::cout << "wrote " << gen.field.rows() << "x" << gen.field.cols() << " field to "
              << out.string() << "\n";
    return ok;
}

struct LoadedInput {
    SnapshotField field;
    std::vector<FramePath> generator_paths;
};

LoadedInput load_input(const json& cfg) {
    const json& in = cfg.at("input");
    const bool has_file = in.contains("file");
    const bool has_gen = in.contains("generator");
    if (has_file == has_gen)
        throw UsageError("config needs exactly one of input.file or input.generator");
    LoadedInput out;
    if (has_gen) {
        Generated g = run_generator(in.at("generator"));
        out.field = std::move(g.field);
        out.generator_paths = std::move(g.paths);
        return out;
    }
    const Matrix q = io::read_matrix(in.at("file").get<std::string>());
    const json& gj = cfg.at("grid");
    const double length = gj.value("length", 0.0);
    const double time = gj.value("time", 0.0);
    const bool periodic = gj.value("periodic", false);
    GridSpec g = GridSpec::uniform(q.rows(), q.cols(),
                                   length > 0.0 ? length : static_cast<double>(q.rows()),
                                   time > 0.0 ? time : static_cast<double>(q.cols() - 1),
                                   periodic);
    out.field = SnapshotField(g, q);
    return out;
}

std::vector<FramePath> load_paths(const json& cfg, const LoadedInput& in) {
    const json& p = cfg.at("paths");
    int sources = 0;
    for (const char* key : {"file", "velocities", "detector", "generator"})
        sources += p.contains(key) ? 1 : 0;
    if (sources == 0 && !in.generator_paths.empty())
        return in.generator_paths;
    if (sources != 1)
        throw UsageError("config needs exactly one path source: paths.file, paths.velocities, "
                         "paths.detector or paths.generator");
    if (p.contains("file"))
        return io::read_paths(p.at("file").get<std::string>());
    if (p.contains("generator")) {
        if (in.generator_paths.empty())
            throw UsageError("paths.generator needs a generator input");
        return in.generator_paths;
    }
    if (p.contains("velocities")) {
        std::vector<FramePath> out;
        for (const auto& v : p.at("velocities"))
            out.push_back(FramePath::constant_velocity(v.get<double>(), in.field.grid,
                                                       "c=" + std::to_string(v.get<double>())));
        return out;
    }
    std::vector<FramePath> out;
    for (const auto& d : p.at("detector")) {
        FrontDetector det = d.value("mode", "peak") == "threshold"
                                ? FrontDetector::threshold(
                                      d.value("level", 0.5),
                                      d.value("direction", "rising") == "falling"
                                          ? FrontDetector::Direction::falling
                                          : FrontDetector::Direction::rising)
                                : FrontDetector::peak();
        if (d.contains("window")) {
            const auto w = d.at("window").get<std::vector<Index>>();
            if (w.size() != 2)
                throw UsageError("detector window must be [first, last)");
            det = det.within(w[0], w[1], in.field.grid.n);
        }
        out.push_back(detect_front_path(in.field, det));
    }
    return out;
}

ExtensionFill fill_from(const json& j) {
    const json f = j.value("fill", json("replicate"));
    if (f.is_number())
        return ExtensionFill::constant(f.get<double>());
    const std::string s = f.get<std::string>();
    if (s == "replicate")
        return ExtensionFill::replicate();
    if (s == "zero")
        return ExtensionFill::constant(0.0);
    throw UsageError("extension.fill must be replicate, zero or a number");
}

json summary_json(const ReportSummary& rep, const Decomposition& d) {
    json frames = json::array();
    for (std::size_t k = 0; k < d.frames.size(); ++k) {
        const Vector& s = rep.spectra[k];
        frames.push_back({{"label", d.paths[k].label},
                          {"rank", d.ranks[k]},
                          {"norm", d.frames[k].values.norm()},
                          {"leading_singular_values",
                           std::vector<double>(s.data(), s.data() + std::min<Index>(s.size(), 10))}});
    }
    return {{"rel_error", rep.rel_error},
            {"pod_rel_error", rep.pod_rel_error},
            {"total_rank", rep.total_rank},
            {"constraint_violation", rep.constraint_violation},
            {"frames", frames}};
}

void emit_decomposition(const fs::path& out, const std::string& ext, const json& emit,
                        const Decomposition& d, const SnapshotField& q, const ReportSummary& rep) {
    if (emit.value("matrices", true)) {
        for (std::size_t k = 0; k < d.frames.size(); ++k) {
            io::write_matrix(out / ("frame_" + std::to_string(k) + ext), d.frames[k].values);
            io::write_matrix(out / ("lab_" + std::to_string(k) + ext), rep.lab_views[k]);
        }
        io::write_matrix(out / ("data" + ext), q.values);
        io::write_paths(out / "paths.csv", d.paths);
    }
    if (emit.value("spectra", true))
        for (std::size_t k = 0; k < d.frames.size(); ++k)
            io::write_csv(out / ("spectrum_" + std::to_string(k) + ".csv"), rep.spectra[k]);
}

int cmd_decompose(json cfg) {
    const LoadedInput in = load_input(cfg);
    std::vector<FramePath> paths = load_paths(cfg, in);
    const ShiftConfig shift = shift_from(cfg.at("shift"));
    ObjectiveKind kind = objective_from(cfg.at("objective"));
    const OptimizerConfig opt = optimizer_from(cfg.at("optimizer"));
    if (kind.ranks.empty())
        kind.ranks.assign(paths.size(), 1);
    if (kind.ranks.size() != paths.size())
        throw DataError("objective.ranks has " + std::to_string(kind.ranks.size()) +
                        " entries for " + std::to_string(paths.size()) + " frames");

    const json& ext = cfg.at("extension");
    const SnapshotField q = extend_domain(in.field, paths, fill_from(ext), shift,
                                          ext.value("margin", Index{0}));
    const Problem problem = Problem::make(q, paths, shift);
    const Decomposition start = initial_guess(q, paths, shift, kind.ranks);
    RunResult result = run(problem, start, kind, opt);

    const ReportSummary rep = report(result.decomposition, q, problem.weights, shift);
    const fs::path out = prepare_dir(cfg.at("output").value("dir", "spod_out"));
    const std::string mext = matrix_ext(cfg);
    const json emit = cfg.at("output").value("emit", json::object());
    emit_decomposition(out, mext, emit, result.decomposition, q, rep);
    if (emit.value("trace", true))
        io::write_trace(out / "trace.jsonl", result.trace);

    const auto& last = result.trace.last();
    json summary = summary_json(rep, result.decomposition);
    summary["status"] = to_string(result.status);
    summary["message"] = result.message;
    summary["iterations"] = last.iteration;
    summary["svd_count"] = last.svd_count;
    summary["objective"] = last.objective;
    summary["objective_kind"] = to_string(kind.type);
    if (emit.value("report", true)) {
        write_json(out / "report.json", summary);
        json run_info = {{"grid", grid_json(q.grid)},
                         {"ranks", result.decomposition.ranks},
                         {"shift", cfg.at("shift")},
                         {"format", cfg.at("output").value("format", "csv")}};
        write_json(out / "run.json", run_info);
    }
    write_json(out / "config.json", cfg);

    std::cout << "status " << summary["status"].get<std::string>() << ", "
              << last.iteration << " iterations, " << last.svd_count << " SVDs\n"
              << "relative error " << rep.rel_error << " (POD at rank " << rep.total_rank
              << ": " << rep.pod_rel_error << ")\n";
    for (const auto& w : eval(problem, result.decomposition, kind).warnings)
        std::cerr << "warning: " << w << "\n";

    switch (result.status) {
    case RunStatus::converged: return ok;
    case RunStatus::diverged: return diverged;
    default: return not_converged;
    }
}

int cmd_gradcheck(Index instances, std::uint64_t seed, Index max_m, Index max_n,
                  const std::vector<std::string>& kinds) {
    if (max_m > 64 || max_n > 64)
        throw UsageError("gradcheck is meant for small instances (dims <= 64)");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> dm(std::max<Index>(6, max_m / 2), max_m);
    std::uniform_int_distribution<Index> dn(std::max<Index>(6, max_n / 2), max_n);
    std::uniform_int_distribution<Index> dk(1, 3);
    std::bernoulli_distribution extended(0.5);

    std::vector<ObjectiveType> types;
    for (const auto& k : kinds)
        types.push_back(objective_from_string(k));
    std::vector<double> worst(types.size(), 0.0);
    std::vector<Index> skipped(types.size(), 0);

    for (Index i = 0; i < instances; ++i) {
        const Index K = dk(rng);
        // A single frame only has free directions on an extended grid.
        const bool ext = K == 1 || extended(rng);
        const GradcheckCase c = random_gradcheck_case(rng, dm(rng), dn(rng), K, ext);
        for (std::size_t t = 0; t < types.size(); ++t) {
            ObjectiveKind kind;
            kind.type = types[t];
            const GradcheckResult r = gradcheck(c, kind, 1e-6, 256, seed + static_cast<std::uint64_t>(i));
            if (r.skipped)
                ++skipped[t];
            else
                worst[t] = std::max(worst[t], r.rel_error);
        }
    }
    bool pass = true;
    for (std::size_t t = 0; t < types.size(); ++t) {
        const bool good = worst[t] < 1e-5;
        pass = pass && good;
        std::cout << to_string(types[t]) << ": max relative error " << worst[t]
                  << (skipped[t] ? " (" + std::to_string(skipped[t]) + " skipped: non-smooth)" : "")
                  << (good ? " ok" : " FAIL") << "\n";
    }
    return pass ? ok : data;
}

int cmd_pod(const std::string& input, Index rank, const std::string& dir) {
    const Matrix q = io::read_matrix(input);
    const PodResult pod = pod_baseline(q, rank);
    std::cout << "POD rank " << rank << ": relative error " << std::setprecision(17)
              << pod.rel_error << "\n";
    if (!dir.empty()) {
        const fs::path out = prepare_dir(dir);
        io::write_csv(out / "pod_modes.csv", pod.modes.U);
        io::write_csv(out / "pod_singular_values.csv", pod.modes.S);
        write_json(out / "pod.json", {{"rank", rank}, {"rel_error", pod.rel_error}});
    }
    return ok;
}

int cmd_report(const std::string& dir) {
    const fs::path in(dir);
    std::ifstream f(in / "run.json");
    if (!f)
        throw DataError("no run.json in " + dir);
    const json info = json::parse(f);
    const GridSpec g = grid_from_json(info.at("grid"));
    const std::string ext = info.value("format", "csv") == "csv" ? ".csv" : ".bin";
    const ShiftConfig shift = shift_from(info.at("shift"));
    Decomposition d;
    d.paths = io::read_paths(in / "paths.csv");
    d.ranks = ranks_from(info.at("ranks"));
    for (std::size_t k = 0; k < d.paths.size(); ++k)
        d.frames.emplace_back(g, io::read_matrix(in / ("frame_" + std::to_string(k) + ext)));
    const SnapshotField q(g, io::read_matrix(in / ("data" + ext)));
    const ReportSummary rep = report(d, q, WeightMask::for_grid(g), shift);
    std::cout << std::setw(2) << summary_json(rep, d) << "\n";
    return ok;
}

void apply_threads() {
    if (const char* env = std::getenv("SPOD_NUM_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1)
            throw UsageError("SPOD_NUM_THREADS must be a positive integer");
        // Only takes effect when Eigen is built with OpenMP.
        Eigen::setNbThreads(n);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-frame low-rank decomposition of space-time snapshot data"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
    std::string gen_name, gen_dir = "spod_data", gen_format = "csv";
    std::optional<Index> g_m, g_n, g_d;
    std::optional<double> g_len, g_time, g_mu;
    gen->add_option("name", gen_name,
                    "two-wave, two-wave-diffusive, leaving, reflected, identity, surrogate")
        ->required();
    gen->add_option("--m", g_m, "spatial points");
    gen->add_option("--n", g_n, "time steps");
    gen->add_option("--d", g_d, "identity size");
    gen->add_option("--length", g_len, "domain length");
    gen->add_option("--time", g_time, "total time span");
    gen->add_option("--mu", g_mu, "diffusion constant");
    gen->add_option("--out", gen_dir, "output directory");
    gen->add_option("--format", gen_format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));

    // decompose
    auto* dec = app.add_subcommand("decompose", "Run the decomposition described by a config");
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::string> d_input, d_paths, d_kind, d_method, d_step, d_out, d_shift, d_fill,
        d_format;
    std::optional<std::vector<Index>> d_ranks;
    std::optional<Index> d_iters;
    std::optional<double> d_eps;
    dec->add_option("-c,--config", config_file, "JSON config file");
    dec->add_option("--set", sets, "override any config key: key.path=value (repeatable)");
    dec->add_option("--input", d_input, "matrix file (sets input.file)");
    dec->add_option("--paths", d_paths, "path CSV file (sets paths.file)");
    dec->add_option("--objective", d_kind, "J2, barJ2, J1 or J12");
    dec->add_option("--ranks", d_ranks, "per-frame ranks")->delimiter(',');
    dec->add_option("--method", d_method, "steepest or lbfgs");
    dec->add_option("--step", d_step, "exact_eval or svd_update");
    dec->add_option("--max-iters", d_iters, "iteration limit");
    dec->add_option("--epsilon", d_eps, "norm penalty weight");
    dec->add_option("--shift-mode", d_shift, "exact or interpolated");
    dec->add_option("--fill", d_fill, "extension fill: replicate, zero or a number");
    dec->add_option("--format", d_format, "csv or bin");
    dec->add_option("--out", d_out, "output directory");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Compare gradients with finite differences");
    Index gc_instances = 20, gc_m = 30, gc_n = 20;
    std::uint64_t gc_seed = 1;
    std::vector<std::string> gc_kinds{"J2", "barJ2", "J1", "J12"};
    gc->add_option("--instances", gc_instances, "random instances");
    gc->add_option("--seed", gc_seed, "random seed");
    gc->add_option("--m", gc_m, "largest spatial size");
    gc->add_option("--n", gc_n, "largest temporal size");
    gc->add_option("--kinds", gc_kinds, "objective kinds")->delimiter(',');

    // pod
    auto* pod = app.add_subcommand("pod", "Truncated SVD baseline of a matrix file");
    std::string pod_input, pod_dir;
    Index pod_rank = 1;
    pod->add_option("input", pod_input, "matrix file")->required();
    pod->add_option("-r,--rank", pod_rank, "rank")->required();
    pod->add_option("--out", pod_dir, "write modes and summary here");

    // report
    auto* rep = app.add_subcommand("report", "Recompute the summary of a decompose output");
    std::string rep_dir;
    rep->add_option("dir", rep_dir, "decompose output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    try {
        apply_threads();
        if (*gen) {
            json params = json::object();
            if (g_m) params["m"] = *g_m;
            if (g_n) params["n"] = *g_n;
            if (g_d) params["d"] = *g_d;
            if (g_len) params["length"] = *g_len;
            if (g_time) params["time"] = *g_time;
            if (g_mu) params["mu"] = *g_mu;
            return cmd_generate(gen_name, params, gen_dir, gen_format);
        }
        if (*dec) {
            json cfg = load_config(config_file);
            if (d_input) cfg["input"] = {{"file", *d_input}};
            if (d_paths) cfg["paths"] = {{"file", *d_paths}};
            if (d_kind) cfg["objective"]["kind"] = *d_kind;
            if (d_ranks) cfg["objective"]["ranks"] = *d_ranks;
            if (d_method) cfg["optimizer"]["method"] = *d_method;
            if (d_step) cfg["optimizer"]["step_estimator"] = *d_step;
            if (d_iters) cfg["optimizer"]["max_iters"] = *d_iters;
            if (d_eps) cfg["objective"]["penalty_epsilon"] = *d_eps;
            if (d_shift) cfg["shift"]["mode"] = *d_shift;
            if (d_fill) cfg["extension"]["fill"] = parse_value(*d_fill);
            if (d_format) cfg["output"]["format"] = *d_format;
            if (d_out) cfg["output"]["dir"] = *d_out;
            for (const auto& s : sets)
                set_key(cfg, s);
            return cmd_decompose(std::move(cfg));
        }
        if (*gc)
            return cmd_gradcheck(gc_instances, gc_seed, gc_m, gc_n, gc_kinds);
        if (*pod)
            return cmd_pod(pod_input, pod_rank, pod_dir);
        if (*rep)
            return cmd_report(rep_dir);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return usage;
    } catch (const StationaryPoint& e) {
        std::cerr << "optimizer: " << e.what() << "\n";
        return not_converged;
    }
    return usage;
}
