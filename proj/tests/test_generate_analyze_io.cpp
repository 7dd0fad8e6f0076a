#include "spod/analyze.hpp"
#include "spod/generate.hpp"
#include "spod/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <Eigen/SVD>

#include <filesystem>
#include <fstream>
#include <random>

using namespace spod;
namespace fs = std::filesystem;

namespace {

const ShiftConfig exact{2, ShiftMode::exact};

Vector spectrum(const Matrix& a) { return Eigen::JacobiSVD<Matrix>(a).singularValues(); }

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("spod_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Lab sum of the truth frames against the generated field.
double truth_mismatch(const GeneratedCase& c) {
    std::vector<Matrix> frames;
    for (const auto& f : c.truth.frames)
        frames.push_back(f.values);
    return (lab_sum(frames, c.truth.paths, c.field.grid, exact) - c.field.values).norm() /
           c.field.values.norm();
}

}  // namespace

TEST(Generate, TwoWaveFramesAreRankOne) {
    const GeneratedCase c = gen_two_wave();
    EXPECT_EQ(c.field.rows(), 100);
    EXPECT_EQ(c.field.cols(), 50);
    EXPECT_LT(truth_mismatch(c), 1e-14);
    for (const auto& f : c.truth.frames) {
        const Vector s = spectrum(f.values);
        EXPECT_LT(s[1] / s[0], 1e-12);
    }
    // Two rank-one frames do not make a rank-two lab field.
    const Vector s = spectrum(c.field.values);
    EXPECT_GT(s[2] / s[0], 1e-2);
}

TEST(Generate, DiffusiveFramesAreRankTwo) {
    const GeneratedCase c = gen_two_wave_diffusive();
    EXPECT_LT(truth_mismatch(c), 1e-14);
    for (const auto& f : c.truth.frames) {
        const Vector s = spectrum(f.values);
        EXPECT_GT(s[1] / s[0], 1e-3);
        EXPECT_LT(s[2] / s[0], 1e-12);
    }
    // The diffusive term reaches 30 % of the pulse amplitude at the end.
    const GridSpec& g = c.field.grid;
    const double T = g.t(g.n - 1);
    const double sigma = 0.06 * g.length;
    EXPECT_NEAR(T * default_mu(g.length, T) * 0.5 * 2.0 / (sigma * sigma), 0.3 * 0.5, 1e-12);

    const GeneratedCase flat = gen_two_wave_diffusive(100, 50, 2.0 * std::numbers::pi, 0.0, 0.0);
    EXPECT_EQ(flat.truth.ranks, (std::vector<Index>{1, 1}));
}

TEST(Generate, BoundaryCasesStayOnOriginalDomain) {
    const BoundaryCase leave = gen_boundary_case(BoundaryKind::leaving);
    EXPECT_FALSE(leave.field.grid.periodic);
    EXPECT_EQ(leave.field.cols(), 51);
    EXPECT_EQ(leave.paths.size(), 1u);
    // The pulse has left half way by the last step: peak at the boundary.
    Index imax = 0;
    leave.field.values.col(50).maxCoeff(&imax);
    EXPECT_EQ(imax, 99);

    const BoundaryCase refl = gen_boundary_case(BoundaryKind::reflected);
    EXPECT_EQ(refl.paths.size(), 2u);
    EXPECT_EQ(refl.field.cols(), 101);
    EXPECT_THROW(boundary_kind_from_string("sideways"), DataError);
}

TEST(Generate, IdentityDiagonalPath) {
    const SnapshotField id = gen_identity(12);
    const FramePath p = identity_path(id.grid);
    EXPECT_TRUE(has_integer_shifts(p, id.grid));
    for (Index j = 0; j < 12; ++j)
        EXPECT_DOUBLE_EQ(p.shifts[j], static_cast<double>(j));
}

TEST(Generate, SurrogateTruthStructure) {
    SurrogateSpec s;
    s.m = 256;
    s.n = 100;
    const GeneratedCase c = gen_multifront_surrogate(s);
    EXPECT_EQ(c.truth.ranks, (std::vector<Index>{4, 1, 1, 1}));
    EXPECT_LT(truth_mismatch(c), 1e-13);
    const Vector s0 = spectrum(c.truth.frames[0].values);
    EXPECT_GT(s0[3] / s0[0], 1e-3);
    EXPECT_LT(s0[4] / s0[0], 1e-12);
    for (std::size_t k = 1; k < 4; ++k) {
        EXPECT_TRUE(has_integer_shifts(c.truth.paths[k], c.field.grid));
        const Vector sk = spectrum(c.truth.frames[k].values);
        EXPECT_LT(sk[1] / sk[0], 1e-12);
    }
}

TEST(Analyze, PeakDetectorRecoversVelocity) {
    // Gaussian with σ of 4 cells moving 0.3 cells per step.
    const GridSpec g = GridSpec::uniform(200, 60, 200.0, 59.0, false);
    Matrix q(200, 60);
    for (Index j = 0; j < 60; ++j)
        for (Index i = 0; i < 200; ++i) {
            const double s = g.x(i) - 50.0 - 0.3 * g.t(j);
            q(i, j) = std::exp(-s * s / 16.0);
        }
    const FramePath p = detect_front_path(SnapshotField(g, q), FrontDetector::peak());
    EXPECT_EQ(p.shifts[0], 0.0);
    for (Index j = 0; j < 60; ++j)
        EXPECT_NEAR(p.shifts[j], 0.3 * g.t(j), 0.05);
    EXPECT_NEAR(path_velocity(p, g), 0.3, 1e-3);
}

TEST(Analyze, ThresholdDetectorOnTanhFront) {
    const GridSpec g = GridSpec::uniform(100, 20, 100.0, 19.0, false);
    Matrix q(100, 20);
    for (Index j = 0; j < 20; ++j)
        for (Index i = 0; i < 100; ++i)
            q(i, j) = 0.5 * (1.0 - std::tanh((g.x(i) - 30.0 - 1.5 * g.t(j)) / 2.0));
    const auto det = FrontDetector::threshold(0.5, FrontDetector::Direction::falling);
    const FramePath p = detect_front_path(SnapshotField(g, q), det);
    for (Index j = 0; j < 20; ++j)
        EXPECT_NEAR(p.shifts[j], 1.5 * g.t(j), 1e-2);
}

TEST(Analyze, AmbiguousPeaksNameTheColumn) {
    const GridSpec g = GridSpec::uniform(40, 3, 40.0, 2.0, false);
    Matrix q = Matrix::Zero(40, 3);
    q(10, 0) = 1.0;
    q(10, 1) = 1.0;
    q(10, 2) = 1.0;
    q(30, 2) = 1.0;
    try {
        detect_front_path(SnapshotField(g, q), FrontDetector::peak());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos) << e.what();
    }
    // A window resolves it.
    const FramePath p =
        detect_front_path(SnapshotField(g, q), FrontDetector::peak().within(0, 20, 3));
    EXPECT_EQ(p.shifts[2], 0.0);
}

TEST(Analyze, MissingCrossingThrows) {
    const GridSpec g = GridSpec::uniform(10, 2, 10.0, 1.0, false);
    EXPECT_THROW(detect_front_path(SnapshotField(g, Matrix::Zero(10, 2)),
                                   FrontDetector::threshold(0.5)),
                 DataError);
}

TEST(Analyze, ReportOnTruth) {
    const GeneratedCase c = gen_two_wave(60, 30);
    const ReportSummary r = report(c.truth, c.field, WeightMask::for_grid(c.field.grid), exact);
    EXPECT_LT(r.rel_error, 1e-13);
    EXPECT_EQ(r.total_rank, 2);
    EXPECT_NEAR(r.pod_rel_error, pod_baseline(c.field.values, 2).rel_error, 1e-12);
    ASSERT_EQ(r.lab_views.size(), 2u);
    EXPECT_LT((r.lab_views[0] + r.lab_views[1] - c.field.values).norm(), 1e-12);
    EXPECT_EQ(r.spectra[0].size(), 30);
}

TEST(Io, CsvRoundTripIsExact) {
    std::mt19937_64 rng(40);
    std::normal_distribution<double> nd;
    const Matrix a = Matrix::NullaryExpr(7, 5, [&] { return nd(rng) * 1e-7; });
    const fs::path dir = scratch("csv");
    io::write_matrix(dir / "a.csv", a);
    EXPECT_EQ(io::read_matrix(dir / "a.csv"), a);
    io::write_matrix(dir / "a.bin", a);
    EXPECT_EQ(io::read_matrix(dir / "a.bin"), a);
}

TEST(Io, MalformedCsvReportsLine) {
    const fs::path dir = scratch("bad");
    {
        std::ofstream(dir / "ragged.csv") << "1,2,3\n4,5\n";
        std::ofstream(dir / "word.csv") << "1,2\n3,x\n";
        std::ofstream(dir / "empty.csv") << "";
    }
    try {
        io::read_csv(dir / "ragged.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(io::read_csv(dir / "word.csv"), DataError);
    EXPECT_THROW(io::read_csv(dir / "empty.csv"), DataError);
    EXPECT_THROW(io::read_csv(dir / "missing.csv"), DataError);
    {
        std::ofstream(dir / "short.bin", std::ios::binary) << "SPOD";
    }
    EXPECT_THROW(io::read_binary(dir / "short.bin"), DataError);
}

TEST(Io, PathsRoundTrip) {
    const GridSpec g = GridSpec::uniform(10, 6, 10.0, 5.0, true);
    std::vector<FramePath> paths{FramePath::constant_velocity(0.25, g, "a"),
                                 FramePath::constant_velocity(-1.0 / 3.0, g, "b")};
    const fs::path dir = scratch("paths");
    io::write_paths(dir / "p.csv", paths);
    const auto back = io::read_paths(dir / "p.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].label, "b");
    EXPECT_EQ(back[1].shifts, paths[1].shifts);
}

TEST(Io, TraceIsJsonLines) {
    ConvergenceTrace t;
    t.records.push_back({0, 1.5, 0.25, 3.0, 1e-15, 4, 0.01, 0});
    t.records.push_back({1, 0.5, 0.125, 1.0, 2e-15, 8, 0.02, 1});
    const fs::path dir = scratch("trace");
    io::write_trace(dir / "t.jsonl", t);
    std::ifstream in(dir / "t.jsonl");
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("iteration").get<int>(), count);
        EXPECT_EQ(j.at("svd_count").get<int>(), 4 * (count + 1));
        EXPECT_EQ(j.at("stage").get<int>(), count);
        ++count;
    }
    EXPECT_EQ(count, 2);
}
