#include "spod/core.hpp"
#include "spod/shift.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace spod;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
    std::normal_distribution<double> nd;
    return Matrix::NullaryExpr(r, c, [&] { return nd(rng); });
}

const ShiftConfig exact{2, ShiftMode::exact};

// Brute-force periodic roll: out(i, j) = f((i - s_j) mod m, j).
Matrix roll(const Matrix& f, const std::vector<Index>& cells) {
    const Index m = f.rows();
    Matrix out(m, f.cols());
    for (Index j = 0; j < f.cols(); ++j)
        for (Index i = 0; i < m; ++i)
            out(i, j) = f((((i - cells[j]) % m) + m) % m, j);
    return out;
}

}  // namespace

TEST(Shift, ExactPeriodicMatchesRoll) {
    std::mt19937_64 rng(3);
    const GridSpec g = GridSpec::uniform(17, 9, 17.0, 8.0, true);
    const Matrix f = random_matrix(rng, 17, 9);
    for (double v : {-3.0, -1.0, 0.0, 2.0, 5.0}) {
        const FramePath p = FramePath::constant_velocity(v, g);
        std::vector<Index> cells;
        for (Index j = 0; j < g.n; ++j)
            cells.push_back(static_cast<Index>(std::lround(v * j)));
        EXPECT_EQ(shift_apply(f, g, p, +1, exact), roll(f, cells)) << "v=" << v;
    }
}

TEST(Shift, InterpolatedAgreesWithExactOnWholeCells) {
    std::mt19937_64 rng(4);
    const GridSpec g = GridSpec::uniform(20, 6, 20.0, 5.0, true);
    const Matrix f = random_matrix(rng, 20, 6);
    const FramePath p = FramePath::constant_velocity(2.0, g);
    for (int order : {2, 4, 6}) {
        ShiftConfig c{order, ShiftMode::interpolated};
        EXPECT_LT((shift_apply(f, g, p, +1, c) - shift_apply(f, g, p, +1, exact)).norm(), 1e-12)
            << "order " << order;
    }
}

TEST(Shift, InterpolationErrorFallsWithOrder) {
    // sin(x - Δ) against its interpolated shift.
    const Index m = 64;
    const double L = 2.0 * std::numbers::pi;
    const GridSpec g = GridSpec::uniform(m, 5, L, 1.0, true);
    Matrix f(m, 5), expect(m, 5);
    const FramePath p = FramePath::constant_velocity(0.37, g);
    for (Index j = 0; j < 5; ++j)
        for (Index i = 0; i < m; ++i) {
            f(i, j) = std::sin(g.x(i));
            expect(i, j) = std::sin(g.x(i) - p.shifts[j]);
        }
    double prev = 1.0;
    for (int order : {2, 4, 6, 8}) {
        const double err = (shift_apply(f, g, p, +1, ShiftConfig{order}) - expect)
                               .cwiseAbs()
                               .maxCoeff();
        EXPECT_LT(err, prev) << "order " << order;
        prev = err;
    }
    EXPECT_LT(prev, 1e-7);
}

TEST(Shift, RoundTripExactIsIdentity) {
    std::mt19937_64 rng(5);
    const GridSpec g = GridSpec::uniform(12, 7, 12.0, 6.0, true);
    const Matrix f = random_matrix(rng, 12, 7);
    const FramePath p = FramePath::constant_velocity(-2.0, g);
    EXPECT_EQ(shift_roundtrip_error(f, g, p, exact), 0.0);
}

TEST(Shift, ExactShiftIsOrthogonal) {
    // <T f, h> = <f, T^{-1} h> on a periodic grid.
    std::mt19937_64 rng(6);
    const GridSpec g = GridSpec::uniform(15, 8, 15.0, 7.0, true);
    const FramePath p = FramePath::constant_velocity(3.0, g);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix f = random_matrix(rng, 15, 8);
        const Matrix h = random_matrix(rng, 15, 8);
        const double lhs = (shift_apply(f, g, p, +1, exact).array() * h.array()).sum();
        const double rhs = (f.array() * shift_apply(h, g, p, -1, exact).array()).sum();
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
    }
}

TEST(Shift, RejectsBadSign) {
    const GridSpec g = GridSpec::uniform(8, 4, 8.0, 3.0, true);
    EXPECT_THROW(shift_apply(Matrix::Zero(8, 4), g, FramePath::zero(4), 0, exact), DataError);
}

TEST(Shift, RejectsOddOrder) {
    ShiftConfig c{3};
    EXPECT_THROW(c.validate(), DataError);
}

TEST(Core, ExtensionSizeFollowsExtremeShifts) {
    const GridSpec g = GridSpec::uniform(10, 5, 10.0, 4.0, false);
    std::vector<FramePath> paths{FramePath::constant_velocity(1.0, g),
                                 FramePath::constant_velocity(-2.0, g)};
    const auto [left, right] = extension_size(paths, g, exact);
    EXPECT_EQ(left, 4);
    EXPECT_EQ(right, 8);
    // Fractional shifts round up and add the stencil reach.
    std::vector<FramePath> frac{FramePath::constant_velocity(0.9, g)};
    const auto [l4, r4] = extension_size(frac, g, ShiftConfig{4});
    EXPECT_EQ(l4, 4 + 1);
    EXPECT_EQ(r4, 0);
}

TEST(Core, ExtendDomainKeepsOmegaBitwise) {
    std::mt19937_64 rng(7);
    const GridSpec g = GridSpec::uniform(10, 5, 10.0, 4.0, false);
    const SnapshotField q(g, random_matrix(rng, 10, 5));
    std::vector<FramePath> paths{FramePath::constant_velocity(1.0, g),
                                 FramePath::constant_velocity(-1.0, g)};
    const SnapshotField e = extend_domain(q, paths, ExtensionFill::replicate(), exact, 1);
    EXPECT_EQ(e.grid.ext_left, 5);
    EXPECT_EQ(e.grid.ext_right, 5);
    EXPECT_EQ(Matrix(e.omega()), q.values);
    for (Index i = 0; i < e.grid.ext_left; ++i)
        EXPECT_EQ(Matrix(e.values.row(i)), Matrix(q.values.row(0)));
    const SnapshotField z = extend_domain(q, paths, ExtensionFill::constant(0.0), exact);
    EXPECT_TRUE(z.values.topRows(z.grid.ext_left).isZero(0.0));
    EXPECT_THROW(extend_domain(e, paths), DataError);
}

TEST(Core, InitialGuessSatisfiesConstraint) {
    std::mt19937_64 rng(8);
    const GridSpec g = GridSpec::uniform(16, 6, 16.0, 5.0, true);
    const SnapshotField q(g, random_matrix(rng, 16, 6));
    std::vector<FramePath> paths{FramePath::constant_velocity(1.0, g),
                                 FramePath::constant_velocity(-2.0, g),
                                 FramePath::zero(6)};
    const Decomposition d = initial_guess(q, paths, exact);
    EXPECT_LT(constraint_violation(q, d, WeightMask::for_grid(g), exact), 1e-13);
}

// Projection property: random frames are mapped onto the constraint set and
// a second projection changes nothing.
class ProjectionProperty : public ::testing::TestWithParam<bool> {};

TEST_P(ProjectionProperty, FeasibleAndIdempotent) {
    const bool periodic = GetParam();
    std::mt19937_64 rng(periodic ? 9 : 10);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<Index> dm(6, 20), dk(1, 3);
        std::uniform_int_distribution<int> dv(-2, 2);
        const Index m = dm(rng), n = dm(rng), K = dk(rng);
        GridSpec g = GridSpec::uniform(m, n, static_cast<double>(m), static_cast<double>(n - 1),
                                       periodic);
        std::vector<FramePath> paths;
        for (Index k = 0; k < K; ++k)
            paths.push_back(FramePath::constant_velocity(dv(rng), g));
        SnapshotField q(g, random_matrix(rng, m, n));
        if (!periodic)
            q = extend_domain(q, paths, ExtensionFill::constant(0.0), exact);
        const WeightMask w = WeightMask::for_grid(q.grid);
        std::vector<Matrix> bar;
        for (Index k = 0; k < K; ++k)
            bar.push_back(random_matrix(rng, q.rows(), n));
        const auto once = project_frames(bar, q, paths, w, exact);
        const double qn = q.values.norm();
        EXPECT_LT(constraint_violation(q, once, paths, w, exact), 1e-12 * qn);
        const auto twice = project_frames(once, q, paths, w, exact);
        for (Index k = 0; k < K; ++k)
            EXPECT_LT((twice[k] - once[k]).norm(), 1e-12 * qn);
    }
}

INSTANTIATE_TEST_SUITE_P(Grids, ProjectionProperty, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "periodic" : "extended"; });

TEST(Core, ReconstructLowrankTruncates) {
    std::mt19937_64 rng(11);
    const GridSpec g = GridSpec::uniform(10, 8, 10.0, 7.0, true);
    const Vector u = Vector::Random(10), v = Vector::Random(8);
    Matrix f = u * v.transpose();
    const Matrix noise = 1e-3 * random_matrix(rng, 10, 8);
    Decomposition d;
    d.frames.emplace_back(g, f + noise);
    d.paths.push_back(FramePath::zero(8));
    d.ranks.push_back(1);
    const Matrix full = reconstruct(d, ReconstructMode::full, exact).values;
    const Matrix low = reconstruct(d, ReconstructMode::lowrank, exact).values;
    EXPECT_EQ(full, f + noise);
    Eigen::JacobiSVD<Matrix> svd(f + noise, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix oracle = svd.singularValues()[0] * svd.matrixU().col(0) *
                          svd.matrixV().col(0).transpose();
    EXPECT_LT((low - oracle).norm(), 1e-12);
}

TEST(Core, ExactModeRejectsFractionalPaths) {
    const GridSpec g = GridSpec::uniform(10, 5, 10.0, 4.0, true);
    const SnapshotField q(g, Matrix::Ones(10, 5));
    EXPECT_THROW(Problem::make(q, {FramePath::constant_velocity(0.5, g)}, exact), DataError);
}

TEST(Core, MismatchedShapesAreReported) {
    const GridSpec g = GridSpec::uniform(10, 5, 10.0, 4.0, true);
    EXPECT_THROW(SnapshotField(g, Matrix::Zero(9, 5)), DataError);
    Matrix bad = Matrix::Zero(10, 5);
    bad(2, 2) = std::nan("");
    EXPECT_THROW(SnapshotField(g, bad), DataError);
}
