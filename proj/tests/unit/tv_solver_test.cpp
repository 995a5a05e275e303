#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "csvc/tv_solver.hpp"
#include "test_support.hpp"

using namespace csvc;
using csvc::testing::dot;
using csvc::testing::random_vector;
using csvc::testing::smooth_image;
using csvc::testing::square_image;

namespace {

double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

}  // namespace

TEST(Grad2d, ConstantImageHasZeroGradient) {
    const std::vector<double> x(12 * 9, 3.5);
    const auto g = grad2d(x, 12, 9);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(g.dx[i], 0.0);
        EXPECT_EQ(g.dy[i], 0.0);
    }
}

TEST(Grad2d, VerticalStepEdge) {
    const int w = 10;
    const int h = 6;
    std::vector<double> x(static_cast<std::size_t>(w * h), 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 4; c < w; ++c) x[static_cast<std::size_t>(r * w + c)] = 1.0;
    }
    const auto g = grad2d(x, w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const auto i = static_cast<std::size_t>(r * w + c);
            EXPECT_EQ(g.dx[i], c == 3 ? 1.0 : 0.0) << r << "," << c;
            EXPECT_EQ(g.dy[i], 0.0);
        }
    }
}

TEST(Grad2d, ReplicateBoundary) {
    const auto x = random_vector(7 * 5, 1);
    const auto g = grad2d(x, 7, 5);
    for (int r = 0; r < 5; ++r) EXPECT_EQ(g.dx[static_cast<std::size_t>(r * 7 + 6)], 0.0);
    for (int c = 0; c < 7; ++c) EXPECT_EQ(g.dy[static_cast<std::size_t>(4 * 7 + c)], 0.0);
}

TEST(Grad2d, SizeMismatch) {
    EXPECT_THROW(grad2d(std::vector<double>(10), 3, 3), InvalidArgument);
    EXPECT_THROW(div2d(std::vector<double>(9), std::vector<double>(8), 3, 3), InvalidArgument);
}

TEST(Div2d, ZeroAndConstantFields) {
    const int w = 6;
    const int h = 5;
    const std::vector<double> zero(static_cast<std::size_t>(w * h), 0.0);
    for (double v : div2d(zero, zero, w, h)) EXPECT_EQ(v, 0.0);

    const std::vector<double> ones(static_cast<std::size_t>(w * h), 1.0);
    const auto d = div2d(ones, ones, w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double expected = 0.0;
            if (c == 0) expected += 1.0;
            if (c == w - 1) expected -= 1.0;
            if (r == 0) expected += 1.0;
            if (r == h - 1) expected -= 1.0;
            EXPECT_EQ(d[static_cast<std::size_t>(r * w + c)], expected) << r << "," << c;
        }
    }
}

TEST(Div2d, NegativeAdjointOfGradOnRandomInstances) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 40);
        const int h = 1 + static_cast<int>(rng() % 40);
        const auto n = static_cast<std::size_t>(w * h);
        const auto x = random_vector(n, rng());
        const auto p = random_vector(n, rng());
        const auto q = random_vector(n, rng());
        const auto g = grad2d(x, w, h);
        const auto d = div2d(p, q, w, h);
        const double lhs = dot(g.dx, p) + dot(g.dy, q);
        const double rhs = -dot(x, d);
        const double scale = std::sqrt(dot(g.dx, g.dx) + dot(g.dy, g.dy)) * std::sqrt(dot(p, p) + dot(q, q)) +
                             norm2(x) * norm2(d);
        ASSERT_LE(std::abs(lhs - rhs), 1e-9 * scale) << "trial " << trial;
    }
}

TEST(Shrink, ThresholdZeroIsIdentity) {
    const auto gx = random_vector(50, 1);
    const auto gy = random_vector(50, 2);
    for (bool iso : {true, false}) {
        const auto s = shrink(gx, gy, 0.0, iso);
        EXPECT_EQ(s.dx, gx);
        EXPECT_EQ(s.dy, gy);
    }
}

TEST(Shrink, SmallVectorsVanish) {
    const std::vector<double> gx{0.3, -0.6, 0.0};
    const std::vector<double> gy{0.4, 0.8, 0.0};
    const auto s = shrink(gx, gy, 1.0);
    for (std::size_t i = 0; i < gx.size(); ++i) {
        EXPECT_EQ(s.dx[i], 0.0);
        EXPECT_EQ(s.dy[i], 0.0);
    }
}

TEST(Shrink, IsotropicThreeFour) {
    const auto s = shrink(std::vector<double>{3.0}, std::vector<double>{4.0}, 2.5);
    EXPECT_DOUBLE_EQ(s.dx[0], 1.5);
    EXPECT_DOUBLE_EQ(s.dy[0], 2.0);
}

TEST(Shrink, AnisotropicSoftThreshold) {
    const auto s = shrink(std::vector<double>{3.0, -0.5}, std::vector<double>{-4.0, 2.0}, 1.0, false);
    EXPECT_DOUBLE_EQ(s.dx[0], 2.0);
    EXPECT_DOUBLE_EQ(s.dy[0], -3.0);
    EXPECT_DOUBLE_EQ(s.dx[1], 0.0);
    EXPECT_DOUBLE_EQ(s.dy[1], 1.0);
}

TEST(Shrink, NonExpansive) {
    const auto gx = random_vector(2000, 5, 3.0);
    const auto gy = random_vector(2000, 6, 3.0);
    for (bool iso : {true, false}) {
        for (double t : {0.1, 1.0, 4.0}) {
            const auto s = shrink(gx, gy, t, iso);
            for (std::size_t i = 0; i < gx.size(); ++i) {
                ASSERT_LE(std::hypot(s.dx[i], s.dy[i]), std::hypot(gx[i], gy[i]));
            }
        }
    }
}

TEST(Shrink, RejectsNegativeThreshold) {
    EXPECT_THROW(shrink(std::vector<double>{1.0}, std::vector<double>{1.0}, -1.0), InvalidArgument);
}

TEST(SolverParams, Validation) {
    SolverParams p;
    EXPECT_NO_THROW(p.validate());
    p.mu = 0;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.max_inner = 0;
    EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Reconstruct, ZeroMeasurementsGiveZero) {
    const auto a = build_matrix(1, 100, 256);
    const auto r = reconstruct(a, std::vector<double>(100, 0.0), 16, 16);
    EXPECT_TRUE(r.converged);
    for (double v : r.x) EXPECT_EQ(v, 0.0);
}

TEST(Reconstruct, InputErrors) {
    const auto a = build_matrix(1, 100, 256);
    EXPECT_THROW(reconstruct(a, std::vector<double>(99, 1.0), 16, 16), InvalidArgument);
    EXPECT_THROW(reconstruct(a, std::vector<double>(100, 1.0), 8, 16), InvalidArgument);
    std::vector<double> y(100, 1.0);
    y[3] = NAN;
    EXPECT_THROW(reconstruct(a, y, 16, 16), InvalidArgument);
}

TEST(Reconstruct, LosslessMatchesDirectSolve) {
    const int w = 16;
    const int h = 16;
    const std::size_t n = 256;
    const auto a = build_matrix(11, n, n);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto xstar = smooth_image(w, h, seed);
        const auto y = measure(a, xstar);

        Eigen::MatrixXd dense(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
            }
        }
        const Eigen::VectorXd oracle =
            dense.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n)));

        // continuation carried on to mu = 2^16
        SolverParams p;
        p.mu = 65536.0;
        p.max_outer = 13;
        const auto r = reconstruct(a, y, w, h, p);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(r.x[i] - oracle(static_cast<Eigen::Index>(i))));
        EXPECT_LE(worst, 1e-3) << "seed " << seed;
    }
}

TEST(Reconstruct, RecoversSparseGradientSquare) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 400, 1024);
    const auto r = reconstruct(a, measure(a, xstar), 32, 32);
    std::vector<double> diff(xstar.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = r.x[i] - xstar[i];
    EXPECT_LE(norm2(diff) / norm2(xstar), 1e-2);
}

TEST(Reconstruct, ObjectiveNonIncreasingWithinEachStage) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 300, 1024);
    for (bool iso : {true, false}) {
        SolverParams p;
        p.isotropic = iso;
        const auto r = reconstruct(a, measure(a, xstar), 32, 32, p);
        ASSERT_EQ(r.stages.size(), static_cast<std::size_t>(p.max_outer));
        for (std::size_t s = 0; s < r.stages.size(); ++s) {
            const auto& obj = r.stages[s].objective;
            for (std::size_t k = 1; k < obj.size(); ++k) {
                ASSERT_LE(obj[k], obj[k - 1] + 1e-8 * std::max(1.0, std::abs(obj[k - 1])))
                    << "stage " << s << " iteration " << k << (iso ? " iso" : " aniso");
            }
        }
    }
}

TEST(Reconstruct, StagesDoubleMu) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 400, 1024);
    const auto r = reconstruct(a, measure(a, xstar), 32, 32);
    ASSERT_EQ(r.stages.size(), 9u);
    EXPECT_EQ(r.stages.front().mu, 16.0);
    for (std::size_t s = 1; s < r.stages.size(); ++s) EXPECT_EQ(r.stages[s].mu, 2.0 * r.stages[s - 1].mu);
    EXPECT_EQ(r.stages.back().mu, SolverParams{}.mu);
}

TEST(Reconstruct, ConvergedResidualShrinksAsMuGrows) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 400, 1024);
    const auto y = measure(a, xstar);
    double prev = INFINITY;
    for (double mu : {64.0, 256.0, 1024.0, 4096.0, 16384.0}) {
        SolverParams p;
        p.mu = mu;
        const auto r = reconstruct(a, y, 32, 32, p);
        ASSERT_TRUE(r.converged) << "mu " << mu;
        EXPECT_LT(r.final_residual_norm, prev) << "mu " << mu;
        prev = r.final_residual_norm;
    }
}

TEST(Reconstruct, ConvergedMeansLastStageHitTolerance) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 400, 1024);
    SolverParams p;
    p.max_inner = 1;
    const auto capped = reconstruct(a, measure(a, xstar), 32, 32, p);
    EXPECT_FALSE(capped.converged);
    EXPECT_EQ(capped.iterations, p.max_outer);
    const auto full = reconstruct(a, measure(a, xstar), 32, 32);
    EXPECT_EQ(full.converged, full.stages.back().reached_tol);
}

TEST(Reconstruct, Deterministic) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 300, 1024);
    const auto y = measure(a, xstar);
    const auto r1 = reconstruct(a, y, 32, 32);
    const auto r2 = reconstruct(a, y, 32, 32);
    EXPECT_EQ(r1.x, r2.x);
    EXPECT_EQ(r1.iterations, r2.iterations);
}

TEST(Reconstruct, FinalResidualMatchesRecomputation) {
    const auto xstar = square_image();
    const auto a = build_matrix(42, 300, 1024);
    const auto y = measure(a, xstar);
    const auto r = reconstruct(a, y, 32, 32);
    const auto ax = measure(a, r.x);
    std::vector<double> res(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) res[i] = ax[i] - y[i];
    EXPECT_NEAR(r.final_residual_norm, norm2(res), 1e-9 * norm2(y));
}
