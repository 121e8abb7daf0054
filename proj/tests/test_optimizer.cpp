// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "helpers.hpp"

using namespace fedpq;

TEST(Gp, InterpolatesSingleObservation) {
    GpSurrogate gp(0.2, 1e-8);
    gp.fit({{0.4, 0.6}}, {2.5});
    auto [mu, var] = gp.posterior({0.4, 0.6});
    EXPECT_NEAR(mu, 2.5, 1e-7);
    EXPECT_LE(var, 1e-8);
}

TEST(Gp, FarQueryRecoversPrior) {
    GpSurrogate gp(0.2, 1e-8);
    gp.fit({{0.0}, {0.1}}, {1.0, -1.0});
    auto [mu, var] = gp.posterior({50.0});
    EXPECT_NEAR(mu, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(Gp, MatchesDenseSolve) {
    auto s = stream(1, 0, 0, "gp");
    std::vector<std::vector<double>> X(5, std::vector<double>(3));
    std::vector<double> y(5);
    for (auto& x : X)
        for (auto& v : x) v = s.uniform();
    for (auto& v : y) v = s.normal();
    const double l = 0.4, jit = 1e-8;
    GpSurrogate gp(l, jit);
    gp.fit(X, y);
    std::vector<double> x(3);
    for (auto& v : x) v = s.uniform();

    auto k = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0;
        for (int i = 0; i < 3; ++i) d += (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) * (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
        return std::exp(-d / (2 * l * l));
    };
    Eigen::MatrixXd K(5, 5);
    Eigen::VectorXd kx(5), yv(5);
    for (int i = 0; i < 5; ++i) {
        kx(i) = k(X[static_cast<std::size_t>(i)], x);
        yv(i) = y[static_cast<std::size_t>(i)];
        for (int j = 0; j < 5; ++j) K(i, j) = k(X[static_cast<std::size_t>(i)], X[static_cast<std::size_t>(j)]) + (i == j ? jit : 0.0);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    const double mu = kx.dot(lu.solve(yv));
    const double var = 1.0 - kx.dot(lu.solve(kx));
    auto [gm, gv] = gp.posterior(x);
    EXPECT_NEAR(gm, mu, 1e-10);
    EXPECT_NEAR(gv, var, 1e-10);
}

TEST(Gp, DuplicatePointsWithoutJitterFail) {
    GpSurrogate gp(0.2, 0.0);
    try {
        gp.fit({{0.5}, {0.5}}, {1.0, 1.0});
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("jitter"), std::string::npos);
    }
}

TEST(Acquisition, AtThresholdIsHalf) {
    EXPECT_NEAR(pi_acquisition(1.3, 0.04, 1.0, 0.3), 0.5, 1e-15);
}

TEST(Acquisition, FarBelowIncumbentIsCertain) {
    EXPECT_NEAR(pi_acquisition(-10.0, 1e-6, 1.0, 0.01), 1.0, 1e-12);
    EXPECT_EQ(pi_acquisition(-10.0, 0.0, 1.0, 0.01), 1.0);
    EXPECT_EQ(pi_acquisition(10.0, 0.0, 1.0, 0.01), 0.0);
}

TEST(Acquisition, OneSigmaAbove) {
    const double sigma = 0.5;
    EXPECT_NEAR(pi_acquisition(1.0 + 0.1 + sigma, sigma * sigma, 1.0, 0.1), 0.158655253931457, 1e-12);
}

TEST(Bo, FindsQuadraticMinimum) {
    Block b{{0.0}, {1.0}, false, "x"};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto s = stream(seed, 0, 0, "bo");
        int calls = 0;
        auto r = bo_minimize(
            b, [&](const std::vector<double>& x) { ++calls; return (x[0] - 0.3) * (x[0] - 0.3); }, 30, s);
        EXPECT_LE(calls, 30);
        EXPECT_NEAR(r.x[0], 0.3, 0.05) << seed;
    }
}

TEST(Bo, ConstantObjective) {
    Block b{{0.0, 0.0}, {1.0, 2.0}, false, "v"};
    auto s = stream(1, 0, 0, "bo");
    auto r = bo_minimize(b, [](const std::vector<double>&) { return 4.25; }, 10, s);
    EXPECT_EQ(r.value, 4.25);
    EXPECT_EQ(r.X.size(), 10u);
}

TEST(Bo, IntegerLattice) {
    Block b{{6.0}, {16.0}, true, "bits"};
    auto s = stream(2, 0, 0, "bo");
    auto r = bo_minimize(b, [](const std::vector<double>& x) { return std::abs(x[0] - 9.0); }, 15, s);
    EXPECT_EQ(r.x[0], 9.0);
    for (const auto& x : r.X) EXPECT_EQ(x[0], std::round(x[0]));
}

TEST(Bo, NonFiniteValuesArePenalized) {
    Block b{{0.0}, {1.0}, false, "x"};
    auto s = stream(3, 0, 0, "bo");
    auto r = bo_minimize(
        b, [](const std::vector<double>& x) { return x[0] < 0.5 ? NAN : (x[0] - 0.7) * (x[0] - 0.7); }, 25, s);
    EXPECT_GE(r.x[0], 0.5);
    EXPECT_NEAR(r.x[0], 0.7, 0.05);
    for (double h : r.H) EXPECT_TRUE(std::isfinite(h));
}

TEST(Bo, ReturnsArgminOfHistory) {
    Block b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, false, "v"};
    auto s = stream(4, 0, 0, "bo");
    auto r = bo_minimize(
        b, [](const std::vector<double>& x) { return std::sin(7 * x[0]) + x[1] * x[2]; }, 20, s);
    EXPECT_EQ(r.value, *std::min_element(r.H.begin(), r.H.end()));
}

namespace {

struct Separable {
    std::size_t U = 3;
    Bounds b;

    double operator()(const StrategyVector& s) const {
        double h = 1.0 + (s.q - 0.2) * (s.q - 0.2);
        for (std::size_t u = 0; u < U; ++u) {
            h += (s.delta_aug[u] - 0.25) * (s.delta_aug[u] - 0.25);
            h += (s.rho[u] - 0.2) * (s.rho[u] - 0.2);
            h += 0.001 * (s.bits[u] - 9) * (s.bits[u] - 9);
        }
        return h;
    }

    BcdProblem problem() const { return {[this](const StrategyVector& s) { return (*this)(s); }, b, 0.0, 1.0}; }

    StrategyVector start() const {
        StrategyVector s;
        s.q = 0.9;
        s.delta_aug.assign(U, b.delta_aug_max);
        s.rho.assign(U, b.rho_max);
        s.bits.assign(U, b.bits_max);
        return s;
    }
};

}  // namespace

TEST(Bcd, SeparableObjectiveNearOptimum) {
    Separable f;
    auto s = stream(1, 0, 0, "bcd");
    auto r = bcd_optimize(f.start(), f.problem(), 1e-4, 5, {20, 40, 40, 40}, s);
    // every block optimum is interior, so the separable optimum is exactly 1
    EXPECT_LE(r.H, 1.05);
    EXPECT_EQ(r.H, f(r.strategy));
}

TEST(Bcd, ZeroIterationsKeepsInitial) {
    Separable f;
    auto s = stream(1, 0, 0, "bcd");
    auto r = bcd_optimize(f.start(), f.problem(), 1e-4, 0, {}, s);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.strategy.q, f.start().q);
    EXPECT_EQ(r.strategy.bits, f.start().bits);
    EXPECT_TRUE(r.trace.empty());
}

TEST(Bcd, InfiniteToleranceRunsOneSweep) {
    Separable f;
    auto s = stream(1, 0, 0, "bcd");
    auto r = bcd_optimize(f.start(), f.problem(), INFINITY, 5, {5, 5, 5, 5}, s);
    EXPECT_EQ(r.iterations, 1);
    ASSERT_EQ(r.trace.size(), 4u);
    EXPECT_EQ(r.trace[0].block, "q");
    EXPECT_EQ(r.trace[1].block, "delta_aug");
    EXPECT_EQ(r.trace[2].block, "rho");
    EXPECT_EQ(r.trace[3].block, "bits");
}

TEST(Bcd, BestSoFarIsMonotone) {
    Separable f;
    auto s = stream(2, 0, 0, "bcd");
    auto r = bcd_optimize(f.start(), f.problem(), 0.0, 4, {6, 6, 6, 6}, s);
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    double prev = r.history.front();
    for (const auto& row : r.trace) {
        EXPECT_LE(row.best, prev);
        prev = row.best;
    }
}

TEST(Bcd, RejectsInitialOutsideBounds) {
    Separable f;
    auto init = f.start();
    init.rho[0] = 0.9;
    auto s = stream(1, 0, 0, "bcd");
    EXPECT_THROW(bcd_optimize(init, f.problem(), 1e-3, 1, {}, s), ValidationError);
}
