#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qlbs/market_sim.hpp"
#include "test_support.hpp"

using namespace qlbs;

TEST(MarketParams, RejectsNonpositiveVolatilityAndStep) {
  MarketParams p;
  p.sigma = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = MarketParams{};
  p.dt = -1.0;
  EXPECT_THROW(simulate_paths(p, 10, 1), ParameterError);
  p = MarketParams{};
  p.dt = 0.3;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(MarketParams, DefaultGrid) {
  MarketParams p;
  EXPECT_EQ(p.n_steps(), 24);
  EXPECT_DOUBLE_EQ(p.gamma(), std::exp(-0.03 / 24.0));
}

TEST(SimulatePaths, NearZeroVolatilityFollowsDrift) {
  MarketParams p;
  p.sigma = 1e-12;
  const PathSet paths = simulate_paths(p, 20, 3);
  const double expected = 100.0 * std::exp(0.05);
  for (Eigen::Index k = 0; k < paths.n_paths(); ++k) EXPECT_NEAR(paths.s(k, paths.n_steps()), expected, 1e-8);
}

TEST(SimulatePaths, TerminalMeanMatchesLognormalMoment) {
  MarketParams p;
  const PathSet paths = simulate_paths(p, 50000, 11);
  const Eigen::VectorXd s_T = paths.s.col(paths.n_steps());
  const double mean = s_T.mean();
  const double se = std::sqrt((s_T.array() - mean).square().sum() / (s_T.size() - 1) / s_T.size());
  EXPECT_LT(std::abs(mean - 100.0 * std::exp(0.05)), 3.0 * se);
}

TEST(SimulatePaths, SameSeedIsBitIdentical) {
  MarketParams p;
  const PathSet a = simulate_paths(p, 300, 99);
  const PathSet b = simulate_paths(p, 300, 99);
  EXPECT_TRUE((a.s.array() == b.s.array()).all());
  EXPECT_TRUE((a.x.array() == b.x.array()).all());
}

TEST(SimulatePaths, IndependentOfThreadCount) {
  MarketParams p;
  const PathSet a = simulate_paths(p, 1000, 5, 1);
  const PathSet b = simulate_paths(p, 1000, 5, 4);
  EXPECT_TRUE((a.s.array() == b.s.array()).all());
}

TEST(SimulatePaths, DiscountedPriceIsMartingaleUnderRiskNeutralDrift) {
  MarketParams p;
  p.mu = p.r;
  const PathSet paths = simulate_paths(p, 20000, 8);
  const StepIncrements inc = increments(paths);
  for (int t = 0; t < paths.n_steps(); t += 6) {
    const Eigen::VectorXd ds = inc.ds.col(t);
    const double mean = ds.mean();
    const double se = std::sqrt((ds.array() - mean).square().sum() / (ds.size() - 1) / ds.size());
    EXPECT_LT(std::abs(mean), 4.0 * se) << "step " << t;
  }
}

TEST(SimulatePaths, RejectsSinglePath) { EXPECT_THROW(simulate_paths(MarketParams{}, 1, 0), DatasetTooSmallError); }

TEST(State, AtTimeZeroIsLogPrice) { EXPECT_NEAR(to_state(100.0, 0.0, MarketParams{}), 4.605170, 1e-6); }

TEST(State, RemovesDriftAtOneYear) {
  const double x = to_state(100.0, 1.0, MarketParams{});
  const double oracle = std::log(100.0) - (0.05 - 0.5 * 0.15 * 0.15);
  EXPECT_NEAR(x, oracle, 1e-14);
  EXPECT_NEAR(x, 4.566420, 1e-6);
}

TEST(State, RoundTrip) {
  MarketParams p;
  for (double s : {0.5, 37.0, 100.0, 250.0})
    for (double t : {0.0, 0.25, 1.0}) EXPECT_NEAR(from_state(to_state(s, t, p), t, p), s, 1e-12 * s);
}

TEST(State, RejectsNonpositivePrice) {
  EXPECT_THROW(to_state(0.0, 0.0, MarketParams{}), DomainError);
  EXPECT_THROW(to_state(-1.0, 0.0, MarketParams{}), DomainError);
}

TEST(Increments, AlreadyZeroMean) {
  Eigen::MatrixXd s(2, 2);
  s << 100, 105, 100, 95;
  const auto inc = increments(s, 1.0);
  EXPECT_DOUBLE_EQ(inc.ds(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(inc.ds(1, 0), -5.0);
  EXPECT_DOUBLE_EQ(inc.ds_hat(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(inc.ds_hat(1, 0), -5.0);
}

TEST(Increments, Demeaning) {
  Eigen::MatrixXd s(2, 2);
  s << 100, 110, 100, 100;
  const auto inc = increments(s, 1.0);
  EXPECT_DOUBLE_EQ(inc.ds(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(inc.ds(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(inc.ds_hat(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(inc.ds_hat(1, 0), -5.0);
}

TEST(Increments, DiscountedFlatStep) {
  const double gamma = std::exp(-0.03 / 24.0);
  Eigen::MatrixXd s(2, 2);
  s << 100, 100, 100, 100;
  const auto inc = increments(s, gamma);
  EXPECT_NEAR(inc.ds(0, 0), 100.0 * (1.0 - std::exp(0.03 / 24.0)), 1e-12);
  EXPECT_NEAR(inc.ds(0, 0), -0.12508, 1e-5);
}

TEST(Demean, SmallVectors) {
  const std::vector<double> v{1, 2, 3};
  const auto out = demean(v);
  EXPECT_DOUBLE_EQ(out[0], -1.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 1.0);
  const std::vector<double> c(5, 3.7);
  for (double x : demean(c)) EXPECT_EQ(x, 0.0);
}

TEST(Demean, SumIsNegligible) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> dist(3.0, 2.0);
  Eigen::VectorXd v(1000);
  for (auto& x : v) x = dist(rng) + 1e6;
  const Eigen::VectorXd d = demeaned(v);
  const double sd = std::sqrt(d.squaredNorm() / (v.size() - 1));
  EXPECT_LT(std::abs(d.sum()), 1e-10 * sd * v.size());
}

TEST(Demean, RejectsShortInput) {
  EXPECT_THROW(demean(std::vector<double>{1.0}), DatasetTooSmallError);
  EXPECT_THROW(demeaned(Eigen::VectorXd::Ones(1)), DatasetTooSmallError);
}
