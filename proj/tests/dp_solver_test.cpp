#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "qlbs/basis.hpp"
#include "qlbs/bsm.hpp"
#include "qlbs/dp_solver.hpp"
#include "test_support.hpp"

using namespace qlbs;
using qlbs::testing::ConstantBasis;
using qlbs::testing::PolynomialBasis;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MarketParams risk_neutral() {
  MarketParams p;
  p.mu = p.r;
  return p;
}

}  // namespace

TEST(Payoff, Put) {
  const auto p = put_payoff(vec({90, 110, 100}), 100);
  EXPECT_EQ(p(0), 10.0);
  EXPECT_EQ(p(1), 0.0);
  EXPECT_EQ(p(2), 0.0);
}

TEST(OptimalAction, TwoPathConstantBasis) {
  const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(2, 1);
  const auto ds = vec({5, -5});
  const auto pi_next = vec({7.5, 12.5});  // demeaned: -2.5, 2.5
  const auto exact = optimal_action_coeffs(design, ds, ds, pi_next, 1.0, RiskParams{}, 0.0);
  EXPECT_DOUBLE_EQ(exact(0), -0.5);
  const auto ridge = optimal_action_coeffs(design, ds, ds, pi_next, 1.0, RiskParams{}, 1e-3);
  EXPECT_NEAR(ridge(0), -25.0 / 50.001, 1e-15);
}

TEST(OptimalAction, DriftTermWhenNotRiskOnly) {
  const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(2, 1);
  const auto ds = vec({6, -4});
  const auto ds_hat = vec({5, -5});
  const auto pi_next = vec({7.5, 12.5});
  RiskParams risk{0.01, false};
  const double oracle = (-25.0 + (6.0 - 4.0) / (2.0 * 0.01)) / 50.0;
  EXPECT_NEAR(optimal_action_coeffs(design, ds, ds_hat, pi_next, 1.0, risk, 0.0)(0), oracle, 1e-12);
}

TEST(OptimalAction, NoRiskToHedge) {
  MarketParams p;
  p.sigma = 1e-12;
  const PathSet paths = simulate_paths(p, 50, 1);
  const auto basis = build_basis(paths.x.minCoeff() - 1.0, paths.x.maxCoeff() + 1.0, 12);
  const auto sol = solve_dp(paths, basis, EuropeanPut{}, RiskParams{});
  EXPECT_LT(sol.phi.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(sol.a_star.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(OptimalAction, InitialHedgeNearBlackScholesDelta) {
  const PathSet paths = simulate_paths(risk_neutral(), 20000, 21);
  const auto basis = build_basis_for(paths.x, 12);
  const auto sol = solve_dp(paths, basis, EuropeanPut{}, RiskParams{1e-9});
  const double delta = bs_put_delta(100, 100, 0.03, 0.15, 1);
  EXPECT_NEAR(sol.a_star(0, 0), delta, 0.05);
  EXPECT_NEAR(sol.a_star.col(0).maxCoeff(), sol.a_star.col(0).minCoeff(), 1e-12);
}

TEST(OptimalAction, FromCoefficients) {
  const Eigen::MatrixXd design = Eigen::MatrixXd::Random(5, 4);
  EXPECT_EQ(optimal_action(design, Eigen::VectorXd::Zero(4)).cwiseAbs().maxCoeff(), 0.0);
  const auto a = optimal_action(Eigen::MatrixXd::Ones(5, 1), vec({0.37}));
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_EQ(a(k), 0.37);
}

TEST(OptimalAction, InterpolatingBasisGivesPerPathRatio) {
  // With as many basis functions as paths the regression interpolates, so the
  // hedge reduces to Pi_hat dS_hat / dS_hat^2 on each path.
  PolynomialBasis basis{3, 4.6};
  const auto x = vec({4.5, 4.6, 4.75});
  const auto ds = vec({2.0, -1.0, -0.5});
  const Eigen::VectorXd ds_hat = ds.array() - ds.mean();
  const auto pi_next = vec({3.0, 7.0, 4.0});
  const Eigen::VectorXd pi_hat = pi_next.array() - pi_next.mean();
  const Eigen::MatrixXd design = design_matrix(basis, x);
  const Eigen::VectorXd a = design * optimal_action_coeffs(design, ds, ds_hat, pi_next, 1.0, RiskParams{}, 0.0);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(a(k), pi_hat(k) / ds_hat(k), 1e-8);
  const Eigen::VectorXd a_reg = design * optimal_action_coeffs(design, ds, ds_hat, pi_next, 1.0, RiskParams{}, 1e-12);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(a_reg(k), pi_hat(k) / ds_hat(k), 1e-6);
}

TEST(OptimalAction, SingularSystemIsNumericalError) {
  const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(2, 1);
  const auto ds = vec({std::numeric_limits<double>::quiet_NaN(), 1.0});
  try {
    optimal_action_coeffs(design, ds, ds, vec({1, 2}), 1.0, RiskParams{}, 0.0, 7);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

TEST(Rollback, Arithmetic) {
  const auto same = portfolio_rollback(vec({3, 4}), vec({0, 0}), vec({1, 2}), 1.0);
  EXPECT_EQ(same(0), 3.0);
  EXPECT_EQ(same(1), 4.0);
  EXPECT_EQ(portfolio_rollback(vec({10}), vec({1}), vec({5}), 1.0)(0), 5.0);
  EXPECT_DOUBLE_EQ(portfolio_rollback(vec({10}), vec({1}), vec({5}), 0.9)(0), 4.5);
}

TEST(Rollback, ReplicationLimitMatchesBlackScholes) {
  const PathSet paths = simulate_paths(risk_neutral(), 20000, 5);
  const auto basis = build_basis_for(paths.x, 12);
  const auto sol = solve_dp(paths, basis, EuropeanPut{}, RiskParams{1e-9});
  EXPECT_NEAR(sol.pi.col(0).mean(), bs_put_price(100, 100, 0.03, 0.15, 1), 0.02 * 4.53);
}

TEST(Reward, RiskFreeLimit) {
  const auto a = vec({0.3, -0.7, 1.1});
  const auto ds = vec({1.5, -2.0, 0.25});
  const auto r = step_reward(a, ds, ds, vec({1, 5, 2}), 0.99, 0.0);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(r(k), 0.99 * a(k) * ds(k));
}

TEST(Reward, NoHedgeIsPureVariancePenalty) {
  const auto pi_next = vec({1, 5, 3});
  const auto r = step_reward(Eigen::VectorXd::Zero(3), vec({1, 2, 3}), vec({-1, 0, 1}), pi_next, 0.99, 0.01);
  const double g2 = 0.99 * 0.99;
  EXPECT_NEAR(r(0), -0.01 * g2 * 4.0, 1e-15);
  EXPECT_NEAR(r(1), -0.01 * g2 * 4.0, 1e-15);
  EXPECT_NEAR(r(2), 0.0, 1e-15);
}

TEST(Reward, TwoPathHandCase) {
  const auto ds = vec({5, -5});
  const auto pi_next = vec({-2.5, 2.5});
  const auto r = step_reward(vec({-0.5, -0.5}), ds, ds, pi_next, 1.0, 0.001);
  EXPECT_NEAR(r(0), -2.5, 1e-14);
  EXPECT_NEAR(r(1), 2.5, 1e-14);
  const auto a = vec({0.3, -0.2});
  const auto r2 = step_reward(a, ds, ds, pi_next, 1.0, 0.001);
  for (int k = 0; k < 2; ++k) {
    const double resid = pi_next(k) - a(k) * ds(k);
    EXPECT_NEAR(r2(k), a(k) * ds(k) - 0.001 * resid * resid, 1e-14);
  }
}

TEST(QCoeffs, ConstantTargetsReproduced) {
  const auto basis = build_basis(0.0, 1.0, 12);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(200, 0.0, 1.0);
  const Eigen::MatrixXd design = design_matrix(basis, x);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(200, -3.25);
  const Eigen::VectorXd fitted = design * q_coeffs(design, y, 1e-10);
  EXPECT_LT((fitted - y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(QCoeffs, ConstantBasisGivesMean) {
  const auto y = vec({1, 4, 10});
  EXPECT_NEAR(q_coeffs(Eigen::MatrixXd::Ones(3, 1), y, 0.0)(0), 5.0, 1e-14);
  EXPECT_NEAR(q_coeffs(Eigen::MatrixXd::Ones(3, 1), y, 1e-3)(0), 15.0 / 3.001, 1e-14);
}

TEST(QCoeffs, ThreePathLeastSquaresOracle) {
  PolynomialBasis basis{2, 0.0};
  const auto x = vec({0.1, 0.4, 0.9});
  const auto y = vec({2.0, -1.0, 0.5});
  const double eps = 1e-3;
  // 2x2 ridge normal equations solved by Cramer's rule
  double s00 = eps, s01 = 0, s11 = eps, b0 = 0, b1 = 0;
  for (int k = 0; k < 3; ++k) {
    s00 += 1;
    s01 += x(k);
    s11 += x(k) * x(k);
    b0 += y(k);
    b1 += x(k) * y(k);
  }
  const double det = s00 * s11 - s01 * s01;
  const auto w = q_coeffs(design_matrix(basis, x), y, eps);
  EXPECT_NEAR(w(0), (b0 * s11 - s01 * b1) / det, 1e-8);
  EXPECT_NEAR(w(1), (s00 * b1 - s01 * b0) / det, 1e-8);
}

TEST(SolveDP, ZeroStrikePutIsFree) {
  const PathSet paths = simulate_paths(MarketParams{}, 2000, 2);
  const auto basis = build_basis_for(paths.x, 12);
  EXPECT_LE(std::abs(solve_dp(paths, basis, EuropeanPut{0.0, 1.0}, RiskParams{}).price), 1e-6);
}

TEST(SolveDP, VanishingRiskAversionApproachesBlackScholes) {
  const PathSet paths = simulate_paths(risk_neutral(), 50000, 17);
  const auto basis = build_basis_for(paths.x, 12);
  const double price = solve_dp(paths, basis, EuropeanPut{}, RiskParams{1e-9}).price;
  EXPECT_NEAR(price, bs_put_price(100, 100, 0.03, 0.15, 1), 0.02 * 4.5296);
}

TEST(SolveDP, DeskScaleDefaultConfig) {
  const PathSet paths = simulate_paths(MarketParams{}, 5000, 42);
  const auto basis = build_basis_for(paths.x, 12);
  const auto sol = solve_dp(paths, basis, EuropeanPut{}, RiskParams{});
  EXPECT_GE(sol.price, 4.5);
  EXPECT_LE(sol.price, 5.3);
  EXPECT_TRUE((sol.action_curvature.array() < 0.0).all());
  const auto again = solve_dp(paths, basis, EuropeanPut{}, RiskParams{});
  EXPECT_EQ(sol.price, again.price);
}

TEST(SolveDP, PriceRisesWithRiskAversion) {
  const PathSet paths = simulate_paths(MarketParams{}, 5000, 3);
  const auto basis = build_basis_for(paths.x, 12);
  const double lo = solve_dp(paths, basis, EuropeanPut{}, RiskParams{1e-5}).price;
  const double hi = solve_dp(paths, basis, EuropeanPut{}, RiskParams{3e-3}).price;
  EXPECT_LT(lo, hi);
}

TEST(SolveDP, ErrorsCarryTimeStep) {
  const auto market = qlbs::testing::grid_market(3, 1.0 / 3.0);
  Eigen::MatrixXd s(3, 4);
  s << 100, 101, 99, 98, 100, 98, 97, 99, 100, 102, 104, 103;
  PathSet paths = qlbs::testing::paths_from_prices(s, market);
  paths.s(0, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    solve_dp_payoff(paths, ConstantBasis{}, Eigen::VectorXd::Ones(3), RiskParams{});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step(), 2);
    EXPECT_NE(std::string(e.what()).find("time step 2"), std::string::npos);
  }
}

TEST(SolveDP, RejectsBadInputs) {
  const PathSet paths = simulate_paths(MarketParams{}, 10, 2);
  EXPECT_THROW(solve_dp_payoff(paths, ConstantBasis{}, Eigen::VectorXd::Ones(3), RiskParams{}), SchemaError);
  EXPECT_THROW(solve_dp(paths, ConstantBasis{}, EuropeanPut{}, RiskParams{0.0}), ParameterError);
}
