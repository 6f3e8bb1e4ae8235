#pragma once

// Inverse RL for the hedging model: rewards implied by observed actions for a
// known risk aversion, and per-step maximum-likelihood estimates of the risk
// aversion under the MaxEnt action density
//     p(a | x) = sqrt(c2 / 2pi) exp(-c2/2 (a - c1/c2)^2),
// whose coefficients come from the expected one-step reward
//     c0 = -lambda gamma^2 E[Pi_hat^2],
//     c1 = gamma E[dS + 2 lambda gamma dS_hat Pi_hat],
//     c2 = 2 lambda gamma^2 E[dS_hat^2].
// Conditional expectations are basis regressions on X_t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qlbs/basis.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/fqi_solver.hpp"
#include "qlbs/linalg.hpp"
#include "qlbs/market_sim.hpp"
#include "qlbs/parallel.hpp"

namespace qlbs {

/// Rewards for the observed actions at a known lambda: the portfolio is rolled
/// back from the terminal payoff along the observed hedges and each step is
/// scored with the same reward formula the DP solver uses.
inline Eigen::MatrixXd rewards_from_actions(const HedgeDataset& data, double lambda, const MarketParams& market) {
  market.validate();
  RiskParams{lambda}.validate();
  if (data.terminal_payoff.size() == 0) throw SchemaError("rewards_from_actions: terminal payoffs are required");
  data.validate();
  const double gamma = market.gamma();
  const StepIncrements inc = dataset_increments(data, market);
  const Eigen::MatrixXd pi = rollback_observed(data, inc.ds, gamma);
  Eigen::MatrixXd rewards(data.n_paths(), data.n_steps());
  for (int t = 0; t < data.n_steps(); ++t)
    rewards.col(t) = step_reward(data.a.col(t), inc.ds.col(t), inc.ds_hat.col(t), pi.col(t + 1), gamma, lambda);
  return rewards;
}

/// Lambda-free ingredients of the reward coefficients, per path.
struct ConditionalMoments {
  Eigen::VectorXd pi_sq;  ///< E_t[Pi_hat_{t+1}^2]
  Eigen::VectorXd ds;     ///< E_t[dS_t]
  Eigen::VectorXd ds_pi;  ///< E_t[dS_hat_t Pi_hat_{t+1}]
  Eigen::VectorXd ds_sq;  ///< E_t[dS_hat_t^2]
  double gamma = 1.0;

  Eigen::Index size() const { return ds.size(); }
};

struct RewardCoeffs {
  Eigen::VectorXd c0;
  Eigen::VectorXd c1;
  Eigen::VectorXd c2;
};

/// Regresses the four path quantities on the design. Fitted second moments are
/// floored (E[Pi_hat^2] at 0, E[dS_hat^2] at 1e-3 of its cross-path mean) so a
/// spline fit dipping below zero in a sparse tail cannot flip the sign of c2.
inline ConditionalMoments conditional_moments(const Eigen::MatrixXd& design, const Eigen::VectorXd& ds,
                                              const Eigen::VectorXd& ds_hat, const Eigen::VectorXd& pi_next,
                                              double gamma, double regularization, int step = -1) {
  const Eigen::VectorXd pi_hat = demeaned(pi_next);
  Eigen::MatrixXd ys(ds.size(), 4);
  ys.col(0) = pi_hat.array().square().matrix();
  ys.col(1) = ds;
  ys.col(2) = ds_hat.cwiseProduct(pi_hat);
  ys.col(3) = ds_hat.array().square().matrix();
  const Eigen::MatrixXd fitted = design * ridge_fit_many(design, ys, regularization, step);
  const double ds_sq_floor = 1e-3 * ys.col(3).mean();
  ConditionalMoments m;
  m.pi_sq = fitted.col(0).cwiseMax(0.0);
  m.ds = fitted.col(1);
  m.ds_pi = fitted.col(2);
  m.ds_sq = fitted.col(3).cwiseMax(ds_sq_floor);
  m.gamma = gamma;
  return m;
}

inline RewardCoeffs reward_coeffs(const ConditionalMoments& m, double lambda) {
  const double g = m.gamma;
  return {-lambda * g * g * m.pi_sq, g * (m.ds + 2.0 * lambda * g * m.ds_pi), 2.0 * lambda * g * g * m.ds_sq};
}

/// Moments for every step of a dataset, from the portfolio implied by its actions.
template <BasisFunctions B>
std::vector<ConditionalMoments> step_moments(const HedgeDataset& data, const B& basis, const MarketParams& market,
                                             double regularization = kDefaultRegularization) {
  market.validate();
  data.validate();
  const double gamma = market.gamma();
  const StepIncrements inc = dataset_increments(data, market);
  const Eigen::MatrixXd pi = rollback_observed(data, inc.ds, gamma);
  std::vector<ConditionalMoments> out;
  out.reserve(data.n_steps());
  for (int t = 0; t < data.n_steps(); ++t)
    out.push_back(conditional_moments(design_matrix(basis, data.x.col(t)), inc.ds.col(t), inc.ds_hat.col(t),
                                      pi.col(t + 1), gamma, regularization, t));
  return out;
}

template <BasisFunctions B>
RewardCoeffs expected_reward_coeffs(int t, const HedgeDataset& data, const B& basis, double lambda,
                                    const MarketParams& market, double regularization = kDefaultRegularization) {
  RiskParams{lambda}.validate();
  if (t < 0 || t >= data.n_steps()) throw ParameterError("expected_reward_coeffs: time step out of range");
  const StepIncrements inc = dataset_increments(data, market);
  const Eigen::MatrixXd pi = rollback_observed(data, inc.ds, market.gamma());
  return reward_coeffs(conditional_moments(design_matrix(basis, data.x.col(t)), inc.ds.col(t), inc.ds_hat.col(t),
                                           pi.col(t + 1), market.gamma(), regularization, t),
                       lambda);
}

/// sum_k [ log(c2)/2 - c2/2 (a - c1/c2)^2 ]; the -log(2 pi)/2 constant is omitted.
/// Returns -infinity if any c2 is not positive.
inline double action_loglik(const RewardCoeffs& c, const Eigen::VectorXd& actions) {
  if (c.c2.size() != actions.size()) throw SchemaError("action_loglik: size mismatch");
  double ll = 0.0;
  for (Eigen::Index k = 0; k < actions.size(); ++k) {
    const double c2 = c.c2(k);
    if (!(c2 > 0.0)) return -std::numeric_limits<double>::infinity();
    const double dev = actions(k) - c.c1(k) / c2;
    ll += 0.5 * std::log(c2) - 0.5 * c2 * dev * dev;
  }
  return ll;
}

inline double action_loglik(double lambda, const ConditionalMoments& m, const Eigen::VectorXd& actions) {
  if (!(lambda > 0.0)) throw DomainError("action_loglik: lambda must be positive");
  return action_loglik(reward_coeffs(m, lambda), actions);
}

/// Log-likelihood restricted to a subset of observations (bootstrap resamples).
inline double action_loglik(double lambda, const ConditionalMoments& m, const Eigen::VectorXd& actions,
                            const std::vector<Eigen::Index>& rows) {
  if (!(lambda > 0.0)) throw DomainError("action_loglik: lambda must be positive");
  const double g = m.gamma;
  double ll = 0.0;
  for (const Eigen::Index k : rows) {
    const double c1 = g * (m.ds(k) + 2.0 * lambda * g * m.ds_pi(k));
    const double c2 = 2.0 * lambda * g * g * m.ds_sq(k);
    if (!(c2 > 0.0)) return -std::numeric_limits<double>::infinity();
    const double dev = actions(k) - c1 / c2;
    ll += 0.5 * std::log(c2) - 0.5 * c2 * dev * dev;
  }
  return ll;
}

struct LambdaSearch {
  double lambda_min = 1e-9;
  double lambda_max = 10.0;
  /// Width of the final bracket in log(lambda), i.e. relative tolerance on lambda.
  double tolerance = 1e-6;
  double regularization = kDefaultRegularization;
};

struct LambdaEstimate {
  double lambda = 0.0;
  double loglik = 0.0;
  bool boundary = false;
};

/// Golden-section search of a function concave in log(lambda).
template <class Fn>
LambdaEstimate maximize_log_lambda(Fn&& loglik, const LambdaSearch& search) {
  if (!(search.lambda_min > 0.0) || !(search.lambda_max > search.lambda_min))
    throw ParameterError("lambda search bracket must satisfy 0 < min < max");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double lo0 = std::log(search.lambda_min);
  const double hi0 = std::log(search.lambda_max);
  double lo = lo0;
  double hi = hi0;
  double u1 = hi - inv_phi * (hi - lo);
  double u2 = lo + inv_phi * (hi - lo);
  double f1 = loglik(std::exp(u1));
  double f2 = loglik(std::exp(u2));
  while (hi - lo > search.tolerance) {
    if (f1 >= f2) {
      hi = u2;
      u2 = u1;
      f2 = f1;
      u1 = hi - inv_phi * (hi - lo);
      f1 = loglik(std::exp(u1));
    } else {
      lo = u1;
      u1 = u2;
      f1 = f2;
      u2 = lo + inv_phi * (hi - lo);
      f2 = loglik(std::exp(u2));
    }
  }
  const double u = 0.5 * (lo + hi);
  LambdaEstimate est{std::exp(u), loglik(std::exp(u)), false};
  const double edge = std::max(10.0 * search.tolerance, 1e-4);
  est.boundary = (u - lo0 < edge) || (hi0 - u < edge);
  return est;
}

inline LambdaEstimate maximize_loglik(const ConditionalMoments& m, const Eigen::VectorXd& actions,
                                      const LambdaSearch& search = {}) {
  return maximize_log_lambda([&](double lambda) { return action_loglik(lambda, m, actions); }, search);
}

struct LambdaTermStructure {
  Eigen::VectorXd lambda_impl;  ///< per step
  Eigen::VectorXd loglik;       ///< attained maximum per step
  std::vector<bool> boundary;   ///< maximum hit the search bracket
  double summary = 0.0;         ///< weighted median of lambda_impl
};

/// Weighted median: smallest value whose cumulative weight reaches half the total.
inline double weighted_median(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  if (values.size() == 0 || values.size() != weights.size()) throw ParameterError("weighted_median: bad input");
  std::vector<Eigen::Index> order(values.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return values(i) < values(j); });
  const double half = 0.5 * weights.sum();
  double acc = 0.0;
  for (const auto i : order) {
    acc += weights(i);
    if (acc >= half) return values(i);
  }
  return values(order.back());
}

/// Per-step maximum-likelihood lambda. The scalar summary weights each step by
/// the per-observation likelihood exp(LL_t / N) attained at its maximum.
template <BasisFunctions B>
LambdaTermStructure estimate_lambda(const HedgeDataset& data, const MarketParams& market, const B& basis,
                                    const LambdaSearch& search = {}, unsigned n_threads = 1) {
  if (data.n_paths() < 2) throw DatasetTooSmallError("estimate_lambda: need at least 2 observations per step");
  const auto moments = step_moments(data, basis, market, search.regularization);
  const int n = data.n_steps();
  LambdaTermStructure out;
  out.lambda_impl.resize(n);
  out.loglik.resize(n);
  out.boundary.assign(n, false);
  std::vector<LambdaEstimate> est(n);
  parallel_for(static_cast<std::size_t>(n), n_threads,
               [&](std::size_t t) { est[t] = maximize_loglik(moments[t], data.a.col(static_cast<Eigen::Index>(t)), search); });
  Eigen::VectorXd weights(n);
  for (int t = 0; t < n; ++t) {
    out.lambda_impl(t) = est[t].lambda;
    out.loglik(t) = est[t].loglik;
    out.boundary[t] = est[t].boundary;
    weights(t) = std::exp(est[t].loglik / static_cast<double>(data.n_paths()));
  }
  if (!weights.allFinite() || weights.sum() <= 0.0) weights.setOnes();
  out.summary = weighted_median(out.lambda_impl, weights);
  return out;
}

/// Lambda re-estimated on path resamples (with replacement) of each step's
/// observations. Row b holds resample b; the moments stay those of the full data.
template <BasisFunctions B>
Eigen::MatrixXd bootstrap_lambda(const HedgeDataset& data, const MarketParams& market, const B& basis,
                                 int n_resamples, std::uint64_t seed, const LambdaSearch& search = {},
                                 unsigned n_threads = 1) {
  const auto moments = step_moments(data, basis, market, search.regularization);
  const int n = data.n_steps();
  const Eigen::Index n_paths = data.n_paths();
  Eigen::MatrixXd out(n_resamples, n);
  parallel_for(static_cast<std::size_t>(n_resamples) * n, n_threads, [&](std::size_t cell) {
    const auto b = static_cast<Eigen::Index>(cell / n);
    const auto t = static_cast<int>(cell % n);
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<Eigen::Index> pick(0, n_paths - 1);
    std::vector<Eigen::Index> rows(n_paths);
    for (auto& r : rows) r = pick(rng);
    const Eigen::VectorXd actions = data.a.col(t);
    out(b, t) = maximize_log_lambda([&](double lambda) { return action_loglik(lambda, moments[t], actions, rows); },
                                    search)
                    .lambda;
  });
  return out;
}

/// Linear-interpolated quantile of a sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ParameterError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

/// Draws a dataset whose actions follow the MaxEnt Gaussian policy at lambda:
/// backward in time, a_t ~ N(c1/c2, 1/c2) with the coefficients computed from
/// the portfolio implied by the actions already drawn for later steps.
template <BasisFunctions B>
HedgeDataset simulate_maxent_dataset(const PathSet& paths, const B& basis, const Eigen::VectorXd& payoff,
                                     double lambda, std::uint64_t seed,
                                     double regularization = kDefaultRegularization) {
  RiskParams{lambda}.validate();
  const int n = paths.n_steps();
  const double gamma = paths.params.gamma();
  const StepIncrements inc = increments(paths);
  HedgeDataset data{paths.x, Eigen::MatrixXd(paths.n_paths(), n), std::nullopt, payoff};
  Eigen::VectorXd pi_next = payoff;
  for (int t = n - 1; t >= 0; --t) {
    const auto m = conditional_moments(design_matrix(basis, paths.x.col(t)), inc.ds.col(t), inc.ds_hat.col(t),
                                       pi_next, gamma, regularization, t);
    const RewardCoeffs c = reward_coeffs(m, lambda);
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(t), 0x6d61786eULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < paths.n_paths(); ++k)
      data.a(k, t) = c.c1(k) / c.c2(k) + normal(rng) / std::sqrt(c.c2(k));
    pi_next = portfolio_rollback(pi_next, data.a.col(t), inc.ds.col(t), gamma);
  }
  data.validate();
  return data;
}

}  // namespace qlbs
