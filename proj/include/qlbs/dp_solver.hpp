#pragma once

// Model-based backward recursion for the optimal hedge and optimal Q-function.
//
// At each step t = T-1, ..., 0 the hedge coefficients solve
//     (A_t + eps I) phi_t = B_t,
//     A_t = sum_k Phi(X_t^k) Phi(X_t^k)^T (dS_hat_t^k)^2,
//     B_t = sum_k Phi(X_t^k) [Pi_hat_{t+1}^k dS_hat_t^k + dS_t^k / (2 gamma lambda)],
// the portfolio is rolled back as Pi_t = gamma (Pi_{t+1} - a_t dS_t), and the
// optimal Q values are regressed on the same basis with targets
// R_t + gamma Q*_{t+1}. The second term of B_t is dropped for risk-only hedges.
// All hats denote cross-path demeaning at fixed t.

#include <cmath>

#include <Eigen/Dense>

#include "qlbs/basis.hpp"
#include "qlbs/bsm.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/linalg.hpp"
#include "qlbs/market_sim.hpp"

namespace qlbs {

struct RiskParams {
  double lambda = 1e-3;
  /// Drop the drift term 1/(2 gamma lambda) dS from the optimal hedge.
  bool risk_only_hedge = true;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("risk aversion lambda must be positive");
  }
};

struct DPSolution {
  Eigen::MatrixXd phi;      ///< n_steps x M hedge coefficients
  Eigen::MatrixXd omega;    ///< n_steps x M optimal-Q coefficients
  Eigen::MatrixXd a_star;   ///< N x n_steps
  Eigen::MatrixXd pi;       ///< N x (n_steps + 1)
  Eigen::MatrixXd q_star;   ///< N x (n_steps + 1)
  Eigen::MatrixXd rewards;  ///< N x n_steps
  /// Coefficient of a^2 in the expected one-step reward, -lambda gamma^2 E[dS_hat^2], per step.
  Eigen::VectorXd action_curvature;
  double terminal_reward = 0.0;  ///< R_T = -lambda Var[Pi_T]
  double price = 0.0;
  double lambda = 0.0;
  double regularization = kDefaultRegularization;
};

inline Eigen::VectorXd put_payoff(const Eigen::Ref<const Eigen::VectorXd>& s_T, double strike) {
  return (strike - s_T.array()).max(0.0).matrix();
}

inline Eigen::VectorXd call_payoff(const Eigen::Ref<const Eigen::VectorXd>& s_T, double strike) {
  return (s_T.array() - strike).max(0.0).matrix();
}

/// Pi_T = H_T(S_T) = max(K - S_T, 0) per path.
inline Eigen::VectorXd terminal_portfolio(const PathSet& paths, const EuropeanPut& put) {
  put.validate();
  return put_payoff(paths.s.col(paths.n_steps()), put.strike);
}

inline Eigen::VectorXd optimal_action_coeffs(const Eigen::MatrixXd& design, const Eigen::VectorXd& ds,
                                             const Eigen::VectorXd& ds_hat, const Eigen::VectorXd& pi_next,
                                             double gamma, const RiskParams& risk, double regularization,
                                             int step = -1) {
  const Eigen::VectorXd pi_hat = demeaned(pi_next);
  const Eigen::MatrixXd weighted = design.array().colwise() * ds_hat.array().square();
  const Eigen::MatrixXd a = design.transpose() * weighted;
  Eigen::VectorXd rhs = pi_hat.cwiseProduct(ds_hat);
  if (!risk.risk_only_hedge) rhs += ds / (2.0 * gamma * risk.lambda);
  return ridge_solve(a, design.transpose() * rhs, regularization, step);
}

template <BasisFunctions B>
Eigen::VectorXd optimal_action_coeffs(int t, const PathSet& paths, const B& basis, const Eigen::VectorXd& pi_next,
                                      const RiskParams& risk, double regularization = kDefaultRegularization) {
  const StepIncrements inc = increments(paths);
  return optimal_action_coeffs(design_matrix(basis, paths.x.col(t)), inc.ds.col(t), inc.ds_hat.col(t), pi_next,
                               paths.params.gamma(), risk, regularization, t);
}

inline Eigen::VectorXd optimal_action(const Eigen::MatrixXd& design, const Eigen::VectorXd& phi_t) {
  return design * phi_t;
}

template <BasisFunctions B>
Eigen::VectorXd optimal_action(int t, const PathSet& paths, const B& basis, const Eigen::VectorXd& phi_t) {
  return optimal_action(design_matrix(basis, paths.x.col(t)), phi_t);
}

/// Self-financing rollback Pi_t = gamma (Pi_{t+1} - a_t dS_t).
inline Eigen::VectorXd portfolio_rollback(const Eigen::VectorXd& pi_next, const Eigen::VectorXd& a_t,
                                          const Eigen::VectorXd& ds_t, double gamma) {
  return gamma * (pi_next - a_t.cwiseProduct(ds_t));
}

/// Realized one-step reward per path,
///   gamma a dS - lambda gamma^2 (Pi_hat^2 - 2 a dS_hat Pi_hat + a^2 dS_hat^2),
/// with Pi_hat the demeaned next-step portfolio value.
inline Eigen::VectorXd step_reward(const Eigen::VectorXd& a_t, const Eigen::VectorXd& ds_t,
                                   const Eigen::VectorXd& ds_hat_t, const Eigen::VectorXd& pi_next, double gamma,
                                   double lambda) {
  const Eigen::ArrayXd pi_hat = demeaned(pi_next).array();
  const Eigen::ArrayXd a = a_t.array();
  const Eigen::ArrayXd dsh = ds_hat_t.array();
  const Eigen::ArrayXd risk = pi_hat.square() - 2.0 * a * dsh * pi_hat + a.square() * dsh.square();
  return (gamma * a * ds_t.array() - lambda * gamma * gamma * risk).matrix();
}

/// R_T = -lambda Var[Pi_T].
inline double terminal_reward(const Eigen::VectorXd& pi_T, double lambda) {
  return -lambda * cross_path_variance(pi_T);
}

/// Q*_T = -Pi_T - lambda Var[Pi_T].
inline Eigen::VectorXd terminal_q(const Eigen::VectorXd& pi_T, double lambda) {
  return (-pi_T.array() + terminal_reward(pi_T, lambda)).matrix();
}

/// Solves (C + eps I) omega = D with C = sum Phi Phi^T and D = sum Phi y.
inline Eigen::VectorXd q_coeffs(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets, double regularization,
                                int step = -1) {
  return ridge_fit(design, targets, regularization, step);
}

template <BasisFunctions B>
Eigen::VectorXd q_coeffs(int t, const PathSet& paths, const B& basis, const Eigen::VectorXd& rewards_t,
                         const Eigen::VectorXd& q_next_at_astar, double regularization = kDefaultRegularization) {
  const Eigen::VectorXd targets = rewards_t + paths.params.gamma() * q_next_at_astar;
  return q_coeffs(design_matrix(basis, paths.x.col(t)), targets, regularization, t);
}

/// Full backward pass for an arbitrary terminal payoff vector.
template <BasisFunctions B>
DPSolution solve_dp_payoff(const PathSet& paths, const B& basis, const Eigen::VectorXd& payoff, const RiskParams& risk,
                           double regularization = kDefaultRegularization) {
  risk.validate();
  const Eigen::Index n_paths = paths.n_paths();
  const int n = paths.n_steps();
  if (n_paths < 2) throw DatasetTooSmallError("solve_dp: need at least 2 paths");
  if (payoff.size() != n_paths) throw SchemaError("solve_dp: payoff length does not match the path count");
  const Eigen::Index m = basis.size();
  const double gamma = paths.params.gamma();
  const StepIncrements inc = increments(paths);

  DPSolution sol;
  sol.lambda = risk.lambda;
  sol.regularization = regularization;
  sol.phi.resize(n, m);
  sol.omega.resize(n, m);
  sol.a_star.resize(n_paths, n);
  sol.pi.resize(n_paths, n + 1);
  sol.q_star.resize(n_paths, n + 1);
  sol.rewards.resize(n_paths, n);
  sol.action_curvature.resize(n);

  sol.pi.col(n) = payoff;
  sol.terminal_reward = terminal_reward(payoff, risk.lambda);
  sol.q_star.col(n) = terminal_q(payoff, risk.lambda);

  for (int t = n - 1; t >= 0; --t) {
    const Eigen::MatrixXd design = design_matrix(basis, paths.x.col(t));
    const Eigen::VectorXd ds = inc.ds.col(t);
    const Eigen::VectorXd ds_hat = inc.ds_hat.col(t);
    const Eigen::VectorXd pi_next = sol.pi.col(t + 1);

    const Eigen::VectorXd phi = optimal_action_coeffs(design, ds, ds_hat, pi_next, gamma, risk, regularization, t);
    const Eigen::VectorXd a = optimal_action(design, phi);
    sol.phi.row(t) = phi.transpose();
    sol.a_star.col(t) = a;
    sol.pi.col(t) = portfolio_rollback(pi_next, a, ds, gamma);
    sol.rewards.col(t) = step_reward(a, ds, ds_hat, pi_next, gamma, risk.lambda);
    sol.action_curvature(t) = -risk.lambda * gamma * gamma * ds_hat.squaredNorm() / static_cast<double>(n_paths);

    const Eigen::VectorXd targets = sol.rewards.col(t) + gamma * sol.q_star.col(t + 1);
    const Eigen::VectorXd omega = q_coeffs(design, targets, regularization, t);
    sol.omega.row(t) = omega.transpose();
    sol.q_star.col(t) = design * omega;
  }
  sol.price = -sol.q_star.col(0).mean();
  if (!std::isfinite(sol.price)) throw NumericalError("solve_dp: non-finite price", 0);
  return sol;
}

template <BasisFunctions B>
DPSolution solve_dp(const PathSet& paths, const B& basis, const EuropeanPut& put, const RiskParams& risk,
                    double regularization = kDefaultRegularization) {
  return solve_dp_payoff(paths, basis, terminal_portfolio(paths, put), risk, regularization);
}

}  // namespace qlbs
