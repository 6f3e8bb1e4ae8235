#pragma once

// Batch, off-policy Fitted Q Iteration for the quadratic-in-action Q-function
//     Q_t(x, a) = (1, a, a^2/2) W_t Phi(x),
// fitted backward in time from (X_t, a_t, R_t, X_{t+1}) tuples. The
// continuation value inside each regression target is the fitted quadratic
// evaluated at the analytic optimal hedge, never at the maximizer of the
// quadratic itself.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlbs/basis.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/linalg.hpp"
#include "qlbs/market_sim.hpp"

namespace qlbs {

/// Observed trajectories. Rewards are absent when the data come from an
/// inverse-RL setting; the terminal payoff is always required so that the
/// replicating portfolio can be rolled back from observed actions.
struct HedgeDataset {
  Eigen::MatrixXd x;  ///< N x (n_steps + 1) states
  Eigen::MatrixXd a;  ///< N x n_steps actions
  std::optional<Eigen::MatrixXd> r;  ///< N x n_steps rewards
  Eigen::VectorXd terminal_payoff;   ///< N

  Eigen::Index n_paths() const { return x.rows(); }
  int n_steps() const { return static_cast<int>(x.cols()) - 1; }

  void validate(bool require_rewards = false) const {
    if (x.cols() < 2) throw SchemaError("dataset: need at least one time step");
    if (x.rows() < 2) throw DatasetTooSmallError("dataset: need at least 2 paths");
    if (a.rows() != x.rows() || a.cols() != x.cols() - 1) throw SchemaError("dataset: action matrix shape mismatch");
    if (r && (r->rows() != a.rows() || r->cols() != a.cols())) throw SchemaError("dataset: reward matrix shape mismatch");
    if (require_rewards && !r) throw SchemaError("dataset: rewards are required");
    if (terminal_payoff.size() != x.rows()) throw SchemaError("dataset: terminal payoffs missing or wrong length");
  }
};

/// Assembles a dataset from simulated paths plus recorded actions and rewards.
inline HedgeDataset make_dataset(const PathSet& paths, const Eigen::MatrixXd& actions,
                                 std::optional<Eigen::MatrixXd> rewards, const Eigen::VectorXd& payoff) {
  HedgeDataset d{paths.x, actions, std::move(rewards), payoff};
  d.validate();
  return d;
}

/// Row 1 multiplies 1, row 2 multiplies a, row 3 multiplies a^2/2.
using WMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

struct FQISolution {
  std::vector<WMatrix> w;      ///< one 3 x M matrix per step t = 0..n_steps-1
  Eigen::MatrixXd a_star_fqi;  ///< N x n_steps analytic hedges used for continuation values
  Eigen::MatrixXd q_star;      ///< N x (n_steps + 1), Q at the analytic hedge; column n_steps is terminal
  Eigen::VectorXd readout_action;  ///< action used for the t = 0 price read-out, per path
  double price = 0.0;
  Eigen::Index concavity_violations = 0;  ///< states with U^(2) >= 0, all steps
  Eigen::Index evaluated_states = 0;
  bool convex_at_t0 = false;
  std::vector<std::string> warnings;
};

enum class ReadOut {
  /// Q_0 at the analytic optimal hedge a*_0 (same rule as every continuation value).
  analytic_action,
  /// argmax of the fitted quadratic clamped to the observed action range at t = 0.
  clamped_argmax,
};

struct FqiOptions {
  double regularization = kDefaultRegularization;
  ReadOut readout = ReadOut::analytic_action;
  /// Fraction of states with a non-concave fit above which a warning is recorded.
  double concavity_warning_fraction = 1e-3;
};

/// Psi = vec((1, a, a^2/2)^T Phi^T) with index 3 j + i for basis j and action power i.
inline Eigen::VectorXd psi_features(const Eigen::VectorXd& phi_x, double a) {
  const double powers[3] = {1.0, a, 0.5 * a * a};
  Eigen::VectorXd psi(3 * phi_x.size());
  for (Eigen::Index j = 0; j < phi_x.size(); ++j)
    for (int i = 0; i < 3; ++i) psi(3 * j + i) = powers[i] * phi_x(j);
  return psi;
}

/// Row k is psi_features(design.row(k), a(k)).
inline Eigen::MatrixXd psi_design(const Eigen::MatrixXd& design, const Eigen::VectorXd& a) {
  const Eigen::Index m = design.cols();
  Eigen::MatrixXd psi(design.rows(), 3 * m);
  const Eigen::ArrayXd half_sq = 0.5 * a.array().square();
  for (Eigen::Index j = 0; j < m; ++j) {
    psi.col(3 * j) = design.col(j);
    psi.col(3 * j + 1) = design.col(j).cwiseProduct(a);
    psi.col(3 * j + 2) = (design.col(j).array() * half_sq).matrix();
  }
  return psi;
}

/// U = W Phi for every state: row i is U^(i), one column per path.
inline Eigen::MatrixXd action_quadratic(const WMatrix& w, const Eigen::MatrixXd& design) {
  return w * design.transpose();
}

inline Eigen::VectorXd evaluate_quadratic(const Eigen::MatrixXd& u, const Eigen::VectorXd& a) {
  return (u.row(0).transpose().array() + a.array() * u.row(1).transpose().array() +
          0.5 * a.array().square() * u.row(2).transpose().array())
      .matrix();
}

/// Solves (S + eps I) vec(W) = M, S = sum Psi Psi^T, M = sum Psi y.
inline WMatrix fit_step(const Eigen::MatrixXd& design, const Eigen::VectorXd& a_t, const Eigen::VectorXd& targets,
                        double regularization, int step = -1) {
  const Eigen::VectorXd vec_w = ridge_fit(psi_design(design, a_t), targets, regularization, step);
  return Eigen::Map<const WMatrix>(vec_w.data(), 3, design.cols());
}

/// Replicating portfolio rolled back from the terminal payoff along observed actions.
inline Eigen::MatrixXd rollback_observed(const HedgeDataset& data, const Eigen::MatrixXd& ds, double gamma) {
  const int n = data.n_steps();
  Eigen::MatrixXd pi(data.n_paths(), n + 1);
  pi.col(n) = data.terminal_payoff;
  for (int t = n - 1; t >= 0; --t) pi.col(t) = portfolio_rollback(pi.col(t + 1), data.a.col(t), ds.col(t), gamma);
  return pi;
}

/// Prices and increments recovered from the dataset states.
inline StepIncrements dataset_increments(const HedgeDataset& data, const MarketParams& market) {
  return increments(prices_from_states(data.x, market), market.gamma());
}

/// Analytic optimal hedges a*_t for every step, from the portfolio implied by
/// the observed actions.
template <BasisFunctions B>
Eigen::MatrixXd analytic_hedges(const HedgeDataset& data, const B& basis, const MarketParams& market,
                                const RiskParams& risk, double regularization = kDefaultRegularization) {
  const double gamma = market.gamma();
  const StepIncrements inc = dataset_increments(data, market);
  const Eigen::MatrixXd pi = rollback_observed(data, inc.ds, gamma);
  Eigen::MatrixXd hedges(data.n_paths(), data.n_steps());
  for (int t = 0; t < data.n_steps(); ++t) {
    const Eigen::MatrixXd design = design_matrix(basis, data.x.col(t));
    const Eigen::VectorXd phi = optimal_action_coeffs(design, inc.ds.col(t), inc.ds_hat.col(t), pi.col(t + 1), gamma,
                                                      risk, regularization, t);
    hedges.col(t) = design * phi;
  }
  return hedges;
}

/// One FQI regression at step t. For t = n_steps-1 the continuation is the
/// terminal condition and w_next is ignored; otherwise w_next is evaluated at
/// X_{t+1} with the externally supplied analytic hedge a_star_next.
template <BasisFunctions B>
WMatrix fit_step(int t, const HedgeDataset& data, const B& basis, const MarketParams& market, const RiskParams& risk,
                 const std::optional<WMatrix>& w_next, const Eigen::VectorXd& a_star_next,
                 double regularization = kDefaultRegularization) {
  data.validate(true);
  const int n = data.n_steps();
  if (t < 0 || t >= n) throw ParameterError("fit_step: time step out of range");
  Eigen::VectorXd q_next;
  if (t == n - 1) {
    q_next = terminal_q(data.terminal_payoff, risk.lambda);
  } else {
    if (!w_next) throw ParameterError("fit_step: next-step coefficients required before maturity");
    q_next = evaluate_quadratic(action_quadratic(*w_next, design_matrix(basis, data.x.col(t + 1))), a_star_next);
  }
  const Eigen::VectorXd targets = data.r->col(t) + market.gamma() * q_next;
  return fit_step(design_matrix(basis, data.x.col(t)), data.a.col(t), targets, regularization, t);
}

template <BasisFunctions B>
FQISolution solve_fqi(const HedgeDataset& data, const B& basis, const MarketParams& market, const RiskParams& risk,
                      const FqiOptions& options = {}) {
  market.validate();
  risk.validate();
  data.validate(true);
  const int n = data.n_steps();
  if (n != market.n_steps()) throw SchemaError("solve_fqi: dataset step count does not match market parameters");
  const Eigen::Index n_paths = data.n_paths();
  const double gamma = market.gamma();

  FQISolution sol;
  sol.w.resize(n);
  sol.a_star_fqi = analytic_hedges(data, basis, market, risk, options.regularization);
  sol.q_star.resize(n_paths, n + 1);
  sol.q_star.col(n) = terminal_q(data.terminal_payoff, risk.lambda);

  Eigen::MatrixXd u0;
  Eigen::MatrixXd design0;
  for (int t = n - 1; t >= 0; --t) {
    const Eigen::MatrixXd design = design_matrix(basis, data.x.col(t));
    const Eigen::VectorXd targets = data.r->col(t) + gamma * sol.q_star.col(t + 1);
    sol.w[t] = fit_step(design, data.a.col(t), targets, options.regularization, t);
    const Eigen::MatrixXd u = action_quadratic(sol.w[t], design);
    sol.concavity_violations += (u.row(2).array() >= 0.0).count();
    sol.evaluated_states += n_paths;
    sol.q_star.col(t) = evaluate_quadratic(u, sol.a_star_fqi.col(t));
    if (t == 0) u0 = u;
  }

  sol.convex_at_t0 = (u0.row(2).array() >= 0.0).any();
  const double frac = static_cast<double>(sol.concavity_violations) / static_cast<double>(sol.evaluated_states);
  if (frac > options.concavity_warning_fraction) {
    sol.warnings.push_back("fitted Q is not concave in the action at " + std::to_string(sol.concavity_violations) +
                           " of " + std::to_string(sol.evaluated_states) + " dataset states");
  }

  if (options.readout == ReadOut::clamped_argmax) {
    if (sol.convex_at_t0) throw NumericalError("solve_fqi: fitted Q is not concave in the action at read-out", 0);
    const double lo = data.a.col(0).minCoeff();
    const double hi = data.a.col(0).maxCoeff();
    sol.readout_action = (-u0.row(1).array() / u0.row(2).array()).max(lo).min(hi).transpose().matrix();
  } else {
    if (sol.convex_at_t0) sol.warnings.push_back("fitted Q is not concave in the action at t = 0");
    sol.readout_action = sol.a_star_fqi.col(0);
  }
  sol.price = -evaluate_quadratic(u0, sol.readout_action).mean();
  if (!std::isfinite(sol.price)) throw NumericalError("solve_fqi: non-finite price", 0);
  return sol;
}

}  // namespace qlbs
