#pragma once

// Lognormal stock paths, the drift-removed state variable, and the per-step
// forward increments every solver consumes.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlbs/errors.hpp"
#include "qlbs/parallel.hpp"

namespace qlbs {

struct MarketParams {
  double s0 = 100.0;
  double mu = 0.05;
  double sigma = 0.15;
  double r = 0.03;
  double t_maturity = 1.0;
  double dt = 1.0 / 24.0;

  int n_steps() const { return static_cast<int>(std::lround(t_maturity / dt)); }
  /// One-step discount factor exp(-r dt).
  double gamma() const { return std::exp(-r * dt); }
  double time_at(int step) const { return step * dt; }

  void validate() const {
    if (!(s0 > 0.0)) throw ParameterError("s0 must be positive");
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    if (!(dt > 0.0)) throw ParameterError("dt must be positive");
    if (!(t_maturity > 0.0)) throw ParameterError("maturity must be positive");
    if (!std::isfinite(mu) || !std::isfinite(r)) throw ParameterError("mu and r must be finite");
    const int n = n_steps();
    if (n < 1 || std::abs(n * dt - t_maturity) > 1e-12)
      throw ParameterError("maturity must be an integer number of steps dt");
    const double g = gamma();
    if (!(g > 0.0 && g <= 1.0)) throw ParameterError("discount factor must lie in (0, 1]");
  }
};

/// Maps a price to the time-homogeneous state X_t = log S_t - (mu - sigma^2/2) t.
inline double to_state(double s_value, double t_years, const MarketParams& p) {
  if (!(s_value > 0.0)) throw DomainError("to_state: price must be positive");
  return std::log(s_value) - (p.mu - 0.5 * p.sigma * p.sigma) * t_years;
}

inline double from_state(double x_value, double t_years, const MarketParams& p) {
  return std::exp(x_value + (p.mu - 0.5 * p.sigma * p.sigma) * t_years);
}

/// Simulated prices and states, one row per path and one column per time step.
/// Column 0 holds s0 for every path.
struct PathSet {
  Eigen::MatrixXd s;
  Eigen::MatrixXd x;
  std::uint64_t seed = 0;
  MarketParams params;

  Eigen::Index n_paths() const { return s.rows(); }
  int n_steps() const { return static_cast<int>(s.cols()) - 1; }
};

/// Fills the state matrix from the price matrix.
inline Eigen::MatrixXd states_from_prices(const Eigen::MatrixXd& s, const MarketParams& p) {
  Eigen::MatrixXd x(s.rows(), s.cols());
  for (Eigen::Index t = 0; t < s.cols(); ++t)
    for (Eigen::Index k = 0; k < s.rows(); ++k) x(k, t) = to_state(s(k, t), p.time_at(static_cast<int>(t)), p);
  return x;
}

inline Eigen::MatrixXd prices_from_states(const Eigen::MatrixXd& x, const MarketParams& p) {
  Eigen::MatrixXd s(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t)
    for (Eigen::Index k = 0; k < x.rows(); ++k) s(k, t) = from_state(x(k, t), p.time_at(static_cast<int>(t)), p);
  return s;
}

/// Exact lognormal stepping, carried out on the state: X_{t+1} = X_t + sigma sqrt(dt) Z,
/// which is S_{t+1} = S_t exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z). Prices are
/// derived from the states, so prices_from_states(x) reproduces s bit for bit.
/// Path k draws its normals from a generator seeded by (seed, k) alone, so the
/// result is identical for any thread count.
inline PathSet simulate_paths(const MarketParams& params, Eigen::Index n_paths, std::uint64_t seed,
                              unsigned n_threads = 1) {
  params.validate();
  if (n_paths < 2) throw DatasetTooSmallError("simulate_paths: need at least 2 paths");

  const int n = params.n_steps();
  const double vol = params.sigma * std::sqrt(params.dt);
  const double x0 = to_state(params.s0, 0.0, params);

  PathSet out;
  out.seed = seed;
  out.params = params;
  out.x.resize(n_paths, n + 1);

  constexpr std::size_t kBlock = 256;
  const auto n_blocks = (static_cast<std::size_t>(n_paths) + kBlock - 1) / kBlock;
  parallel_for(n_blocks, n_threads, [&](std::size_t b) {
    const auto begin = static_cast<Eigen::Index>(b * kBlock);
    const auto end = std::min<Eigen::Index>(n_paths, begin + static_cast<Eigen::Index>(kBlock));
    for (Eigen::Index k = begin; k < end; ++k) {
      std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(k)));
      std::normal_distribution<double> normal(0.0, 1.0);
      double x = x0;
      out.x(k, 0) = x;
      for (int t = 0; t < n; ++t) {
        x += vol * normal(rng);
        out.x(k, t + 1) = x;
      }
    }
  });
  out.s = prices_from_states(out.x, params);
  return out;
}

/// Forward increments ds[k,t] = S_{t+1} - S_t / gamma and their cross-path
/// demeaned counterpart.
struct StepIncrements {
  Eigen::MatrixXd ds;
  Eigen::MatrixXd ds_hat;
};

/// Subtracts the sample mean. A second correction pass removes the rounding
/// residual left by the first.
inline Eigen::VectorXd demeaned(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() < 2) throw DatasetTooSmallError("demean: need at least 2 values");
  Eigen::VectorXd out = v.array() - v.mean();
  out.array() -= out.mean();
  return out;
}

inline std::vector<double> demean(std::span<const double> values) {
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd d = demeaned(v);
  return {d.data(), d.data() + d.size()};
}

/// Population (1/N) variance across paths.
inline double cross_path_variance(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return demeaned(v).squaredNorm() / static_cast<double>(v.size());
}

inline StepIncrements increments(const Eigen::MatrixXd& s, double gamma) {
  if (s.rows() < 2) throw DatasetTooSmallError("increments: need at least 2 paths");
  if (s.cols() < 2) throw ParameterError("increments: need at least one time step");
  const Eigen::Index n = s.cols() - 1;
  StepIncrements inc;
  inc.ds = s.rightCols(n) - s.leftCols(n) / gamma;
  inc.ds_hat.resize(s.rows(), n);
  for (Eigen::Index t = 0; t < n; ++t) inc.ds_hat.col(t) = demeaned(inc.ds.col(t));
  return inc;
}

inline StepIncrements increments(const PathSet& paths) { return increments(paths.s, paths.params.gamma()); }

}  // namespace qlbs
