#pragma once

// Experiment drivers: price vs risk aversion, on-policy RL/IRL, off-policy
// noise sweeps and implied risk aversion. Every cell of a grid is an isolated
// computation keyed by its seeds, so reports are identical for any thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qlbs/basis.hpp"
#include "qlbs/bsm.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/fqi_solver.hpp"
#include "qlbs/irl.hpp"
#include "qlbs/market_sim.hpp"
#include "qlbs/parallel.hpp"
#include "qlbs/portfolio.hpp"

namespace qlbs {

enum class Profile { desk, paper };

inline Eigen::Index profile_paths(Profile p) { return p == Profile::paper ? 50000 : 5000; }

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ParameterError("log_grid: need n >= 1 and 0 < lo <= hi");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return g;
}

enum class IrlPolicy { maxent, dp };

struct ExperimentConfig {
  MarketParams market;
  EuropeanPut put;
  std::optional<OptionBasket> basket;  ///< replaces the single put when present
  RiskParams risk;
  Eigen::Index n_paths = profile_paths(Profile::desk);
  std::uint64_t seed = 42;
  int n_mc_runs = 2;
  int basis_m = 12;
  double regularization = kDefaultRegularization;
  std::vector<double> lambda_grid = log_grid(1e-5, 3e-3, 10);
  std::vector<double> eta_grid = {0.15, 0.25, 0.35, 0.5};
  int n_noise_scenarios = 5;
  IrlPolicy irl_policy = IrlPolicy::maxent;
  int n_bootstrap = 20;
  unsigned n_threads = 1;

  void validate() const {
    market.validate();
    risk.validate();
    if (basket) basket->validate(); else put.validate();
    if (n_paths < 2) throw ParameterError("config: n_paths must be at least 2");
    if (n_mc_runs < 1) throw ParameterError("config: n_mc_runs must be at least 1");
    if (basis_m < 4) throw ParameterError("config: basis_m must be at least 4 for cubic splines");
    if (!(regularization >= 0.0)) throw ParameterError("config: regularization must be nonnegative");
    if (n_noise_scenarios < 1) throw ParameterError("config: n_noise_scenarios must be at least 1");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw ParameterError("config: lambda grid values must be positive");
    for (double e : eta_grid)
      if (!(e >= 0.0 && e < 1.0)) throw ParameterError("config: eta values must lie in [0, 1)");
  }

  /// Path seed of Monte Carlo run r.
  std::uint64_t run_seed(int r) const { return seed + static_cast<std::uint64_t>(r); }
  /// Action-noise stream, independent of the path stream.
  std::uint64_t noise_seed() const { return stream_seed(seed, 0x6e6f697365ULL); }

  Eigen::VectorXd payoff(const PathSet& paths) const {
    const Eigen::VectorXd s_T = paths.s.col(paths.n_steps());
    return basket ? basket_terminal_payoff(*basket, s_T) : put_payoff(s_T, put.strike);
  }

  /// Black-Scholes value of the option (sum over legs for a basket).
  double bs_reference() const {
    const auto value = [&](OptionKind kind, double strike) {
      return kind == OptionKind::put ? bs_put_price(market.s0, strike, market.r, market.sigma, market.t_maturity)
                                     : bs_call_price(market.s0, strike, market.r, market.sigma, market.t_maturity);
    };
    if (!basket) return value(OptionKind::put, put.strike);
    double total = 0.0;
    for (const auto& leg : basket->legs) total += leg.quantity * value(leg.kind, leg.strike);
    return total;
  }
};

inline void apply_profile(ExperimentConfig& cfg, Profile p) { cfg.n_paths = profile_paths(p); }

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"market",
       {{"s0", c.market.s0}, {"mu", c.market.mu}, {"sigma", c.market.sigma}, {"r", c.market.r},
        {"maturity", c.market.t_maturity}, {"dt", c.market.dt}}},
      {"risk", {{"lambda", c.risk.lambda}, {"risk_only_hedge", c.risk.risk_only_hedge}}},
      {"n_paths", c.n_paths},
      {"seed", c.seed},
      {"n_mc_runs", c.n_mc_runs},
      {"basis_m", c.basis_m},
      {"regularization", c.regularization},
      {"lambda_grid", c.lambda_grid},
      {"eta_grid", c.eta_grid},
      {"n_noise_scenarios", c.n_noise_scenarios},
      {"irl_policy", c.irl_policy == IrlPolicy::maxent ? "maxent" : "dp"},
      {"n_bootstrap", c.n_bootstrap},
  };
  if (c.basket)
    j["basket"] = basket_to_json(*c.basket);
  else
    j["option"] = {{"kind", "put"}, {"strike", c.put.strike}};
  return j;
}

/// Overlays the keys present in j on the defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  try {
    if (j.contains("market")) {
      const auto& m = j.at("market");
      c.market.s0 = m.value("s0", c.market.s0);
      c.market.mu = m.value("mu", c.market.mu);
      c.market.sigma = m.value("sigma", c.market.sigma);
      c.market.r = m.value("r", c.market.r);
      c.market.t_maturity = m.value("maturity", c.market.t_maturity);
      c.market.dt = m.value("dt", c.market.dt);
      if (m.contains("steps_per_year")) c.market.dt = 1.0 / m.at("steps_per_year").get<double>();
    }
    if (j.contains("risk")) {
      const auto& r = j.at("risk");
      c.risk.lambda = r.value("lambda", c.risk.lambda);
      c.risk.risk_only_hedge = r.value("risk_only_hedge", c.risk.risk_only_hedge);
    }
    if (j.contains("option")) {
      const auto& o = j.at("option");
      if (o.value("kind", std::string("put")) != "put") throw SchemaError("config: single option must be a put; use 'basket'");
      c.put.strike = o.value("strike", c.put.strike);
    }
    if (j.contains("basket")) c.basket = basket_from_json(j.at("basket"));
    if (j.contains("profile")) {
      const auto p = j.at("profile").get<std::string>();
      if (p != "desk" && p != "paper") throw SchemaError("config: profile must be 'desk' or 'paper'");
      apply_profile(c, p == "paper" ? Profile::paper : Profile::desk);
    }
    c.n_paths = j.value("n_paths", c.n_paths);
    c.seed = j.value("seed", c.seed);
    c.n_mc_runs = j.value("n_mc_runs", c.n_mc_runs);
    c.basis_m = j.value("basis_m", c.basis_m);
    c.regularization = j.value("regularization", c.regularization);
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    c.eta_grid = j.value("eta_grid", c.eta_grid);
    c.n_noise_scenarios = j.value("n_noise_scenarios", c.n_noise_scenarios);
    c.n_bootstrap = j.value("n_bootstrap", c.n_bootstrap);
    if (j.contains("irl_policy")) {
      const auto p = j.at("irl_policy").get<std::string>();
      if (p != "maxent" && p != "dp") throw SchemaError("config: irl_policy must be 'maxent' or 'dp'");
      c.irl_policy = p == "maxent" ? IrlPolicy::maxent : IrlPolicy::dp;
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  c.put.maturity = c.market.t_maturity;
  c.validate();
  return c;
}

/// FNV-1a over the canonical JSON form, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

struct PriceRow {
  std::string method;
  double lambda = 0.0;
  double eta = 0.0;
  int scenario = 0;
  int run = 0;
  std::uint64_t seed = 0;
  double price = 0.0;
};

struct PriceSummary {
  std::string method;
  double lambda = 0.0;
  double eta = 0.0;
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation across rows, 0 for a single row
  int count = 0;
};

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct ExperimentReport {
  std::string experiment;
  std::string config_hash;
  std::vector<PriceRow> rows;
  std::vector<PriceSummary> summary;

  const PriceSummary& find(const std::string& method, double lambda, double eta) const {
    for (const auto& s : summary)
      if (s.method == method && s.lambda == lambda && s.eta == eta) return s;
    throw ParameterError("report has no summary for method '" + method + "'");
  }

  std::vector<double> prices(const std::string& method, double lambda, double eta) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.method == method && r.lambda == lambda && r.eta == eta) out.push_back(r.price);
    return out;
  }

  /// Groups rows by (method, lambda, eta) in first-appearance order.
  void summarize() {
    summary.clear();
    std::vector<std::tuple<std::string, double, double>> keys;
    for (const auto& r : rows) {
      const auto key = std::make_tuple(r.method, r.lambda, r.eta);
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& [method, lambda, eta] : keys) {
      const auto p = prices(method, lambda, eta);
      summary.push_back({method, lambda, eta, mean_of(p), sample_std(p), static_cast<int>(p.size())});
    }
  }
};

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "experiment,method,lambda,eta,scenario,run,seed,config_hash,price\n" << std::setprecision(17);
  for (const auto& r : report.rows)
    out << report.experiment << ',' << r.method << ',' << r.lambda << ',' << r.eta << ',' << r.scenario << ','
        << r.run << ',' << r.seed << ',' << report.config_hash << ',' << r.price << '\n';
}

inline void write_summary_csv(std::ostream& out, const ExperimentReport& report) {
  out << "method,lambda,eta,mean,std,count\n" << std::setprecision(10);
  for (const auto& s : report.summary)
    out << s.method << ',' << s.lambda << ',' << s.eta << ',' << s.mean << ',' << s.std << ',' << s.count << '\n';
}

/// Paths and basis of one Monte Carlo run.
struct RunData {
  PathSet paths;
  BSplineBasis basis;
  Eigen::VectorXd payoff;
};

inline RunData make_run(const ExperimentConfig& cfg, int run) {
  RunData d{simulate_paths(cfg.market, cfg.n_paths, cfg.run_seed(run)), {}, {}};
  d.basis = build_basis_for(d.paths.x, cfg.basis_m);
  d.payoff = cfg.payoff(d.paths);
  return d;
}

/// Multiplies each action by an independent uniform factor in [1 - eta, 1 + eta].
/// The underlying uniforms depend only on (seed, run, scenario, path, step), so
/// every eta of a sweep perturbs with the same draws.
inline Eigen::MatrixXd perturb_actions(const Eigen::MatrixXd& actions, double eta, std::uint64_t noise_seed, int run,
                                       int scenario) {
  std::mt19937_64 rng(stream_seed(noise_seed, static_cast<std::uint64_t>(run), static_cast<std::uint64_t>(scenario)));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd out(actions.rows(), actions.cols());
  for (Eigen::Index t = 0; t < actions.cols(); ++t)
    for (Eigen::Index k = 0; k < actions.rows(); ++k) out(k, t) = actions(k, t) * (1.0 + eta * u(rng));
  return out;
}

/// Off-policy (or, for eta = 0, on-policy) FQI price from DP hedges perturbed
/// by noise; rewards are recomputed for the perturbed actions.
inline double offpolicy_price(const ExperimentConfig& cfg, const RunData& run_data, const DPSolution& dp, double eta,
                              int run, int scenario) {
  const Eigen::MatrixXd actions =
      eta == 0.0 ? dp.a_star : perturb_actions(dp.a_star, eta, cfg.noise_seed(), run, scenario);
  HedgeDataset data = make_dataset(run_data.paths, actions, std::nullopt, run_data.payoff);
  data.r = rewards_from_actions(data, cfg.risk.lambda, cfg.market);
  FqiOptions opts;
  opts.regularization = cfg.regularization;
  return solve_fqi(data, run_data.basis, cfg.market, cfg.risk, opts).price;
}

/// DP price per (lambda, run), plus the Black-Scholes reference row.
inline ExperimentReport run_price_vs_lambda(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.lambda_grid.empty()) throw ParameterError("price vs lambda: lambda grid is empty");
  ExperimentReport rep{"sweep-lambda", config_hash(cfg), {}, {}};
  const std::size_t n_lambda = cfg.lambda_grid.size();
  std::vector<RunData> runs(cfg.n_mc_runs);
  parallel_for(runs.size(), cfg.n_threads, [&](std::size_t r) { runs[r] = make_run(cfg, static_cast<int>(r)); });
  std::vector<PriceRow> rows(n_lambda * runs.size());
  parallel_for(rows.size(), cfg.n_threads, [&](std::size_t cell) {
    const auto i = cell / runs.size();
    const auto r = static_cast<int>(cell % runs.size());
    RiskParams risk = cfg.risk;
    risk.lambda = cfg.lambda_grid[i];
    const double price = solve_dp_payoff(runs[r].paths, runs[r].basis, runs[r].payoff, risk, cfg.regularization).price;
    rows[cell] = {"dp", risk.lambda, 0.0, 0, r, cfg.run_seed(r), price};
  });
  rep.rows = std::move(rows);
  rep.rows.push_back({"bs", 0.0, 0.0, 0, 0, 0, cfg.bs_reference()});
  rep.summarize();
  return rep;
}

/// Per run: DP solve, FQI on the DP hedges and rewards, and the IRL variant
/// that drops the rewards and recomputes them at the known lambda.
inline ExperimentReport run_onpolicy_rl(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport rep{"onpolicy-rl", config_hash(cfg), {}, {}};
  std::vector<std::array<double, 3>> prices(cfg.n_mc_runs);
  parallel_for(prices.size(), cfg.n_threads, [&](std::size_t r) {
    const RunData d = make_run(cfg, static_cast<int>(r));
    const DPSolution dp = solve_dp_payoff(d.paths, d.basis, d.payoff, cfg.risk, cfg.regularization);
    FqiOptions opts;
    opts.regularization = cfg.regularization;
    HedgeDataset data = make_dataset(d.paths, dp.a_star, dp.rewards, d.payoff);
    const double fqi = solve_fqi(data, d.basis, cfg.market, cfg.risk, opts).price;
    data.r.reset();
    data.r = rewards_from_actions(data, cfg.risk.lambda, cfg.market);
    const double irl = solve_fqi(data, d.basis, cfg.market, cfg.risk, opts).price;
    prices[r] = {dp.price, fqi, irl};
  });
  const char* methods[3] = {"dp", "fqi", "irl"};
  for (int m = 0; m < 3; ++m)
    for (int r = 0; r < cfg.n_mc_runs; ++r)
      rep.rows.push_back({methods[m], cfg.risk.lambda, 0.0, 0, r, cfg.run_seed(r), prices[r][m]});
  for (int r = 0; r < cfg.n_mc_runs; ++r)
    rep.rows.push_back({"fqi_minus_dp", cfg.risk.lambda, 0.0, 0, r, cfg.run_seed(r), prices[r][1] - prices[r][0]});
  rep.summarize();
  return rep;
}

/// FQI prices for every (eta, scenario, run) plus the eta = 0 on-policy
/// reference per run. All cells of a run share its paths and DP solution.
inline ExperimentReport run_offpolicy_noise(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.eta_grid.empty()) throw ParameterError("noise sweep: eta grid is empty");
  ExperimentReport rep{"sweep-noise", config_hash(cfg), {}, {}};
  const auto n_runs = static_cast<std::size_t>(cfg.n_mc_runs);
  std::vector<RunData> runs(n_runs);
  std::vector<DPSolution> dps(n_runs);
  parallel_for(n_runs, cfg.n_threads, [&](std::size_t r) {
    runs[r] = make_run(cfg, static_cast<int>(r));
    dps[r] = solve_dp_payoff(runs[r].paths, runs[r].basis, runs[r].payoff, cfg.risk, cfg.regularization);
  });

  struct Cell {
    double eta;
    int scenario;
    int run;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < n_runs; ++r) cells.push_back({0.0, 0, static_cast<int>(r)});
  for (double eta : cfg.eta_grid)
    for (int s = 0; s < cfg.n_noise_scenarios; ++s)
      for (std::size_t r = 0; r < n_runs; ++r) cells.push_back({eta, s, static_cast<int>(r)});

  std::vector<PriceRow> rows(cells.size());
  parallel_for(cells.size(), cfg.n_threads, [&](std::size_t i) {
    const auto& c = cells[i];
    const double price = offpolicy_price(cfg, runs[c.run], dps[c.run], c.eta, c.run, c.scenario);
    rows[i] = {"fqi", cfg.risk.lambda, c.eta, c.scenario, c.run, cfg.run_seed(c.run), price};
  });
  for (std::size_t r = 0; r < n_runs; ++r)
    rows.push_back({"dp", cfg.risk.lambda, 0.0, 0, static_cast<int>(r), cfg.run_seed(static_cast<int>(r)), dps[r].price});
  rep.rows = std::move(rows);
  rep.summarize();
  return rep;
}

/// Mean and spread of |price(eta, scenario, run) - price(on-policy, run)| for one eta.
struct NoiseDeviation {
  double eta = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

inline std::vector<NoiseDeviation> noise_deviations(const ExperimentReport& rep) {
  std::map<int, double> onpolicy;
  for (const auto& r : rep.rows)
    if (r.method == "fqi" && r.eta == 0.0) onpolicy[r.run] = r.price;
  std::vector<double> etas;
  for (const auto& r : rep.rows)
    if (r.method == "fqi" && r.eta > 0.0 && std::find(etas.begin(), etas.end(), r.eta) == etas.end())
      etas.push_back(r.eta);
  std::sort(etas.begin(), etas.end());
  std::vector<NoiseDeviation> out;
  for (double eta : etas) {
    std::vector<double> dev;
    for (const auto& r : rep.rows)
      if (r.method == "fqi" && r.eta == eta) dev.push_back(std::abs(r.price - onpolicy.at(r.run)));
    out.push_back({eta, mean_of(dev), sample_std(dev)});
  }
  return out;
}

struct IrlRun {
  int run = 0;
  std::uint64_t seed = 0;
  LambdaTermStructure estimate;
  Eigen::MatrixXd bootstrap;  ///< n_bootstrap x n_steps, empty when disabled
};

struct IrlReport {
  std::string config_hash;
  double lambda_true = 0.0;
  std::vector<IrlRun> runs;
};

/// Dataset without rewards for the implied-risk-aversion experiment: actions
/// drawn from the MaxEnt policy at the configured lambda, or the DP hedges.
inline HedgeDataset irl_dataset(const ExperimentConfig& cfg, const RunData& d, int run) {
  if (cfg.irl_policy == IrlPolicy::maxent)
    return simulate_maxent_dataset(d.paths, d.basis, d.payoff, cfg.risk.lambda,
                                   stream_seed(cfg.seed, 0x69726cULL, static_cast<std::uint64_t>(run)),
                                   cfg.regularization);
  const DPSolution dp = solve_dp_payoff(d.paths, d.basis, d.payoff, cfg.risk, cfg.regularization);
  return make_dataset(d.paths, dp.a_star, std::nullopt, d.payoff);
}

inline IrlReport run_irl_lambda(const ExperimentConfig& cfg) {
  cfg.validate();
  IrlReport rep{config_hash(cfg), cfg.risk.lambda, std::vector<IrlRun>(cfg.n_mc_runs)};
  LambdaSearch search;
  search.regularization = cfg.regularization;
  parallel_for(rep.runs.size(), cfg.n_threads, [&](std::size_t r) {
    const int run = static_cast<int>(r);
    const RunData d = make_run(cfg, run);
    const HedgeDataset data = irl_dataset(cfg, d, run);
    IrlRun& out = rep.runs[r];
    out.run = run;
    out.seed = cfg.run_seed(run);
    out.estimate = estimate_lambda(data, cfg.market, d.basis, search);
    if (cfg.n_bootstrap > 0)
      out.bootstrap = bootstrap_lambda(data, cfg.market, d.basis, cfg.n_bootstrap,
                                       stream_seed(cfg.seed, 0x626f6f74ULL, static_cast<std::uint64_t>(run)), search);
  });
  return rep;
}

}  // namespace qlbs
