// Command-line front end for the QLBS pricing experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qlbs/qlbs.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> paths;
  std::string profile;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "base random seed");
  cmd->add_option("--paths", o.paths, "Monte Carlo paths per run")->check(CLI::PositiveNumber);
  cmd->add_option("--profile", o.profile, "desk (5000 paths) or paper (50000 paths)")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", o.out, "output CSV file");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

qlbs::ExperimentConfig load_config(const CommonOptions& o) {
  qlbs::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    auto in = qlbs::io::open_input(o.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw qlbs::SchemaError("config '" + o.config_path + "': " + e.what());
    }
    cfg = qlbs::config_from_json(j);
  }
  if (!o.profile.empty()) qlbs::apply_profile(cfg, o.profile == "paper" ? qlbs::Profile::paper : qlbs::Profile::desk);
  if (o.paths) cfg.n_paths = *o.paths;
  if (o.seed) cfg.seed = *o.seed;
  cfg.n_threads = o.threads;
  cfg.validate();
  return cfg;
}

/// Writes to the --out file, or stdout when none was given.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
  } else {
    auto out = qlbs::io::open_output(path);
    write(out);
  }
}

void print_summary(const qlbs::ExperimentReport& rep) {
  std::cerr << "config " << rep.config_hash << '\n';
  for (const auto& s : rep.summary)
    std::cerr << s.method << " lambda=" << s.lambda << " eta=" << s.eta << ": " << s.mean << " +- " << s.std << " (n="
              << s.count << ")\n";
}

qlbs::HedgeDataset read_dataset(const std::string& dataset, const std::string& payoffs) {
  if (payoffs.empty()) throw qlbs::SchemaError("--dataset requires --payoffs with the terminal payoffs");
  auto in = qlbs::io::open_input(dataset);
  auto pay = qlbs::io::open_input(payoffs);
  return qlbs::io::read_dataset_csv(in, pay);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QLBS option pricing by dynamic programming and batch reinforcement learning"};
  app.require_subcommand(1);

  CommonOptions sim_o, dp_o, fqi_o, irl_o, sl_o, sn_o, basket_o;

  auto* sim = app.add_subcommand("simulate", "simulate paths; optionally write the on-policy hedge dataset");
  add_common(sim, sim_o);
  std::string sim_dataset, sim_payoffs;
  sim->add_option("--dataset", sim_dataset, "write DP hedges and rewards as a dataset CSV");
  sim->add_option("--payoffs", sim_payoffs, "write terminal payoffs CSV");

  auto* pdp = app.add_subcommand("price-dp", "price by backward dynamic programming");
  add_common(pdp, dp_o);
  std::string dp_detail;
  pdp->add_option("--detail", dp_detail, "per-path a, pi, q, reward CSV for the first run");

  auto* pfqi = app.add_subcommand("price-fqi", "price by fitted Q iteration");
  add_common(pfqi, fqi_o);
  std::string fqi_dataset, fqi_payoffs;
  double fqi_eta = 0.0;
  double fqi_lambda_rewards = -1.0;
  pfqi->add_option("--dataset", fqi_dataset, "dataset CSV (path,step,x,a[,r])")->check(CLI::ExistingFile);
  pfqi->add_option("--payoffs", fqi_payoffs, "terminal payoffs CSV")->check(CLI::ExistingFile);
  pfqi->add_option("--eta", fqi_eta, "uniform multiplicative noise on the DP hedges")->check(CLI::Range(0.0, 0.999));
  pfqi->add_option("--reward-lambda", fqi_lambda_rewards,
                   "recompute rewards from the actions at this lambda (needed when the dataset has none)");

  auto* pirl = app.add_subcommand("irl-lambda", "implied risk aversion term structure");
  add_common(pirl, irl_o);
  std::string irl_dataset, irl_payoffs;
  pirl->add_option("--dataset", irl_dataset, "dataset CSV")->check(CLI::ExistingFile);
  pirl->add_option("--payoffs", irl_payoffs, "terminal payoffs CSV")->check(CLI::ExistingFile);

  auto* psl = app.add_subcommand("sweep-lambda", "DP price against risk aversion");
  add_common(psl, sl_o);

  auto* psn = app.add_subcommand("sweep-noise", "FQI price against off-policy action noise");
  add_common(psn, sn_o);

  auto* pb = app.add_subcommand("price-basket", "price an option basket and back out the exotic leg");
  add_common(pb, basket_o);
  std::string basket_path;
  std::string basket_solver = "dp";
  pb->add_option("--basket", basket_path,
                 "basket JSON [{kind, strike, quantity, market_price?}, ...]; defaults to the config's basket")
      ->check(CLI::ExistingFile);
  pb->add_option("--solver", basket_solver, "dp or fqi")->check(CLI::IsMember({"dp", "fqi"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto cfg = load_config(sim_o);
      const auto run = qlbs::make_run(cfg, 0);
      emit(sim_o.out, [&](std::ostream& out) { qlbs::io::write_paths_csv(out, run.paths); });
      if (!sim_dataset.empty()) {
        const auto dp = qlbs::solve_dp_payoff(run.paths, run.basis, run.payoff, cfg.risk, cfg.regularization);
        auto out = qlbs::io::open_output(sim_dataset);
        qlbs::io::write_dataset_csv(out, qlbs::make_dataset(run.paths, dp.a_star, dp.rewards, run.payoff));
      }
      if (!sim_payoffs.empty()) {
        auto out = qlbs::io::open_output(sim_payoffs);
        qlbs::io::write_payoffs_csv(out, run.payoff);
      }
    } else if (*pdp) {
      const auto cfg = load_config(dp_o);
      qlbs::ExperimentConfig one = cfg;
      one.lambda_grid = {cfg.risk.lambda};
      const auto rep = qlbs::run_price_vs_lambda(one);
      print_summary(rep);
      emit(dp_o.out, [&](std::ostream& out) { qlbs::write_report_csv(out, rep); });
      if (!dp_detail.empty()) {
        const auto run = qlbs::make_run(cfg, 0);
        const auto dp = qlbs::solve_dp_payoff(run.paths, run.basis, run.payoff, cfg.risk, cfg.regularization);
        auto out = qlbs::io::open_output(dp_detail);
        qlbs::io::write_dp_paths_csv(out, dp);
      }
    } else if (*pfqi) {
      const auto cfg = load_config(fqi_o);
      if (!fqi_dataset.empty()) {
        auto data = read_dataset(fqi_dataset, fqi_payoffs);
        if (fqi_lambda_rewards > 0.0) data.r = qlbs::rewards_from_actions(data, fqi_lambda_rewards, cfg.market);
        if (!data.r) throw qlbs::SchemaError("dataset has no rewards; pass --reward-lambda to reconstruct them");
        const auto basis = qlbs::build_basis_for(data.x, cfg.basis_m);
        qlbs::FqiOptions opts;
        opts.regularization = cfg.regularization;
        const auto sol = qlbs::solve_fqi(data, basis, cfg.market, cfg.risk, opts);
        for (const auto& w : sol.warnings) std::cerr << "warning: " << w << '\n';
        emit(fqi_o.out, [&](std::ostream& out) { out << qlbs::io::fqi_summary_json(sol).dump(2) << '\n'; });
      } else {
        qlbs::ExperimentConfig one = cfg;
        one.eta_grid = {fqi_eta};
        one.n_noise_scenarios = 1;
        auto rep = qlbs::run_offpolicy_noise(one);
        if (fqi_eta == 0.0) {
          // the grid cell and the reference coincide; keep one copy
          std::vector<qlbs::PriceRow> rows;
          for (std::size_t i = 0; i < rep.rows.size(); ++i)
            if (!(i >= static_cast<std::size_t>(cfg.n_mc_runs) && rep.rows[i].method == "fqi")) rows.push_back(rep.rows[i]);
          rep.rows = rows;
          rep.summarize();
        }
        rep.experiment = "price-fqi";
        print_summary(rep);
        emit(fqi_o.out, [&](std::ostream& out) { qlbs::write_report_csv(out, rep); });
      }
    } else if (*pirl) {
      const auto cfg = load_config(irl_o);
      if (!irl_dataset.empty()) {
        const auto data = read_dataset(irl_dataset, irl_payoffs);
        const auto basis = qlbs::build_basis_for(data.x, cfg.basis_m);
        qlbs::LambdaSearch search;
        search.regularization = cfg.regularization;
        const auto ts = qlbs::estimate_lambda(data, cfg.market, basis, search, cfg.n_threads);
        std::cerr << "lambda summary " << ts.summary << '\n';
        emit(irl_o.out, [&](std::ostream& out) { qlbs::io::write_lambda_csv(out, ts); });
      } else {
        const auto rep = qlbs::run_irl_lambda(cfg);
        for (const auto& r : rep.runs) std::cerr << "run " << r.run << " lambda summary " << r.estimate.summary << '\n';
        emit(irl_o.out, [&](std::ostream& out) { qlbs::io::write_lambda_csv(out, rep.runs.front().estimate); });
      }
    } else if (*psl) {
      const auto rep = qlbs::run_price_vs_lambda(load_config(sl_o));
      print_summary(rep);
      emit(sl_o.out, [&](std::ostream& out) { qlbs::write_report_csv(out, rep); });
    } else if (*psn) {
      const auto rep = qlbs::run_offpolicy_noise(load_config(sn_o));
      print_summary(rep);
      for (const auto& d : qlbs::noise_deviations(rep))
        std::cerr << "eta=" << d.eta << " |deviation| " << d.mean << " +- " << d.std << '\n';
      emit(sn_o.out, [&](std::ostream& out) { qlbs::write_report_csv(out, rep); });
    } else if (*pb) {
      auto cfg = load_config(basket_o);
      qlbs::OptionBasket basket;
      if (!basket_path.empty()) {
        auto in = qlbs::io::open_input(basket_path);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw qlbs::SchemaError("basket '" + basket_path + "': " + e.what());
        }
        basket = qlbs::basket_from_json(j);
      } else if (cfg.basket) {
        basket = *cfg.basket;
      } else {
        throw qlbs::SchemaError("price-basket: no basket given (--basket or a 'basket' key in --config)");
      }
      const auto solver = basket_solver == "fqi" ? qlbs::SolverKind::fqi : qlbs::SolverKind::dp;
      std::vector<double> prices(cfg.n_mc_runs);
      for (int r = 0; r < cfg.n_mc_runs; ++r) {
        const auto run = qlbs::make_run(cfg, r);
        prices[r] = qlbs::price_basket(basket, run.paths, run.basis, cfg.risk, solver, cfg.regularization);
      }
      cfg.basket = basket;
      std::size_t priced = 0;
      for (const auto& leg : basket.legs) priced += leg.market_price ? 1 : 0;
      const bool exotic = priced + 1 == basket.legs.size();
      emit(basket_o.out, [&](std::ostream& out) {
        out << "run,seed,config_hash,basket_price" << (exotic ? ",exotic_price" : "") << '\n' << std::setprecision(17);
        for (int r = 0; r < cfg.n_mc_runs; ++r) {
          out << r << ',' << cfg.run_seed(r) << ',' << qlbs::config_hash(cfg) << ',' << prices[r];
          if (exotic) out << ',' << qlbs::exotic_price_by_subtraction(basket, prices[r]);
          out << '\n';
        }
      });
      std::cerr << "basket " << qlbs::mean_of(prices) << " +- " << qlbs::sample_std(prices) << '\n';
    }
  } catch (const qlbs::NumericalError& e) {
    std::cerr << "qlbs: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "qlbs: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
