#pragma once

// Pricing a basket of European options on one underlying as a single
// replicating-portfolio problem, and backing out an exotic leg's price from
// the basket value and the known prices of the other legs.

#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qlbs/basis.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/fqi_solver.hpp"
#include "qlbs/market_sim.hpp"

namespace qlbs {

enum class OptionKind { put, call };

struct OptionLeg {
  OptionKind kind = OptionKind::put;
  double strike = 100.0;
  double quantity = 1.0;
  std::optional<double> market_price;  ///< per unit
};

struct OptionBasket {
  std::vector<OptionLeg> legs;

  void validate() const {
    if (legs.empty()) throw SchemaError("basket: at least one leg is required");
    for (const auto& leg : legs) {
      if (leg.quantity == 0.0) throw SchemaError("basket: leg quantities must be nonzero");
      if (!(leg.strike >= 0.0)) throw SchemaError("basket: strikes must be nonnegative");
    }
  }

  /// The same basket with every quantity multiplied by k.
  OptionBasket scaled(double k) const {
    OptionBasket out = *this;
    for (auto& leg : out.legs) leg.quantity *= k;
    return out;
  }
};

inline Eigen::VectorXd leg_payoff(const OptionLeg& leg, const Eigen::Ref<const Eigen::VectorXd>& s_T) {
  return leg.kind == OptionKind::put ? put_payoff(s_T, leg.strike) : call_payoff(s_T, leg.strike);
}

/// sum over legs of quantity * payoff(S_T).
inline Eigen::VectorXd basket_terminal_payoff(const OptionBasket& basket, const Eigen::Ref<const Eigen::VectorXd>& s_T) {
  basket.validate();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(s_T.size());
  for (const auto& leg : basket.legs) total += leg.quantity * leg_payoff(leg, s_T);
  return total;
}

enum class SolverKind { dp, fqi };

/// P_0 of the whole basket. The FQI route learns from the on-policy dataset
/// (DP hedges and rewards) generated for the basket payoff.
template <BasisFunctions B>
double price_basket(const OptionBasket& basket, const PathSet& paths, const B& basis, const RiskParams& risk,
                    SolverKind solver = SolverKind::dp, double regularization = kDefaultRegularization) {
  const Eigen::VectorXd payoff = basket_terminal_payoff(basket, paths.s.col(paths.n_steps()));
  const DPSolution dp = solve_dp_payoff(paths, basis, payoff, risk, regularization);
  if (solver == SolverKind::dp) return dp.price;
  const HedgeDataset data = make_dataset(paths, dp.a_star, dp.rewards, payoff);
  FqiOptions opts;
  opts.regularization = regularization;
  return solve_fqi(data, basis, paths.params, risk, opts).price;
}

/// C_e = P_0 - sum C_i.
inline double exotic_price_by_subtraction(double p0, std::span<const double> known_prices) {
  return p0 - std::accumulate(known_prices.begin(), known_prices.end(), 0.0);
}

/// Subtraction with the known prices taken from the basket: every leg but one
/// must carry a market price, and the remaining leg is the exotic.
inline double exotic_price_by_subtraction(const OptionBasket& basket, double p0) {
  basket.validate();
  std::vector<double> known;
  for (const auto& leg : basket.legs)
    if (leg.market_price) known.push_back(*leg.market_price * leg.quantity);
  if (known.size() + 1 != basket.legs.size())
    throw SchemaError("exotic price: known prices must cover every leg except the exotic (got " +
                      std::to_string(known.size()) + " of " + std::to_string(basket.legs.size() - 1) + ")");
  return exotic_price_by_subtraction(p0, known);
}

inline void to_json(nlohmann::json& j, const OptionLeg& leg) {
  j = nlohmann::json{{"kind", leg.kind == OptionKind::put ? "put" : "call"},
                     {"strike", leg.strike},
                     {"quantity", leg.quantity}};
  if (leg.market_price) j["market_price"] = *leg.market_price;
}

inline void from_json(const nlohmann::json& j, OptionLeg& leg) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "put") {
    leg.kind = OptionKind::put;
  } else if (kind == "call") {
    leg.kind = OptionKind::call;
  } else {
    throw SchemaError("basket: unknown option kind '" + kind + "'");
  }
  leg.strike = j.at("strike").get<double>();
  leg.quantity = j.value("quantity", 1.0);
  if (j.contains("market_price") && !j.at("market_price").is_null())
    leg.market_price = j.at("market_price").get<double>();
  else
    leg.market_price.reset();
}

inline OptionBasket basket_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaError("basket: expected a JSON array of legs");
  OptionBasket basket;
  try {
    basket.legs = j.get<std::vector<OptionLeg>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("basket: ") + e.what());
  }
  basket.validate();
  return basket;
}

inline nlohmann::json basket_to_json(const OptionBasket& basket) { return nlohmann::json(basket.legs); }

}  // namespace qlbs
