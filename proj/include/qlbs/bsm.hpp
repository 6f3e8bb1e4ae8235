#pragma once

// Closed-form Black-Scholes prices and deltas, used as the lambda -> 0 benchmark.

#include <cmath>
#include <numbers>

#include "qlbs/errors.hpp"

namespace qlbs {

struct EuropeanPut {
  double strike = 100.0;
  double maturity = 1.0;

  void validate() const {
    if (!(strike >= 0.0)) throw ParameterError("strike must be nonnegative");
    if (!(maturity > 0.0)) throw ParameterError("maturity must be positive");
  }
};

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

struct D1D2 {
  double d1;
  double d2;
};

inline D1D2 bs_d(double s0, double strike, double r, double sigma, double t) {
  if (!(s0 > 0.0)) throw DomainError("black-scholes: spot must be positive");
  if (!(sigma > 0.0)) throw DomainError("black-scholes: volatility must be positive");
  if (!(t > 0.0)) throw DomainError("black-scholes: maturity must be positive");
  if (!(strike > 0.0)) throw DomainError("black-scholes: strike must be positive");
  const double vol = sigma * std::sqrt(t);
  const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * t) / vol;
  return {d1, d1 - vol};
}

}  // namespace detail

inline double bs_put_price(double s0, double strike, double r, double sigma, double t) {
  if (strike == 0.0 && s0 > 0.0 && sigma > 0.0 && t > 0.0) return 0.0;
  const auto [d1, d2] = detail::bs_d(s0, strike, r, sigma, t);
  return strike * std::exp(-r * t) * norm_cdf(-d2) - s0 * norm_cdf(-d1);
}

inline double bs_call_price(double s0, double strike, double r, double sigma, double t) {
  if (strike == 0.0 && s0 > 0.0 && sigma > 0.0 && t > 0.0) return s0;
  const auto [d1, d2] = detail::bs_d(s0, strike, r, sigma, t);
  return s0 * norm_cdf(d1) - strike * std::exp(-r * t) * norm_cdf(d2);
}

/// N(d1) - 1, the stock position of a long put's delta hedge.
inline double bs_put_delta(double s0, double strike, double r, double sigma, double t) {
  return norm_cdf(detail::bs_d(s0, strike, r, sigma, t).d1) - 1.0;
}

inline double bs_call_delta(double s0, double strike, double r, double sigma, double t) {
  return norm_cdf(detail::bs_d(s0, strike, r, sigma, t).d1);
}

}  // namespace qlbs
