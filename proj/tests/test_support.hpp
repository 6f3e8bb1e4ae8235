#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "qlbs/market_sim.hpp"

namespace qlbs::testing {

/// Phi_1 = 1.
struct ConstantBasis {
  Eigen::Index size() const { return 1; }
  Eigen::VectorXd evaluate(double) const { return Eigen::VectorXd::Ones(1); }
};

/// 1, x, ..., x^(m-1) around a centre.
struct PolynomialBasis {
  int m = 3;
  double centre = 0.0;
  Eigen::Index size() const { return m; }
  Eigen::VectorXd evaluate(double x) const {
    Eigen::VectorXd v(m);
    double p = 1.0;
    for (int i = 0; i < m; ++i, p *= x - centre) v(i) = p;
    return v;
  }
};

/// Path set built from explicit prices, with matching states.
inline PathSet paths_from_prices(const Eigen::MatrixXd& s, const MarketParams& params) {
  PathSet p;
  p.params = params;
  p.s = s;
  p.x = states_from_prices(s, params);
  return p;
}

/// Market whose step grid has n steps of length dt.
inline MarketParams grid_market(int n, double dt, double r = 0.0) {
  MarketParams m;
  m.dt = dt;
  m.t_maturity = n * dt;
  m.r = r;
  return m;
}

}  // namespace qlbs::testing
