#pragma once

// Clamped uniform B-spline basis over a state range. The DP, FQI and IRL
// regressions are written against the BasisFunctions concept so any other
// feature map (tests use constants and monomials) can stand in.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qlbs/errors.hpp"

namespace qlbs {

template <class B>
concept BasisFunctions = requires(const B& b, double x) {
  { b.size() } -> std::convertible_to<Eigen::Index>;
  { b.evaluate(x) } -> std::convertible_to<Eigen::VectorXd>;
};

class BSplineBasis {
 public:
  BSplineBasis() = default;

  /// Takes a full clamped knot vector; the domain is [knots.front(), knots.back()].
  BSplineBasis(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 0) throw ParameterError("B-spline degree must be nonnegative");
    if (knots_.size() < static_cast<std::size_t>(2 * degree_ + 2))
      throw ParameterError("knot vector too short for the degree");
    if (!std::is_sorted(knots_.begin(), knots_.end())) throw ParameterError("knots must be nondecreasing");
    if (!(x_max() > x_min())) throw RangeError("degenerate basis range: x_max must exceed x_min");
    for (int i = 0; i <= degree_; ++i) {
      if (knots_[i] != knots_.front() || knots_[knots_.size() - 1 - i] != knots_.back())
        throw ParameterError("knot vector must be clamped (end knots repeated degree+1 times)");
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(knots_.size()) - degree_ - 1; }
  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  double x_min() const { return knots_.front(); }
  double x_max() const { return knots_.back(); }

  /// Index i of the knot span [u_i, u_{i+1}) containing x (already clamped).
  Eigen::Index span(double x) const {
    const auto n = size();
    if (x >= knots_[n]) return n - 1;
    const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n, x);
    return static_cast<Eigen::Index>(it - knots_.begin()) - 1;
  }

  /// Writes the degree+1 nonzero values at x into out[0..degree] and returns
  /// the index of the first one. Triangular Cox-de Boor recursion.
  Eigen::Index nonzero(double x, double* out) const {
    x = std::clamp(x, x_min(), x_max());
    const Eigen::Index i = span(x);
    std::vector<double> left(degree_ + 1), right(degree_ + 1);
    out[0] = 1.0;
    for (int j = 1; j <= degree_; ++j) {
      left[j] = x - knots_[i + 1 - j];
      right[j] = knots_[i + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = out[r] / (right[r + 1] + left[j - r]);
        out[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      out[j] = saved;
    }
    return i - degree_;
  }

  /// All basis values at x; states outside the domain are clamped to it.
  Eigen::VectorXd evaluate(double x) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size());
    std::vector<double> local(degree_ + 1);
    const Eigen::Index first = nonzero(x, local.data());
    for (int j = 0; j <= degree_; ++j) v(first + j) = local[j];
    return v;
  }

 private:
  int degree_ = 3;
  std::vector<double> knots_;
};

/// m basis functions of the given degree on uniform spans over [x_min, x_max].
inline BSplineBasis build_basis(double x_min, double x_max, int m, int degree = 3) {
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw RangeError("build_basis: degenerate range, x_max must exceed x_min");
  if (degree < 0 || m < degree + 1) throw ParameterError("build_basis: need m >= degree + 1");
  const int spans = m - degree;
  std::vector<double> knots;
  knots.reserve(m + degree + 1);
  for (int i = 0; i < degree; ++i) knots.push_back(x_min);
  for (int i = 0; i <= spans; ++i) knots.push_back(i == spans ? x_max : x_min + (x_max - x_min) * i / spans);
  for (int i = 0; i < degree; ++i) knots.push_back(x_max);
  return BSplineBasis(degree, std::move(knots));
}

/// Basis spanning every state in the matrix (one range for all time steps).
inline BSplineBasis build_basis_for(const Eigen::MatrixXd& states, int m, int degree = 3) {
  return build_basis(states.minCoeff(), states.maxCoeff(), m, degree);
}

/// Design matrix with one row Phi(x_k)^T per state.
template <BasisFunctions B>
Eigen::MatrixXd design_matrix(const B& basis, const Eigen::Ref<const Eigen::VectorXd>& xs) {
  Eigen::MatrixXd out(xs.size(), basis.size());
  for (Eigen::Index k = 0; k < xs.size(); ++k) out.row(k) = basis.evaluate(xs(k)).transpose();
  return out;
}

inline Eigen::MatrixXd design_matrix(const BSplineBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& xs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(xs.size(), basis.size());
  std::vector<double> local(basis.degree() + 1);
  for (Eigen::Index k = 0; k < xs.size(); ++k) {
    const Eigen::Index first = basis.nonzero(xs(k), local.data());
    for (int j = 0; j <= basis.degree(); ++j) out(k, first + j) = local[j];
  }
  return out;
}

inline void to_json(nlohmann::json& j, const BSplineBasis& b) {
  j = nlohmann::json{{"degree", b.degree()}, {"knots", b.knots()}, {"domain", {b.x_min(), b.x_max()}}};
}

inline void from_json(const nlohmann::json& j, BSplineBasis& b) {
  b = BSplineBasis(j.at("degree").get<int>(), j.at("knots").get<std::vector<double>>());
}

}  // namespace qlbs
