#pragma once

#include <sstream>

#include <Eigen/Dense>

#include "qlbs/errors.hpp"

namespace qlbs {

/// Default ridge added to every normal-equations matrix.
inline constexpr double kDefaultRegularization = 1e-3;

/// Solves (A + eps I) x = b for symmetric positive semi-definite A by Cholesky.
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double eps, int step = -1) {
  Eigen::MatrixXd reg = a;
  reg.diagonal().array() += eps;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  Eigen::VectorXd x;
  if (llt.info() == Eigen::Success) x = llt.solve(b);
  if (llt.info() != Eigen::Success || !x.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reg, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream msg;
    msg << "regularized normal equations are not positive definite (eigenvalues in [" << ev.minCoeff() << ", "
        << ev.maxCoeff() << "], condition ~ " << ev.maxCoeff() / std::abs(ev.minCoeff()) << ")";
    throw NumericalError(msg.str(), step);
  }
  return x;
}

/// Ridge least squares for several right-hand sides sharing one design.
inline Eigen::MatrixXd ridge_fit_many(const Eigen::MatrixXd& design, const Eigen::MatrixXd& ys, double eps,
                                      int step = -1) {
  Eigen::MatrixXd reg = design.transpose() * design;
  reg.diagonal().array() += eps;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) throw NumericalError("regularized normal equations are not positive definite", step);
  Eigen::MatrixXd out = llt.solve(design.transpose() * ys);
  if (!out.allFinite()) throw NumericalError("regression produced non-finite coefficients", step);
  return out;
}

/// Ridge least squares: argmin |design w - y|^2 + eps |w|^2.
inline Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double eps, int step = -1) {
  return ridge_solve(design.transpose() * design, design.transpose() * y, eps, step);
}

}  // namespace qlbs
