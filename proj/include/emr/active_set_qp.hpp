#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace emr {

/// minimise 1/2 x^T H x - c^T x  subject to  A_eq x = b_eq,  A_in x >= b_in.
/// H must be symmetric positive definite on the null space of A_eq.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd in_matrix;
  Eigen::VectorXd in_rhs;
};

struct QpOptions {
  double feasibility_tolerance = 1e-12;  // relative to the row norm
  std::size_t max_iterations = 0;        // 0: 100 * number of inequalities (at least 100)
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;   // H x - c = A_eq^T lambda + A_in^T mu
  Eigen::VectorXd in_multipliers;   // mu >= 0, zero off the active set
  std::vector<std::size_t> active;  // indices into the inequality rows
  std::size_t iterations = 0;
  std::size_t eq_rank = 0;
};

/// Equalities are eliminated first by a null-space parametrisation x = x_p + Z u; the
/// inequalities are then activated one at a time by a dual active-set iteration
/// (Goldfarb-Idnani) on the reduced problem, which needs no feasible starting point.
/// Throws NumericalError when the constraints are infeasible or the iteration cap is hit.
QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// Norm of the stationarity residual H x - c - A_eq^T lambda - A_in^T mu, plus the
/// largest sign or complementarity violation of the inequality multipliers.
struct KktReport {
  double stationarity = 0.0;
  double equality = 0.0;
  double primal_inequality = 0.0;
  double dual_sign = 0.0;
  double complementarity = 0.0;
};
KktReport kkt_report(const QpProblem& problem, const QpResult& result);

}  // namespace emr
