#pragma once

#include "emr/active_set_qp.hpp"
#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace emr {

struct DesignOptions {
  bool constant = true;
  bool quadratic = true;
};

/// Predictor matrix. Column order: [1, x_1..x_d, x_i x_j (i <= j, lexicographic), extras].
struct DesignMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;  // N x M
  std::size_t d = 0;       // number of base channels
  DesignOptions options;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

/// Number of columns of the main-level quadratic design for dimension d: 1 + d + d(d+1)/2.
constexpr std::size_t quadratic_design_width(std::size_t d) { return 1 + d + d * (d + 1) / 2; }

/// Offset of monomial x_i x_j (i <= j) inside the quadratic block.
std::size_t monomial_offset(std::size_t d, std::size_t i, std::size_t j);
/// Inverse of monomial_offset.
std::pair<std::size_t, std::size_t> monomial_pair(std::size_t d, std::size_t offset);

DesignMatrix build_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras,
                          DesignOptions options);
/// Main-level design: constant, linear and quadratic columns followed by extras.
DesignMatrix build_quadratic_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras = {});
/// Hidden-level design: [x, extras] with no constant and no quadratic block.
DesignMatrix build_level_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras);

/// A sparse linear row over the stacked parameter vector: sum(coef * theta[index]) (= or >=) rhs.
struct LinearConstraint {
  std::vector<std::pair<std::size_t, double>> terms;
  double rhs = 0.0;
  std::string family;
};

/// Constraints over the grand parameter vector theta, laid out channel-major:
/// theta[i * M + c] is the coefficient of design column c in the equation of channel i.
struct ConstraintSet {
  std::size_t num_parameters = 0;
  std::vector<LinearConstraint> equalities;
  std::vector<LinearConstraint> inequalities;  // terms . theta >= rhs

  bool empty() const { return equalities.empty() && inequalities.empty(); }
  Eigen::MatrixXd equality_matrix() const;
  Eigen::VectorXd equality_rhs() const;
  Eigen::MatrixXd inequality_matrix() const;
  Eigen::VectorXd inequality_rhs() const;
  /// Rank of the equality rows.
  std::size_t equality_rank() const;
  /// Copy with linearly dependent equality rows removed; the kept rows are independent.
  ConstraintSet assembled() const;
  /// Largest |row . theta - rhs| over equalities and largest shortfall over inequalities.
  double max_equality_violation(const Eigen::VectorXd& theta) const;
  double max_inequality_violation(const Eigen::VectorXd& theta) const;
};

/// Lower bound realising the strict inequality A_ii > 0.
inline constexpr double kStrictDiagonalBound = 1e-8;

/// Energy-conservation and dissipativity constraints for a main-level quadratic model
/// of dimension d, in the column convention of build_quadratic_design:
///   B_iii = 0; B_jjk + B_kjj = 0 and B_jkk + B_kjk = 0 (j != k);
///   B_ijk + B_jik + B_kij = 0 for distinct triples; A_ij + A_ji = 0; A_ii >= 1e-8.
/// Families are tagged "self", "pair", "triple", "skew", "diag". The pair family is
/// listed for every ordered pair, so its rows repeat; use assembled() before solving.
ConstraintSet energy_constraints(std::size_t d);

struct LsSolution {
  Eigen::MatrixXd coefficients;  // M x d
  Eigen::MatrixXd residuals;     // N x d, targets - design * coefficients
  Eigen::VectorXd r_squared;     // d
  std::vector<std::size_t> active_inequalities;
  Eigen::VectorXd equality_multipliers;
  Eigen::VectorXd inequality_multipliers;
  std::vector<std::string> warnings;
};

/// 1e-6 * trace(X^T X) / M.
double default_ridge(const Eigen::MatrixXd& design);

/// Minimises ||Y - X theta||^2 + lambda ||theta||^2 column by column.
/// lambda = 0 uses column-pivoted QR and rejects rank-deficient designs; lambda > 0 uses
/// the Cholesky factor of the regularised normal equations.
LsSolution least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                         double ridge_lambda = 0.0);
LsSolution least_squares(const DesignMatrix& design, const Eigen::MatrixXd& targets,
                         double ridge_lambda = 0.0);

/// Joint fit of all channels under linear equality/inequality constraints on the grand
/// parameter vector, solved as a quadratic program by the active-set method.
LsSolution constrained_least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                                     const ConstraintSet& constraints, double ridge_lambda = 0.0);

/// The constrained fit's quadratic program in the original parameters (for KKT audits).
QpProblem constrained_ls_problem(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                                 const ConstraintSet& constraints, double ridge_lambda = 0.0);

/// Centred coefficient of determination per column.
Eigen::VectorXd r_squared(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& residuals);

/// Flattens an M x d coefficient matrix into the channel-major grand vector and back.
Eigen::VectorXd to_grand(const Eigen::MatrixXd& coefficients);
Eigen::MatrixXd from_grand(const Eigen::VectorXd& theta, std::size_t m, std::size_t d);

}  // namespace emr
