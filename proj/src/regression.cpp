#include "emr/regression.hpp"

#include "emr/active_set_qp.hpp"
#include "emr/error.hpp"

#include <algorithm>
#include <cmath>

namespace emr {

std::size_t monomial_offset(std::size_t d, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  if (j >= d) throw ConfigError("monomial index out of range");
  // Rows 0..i-1 contribute d, d-1, ..., d-i+1 entries.
  return i * d - i * (i - 1) / 2 + (j - i);
}

std::pair<std::size_t, std::size_t> monomial_pair(std::size_t d, std::size_t offset) {
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t row = d - i;
    if (offset < row) return {i, i + offset};
    offset -= row;
  }
  throw ConfigError("monomial offset out of range");
}

DesignMatrix build_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras,
                          DesignOptions options) {
  const std::size_t n = ts.length();
  const std::size_t d = ts.channels();
  std::size_t m = (options.constant ? 1 : 0) + d + (options.quadratic ? d * (d + 1) / 2 : 0);
  for (const auto& e : extras) {
    if (e.length() != n) throw ConfigError("design extras must share the series length");
    if (std::abs(e.dt() - ts.dt()) > 1e-12 * ts.dt()) throw ConfigError("design extras must share dt");
    m += e.channels();
  }

  DesignMatrix design;
  design.d = d;
  design.options = options;
  design.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  Eigen::Index col = 0;
  if (options.constant) {
    design.values.col(col++).setOnes();
    design.labels.emplace_back("1");
  }
  for (std::size_t i = 0; i < d; ++i) {
    design.values.col(col++) = ts.channel(i);
    design.labels.push_back(ts.names()[i]);
  }
  if (options.quadratic) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        design.values.col(col++) = ts.channel(i).cwiseProduct(ts.channel(j));
        design.labels.push_back(ts.names()[i] + "*" + ts.names()[j]);
      }
  }
  for (const auto& e : extras)
    for (std::size_t i = 0; i < e.channels(); ++i) {
      design.values.col(col++) = e.channel(i);
      design.labels.push_back(e.names()[i]);
    }
  std::vector<std::string> sorted = design.labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("design column labels must be unique");
  return design;
}

DesignMatrix build_quadratic_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras) {
  return build_design(ts, extras, {.constant = true, .quadratic = true});
}

DesignMatrix build_level_design(const TimeSeries& ts, const std::vector<TimeSeries>& extras) {
  return build_design(ts, extras, {.constant = false, .quadratic = false});
}

namespace {

Eigen::MatrixXd rows_to_matrix(const std::vector<LinearConstraint>& rows, std::size_t n) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [index, coef] : rows[r].terms) {
      if (index >= n) throw ConfigError("constraint references parameter " + std::to_string(index) +
                                        " outside [0, " + std::to_string(n) + ")");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(index)) += coef;
    }
  return out;
}

Eigen::VectorXd rows_rhs(const std::vector<LinearConstraint>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = rows[r].rhs;
  return out;
}

}  // namespace

Eigen::MatrixXd ConstraintSet::equality_matrix() const { return rows_to_matrix(equalities, num_parameters); }
Eigen::VectorXd ConstraintSet::equality_rhs() const { return rows_rhs(equalities); }
Eigen::MatrixXd ConstraintSet::inequality_matrix() const { return rows_to_matrix(inequalities, num_parameters); }
Eigen::VectorXd ConstraintSet::inequality_rhs() const { return rows_rhs(inequalities); }

std::size_t ConstraintSet::equality_rank() const {
  if (equalities.empty()) return 0;
  return static_cast<std::size_t>(Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(equality_matrix().transpose()).rank());
}

ConstraintSet ConstraintSet::assembled() const {
  ConstraintSet out;
  out.num_parameters = num_parameters;
  out.inequalities = inequalities;
  for (const auto& row : inequalities)
    for (const auto& term : row.terms)
      if (!std::isfinite(term.second) || !std::isfinite(row.rhs))
        throw ConfigError("inequality bounds must be finite");
  if (equalities.empty()) return out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(equality_matrix().transpose());
  std::vector<std::size_t> keep;
  for (Eigen::Index r = 0; r < qr.rank(); ++r)
    keep.push_back(static_cast<std::size_t>(qr.colsPermutation().indices()[r]));
  std::sort(keep.begin(), keep.end());
  for (std::size_t r : keep) out.equalities.push_back(equalities[r]);
  return out;
}

double ConstraintSet::max_equality_violation(const Eigen::VectorXd& theta) const {
  if (equalities.empty()) return 0.0;
  return (equality_matrix() * theta - equality_rhs()).cwiseAbs().maxCoeff();
}

double ConstraintSet::max_inequality_violation(const Eigen::VectorXd& theta) const {
  if (inequalities.empty()) return 0.0;
  return std::max(0.0, -(inequality_matrix() * theta - inequality_rhs()).minCoeff());
}

ConstraintSet energy_constraints(std::size_t d) {
  if (d < 1) throw ConfigError("energy constraints need d >= 1");
  const std::size_t m = quadratic_design_width(d);
  auto lin = [&](std::size_t eq, std::size_t var) { return eq * m + 1 + var; };
  auto quad = [&](std::size_t eq, std::size_t a, std::size_t b) {
    return eq * m + 1 + d + monomial_offset(d, a, b);
  };

  ConstraintSet set;
  set.num_parameters = d * m;
  for (std::size_t i = 0; i < d; ++i) set.equalities.push_back({{{quad(i, i, i), 1.0}}, 0.0, "self"});
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      if (j == k) continue;
      set.equalities.push_back({{{quad(j, j, k), 1.0}, {quad(k, j, j), 1.0}}, 0.0, "pair"});
      set.equalities.push_back({{{quad(j, k, k), 1.0}, {quad(k, j, k), 1.0}}, 0.0, "pair"});
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      for (std::size_t k = j + 1; k < d; ++k)
        set.equalities.push_back(
            {{{quad(i, j, k), 1.0}, {quad(j, i, k), 1.0}, {quad(k, i, j), 1.0}}, 0.0, "triple"});
  // Design coefficients on x_j are -A_ij, so skew-symmetry carries over unchanged
  // and A_ii >= bound becomes -theta >= bound.
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      set.equalities.push_back({{{lin(i, j), 1.0}, {lin(j, i), 1.0}}, 0.0, "skew"});
  for (std::size_t i = 0; i < d; ++i)
    set.inequalities.push_back({{{lin(i, i), -1.0}}, kStrictDiagonalBound, "diag"});
  return set;
}

double default_ridge(const Eigen::MatrixXd& design) {
  if (design.cols() == 0) return 0.0;
  return 1e-6 * design.colwise().squaredNorm().sum() / static_cast<double>(design.cols());
}

Eigen::VectorXd r_squared(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& residuals) {
  Eigen::VectorXd out(targets.cols());
  for (Eigen::Index i = 0; i < targets.cols(); ++i) {
    const double total = (targets.col(i).array() - targets.col(i).mean()).square().sum();
    const double unexplained = residuals.col(i).squaredNorm();
    out[i] = total > 0.0 ? 1.0 - unexplained / total : (unexplained > 0.0 ? -INFINITY : 0.0);
  }
  return out;
}

namespace {

// Column RMS, with 1 substituted for all-zero columns.
Eigen::VectorXd column_scales(const Eigen::MatrixXd& x) {
  Eigen::VectorXd s = (x.colwise().squaredNorm().transpose() / static_cast<double>(std::max<Eigen::Index>(x.rows(), 1))).cwiseSqrt();
  for (Eigen::Index c = 0; c < s.size(); ++c)
    if (!(s[c] > 0.0)) s[c] = 1.0;
  return s;
}

void finish(LsSolution& sol, const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets) {
  sol.residuals = targets - design * sol.coefficients;
  sol.r_squared = r_squared(targets, sol.residuals);
  if (design.rows() < design.cols())
    sol.warnings.push_back("fewer samples (" + std::to_string(design.rows()) + ") than predictors (" +
                           std::to_string(design.cols()) + ")");
}

}  // namespace

LsSolution least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets, double ridge_lambda) {
  if (design.rows() != targets.rows()) throw ConfigError("design and targets differ in row count");
  if (!(ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be nonnegative");
  LsSolution sol;
  if (ridge_lambda == 0.0) {
    const Eigen::VectorXd s = column_scales(design);
    const Eigen::MatrixXd scaled = design * s.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    if (qr.rank() < design.cols())
      throw NumericalError("design is rank-deficient (rank " + std::to_string(qr.rank()) + " < " +
                           std::to_string(design.cols()) + "); use ridge_lambda > 0");
    sol.coefficients = s.cwiseInverse().asDiagonal() * qr.solve(targets);
  } else {
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += ridge_lambda;
    Eigen::LLT<Eigen::MatrixXd> chol(gram);
    if (chol.info() != Eigen::Success) throw NumericalError("regularised normal equations are not positive definite");
    sol.coefficients = chol.solve(design.transpose() * targets);
  }
  finish(sol, design, targets);
  return sol;
}

LsSolution least_squares(const DesignMatrix& design, const Eigen::MatrixXd& targets, double ridge_lambda) {
  return least_squares(design.values, targets, ridge_lambda);
}

Eigen::VectorXd to_grand(const Eigen::MatrixXd& coefficients) {
  // Column-major storage of an M x d matrix is already channel-major.
  return Eigen::Map<const Eigen::VectorXd>(coefficients.data(), coefficients.size());
}

Eigen::MatrixXd from_grand(const Eigen::VectorXd& theta, std::size_t m, std::size_t d) {
  if (static_cast<std::size_t>(theta.size()) != m * d) throw ConfigError("grand vector has wrong size");
  return Eigen::Map<const Eigen::MatrixXd>(theta.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
}

QpProblem constrained_ls_problem(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                                 const ConstraintSet& constraints, double ridge_lambda) {
  const Eigen::Index m = design.cols();
  const Eigen::Index d = targets.cols();
  const Eigen::Index n = m * d;
  if (design.rows() != targets.rows()) throw ConfigError("design and targets differ in row count");
  if (static_cast<Eigen::Index>(constraints.num_parameters) != n)
    throw ConfigError("constraint set sized for " + std::to_string(constraints.num_parameters) +
                      " parameters, problem has " + std::to_string(n));
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += ridge_lambda;
  QpProblem qp;
  qp.hessian = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < d; ++i) qp.hessian.block(i * m, i * m, m, m) = gram;
  qp.linear = to_grand(design.transpose() * targets);
  const ConstraintSet set = constraints.assembled();
  qp.eq_matrix = set.equality_matrix();
  qp.eq_rhs = set.equality_rhs();
  qp.in_matrix = set.inequality_matrix();
  qp.in_rhs = set.inequality_rhs();
  return qp;
}

LsSolution constrained_least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                                     const ConstraintSet& constraints, double ridge_lambda) {
  if (!(ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be nonnegative");
  const Eigen::Index m = design.cols();
  const Eigen::Index d = targets.cols();

  // Solve in column-scaled coordinates u = s * theta; multipliers are unchanged by the scaling.
  const Eigen::VectorXd s = column_scales(design);
  Eigen::VectorXd grand_scale(m * d);
  for (Eigen::Index i = 0; i < d; ++i) grand_scale.segment(i * m, m) = s;
  const Eigen::MatrixXd scaled = design * s.cwiseInverse().asDiagonal();

  QpProblem qp = constrained_ls_problem(scaled, targets, constraints, 0.0);
  qp.hessian.diagonal() += ridge_lambda * grand_scale.cwiseInverse().cwiseAbs2();
  qp.eq_matrix = qp.eq_matrix * grand_scale.cwiseInverse().asDiagonal();
  qp.in_matrix = qp.in_matrix * grand_scale.cwiseInverse().asDiagonal();
  const QpResult res = solve_qp(qp);

  LsSolution sol;
  sol.coefficients = from_grand(res.x.cwiseQuotient(grand_scale), static_cast<std::size_t>(m), static_cast<std::size_t>(d));
  sol.active_inequalities = res.active;
  sol.equality_multipliers = res.eq_multipliers;
  sol.inequality_multipliers = res.in_multipliers;
  finish(sol, design, targets);
  return sol;
}

}  // namespace emr
