#include "emr/active_set_qp.hpp"

#include "emr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace emr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct NullSpace {
  Eigen::VectorXd particular;
  Eigen::MatrixXd basis;  // n x (n - rank)
  std::size_t rank = 0;
};

NullSpace eliminate_equalities(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, Eigen::Index n) {
  NullSpace ns;
  if (a.rows() == 0) {
    ns.particular = Eigen::VectorXd::Zero(n);
    ns.basis = Eigen::MatrixXd::Identity(n, n);
    return ns;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
  const Eigen::Index rank = qr.rank();
  ns.rank = static_cast<std::size_t>(rank);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  ns.basis = q.rightCols(n - rank);

  // Minimum-norm particular solution restricted to range(A^T).
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  ns.particular = cod.solve(b);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((a * ns.particular - b).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NumericalError("equality constraints are inconsistent");
  return ns;
}

}  // namespace

QpResult solve_qp(const QpProblem& problem, const QpOptions& options) {
  const Eigen::Index n = problem.hessian.rows();
  if (problem.hessian.cols() != n || problem.linear.size() != n)
    throw ConfigError("QP hessian/linear term shape mismatch");
  const Eigen::MatrixXd eq = problem.eq_matrix.rows() ? problem.eq_matrix : Eigen::MatrixXd(0, n);
  const Eigen::MatrixXd in = problem.in_matrix.rows() ? problem.in_matrix : Eigen::MatrixXd(0, n);
  if (eq.cols() != n || in.cols() != n || eq.rows() != problem.eq_rhs.size() ||
      in.rows() != problem.in_rhs.size())
    throw ConfigError("QP constraint shape mismatch");

  const NullSpace ns = eliminate_equalities(eq, problem.eq_rhs, n);
  const Eigen::MatrixXd& z = ns.basis;
  const Eigen::Index k = z.cols();

  // Reduced problem in u: 1/2 u^T G u - g^T u, rows N u >= s.
  const Eigen::MatrixXd g_mat = z.transpose() * problem.hessian * z;
  const Eigen::VectorXd g_vec = z.transpose() * (problem.linear - problem.hessian * ns.particular);
  const Eigen::MatrixXd rows = in * z;
  const Eigen::VectorXd rhs = problem.in_rhs - in * ns.particular;
  const Eigen::Index m = rows.rows();

  Eigen::LLT<Eigen::MatrixXd> chol(g_mat);
  if (k > 0 && chol.info() != Eigen::Success)
    throw NumericalError("QP reduced hessian is not positive definite");
  auto h_solve = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return k > 0 ? Eigen::VectorXd(chol.solve(v)) : Eigen::VectorXd(0);
  };

  Eigen::VectorXd u = h_solve(g_vec);
  std::vector<Eigen::Index> active;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd row_norm(m);
  for (Eigen::Index j = 0; j < m; ++j) row_norm[j] = std::max(rows.row(j).norm(), 1e-300);

  const std::size_t cap = options.max_iterations
                              ? options.max_iterations
                              : std::max<std::size_t>(100, 100 * static_cast<std::size_t>(m));
  std::size_t iterations = 0;

  auto is_active = [&](Eigen::Index j) {
    return std::find(active.begin(), active.end(), j) != active.end();
  };

  for (;;) {
    // Most violated inactive constraint, measured in scaled slack.
    Eigen::Index p = -1;
    double worst = -options.feasibility_tolerance;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (is_active(j)) continue;
      const double slack = (rows.row(j).dot(u) - rhs[j]) / row_norm[j];
      if (slack < worst) {
        worst = slack;
        p = j;
      }
    }
    if (p < 0) break;

    const Eigen::VectorXd np = rows.row(p).transpose();
    for (;;) {
      if (++iterations > cap)
        throw NumericalError("QP active-set iteration cap (" + std::to_string(cap) + ") exceeded");
      const auto na = static_cast<Eigen::Index>(active.size());
      Eigen::MatrixXd nmat(k, na);
      for (Eigen::Index a = 0; a < na; ++a) nmat.col(a) = rows.row(active[static_cast<std::size_t>(a)]).transpose();

      const Eigen::VectorXd hinv_np = h_solve(np);
      Eigen::VectorXd r = Eigen::VectorXd::Zero(na);
      Eigen::VectorXd step = hinv_np;
      if (na > 0) {
        Eigen::MatrixXd hinv_n(k, na);
        for (Eigen::Index a = 0; a < na; ++a) hinv_n.col(a) = h_solve(nmat.col(a));
        const Eigen::MatrixXd schur = nmat.transpose() * hinv_n;
        r = schur.ldlt().solve(nmat.transpose() * hinv_np);
        step = hinv_np - hinv_n * r;
      }

      // Partial step: largest dual move keeping active multipliers nonnegative.
      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index a = 0; a < na; ++a) {
        if (r[a] > 0.0) {
          const double ratio = mu[active[static_cast<std::size_t>(a)]] / r[a];
          if (ratio < t1) {
            t1 = ratio;
            drop = a;
          }
        }
      }
      // Full step: makes constraint p active.
      const double curvature = step.dot(np);
      const double slack = np.dot(u) - rhs[p];
      const bool primal_move = step.norm() > 1e-12 * hinv_np.norm() && curvature > 0.0;
      const double t2 = primal_move ? -slack / curvature : kInf;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw NumericalError("QP constraints are infeasible");

      if (!std::isfinite(t2)) {
        // Pure dual step through a linearly dependent constraint.
        for (Eigen::Index a = 0; a < na; ++a) mu[active[static_cast<std::size_t>(a)]] -= t * r[a];
        mu[p] += t;
        mu[active[static_cast<std::size_t>(drop)]] = 0.0;
        active.erase(active.begin() + drop);
        continue;
      }

      u += t * step;
      for (Eigen::Index a = 0; a < na; ++a) mu[active[static_cast<std::size_t>(a)]] -= t * r[a];
      mu[p] += t;
      if (t == t2) {
        active.push_back(p);
        break;
      }
      mu[active[static_cast<std::size_t>(drop)]] = 0.0;
      active.erase(active.begin() + drop);
    }
  }

  QpResult result;
  result.x = ns.particular + z * u;
  result.in_multipliers = mu.cwiseMax(0.0);
  for (Eigen::Index j : active) result.active.push_back(static_cast<std::size_t>(j));
  std::sort(result.active.begin(), result.active.end());
  result.iterations = iterations;
  result.eq_rank = ns.rank;
  if (eq.rows() > 0) {
    const Eigen::VectorXd grad = problem.hessian * result.x - problem.linear - in.transpose() * result.in_multipliers;
    result.eq_multipliers = eq.transpose().colPivHouseholderQr().solve(grad);
  } else {
    result.eq_multipliers.resize(0);
  }
  return result;
}

KktReport kkt_report(const QpProblem& problem, const QpResult& result) {
  KktReport rep;
  const Eigen::Index n = problem.hessian.rows();
  Eigen::VectorXd grad = problem.hessian * result.x - problem.linear;
  if (problem.eq_matrix.rows() > 0) {
    grad -= problem.eq_matrix.transpose() * result.eq_multipliers;
    rep.equality = (problem.eq_matrix * result.x - problem.eq_rhs).cwiseAbs().maxCoeff();
  }
  if (problem.in_matrix.rows() > 0) {
    grad -= problem.in_matrix.transpose() * result.in_multipliers;
    const Eigen::VectorXd slack = problem.in_matrix * result.x - problem.in_rhs;
    rep.primal_inequality = std::max(0.0, -slack.minCoeff());
    rep.dual_sign = std::max(0.0, -result.in_multipliers.minCoeff());
    rep.complementarity = (slack.array() * result.in_multipliers.array()).abs().maxCoeff();
  }
  rep.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  return rep;
}

}  // namespace emr
