#include "emr/emr.hpp"

#include "emr/error.hpp"
#include "emr/hessenberg_qr.hpp"
#include "emr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emr {

Eigen::VectorXd QuadraticMainLevel::quadratic_term(const Eigen::VectorXd& x) const {
  const std::size_t d = dim();
  Eigen::VectorXd monomials(static_cast<Eigen::Index>(d * (d + 1) / 2));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) monomials[k++] = x[static_cast<Eigen::Index>(i)] * x[static_cast<Eigen::Index>(j)];
  return B * monomials;
}

Eigen::VectorXd QuadraticMainLevel::drift(const Eigen::VectorXd& x) const {
  return F - A * x + quadratic_term(x);
}

Eigen::VectorXd QuadraticMainLevel::grand_parameters() const {
  const auto d = static_cast<Eigen::Index>(dim());
  const auto m = static_cast<Eigen::Index>(quadratic_design_width(dim()));
  Eigen::MatrixXd coef(m, d);
  coef.row(0) = F.transpose();
  coef.block(1, 0, d, d) = -A.transpose();
  coef.block(1 + d, 0, m - 1 - d, d) = B.transpose();
  return to_grand(coef);
}

QuadraticMainLevel QuadraticMainLevel::from_coefficients(const Eigen::MatrixXd& coefficients, std::size_t d,
                                                         bool quadratic) {
  const auto dd = static_cast<Eigen::Index>(d);
  const auto nq = dd * (dd + 1) / 2;
  const Eigen::Index expected = 1 + dd + (quadratic ? nq : 0);
  if (coefficients.rows() != expected || coefficients.cols() != dd)
    throw ConfigError("main-level coefficient matrix has the wrong shape");
  QuadraticMainLevel main;
  main.quadratic = quadratic;
  main.F = coefficients.row(0).transpose();
  main.A = -coefficients.block(1, 0, dd, dd).transpose();
  main.B = Eigen::MatrixXd::Zero(dd, nq);
  if (quadratic) main.B = coefficients.block(1 + dd, 0, nq, dd).transpose();
  return main;
}

Eigen::MatrixXd LevelOperator::self_block() const {
  const Eigen::Index d = L.rows();
  return L.block(0, static_cast<Eigen::Index>(level) * d, d, d);
}

void StoppingConfig::validate() const {
  if (!(r2_tolerance > 0.0) || !(lag1_tolerance > 0.0) || !(covariance_tolerance > 0.0))
    throw ConfigError("stopping tolerances must be positive");
  if (!(r2_target > 0.0 && r2_target < 1.0)) throw ConfigError("r2_target must lie in (0, 1)");
  if (max_levels < 1) throw ConfigError("max_levels must be at least 1");
  if (min_length < 3) throw ConfigError("min_length must be at least 3");
}

double RidgeSpec::lambda_for(std::size_t rows) const {
  switch (mode) {
    case Mode::None: return 0.0;
    // default_ridge of a unit-RMS design: 1e-6 * trace(X^T X) / M = 1e-6 * rows.
    case Mode::Auto: return 1e-6 * static_cast<double>(rows);
    case Mode::Fixed:
      if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("ridge lambda must be finite and nonnegative");
      return value;
  }
  return 0.0;
}

std::string RidgeSpec::describe() const {
  switch (mode) {
    case Mode::None: return "none";
    case Mode::Auto: return "auto";
    case Mode::Fixed: {
      std::ostringstream s;
      s.precision(17);
      s << value;
      return s.str();
    }
  }
  return "auto";
}

void EMRModel::validate() const {
  if (d == 0) throw ConfigError("model dimension must be positive");
  if (!(dt > 0.0)) throw ConfigError("model dt must be positive");
  const auto dd = static_cast<Eigen::Index>(d);
  if (main.F.size() != dd || main.A.rows() != dd || main.A.cols() != dd || main.B.rows() != dd ||
      main.B.cols() != dd * (dd + 1) / 2)
    throw ConfigError("main level has inconsistent shapes");
  for (std::size_t m = 0; m < levels.size(); ++m) {
    if (levels[m].level != m + 1) throw ConfigError("hidden levels must be numbered 1..p");
    if (levels[m].L.rows() != dd || levels[m].L.cols() != static_cast<Eigen::Index>(m + 2) * dd)
      throw ConfigError("level " + std::to_string(m + 1) + " operator has the wrong shape");
  }
  if (noise.Q.rows() != dd || noise.Q.cols() != dd || noise.factor.rows() != dd || noise.factor.cols() != dd)
    throw ConfigError("noise covariance has the wrong shape");
  if (noise.mean.size() != 0 && noise.mean.size() != dd) throw ConfigError("noise mean has the wrong length");
  if (names.size() != d) throw ConfigError("model needs one name per channel");
}

namespace {

Eigen::VectorXd rms_scales(const Eigen::MatrixXd& x) {
  Eigen::VectorXd s = (x.colwise().squaredNorm().transpose() / static_cast<double>(x.rows())).cwiseSqrt();
  for (Eigen::Index c = 0; c < s.size(); ++c)
    if (!(s[c] > 0.0)) s[c] = 1.0;
  return s;
}

ConstraintSet rescale_constraints(const ConstraintSet& set, const Eigen::VectorXd& grand_scale) {
  ConstraintSet out = set;
  auto apply = [&](std::vector<LinearConstraint>& rows) {
    for (auto& row : rows)
      for (auto& [index, coef] : row.terms) coef /= grand_scale[static_cast<Eigen::Index>(index)];
  };
  apply(out.equalities);
  apply(out.inequalities);
  return out;
}

// Ridge and constraints act on unit-RMS columns u = s * theta; coefficients and residuals
// are returned in the original units.
LsSolution solve_standardised(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                              const RidgeSpec& ridge, const std::optional<ConstraintSet>& constraints) {
  const Eigen::VectorXd s = rms_scales(design);
  const Eigen::MatrixXd scaled = design * s.cwiseInverse().asDiagonal();
  const double lambda = ridge.lambda_for(static_cast<std::size_t>(design.rows()));
  LsSolution sol;
  if (constraints && !constraints->empty()) {
    const Eigen::Index m = design.cols();
    Eigen::VectorXd grand_scale(m * targets.cols());
    for (Eigen::Index i = 0; i < targets.cols(); ++i) grand_scale.segment(i * m, m) = s;
    sol = constrained_least_squares(scaled, targets, rescale_constraints(*constraints, grand_scale), lambda);
  } else {
    sol = least_squares(scaled, targets, lambda);
  }
  sol.coefficients = s.cwiseInverse().asDiagonal() * sol.coefficients;
  sol.residuals = targets - design * sol.coefficients;
  sol.r_squared = r_squared(targets, sol.residuals);
  return sol;
}

std::vector<std::string> residual_names(std::size_t m, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back("r" + std::to_string(m) + "_" + n);
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  return centred.transpose() * centred / static_cast<double>(x.rows() - 1);
}

Eigen::VectorXd descending_eigenvalues(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

}  // namespace

MainLevelFit fit_main_level(const TimeSeries& ts, const std::optional<ConstraintSet>& constraints,
                            const RidgeSpec& ridge, bool quadratic) {
  const std::size_t n = ts.length();
  const std::size_t d = ts.channels();
  if (n < 3) throw ConfigError("main-level fit needs at least three samples");
  const TimeSeries x = ts.slice(0, n - 1);
  const TimeSeries targets = finite_differences(ts);
  MainLevelFit fit{.main = {},
                   .residual = targets,
                   .solution = {},
                   .design = build_design(x, {}, {.constant = true, .quadratic = quadratic})};
  if (constraints && !quadratic) throw ConfigError("energy constraints require the quadratic block");
  fit.solution = solve_standardised(fit.design.values, targets.data(), ridge, constraints);
  fit.main = QuadraticMainLevel::from_coefficients(fit.solution.coefficients, d, quadratic);
  fit.residual = TimeSeries(fit.solution.residuals, ts.dt(), residual_names(0, ts.names()), ts.t0());
  return fit;
}

LevelFit fit_level(std::size_t m, const TimeSeries& ts, const std::vector<TimeSeries>& stack,
                   const RidgeSpec& ridge) {
  if (m == 0) throw ConfigError("hidden levels are numbered from 1");
  if (stack.size() < m) throw ConfigError("level " + std::to_string(m) + " needs residuals r0..r" + std::to_string(m - 1));
  const std::size_t d = ts.channels();
  std::size_t len = std::min(ts.length(), stack[m - 1].length() - 1);
  for (std::size_t j = 0; j < m; ++j) {
    if (stack[j].channels() != d) throw ConfigError("residual channels differ from the series");
    len = std::min(len, stack[j].length());
  }
  if (len < 2) throw ConfigError("level " + std::to_string(m) + " has too few samples");

  std::vector<TimeSeries> extras;
  for (std::size_t j = 0; j < m; ++j) extras.push_back(stack[j].slice(0, len));
  const DesignMatrix design = build_level_design(ts.slice(0, len), extras);
  const Eigen::MatrixXd& r = stack[m - 1].data();
  const auto rows = static_cast<Eigen::Index>(len);
  const Eigen::MatrixXd targets = (r.middleRows(1, rows) - r.topRows(rows)) / ts.dt();

  LevelFit fit{.op = {},
               .residual = stack[m - 1],
               .solution = solve_standardised(design.values, targets, ridge, std::nullopt),
               .design = design.values,
               .targets = targets};
  fit.op.level = m;
  fit.op.L = fit.solution.coefficients.transpose();
  fit.residual = TimeSeries(fit.solution.residuals, ts.dt(), residual_names(m, ts.names()), ts.t0());
  return fit;
}

StoppingResult stopping_test(const TimeSeries& ts, const std::vector<TimeSeries>& stack,
                             const StoppingConfig& config, const RidgeSpec& ridge) {
  config.validate();
  if (stack.empty()) throw ConfigError("stopping test needs at least r0");
  const std::size_t m = stack.size() - 1;
  const TimeSeries& r = stack.back();
  if (r.length() < config.min_length)
    throw ConfigError("residual r" + std::to_string(m) + " has " + std::to_string(r.length()) +
                      " samples; at least " + std::to_string(config.min_length) + " are needed");
  const std::size_t d = r.channels();
  const auto dd = static_cast<Eigen::Index>(d);

  StoppingResult out{.stop = false, .diagnostics = {}, .trial = fit_level(m + 1, ts, stack, ridge)};
  LevelDiagnostics& diag = out.diagnostics;
  diag.level = m;

  const AcfCurve curve = acf(r, 1);
  diag.lag1 = curve.values.row(1).transpose();

  // Uncentred R^2 of the trial regression: 1 - sum(gamma^2) / sum(target^2).
  diag.trial_r2.resize(dd);
  for (Eigen::Index i = 0; i < dd; ++i) {
    const double denom = out.trial.targets.col(i).squaredNorm();
    diag.trial_r2[i] = denom > 0.0 ? 1.0 - out.trial.solution.residuals.col(i).squaredNorm() / denom : 0.0;
  }

  // Covariances in dt = 1 units: zeta_m = r(m) dt^(m+1).
  const double dt = ts.dt();
  const double scale_m = std::pow(dt, static_cast<double>(m + 1));
  diag.cov_eigenvalues = descending_eigenvalues(sample_covariance(r.data() * scale_m));
  diag.trial_cov_eigenvalues = descending_eigenvalues(sample_covariance(out.trial.residual.data() * scale_m * dt));
  const double floor = 1e-12 * std::max(diag.cov_eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
  diag.cov_change = 0.0;
  for (Eigen::Index i = 0; i < dd; ++i) {
    const double ref = std::max(std::abs(diag.cov_eigenvalues[i]), floor);
    diag.cov_change = std::max(diag.cov_change, std::abs(diag.trial_cov_eigenvalues[i] - diag.cov_eigenvalues[i]) / ref);
  }

  diag.lag1_ok = diag.lag1.cwiseAbs().maxCoeff() <= config.lag1_tolerance;
  diag.r2_ok = (diag.trial_r2.array() - config.r2_target).abs().maxCoeff() <= config.r2_tolerance;
  diag.cov_ok = diag.cov_change <= config.covariance_tolerance;
  diag.stop = diag.lag1_ok && diag.r2_ok && diag.cov_ok;
  out.stop = diag.stop;
  return out;
}

Eigen::VectorXd NoiseSpec::increment(const Eigen::VectorXd& xi, double dt) const {
  Eigen::VectorXd out = factor * xi * std::sqrt(dt);
  if (mean.size() != 0) out += mean * dt;
  return out;
}

NoiseSpec estimate_noise(const TimeSeries& last_residual, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  NoiseSpec noise;
  noise.mean = last_residual.data().colwise().mean().transpose();
  noise.Q = sample_covariance(last_residual.data()) * dt;
  noise.Q = 0.5 * (noise.Q + noise.Q.transpose()).eval();
  const auto d = noise.Q.rows();
  const double top = noise.Q.diagonal().cwiseAbs().maxCoeff();
  if (top == 0.0) {
    noise.factor = Eigen::MatrixXd::Zero(d, d);
    return noise;
  }
  Eigen::LLT<Eigen::MatrixXd> chol(noise.Q);
  if (chol.info() != Eigen::Success) {
    Eigen::MatrixXd jittered = noise.Q;
    jittered.diagonal().array() += 1e-12 * top;
    chol.compute(jittered);
    if (chol.info() != Eigen::Success) throw NumericalError("noise covariance is not positive semidefinite");
  }
  noise.factor = chol.matrixL();
  return noise;
}

EMRModel fit_emr(const TimeSeries& ts, const FitOptions& options) {
  options.stopping.validate();
  const std::size_t d = ts.channels();
  std::optional<ConstraintSet> constraints;
  if (options.constraints) constraints = options.constraints->assembled();

  MainLevelFit main = fit_main_level(ts, constraints, options.ridge, options.quadratic);
  EMRModel model;
  model.main = main.main;
  model.dt = ts.dt();
  model.d = d;
  model.names = ts.names();
  model.constrained = constraints.has_value();
  model.ridge = options.ridge.describe();

  std::vector<TimeSeries> stack{main.residual};
  while (true) {
    StoppingResult test = stopping_test(ts, stack, options.stopping, options.ridge);
    model.report.levels.push_back(test.diagnostics);
    if (test.stop) {
      model.report.stop_reason = "criterion";
      break;
    }
    if (model.levels.size() >= options.stopping.max_levels) {
      model.report.stop_reason = "max_levels";
      break;
    }
    model.levels.push_back(test.trial.op);
    stack.push_back(test.trial.residual);
  }
  model.noise = estimate_noise(stack.back(), ts.dt());
  return model;
}

Eigen::MatrixXd grand_linear_operator(const EMRModel& model) {
  const auto d = static_cast<Eigen::Index>(model.d);
  const auto p = static_cast<Eigen::Index>(model.p());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d * (p + 1), d * (p + 1));
  g.block(0, 0, d, d) = -model.main.A;
  if (p > 0) g.block(0, d, d, d).setIdentity();
  for (Eigen::Index m = 1; m <= p; ++m) {
    const Eigen::MatrixXd& l = model.levels[static_cast<std::size_t>(m - 1)].L;
    g.block(m * d, 0, d, l.cols()) = l;
    if (m < p) g.block(m * d, (m + 1) * d, d, d).setIdentity();
  }
  return g;
}

std::vector<std::complex<double>> grand_eigenvalues(const EMRModel& model) {
  return nonsymmetric_eigenvalues(grand_linear_operator(model));
}

EnergyAudit energy_audit(const QuadraticMainLevel& main, std::size_t samples, std::uint64_t seed) {
  const std::size_t d = main.dim();
  EnergyAudit audit;
  Rng rng(seed);
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < samples; ++s) {
    rng.fill_normal(x);
    const double norm = x.norm();
    if (norm == 0.0) continue;
    x /= norm;
    audit.max_cubic_form = std::max(audit.max_cubic_form, std::abs(main.quadratic_term(x).dot(x)));
  }
  audit.max_equality_violation = energy_constraints(d).max_equality_violation(main.grand_parameters());
  audit.min_diag_A = main.A.diagonal().minCoeff();
  return audit;
}

}  // namespace emr
