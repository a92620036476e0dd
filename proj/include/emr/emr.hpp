#pragma once

#include "emr/regression.hpp"
#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace emr {

/// Drift F - A x + B(x, x). B is stored over monomials x_i x_j (i <= j) in the order of
/// build_quadratic_design: row c holds the coefficients of equation c.
struct QuadraticMainLevel {
  Eigen::VectorXd F;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;  // d x d(d+1)/2; zero columns when the quadratic block is disabled
  bool quadratic = true;

  std::size_t dim() const { return static_cast<std::size_t>(F.size()); }
  Eigen::VectorXd quadratic_term(const Eigen::VectorXd& x) const;
  Eigen::VectorXd drift(const Eigen::VectorXd& x) const;
  /// Channel-major grand parameter vector in the design convention (F, -A, B).
  Eigen::VectorXd grand_parameters() const;
  static QuadraticMainLevel from_coefficients(const Eigen::MatrixXd& coefficients, std::size_t d,
                                              bool quadratic);
};

/// d x (m + 1) d operator of hidden level m acting on [x, r0, ..., r(m-1)].
struct LevelOperator {
  std::size_t level = 1;
  Eigen::MatrixXd L;

  /// Block multiplying r(m-1), the level's own variable.
  Eigen::MatrixXd self_block() const;
};

struct NoiseSpec {
  Eigen::MatrixXd Q;       // covariance of r(p) * sqrt(dt)
  Eigen::MatrixXd factor;  // lower triangular, factor * factor^T = Q
  Eigen::VectorXd mean;    // sample mean of r(p); empty means zero

  /// Last-level increment r(p) dt = mean dt + factor xi sqrt(dt).
  Eigen::VectorXd increment(const Eigen::VectorXd& xi, double dt) const;
};

struct LevelDiagnostics {
  std::size_t level = 0;                 // m of the residual r(m) under test
  Eigen::VectorXd lag1;                  // lag-1 autocorrelation per channel
  Eigen::VectorXd trial_r2;              // R^2 of the trial level-(m+1) regression
  Eigen::VectorXd cov_eigenvalues;       // of r(m) dt^(m+1), descending
  Eigen::VectorXd trial_cov_eigenvalues; // of the trial residual in the same units
  double cov_change = 0.0;               // max relative eigenvalue change
  bool lag1_ok = false;
  bool r2_ok = false;
  bool cov_ok = false;
  bool stop = false;
};

struct FitReport {
  std::vector<LevelDiagnostics> levels;
  std::string stop_reason;  // "criterion" or "max_levels"
};

struct StoppingConfig {
  double r2_target = 0.5;
  double r2_tolerance = 0.05;
  double lag1_tolerance = 0.05;
  double covariance_tolerance = 0.05;
  std::size_t max_levels = 20;
  std::size_t min_length = 100;

  void validate() const;
};

/// Ridge handling for every regression of the pipeline. Penalties act on column-
/// standardised predictors (unit RMS), so one lambda suits levels of very different scale.
struct RidgeSpec {
  enum class Mode { None, Auto, Fixed };
  Mode mode = Mode::Auto;
  double value = 0.0;

  static RidgeSpec none() { return {Mode::None, 0.0}; }
  static RidgeSpec automatic() { return {Mode::Auto, 0.0}; }
  static RidgeSpec fixed(double lambda) { return {Mode::Fixed, lambda}; }
  /// Lambda for a standardised design with the given number of rows.
  double lambda_for(std::size_t rows) const;
  std::string describe() const;
};

struct FitOptions {
  bool quadratic = true;                    // main-level quadratic block
  std::optional<ConstraintSet> constraints; // main level only
  RidgeSpec ridge = RidgeSpec::automatic();
  StoppingConfig stopping;
};

inline constexpr const char* kSignConvention = "drift = F - A x + B(x,x); hidden: dr(m-1)/dt = L(m) [x, r0..r(m-1)] + r(m)";

struct EMRModel {
  QuadraticMainLevel main;
  std::vector<LevelOperator> levels;
  NoiseSpec noise;
  double dt = 1.0;
  std::size_t d = 0;
  std::vector<std::string> names;
  bool constrained = false;
  std::string ridge;
  FitReport report;

  std::size_t p() const { return levels.size(); }
  void validate() const;
};

struct MainLevelFit {
  QuadraticMainLevel main;
  TimeSeries residual;  // r0, N - 1 rows
  LsSolution solution;
  DesignMatrix design;
};

struct LevelFit {
  LevelOperator op;
  TimeSeries residual;  // r(m)
  LsSolution solution;
  Eigen::MatrixXd design;
  Eigen::MatrixXd targets;
};

/// Main-level regression of (x_{k+1} - x_k)/dt on the quadratic design of x_k.
MainLevelFit fit_main_level(const TimeSeries& ts, const std::optional<ConstraintSet>& constraints,
                            const RidgeSpec& ridge, bool quadratic = true);

/// Level-m regression of (r(m-1)_{k+1} - r(m-1)_k)/dt on [x_k, r0_k, ..., r(m-1)_k].
/// `stack` holds r0..r(m-1); every series is trimmed to the common usable length.
LevelFit fit_level(std::size_t m, const TimeSeries& ts, const std::vector<TimeSeries>& stack,
                   const RidgeSpec& ridge);

struct StoppingResult {
  bool stop = false;
  LevelDiagnostics diagnostics;
  LevelFit trial;  // the level-(m+1) fit used for the R^2 test
};

/// Tests whether r(m) = stack.back() is white enough to end the level sequence.
StoppingResult stopping_test(const TimeSeries& ts, const std::vector<TimeSeries>& stack,
                             const StoppingConfig& config, const RidgeSpec& ridge);

/// Q = dt * cov(r(p)); factor by Cholesky with relative jitter 1e-12 when needed.
NoiseSpec estimate_noise(const TimeSeries& last_residual, double dt);

EMRModel fit_emr(const TimeSeries& ts, const FitOptions& options = {});

/// Linear part of the stacked dynamics over (x, r0, ..., r(p-1)), size d(p+1).
Eigen::MatrixXd grand_linear_operator(const EMRModel& model);
std::vector<std::complex<double>> grand_eigenvalues(const EMRModel& model);

struct EnergyAudit {
  double max_cubic_form = 0.0;         // max |<B(x,x),x>| over random unit x
  double max_equality_violation = 0.0; // energy_constraints(d) equalities
  double min_diag_A = 0.0;
};
EnergyAudit energy_audit(const QuadraticMainLevel& main, std::size_t samples = 1000,
                         std::uint64_t seed = 20240601);

}  // namespace emr
