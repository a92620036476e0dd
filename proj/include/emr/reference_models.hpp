#pragma once

#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>

namespace emr {

/// Conceptual stochastic climate model with slow (x1, x2) and fast (y1, y2) variables.
/// The y2 equation uses c413 y1 x1 so that the c-triple conserves energy together with
/// c134 y1 y2 (x1 equation) and c341 y2 x1 (y1 equation).
struct ClimateParams {
  double b123 = 0.25, b213 = 0.25, b312 = -0.5;
  double c134 = 0.25, c341 = 0.25, c413 = -0.5;
  double L12 = 1.0, L21 = 1.0, L24 = 1.0, L13 = -1.0;
  double a1 = 1.0, a2 = -1.0;
  double d1 = 0.2, d2 = 0.1;
  double F1 = -0.25, F2 = 0.0, F3 = 0.0, F4 = 0.0;
  double gamma1 = 1.0, gamma2 = 1.0;
  double sigma1 = 1.0, sigma2 = 1.0;
  double epsilon = 0.1;

  void validate() const;
};

enum class ClimateScheme { Rk4Splitting, EulerMaruyama };

struct ClimateIntegration {
  double duration = 1e4;  // recorded time after burn-in
  double dt = 1e-3;
  double sample_dt = 0.05;
  double burn_in = 100.0;
  std::uint64_t seed = 1;
  ClimateScheme scheme = ClimateScheme::Rk4Splitting;
  Eigen::Vector4d initial = Eigen::Vector4d::Zero();

  void validate() const;
};

/// Drift of (x1, x2, y1, y2).
Eigen::Vector4d climate_drift(const ClimateParams& params, const Eigen::Vector4d& u);
/// The quadratic (energy-conserving) part of the drift.
Eigen::Vector4d climate_quadratic(const ClimateParams& params, const Eigen::Vector4d& u);

struct ClimateRun {
  TimeSeries full;      // x1, x2, y1, y2
  TimeSeries observed;  // x1, x2
};

/// RK4 on the drift followed by the increment sigma_i / sqrt(eps) * sqrt(dt) * xi on y_i.
ClimateRun simulate_climate(const ClimateParams& params, const ClimateIntegration& integration);

struct ClimateEnergyReport {
  double b_sum = 0.0;       // b123 + b213 + b312
  double c_sum = 0.0;       // c134 + c341 + c413
  double l_skew = 0.0;      // L12 - L21
  bool ok = false;
};
ClimateEnergyReport climate_energy_check(const ClimateParams& params, double tolerance = 1e-12);

/// Competitive Lotka-Volterra system dN_i/dt = b_i N_i (1 - sum_j a_ij N_j).
struct LVParams {
  Eigen::Matrix4d a;
  Eigen::Vector4d b;

  static LVParams reference();
  void validate() const;
};

inline Eigen::Vector4d lv_reference_initial() { return {0.5, 0.2, 0.3, 0.7}; }

/// Solves a N* = 1 for the coexistence equilibrium.
Eigen::Vector4d lv_fixed_point(const LVParams& params);

/// Forward Euler; returns steps + 1 rows. Throws NumericalError on a negative component.
TimeSeries simulate_lv(const LVParams& params, const Eigen::Vector4d& n0, double dt, std::size_t steps);

/// dx = (a x + y) dt, dy = (q x + A y) dt + sigma dW.
struct LinearToyParams {
  double a = -2.0;
  double q = 1.0;
  double A = -1.0;
  double sigma = 1.0;

  Eigen::Matrix2d matrix() const;
  void validate() const;
};

/// Exact Euler-Maruyama recursion; returns steps + 1 rows starting at x0.
TimeSeries simulate_linear_toy(const LinearToyParams& params, double dt, std::size_t steps, std::uint64_t seed,
                               const Eigen::Vector2d& x0 = Eigen::Vector2d::Zero());

struct LinearToyTransform {
  Eigen::Matrix2d M;
  Eigen::Matrix2d S;
  Eigen::Matrix2d S_inv;
  Eigen::Matrix2d transformed;  // S^-1 M S
  Eigen::Matrix2d reduced;      // [[0, 1], [q - A a, a + A]]
  double discrepancy = 0.0;     // max |transformed - reduced|
};
LinearToyTransform transformed_linear_model(const LinearToyParams& params);

}  // namespace emr
