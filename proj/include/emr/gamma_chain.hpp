#pragma once

#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace emr {

/// F_k(t) = alpha^k t^(k-1) exp(-alpha t) / (k-1)!.
double gamma_kernel(double alpha, std::size_t k, double t);

/// Base system with one Gamma-kernel memory term in equation p driven by x_m:
///   multiplicative: dx_i/dt = x_i (b_i + sum_j a_ij x_j + [i = p] gamma M(t))
///   affine:         dx_i/dt = b_i + sum_j a_ij x_j + [i = p] gamma M(t)
/// with M(t) = int_0^t F_k(t - s) x_m(s) ds (zero pre-history).
struct GammaChainSpec {
  double alpha = 1.0;
  std::size_t k = 1;
  double gamma = 0.0;
  std::size_t p = 0;
  std::size_t m = 0;
  Eigen::VectorXd b;
  Eigen::MatrixXd a;
  Eigen::VectorXd x0;
  bool multiplicative = true;

  std::size_t dim() const { return static_cast<std::size_t>(b.size()); }
  void validate() const;
};

/// The n + k dimensional Markovian system: the base equations with M replaced by r_k,
/// dr_1/dt = alpha (x_m - r_1), dr_j/dt = alpha (r_{j-1} - r_j).
struct AugmentedSystem {
  GammaChainSpec spec;

  std::size_t dim() const { return spec.dim() + spec.k; }
  Eigen::VectorXd initial_state() const;
  Eigen::VectorXd rhs(const Eigen::VectorXd& state) const;
};

AugmentedSystem expand_gamma_chain(const GammaChainSpec& spec);

struct GammaChainReport {
  double discrepancy = 0.0;  // max_t |x_aug - x_dir|_inf / max_t |x_dir|_inf
  double max_abs = 0.0;      // max_t |x_aug - x_dir|_inf
  std::size_t steps = 0;
  TimeSeries augmented;      // observed part of the RK4 run
  TimeSeries direct;         // implicit trapezoidal solution of the integro-differential system
};

/// Integrates both formulations on the same grid. The direct solver uses the trapezoidal
/// rule in time and for the memory integral over the stored history.
GammaChainReport verify_gamma_chain(const GammaChainSpec& spec, double duration, double dt);

}  // namespace emr
