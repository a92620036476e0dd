#pragma once

#include "emr/emr.hpp"
#include "emr/simulate.hpp"
#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace emr {

/// Linear cascade dz_m/dt = -D_m z_m + z_{m+1} for m = p..1, with D_m the negated
/// self-block of L(m) and z_{p+1} dt the model noise increment. Returns xi = z_1.
TimeSeries simulate_eta_cascade(const EMRModel& model, const SimConfig& config);

struct EtaConfig {
  std::size_t seeds = 10;
  std::uint64_t seed = 1;
  std::size_t steps = 0;         // 0: length of the observed series minus one
  double burn_fraction = 0.1;    // leading share of each run discarded
  ReflectionSpec reflection;     // applied to x in the coupled simulation

  void validate() const;
};

struct EtaReport {
  Eigen::VectorXd rho;        // ensemble mean of rho(xi_i, x_i)
  Eigen::VectorXd rho_spread; // standard deviation across seeds
  double max_abs = 0.0;       // max_i |rho_i|
  bool degenerate = false;    // Q = 0 or a constant channel
  std::size_t seeds = 0;
};

/// Drives the EMR model (started from the first observed state) and the cascade with one
/// shared noise realisation per seed and correlates each xi_i with the simulated x_i.
EtaReport eta_test(const EMRModel& model, const TimeSeries& observed, const EtaConfig& config = {});

}  // namespace emr
