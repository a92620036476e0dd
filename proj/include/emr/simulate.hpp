#pragma once

#include "emr/emr.hpp"
#include "emr/rng.hpp"
#include "emr/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace emr {

struct SimConfig {
  std::size_t steps = 0;         // Euler steps after the initial state
  double dt = 0.0;               // 0: use the model's sampling interval
  std::uint64_t seed = 1;
  std::size_t sample_stride = 1; // keep every stride-th state
  std::size_t burn_in = 0;       // states discarded before recording

  void validate() const;
};

/// Projection x -> max(x, epsilon) applied to the observed variables after every step.
struct ReflectionSpec {
  bool enabled = false;
  double epsilon = 0.12;
};

Eigen::VectorXd project_positive(const Eigen::VectorXd& x, double epsilon);

/// Hidden variables r0..r(p-1) of one model state.
struct HiddenState {
  std::vector<Eigen::VectorXd> r;
  static HiddenState zeros(const EMRModel& model);
};

/// Synchronous Euler stepping of (x, r0, ..., r(p-1)). The last level's increment
/// r(p) dt is supplied by the caller, normally NoiseSpec::increment.
class EmrStepper {
 public:
  EmrStepper(const EMRModel& model, double dt, ReflectionSpec reflection = {});

  void reset(const Eigen::VectorXd& x0, const HiddenState& hidden);
  void step(const Eigen::VectorXd& noise_increment);
  Eigen::VectorXd draw_increment(Rng& rng) const;

  const Eigen::VectorXd& x() const { return x_; }
  const std::vector<Eigen::VectorXd>& hidden() const { return r_; }
  std::size_t steps_taken() const { return steps_; }
  double dt() const { return dt_; }

 private:
  const EMRModel& model_;
  double dt_;
  ReflectionSpec reflection_;
  Eigen::VectorXd x_;
  std::vector<Eigen::VectorXd> r_;
  std::vector<Eigen::VectorXd> next_;
  Eigen::VectorXd stacked_;
  std::size_t steps_ = 0;
};

/// Records the observed variables; throws NumericalError naming the step on blow-up.
TimeSeries simulate_emr(const EMRModel& model, const Eigen::VectorXd& x0, const HiddenState& hidden,
                        const SimConfig& config, const ReflectionSpec& reflection = {});

/// Hidden histories recovered from an observed window by inverting the level equations:
/// r0_k = (x_{k+1} - x_k)/dt - f(x_k) for k <= W-2, and for m >= 1
/// r(m)_k = (r(m-1)_{k+1} - r(m-1)_k)/dt - L(m)[x_k, r0_k, ..., r(m-1)_k] for k <= W-2-m.
struct HiddenHistory {
  std::vector<Eigen::MatrixXd> levels;  // levels[m]: (W - 1 - m) x d
};
HiddenHistory init_hidden_backward(const EMRModel& model, const TimeSeries& window);

struct ForecastResult {
  std::vector<TimeSeries> members;  // horizon + 1 rows; row 0 is the last observed state
  Eigen::MatrixXd mean;             // (horizon + 1) x d
  Eigen::MatrixXd spread;           // ensemble standard deviation, (horizon + 1) x d
};

/// Ensemble forecast continuing the staggered recursion implied by the backward
/// initialisation, so every member starts from a state consistent with the window.
ForecastResult forecast(const EMRModel& model, const TimeSeries& window, std::size_t horizon,
                        std::size_t members, std::uint64_t seed, const ReflectionSpec& reflection = {});

}  // namespace emr
