#include "emr/eta_test.hpp"

#include "emr/error.hpp"
#include "emr/rng.hpp"

#include <cmath>

namespace emr {

namespace {

class Cascade {
 public:
  Cascade(const EMRModel& model, double dt) : dt_(dt), d_(static_cast<Eigen::Index>(model.d)) {
    for (const auto& level : model.levels) damping_.push_back(-level.self_block());
    z_.assign(damping_.size(), Eigen::VectorXd::Zero(d_));
    xi_ = Eigen::VectorXd::Zero(d_);
  }

  // Synchronous Euler step; with p = 0 the memory term is the white increment itself.
  void step(const Eigen::VectorXd& noise_increment) {
    const std::size_t p = damping_.size();
    if (p == 0) {
      xi_ = noise_increment / dt_;
      return;
    }
    std::vector<Eigen::VectorXd> next(p);
    for (std::size_t m = 0; m < p; ++m) {
      const Eigen::VectorXd forcing = m + 1 < p ? Eigen::VectorXd(z_[m + 1] * dt_) : noise_increment;
      next[m] = z_[m] - damping_[m] * z_[m] * dt_ + forcing;
    }
    z_ = std::move(next);
    xi_ = z_[0];
  }

  const Eigen::VectorXd& xi() const { return xi_; }

 private:
  double dt_;
  Eigen::Index d_;
  std::vector<Eigen::MatrixXd> damping_;
  std::vector<Eigen::VectorXd> z_;
  Eigen::VectorXd xi_;
};

}  // namespace

TimeSeries simulate_eta_cascade(const EMRModel& model, const SimConfig& config) {
  config.validate();
  model.validate();
  const double dt = config.dt > 0.0 ? config.dt : model.dt;
  EmrStepper noise_source(model, dt);
  Cascade cascade(model, dt);
  Rng rng(config.seed);
  const std::size_t rows = (config.steps - config.burn_in) / config.sample_stride + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(model.d));
  std::size_t row = 0;
  for (std::size_t k = 0;; ++k) {
    if (k >= config.burn_in && (k - config.burn_in) % config.sample_stride == 0 && row < rows)
      out.row(static_cast<Eigen::Index>(row++)) = cascade.xi().transpose();
    if (k == config.steps) break;
    cascade.step(noise_source.draw_increment(rng));
    if (!cascade.xi().allFinite()) throw NumericalError("eta cascade blew up at step " + std::to_string(k + 1));
  }
  std::vector<std::string> names;
  for (const auto& n : model.names) names.push_back("xi_" + n);
  return TimeSeries(out, dt * static_cast<double>(config.sample_stride), names);
}

void EtaConfig::validate() const {
  if (seeds == 0) throw ConfigError("eta test needs at least one seed");
  if (!(burn_fraction >= 0.0 && burn_fraction < 1.0)) throw ConfigError("burn fraction must lie in [0, 1)");
}

EtaReport eta_test(const EMRModel& model, const TimeSeries& observed, const EtaConfig& config) {
  config.validate();
  model.validate();
  if (observed.channels() != model.d) throw ConfigError("observed series has the wrong number of channels");
  const std::size_t steps = config.steps > 0 ? config.steps : observed.length() - 1;
  const auto burn = static_cast<std::size_t>(config.burn_fraction * static_cast<double>(steps));
  const std::size_t kept = steps - burn;
  if (kept < 10) throw ConfigError("eta test run is too short");
  const auto d = static_cast<Eigen::Index>(model.d);

  EtaReport report;
  report.seeds = config.seeds;
  report.rho = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(d);
  if (model.noise.Q.cwiseAbs().maxCoeff() == 0.0) {
    report.rho_spread = Eigen::VectorXd::Zero(d);
    report.degenerate = true;
    return report;
  }

  Eigen::MatrixXd xs(static_cast<Eigen::Index>(kept), d);
  Eigen::MatrixXd xis(static_cast<Eigen::Index>(kept), d);
  for (std::size_t s = 0; s < config.seeds; ++s) {
    Rng rng(derive_seed(config.seed, s));
    EmrStepper stepper(model, model.dt, config.reflection);
    stepper.reset(observed.data().row(0).transpose(), HiddenState::zeros(model));
    Cascade cascade(model, model.dt);
    for (std::size_t k = 0; k < steps; ++k) {
      const Eigen::VectorXd inc = stepper.draw_increment(rng);
      stepper.step(inc);
      cascade.step(inc);
      if (k >= burn) {
        xs.row(static_cast<Eigen::Index>(k - burn)) = stepper.x().transpose();
        xis.row(static_cast<Eigen::Index>(k - burn)) = cascade.xi().transpose();
      }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      double r = 0.0;
      try {
        r = pearson(xis.col(i), xs.col(i));
      } catch (const ConfigError&) {
        report.degenerate = true;
      }
      report.rho[i] += r;
      second[i] += r * r;
    }
  }
  const double n = static_cast<double>(config.seeds);
  report.rho /= n;
  report.rho_spread = (second / n - report.rho.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  report.max_abs = report.rho.cwiseAbs().maxCoeff();
  return report;
}

}  // namespace emr
