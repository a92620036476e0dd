#include "emr/simulate.hpp"

#include "emr/error.hpp"

#include <cmath>

namespace emr {

void SimConfig::validate() const {
  if (steps == 0) throw ConfigError("simulation needs at least one step");
  if (dt < 0.0 || !std::isfinite(dt)) throw ConfigError("simulation dt must be positive (or 0 for the model dt)");
  if (sample_stride == 0) throw ConfigError("sample stride must be positive");
  if (burn_in > steps) throw ConfigError("burn-in exceeds the number of steps");
  if ((steps - burn_in) / sample_stride < 1) throw ConfigError("simulation records fewer than two states");
}

Eigen::VectorXd project_positive(const Eigen::VectorXd& x, double epsilon) {
  return x.cwiseMax(epsilon);
}

HiddenState HiddenState::zeros(const EMRModel& model) {
  HiddenState h;
  h.r.assign(model.p(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.d)));
  return h;
}

EmrStepper::EmrStepper(const EMRModel& model, double dt, ReflectionSpec reflection)
    : model_(model), dt_(dt > 0.0 ? dt : model.dt), reflection_(reflection) {
  model.validate();
  if (reflection_.enabled && !std::isfinite(reflection_.epsilon)) throw ConfigError("reflection epsilon must be finite");
  const auto d = static_cast<Eigen::Index>(model.d);
  stacked_.resize(d * static_cast<Eigen::Index>(model.p() + 1));
  reset(Eigen::VectorXd::Zero(d), HiddenState::zeros(model));
}

void EmrStepper::reset(const Eigen::VectorXd& x0, const HiddenState& hidden) {
  const auto d = static_cast<Eigen::Index>(model_.d);
  if (x0.size() != d) throw ConfigError("initial state has " + std::to_string(x0.size()) + " entries, model has " +
                                        std::to_string(d));
  if (hidden.r.size() != model_.p()) throw ConfigError("hidden state must hold p = " + std::to_string(model_.p()) + " levels");
  for (const auto& r : hidden.r)
    if (r.size() != d) throw ConfigError("hidden level has the wrong dimension");
  if (!x0.allFinite()) throw ConfigError("initial state must be finite");
  x_ = reflection_.enabled ? project_positive(x0, reflection_.epsilon) : x0;
  r_ = hidden.r;
  next_ = r_;
  steps_ = 0;
}

Eigen::VectorXd EmrStepper::draw_increment(Rng& rng) const {
  Eigen::VectorXd xi(static_cast<Eigen::Index>(model_.d));
  rng.fill_normal(xi);
  return model_.noise.increment(xi, dt_);
}

void EmrStepper::step(const Eigen::VectorXd& noise_increment) {
  const auto d = static_cast<Eigen::Index>(model_.d);
  const std::size_t p = model_.p();
  if (p == 0) {
    x_ += model_.main.drift(x_) * dt_ + noise_increment;
  } else {
    stacked_.head(d) = x_;
    for (std::size_t j = 0; j < p; ++j) stacked_.segment(static_cast<Eigen::Index>(j + 1) * d, d) = r_[j];
    for (std::size_t m = 1; m <= p; ++m) {
      const Eigen::MatrixXd& l = model_.levels[m - 1].L;
      Eigen::VectorXd rate = l * stacked_.head(l.cols());
      next_[m - 1] = r_[m - 1] + rate * dt_ + (m < p ? Eigen::VectorXd(r_[m] * dt_) : noise_increment);
    }
    x_ += (model_.main.drift(x_) + r_[0]) * dt_;
    std::swap(r_, next_);
  }
  if (reflection_.enabled) x_ = project_positive(x_, reflection_.epsilon);
  ++steps_;
  bool finite = x_.allFinite();
  for (const auto& r : r_) finite = finite && r.allFinite();
  if (!finite) throw NumericalError("simulation blew up at step " + std::to_string(steps_));
}

TimeSeries simulate_emr(const EMRModel& model, const Eigen::VectorXd& x0, const HiddenState& hidden,
                        const SimConfig& config, const ReflectionSpec& reflection) {
  config.validate();
  EmrStepper stepper(model, config.dt, reflection);
  stepper.reset(x0, hidden);
  Rng rng(config.seed);
  const std::size_t rows = (config.steps - config.burn_in) / config.sample_stride + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(model.d));
  std::size_t row = 0;
  for (std::size_t k = 0;; ++k) {
    if (k >= config.burn_in && (k - config.burn_in) % config.sample_stride == 0 && row < rows)
      out.row(static_cast<Eigen::Index>(row++)) = stepper.x().transpose();
    if (k == config.steps) break;
    stepper.step(stepper.draw_increment(rng));
  }
  return TimeSeries(out, stepper.dt() * static_cast<double>(config.sample_stride), model.names,
                    static_cast<double>(config.burn_in) * stepper.dt());
}

HiddenHistory init_hidden_backward(const EMRModel& model, const TimeSeries& window) {
  model.validate();
  const std::size_t p = model.p();
  const std::size_t w = window.length();
  if (window.channels() != model.d) throw ConfigError("window has the wrong number of channels");
  if (w < p + 1) throw ConfigError("initialisation window needs at least p + 1 = " + std::to_string(p + 1) + " rows");
  const double dt = model.dt;
  const auto d = static_cast<Eigen::Index>(model.d);
  const Eigen::MatrixXd& x = window.data();

  HiddenHistory h;
  if (p == 0) return h;
  Eigen::MatrixXd r0(static_cast<Eigen::Index>(w - 1), d);
  for (Eigen::Index k = 0; k + 1 < static_cast<Eigen::Index>(w); ++k) {
    const Eigen::VectorXd xk = x.row(k).transpose();
    r0.row(k) = ((x.row(k + 1).transpose() - xk) / dt - model.main.drift(xk)).transpose();
  }
  h.levels.push_back(r0);
  for (std::size_t m = 1; m < p; ++m) {
    const Eigen::MatrixXd& prev = h.levels[m - 1];
    const auto len = static_cast<Eigen::Index>(w - 1 - m);
    const Eigen::MatrixXd& l = model.levels[m - 1].L;
    Eigen::MatrixXd cur(len, d);
    Eigen::VectorXd z(l.cols());
    for (Eigen::Index k = 0; k < len; ++k) {
      z.head(d) = x.row(k).transpose();
      for (std::size_t j = 0; j < m; ++j) z.segment(static_cast<Eigen::Index>(j + 1) * d, d) = h.levels[j].row(k).transpose();
      cur.row(k) = ((prev.row(k + 1) - prev.row(k)).transpose() / dt - l * z).transpose();
    }
    h.levels.push_back(cur);
  }
  return h;
}

ForecastResult forecast(const EMRModel& model, const TimeSeries& window, std::size_t horizon,
                        std::size_t members, std::uint64_t seed, const ReflectionSpec& reflection) {
  if (horizon == 0) throw ConfigError("forecast horizon must be positive");
  if (members == 0) throw ConfigError("forecast needs at least one ensemble member");
  const HiddenHistory init = init_hidden_backward(model, window);
  const std::size_t p = model.p();
  const std::size_t w = window.length();
  const auto d = static_cast<Eigen::Index>(model.d);
  const double dt = model.dt;

  ForecastResult result;
  result.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(horizon + 1), d);
  const double t_last = window.t0() + static_cast<double>(w - 1) * window.dt();

  for (std::size_t member = 0; member < members; ++member) {
    Rng rng(derive_seed(seed, member));
    // Absolute-index histories: xs[k] = x_k, rs[m][k] = r(m)_k.
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(w + horizon);
    for (std::size_t k = 0; k < w; ++k) xs.push_back(window.data().row(static_cast<Eigen::Index>(k)).transpose());
    std::vector<std::vector<Eigen::VectorXd>> rs(p);
    for (std::size_t m = 0; m < p; ++m)
      for (Eigen::Index k = 0; k < init.levels[m].rows(); ++k) rs[m].push_back(init.levels[m].row(k).transpose());

    Eigen::MatrixXd out(static_cast<Eigen::Index>(horizon + 1), d);
    out.row(0) = xs.back().transpose();
    Eigen::VectorXd xi(d);
    for (std::size_t step = 1; step <= horizon; ++step) {
      const std::size_t n = xs.size();  // index of the new observed state
      rng.fill_normal(xi);
      const Eigen::VectorXd noise = model.noise.increment(xi, dt);
      if (p == 0) {
        xs.push_back(xs[n - 1] + model.main.drift(xs[n - 1]) * dt + noise);
      } else {
        for (std::size_t mm = p; mm-- > 0;) {
          // New value r(mm)_{n-1-mm} from index k = n-2-mm.
          const std::size_t k = n - 2 - mm;
          const Eigen::MatrixXd& l = model.levels[mm].L;
          Eigen::VectorXd z(l.cols());
          z.head(d) = xs[k];
          for (std::size_t j = 0; j <= mm; ++j) z.segment(static_cast<Eigen::Index>(j + 1) * d, d) = rs[j][k];
          const Eigen::VectorXd forcing = mm + 1 < p ? Eigen::VectorXd(rs[mm + 1][k] * dt) : noise;
          rs[mm].push_back(rs[mm][k] + l * z * dt + forcing);
        }
        xs.push_back(xs[n - 1] + (model.main.drift(xs[n - 1]) + rs[0][n - 1]) * dt);
      }
      if (reflection.enabled) xs.back() = project_positive(xs.back(), reflection.epsilon);
      if (!xs.back().allFinite())
        throw NumericalError("forecast member " + std::to_string(member) + " blew up at step " + std::to_string(step));
      out.row(static_cast<Eigen::Index>(step)) = xs.back().transpose();
    }
    result.mean += out;
    result.members.emplace_back(out, dt, model.names, t_last);
  }
  const double count = static_cast<double>(members);
  result.mean /= count;
  result.spread = Eigen::MatrixXd::Zero(result.mean.rows(), d);
  for (const auto& m : result.members) result.spread += (m.data() - result.mean).cwiseAbs2();
  result.spread = (result.spread / count).cwiseSqrt();
  return result;
}

}  // namespace emr
