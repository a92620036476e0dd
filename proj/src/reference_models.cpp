#include "emr/reference_models.hpp"

#include "emr/error.hpp"
#include "emr/rng.hpp"

#include <cmath>

namespace emr {

void ClimateParams::validate() const {
  if (!(gamma1 > 0.0 && gamma2 > 0.0)) throw ConfigError("climate gamma_i must be positive");
  if (!(sigma1 >= 0.0 && sigma2 >= 0.0)) throw ConfigError("climate sigma_i must be nonnegative");
  if (!(epsilon > 0.0)) throw ConfigError("climate epsilon must be positive");
}

void ClimateIntegration::validate() const {
  if (!(dt > 0.0) || !(sample_dt > 0.0) || !(duration > 0.0) || !(burn_in >= 0.0))
    throw ConfigError("climate integration times must be positive");
  const double ratio = sample_dt / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0)
    throw ConfigError("sample_dt must be an integer multiple of dt");
  if (duration / sample_dt < 2.0) throw ConfigError("climate run records fewer than two samples");
  if (!initial.allFinite()) throw ConfigError("climate initial state must be finite");
}

Eigen::Vector4d climate_quadratic(const ClimateParams& p, const Eigen::Vector4d& u) {
  const double x1 = u[0], x2 = u[1], y1 = u[2], y2 = u[3];
  return {-x2 * (p.a1 * x1 + p.a2 * x2) + p.b123 * x2 * y1 + p.c134 * y1 * y2,
          x1 * (p.a1 * x1 + p.a2 * x2) + p.b213 * x1 * y1,
          p.b312 * x1 * x2 + p.c341 * y2 * x1,
          p.c413 * y1 * x1};
}

Eigen::Vector4d climate_drift(const ClimateParams& p, const Eigen::Vector4d& u) {
  const double x1 = u[0], x2 = u[1], y1 = u[2], y2 = u[3];
  Eigen::Vector4d linear{-p.L12 * x2 - p.d1 * x1 + p.F1 + p.L13 * y1,
                         p.L21 * x1 - p.d2 * x2 + p.F2 + p.L24 * y2,
                         -p.L13 * x1 + p.F3 - p.gamma1 / p.epsilon * y1,
                         -p.L24 * x2 + p.F4 - p.gamma2 / p.epsilon * y2};
  return linear + climate_quadratic(p, u);
}

ClimateRun simulate_climate(const ClimateParams& params, const ClimateIntegration& in) {
  params.validate();
  in.validate();
  const double dt = in.dt;
  const auto stride = static_cast<std::size_t>(std::llround(in.sample_dt / dt));
  const auto samples = static_cast<std::size_t>(std::llround(in.duration / in.sample_dt));
  const auto burn_steps = static_cast<std::size_t>(std::llround(in.burn_in / dt));
  const double noise_scale = std::sqrt(dt / params.epsilon);

  Rng rng(in.seed);
  Eigen::Vector4d u = in.initial;
  Eigen::MatrixXd full(static_cast<Eigen::Index>(samples), 4);
  const std::size_t total = burn_steps + (samples - 1) * stride;
  std::size_t row = 0;
  for (std::size_t step = 0;; ++step) {
    if (step >= burn_steps && (step - burn_steps) % stride == 0) full.row(static_cast<Eigen::Index>(row++)) = u.transpose();
    if (step == total) break;
    if (in.scheme == ClimateScheme::Rk4Splitting) {
      const Eigen::Vector4d k1 = climate_drift(params, u);
      const Eigen::Vector4d k2 = climate_drift(params, u + 0.5 * dt * k1);
      const Eigen::Vector4d k3 = climate_drift(params, u + 0.5 * dt * k2);
      const Eigen::Vector4d k4 = climate_drift(params, u + dt * k3);
      u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      u += dt * climate_drift(params, u);
    }
    const double xi1 = rng.normal();
    const double xi2 = rng.normal();
    u[2] += params.sigma1 * noise_scale * xi1;
    u[3] += params.sigma2 * noise_scale * xi2;
    if (!u.allFinite()) throw NumericalError("climate model blew up at step " + std::to_string(step + 1));
  }
  const double t0 = static_cast<double>(burn_steps) * dt;
  TimeSeries full_ts(full, in.sample_dt, {"x1", "x2", "y1", "y2"}, t0);
  return {full_ts, full_ts.select({0, 1})};
}

ClimateEnergyReport climate_energy_check(const ClimateParams& p, double tolerance) {
  ClimateEnergyReport r;
  r.b_sum = p.b123 + p.b213 + p.b312;
  r.c_sum = p.c134 + p.c341 + p.c413;
  r.l_skew = p.L12 - p.L21;
  r.ok = std::abs(r.b_sum) <= tolerance && std::abs(r.c_sum) <= tolerance && std::abs(r.l_skew) <= tolerance;
  return r;
}

LVParams LVParams::reference() {
  LVParams p;
  p.a << 1.0, 1.09, 1.52, 0.0,
         0.0, 1.0, 0.44, 1.36,
         2.33, 0.0, 1.0, 0.47,
         1.21, 0.51, 0.35, 1.0;
  p.b << 1.0, 0.72, 1.53, 1.27;
  return p;
}

void LVParams::validate() const {
  if (!a.allFinite() || !b.allFinite()) throw ConfigError("Lotka-Volterra parameters must be finite");
  if ((a.array() < 0.0).any()) throw ConfigError("Lotka-Volterra interactions must be nonnegative");
  if ((b.array() <= 0.0).any()) throw ConfigError("Lotka-Volterra growth rates must be positive");
}

Eigen::Vector4d lv_fixed_point(const LVParams& params) {
  Eigen::FullPivLU<Eigen::Matrix4d> lu(params.a);
  if (!lu.isInvertible()) throw NumericalError("interaction matrix is singular");
  return lu.solve(Eigen::Vector4d::Ones());
}

TimeSeries simulate_lv(const LVParams& params, const Eigen::Vector4d& n0, double dt, std::size_t steps) {
  params.validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (steps == 0) throw ConfigError("Lotka-Volterra run needs at least one step");
  if ((n0.array() < 0.0).any() || !n0.allFinite()) throw ConfigError("initial populations must be nonnegative");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(steps + 1), 4);
  Eigen::Vector4d n = n0;
  out.row(0) = n.transpose();
  for (std::size_t k = 1; k <= steps; ++k) {
    const Eigen::Vector4d growth = params.b.cwiseProduct(Eigen::Vector4d::Ones() - params.a * n);
    n += dt * n.cwiseProduct(growth);
    if ((n.array() < 0.0).any() || !n.allFinite())
      throw NumericalError("Lotka-Volterra state left the positive cone at step " + std::to_string(k));
    out.row(static_cast<Eigen::Index>(k)) = n.transpose();
  }
  return TimeSeries(out, dt, {"N1", "N2", "N3", "N4"});
}

Eigen::Matrix2d LinearToyParams::matrix() const {
  Eigen::Matrix2d m;
  m << a, 1.0, q, A;
  return m;
}

void LinearToyParams::validate() const {
  if (!std::isfinite(a) || !std::isfinite(q) || !std::isfinite(A) || !std::isfinite(sigma))
    throw ConfigError("linear toy parameters must be finite");
  if (sigma < 0.0) throw ConfigError("linear toy sigma must be nonnegative");
}

TimeSeries simulate_linear_toy(const LinearToyParams& params, double dt, std::size_t steps, std::uint64_t seed,
                               const Eigen::Vector2d& x0) {
  params.validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (steps == 0) throw ConfigError("linear toy run needs at least one step");
  const Eigen::Matrix2d m = params.matrix();
  const double kick = params.sigma * std::sqrt(dt);
  Rng rng(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(steps + 1), 2);
  Eigen::Vector2d s = x0;
  out.row(0) = s.transpose();
  for (std::size_t k = 1; k <= steps; ++k) {
    const Eigen::Vector2d drift = m * s * dt;
    s += drift;
    s[1] += kick * rng.normal();
    out.row(static_cast<Eigen::Index>(k)) = s.transpose();
  }
  return TimeSeries(out, dt, {"x", "y"});
}

LinearToyTransform transformed_linear_model(const LinearToyParams& params) {
  params.validate();
  LinearToyTransform t;
  t.M = params.matrix();
  t.S << 1.0, 0.0, -params.a, 1.0;
  t.S_inv << 1.0, 0.0, params.a, 1.0;
  t.transformed = t.S_inv * t.M * t.S;
  t.reduced << 0.0, 1.0, params.q - params.A * params.a, params.a + params.A;
  t.discrepancy = (t.transformed - t.reduced).cwiseAbs().maxCoeff();
  return t;
}

}  // namespace emr
