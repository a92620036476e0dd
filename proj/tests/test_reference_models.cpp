#include <doctest.h>

#include "emr/error.hpp"
#include "emr/gamma_chain.hpp"
#include "emr/reference_models.hpp"
#include "oracles.hpp"

#include <random>

using namespace emr;

TEST_CASE("climate model energy structure") {
  ClimateParams params;
  const ClimateEnergyReport ok = climate_energy_check(params);
  CHECK(ok.ok);
  CHECK(ok.b_sum == 0.0);
  CHECK(ok.c_sum == 0.0);
  CHECK(ok.l_skew == 0.0);
  params.b312 = -0.4;
  CHECK_FALSE(climate_energy_check(params).ok);

  const ClimateParams defaults;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> dist;
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Eigen::Vector4d u;
    for (int i = 0; i < 4; ++i) u[i] = 3.0 * dist(gen);
    worst = std::max(worst, std::abs(climate_quadratic(defaults, u).dot(u)) / u.squaredNorm() / u.norm());
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("climate integration") {
  ClimateParams params;
  ClimateIntegration in;
  in.duration = 200.0;
  in.burn_in = 10.0;
  const ClimateRun run = simulate_climate(params, in);
  CHECK(run.full.channels() == 4);
  CHECK(run.observed.channels() == 2);
  CHECK(run.full.length() == 4000);
  CHECK(run.observed.dt() == doctest::Approx(0.05));
  CHECK((run.full.data().leftCols(2) - run.observed.data()).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd var = variance_by_channel(run.full);
  CHECK(var[2] > var[0]);
  CHECK(var[3] > var[1]);

  const ClimateRun again = simulate_climate(params, in);
  CHECK((again.full.data() - run.full.data()).cwiseAbs().maxCoeff() == 0.0);

  params.epsilon = 0.0;
  CHECK_THROWS_AS(params.validate(), ConfigError);
  in.sample_dt = 0.0015;
  CHECK_THROWS_AS(in.validate(), ConfigError);
}

TEST_CASE("Lotka-Volterra reference") {
  const LVParams params = LVParams::reference();
  SUBCASE("coexistence equilibrium is stationary") {
    const Eigen::Vector4d star = lv_fixed_point(params);
    CHECK((params.a * star - Eigen::Vector4d::Ones()).cwiseAbs().maxCoeff() < 1e-12);
    const TimeSeries ts = simulate_lv(params, star, 0.035, 1000);
    CHECK((ts.data().rowwise() - star.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("decoupled species follow the logistic solution") {
    LVParams logistic;
    logistic.a = Eigen::Matrix4d::Identity();
    logistic.b = Eigen::Vector4d::Ones();
    const Eigen::Vector4d n0(0.1, 0.5, 0.9, 1.5);
    const double dt = 1e-4;
    const TimeSeries ts = simulate_lv(logistic, n0, dt, 50000);
    for (int i = 0; i < 4; ++i) {
      const double exact = 1.0 / (1.0 + (1.0 / n0[i] - 1.0) * std::exp(-5.0));
      CHECK(ts.data()(50000, i) == doctest::Approx(exact).epsilon(1e-4));
    }
  }
  SUBCASE("reference run stays in the unit box") {
    const TimeSeries ts = simulate_lv(params, lv_reference_initial(), 0.035, 150000);
    CHECK(ts.length() == 150001);
    CHECK(ts.data().minCoeff() > 0.0);
    CHECK(ts.data().maxCoeff() < 1.2);
  }
  SUBCASE("negative states are rejected") {
    LVParams wild = params;
    wild.b *= 200.0;
    CHECK_THROWS_AS(simulate_lv(wild, lv_reference_initial(), 0.035, 1000), NumericalError);
  }
}

TEST_CASE("linear toy model") {
  LinearToyParams params;
  SUBCASE("noise-free runs are matrix powers") {
    params.sigma = 0.0;
    const double dt = 0.01;
    const Eigen::Vector2d x0(1.0, -0.5);
    const TimeSeries ts = simulate_linear_toy(params, dt, 300, 1, x0);
    const Eigen::MatrixXd step = Eigen::Matrix2d::Identity() + dt * params.matrix();
    for (std::size_t k : {std::size_t{1}, std::size_t{77}, std::size_t{300}}) {
      const Eigen::Vector2d expected = oracle::matrix_power(step, k) * x0;
      CHECK((ts.data().row(static_cast<Eigen::Index>(k)).transpose() - expected).norm() < 1e-12);
    }
  }
  SUBCASE("stationary covariance matches the discrete Lyapunov solution") {
    const double dt = 0.01;
    const TimeSeries ts = simulate_linear_toy(params, dt, 2000000, 3);
    const Eigen::MatrixXd step = Eigen::Matrix2d::Identity() + dt * params.matrix();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
    s(1, 1) = params.sigma * params.sigma * dt;
    const Eigen::MatrixXd p = oracle::discrete_lyapunov(step, s);
    const Eigen::VectorXd var = variance_by_channel(ts);
    CHECK(var[0] == doctest::Approx(p(0, 0)).epsilon(0.05));
    CHECK(var[1] == doctest::Approx(p(1, 1)).epsilon(0.05));
  }
  SUBCASE("reduction to the observed-variable form") {
    const LinearToyTransform t = transformed_linear_model(params);
    Eigen::Matrix2d expected;
    expected << 0.0, 1.0, -1.0, -3.0;
    CHECK((t.reduced - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.discrepancy <= 1e-12);
    CHECK((t.S * t.S_inv - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    const auto ev_m = oracle::eigen_eigenvalues(t.M);
    const auto ev_t = oracle::eigen_eigenvalues(t.transformed);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(ev_m[i] - ev_t[i]) < 1e-12);

    LinearToyParams zero;
    zero.a = 0.0;
    const LinearToyTransform tz = transformed_linear_model(zero);
    CHECK((tz.S - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tz.discrepancy <= 1e-12);
  }
}

namespace {

GammaChainSpec lv_spec(std::size_t k, double gamma) {
  GammaChainSpec s;
  s.alpha = 2.0;
  s.k = k;
  s.gamma = gamma;
  s.p = 0;
  s.m = 1;
  s.b = Eigen::Vector2d(1.0, 1.0);
  s.a.resize(2, 2);
  s.a << -1.0, -0.5, -0.3, -1.0;
  s.x0 = Eigen::Vector2d(0.5, 0.3);
  return s;
}

}  // namespace

TEST_CASE("Gamma kernel") {
  CHECK(gamma_kernel(2.0, 1, 0.0) == doctest::Approx(2.0));
  CHECK(gamma_kernel(2.0, 3, 0.0) == 0.0);
  const double mass = oracle::simpson([](double t) { return gamma_kernel(2.0, 3, t); }, 0.0, 40.0, 40000);
  CHECK(std::abs(mass - 1.0) < 1e-10);
  const double mean = oracle::simpson([](double t) { return t * gamma_kernel(2.0, 3, t); }, 0.0, 40.0, 40000);
  CHECK(mean == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("Gamma-chain expansion") {
  SUBCASE("augmented right-hand side") {
    const AugmentedSystem sys = expand_gamma_chain(lv_spec(3, -0.5));
    CHECK(sys.dim() == 5);
    Eigen::VectorXd u(5);
    u << 0.5, 0.3, 0.1, 0.2, 0.4;
    const Eigen::VectorXd f = sys.rhs(u);
    CHECK(f[0] == doctest::Approx(0.5 * (1.0 - 0.5 - 0.15 - 0.5 * 0.4)));
    CHECK(f[1] == doctest::Approx(0.3 * (1.0 - 0.15 - 0.3)));
    CHECK(f[2] == doctest::Approx(2.0 * (0.3 - 0.1)));
    CHECK(f[3] == doctest::Approx(2.0 * (0.1 - 0.2)));
    CHECK(f[4] == doctest::Approx(2.0 * (0.2 - 0.4)));
    CHECK(sys.initial_state().tail(3).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero memory strength leaves the base system") {
    const GammaChainReport r = verify_gamma_chain(lv_spec(2, 0.0), 5.0, 1e-3);
    CHECK(r.discrepancy <= 1e-6);
  }
  SUBCASE("augmented and direct solutions agree") {
    CHECK(verify_gamma_chain(lv_spec(1, -0.5), 10.0, 1e-3).discrepancy <= 1e-6);
    CHECK(verify_gamma_chain(lv_spec(3, -0.5), 10.0, 1e-3).discrepancy <= 1e-5);
  }
  SUBCASE("validation") {
    GammaChainSpec bad = lv_spec(0, 1.0);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = lv_spec(1, 1.0);
    bad.m = 5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}
