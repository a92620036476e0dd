#include <doctest.h>

#include "emr/emr.hpp"
#include "emr/error.hpp"
#include "emr/model_io.hpp"
#include "emr/reference_models.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <random>

using namespace emr;

namespace {

Eigen::MatrixXd normals(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = dist(gen);
  return m;
}

TimeSeries ou_series(std::size_t n, double dt, std::uint64_t seed) {
  const Eigen::MatrixXd e = normals(static_cast<Eigen::Index>(n), 1, seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  x(0, 0) = 0.0;
  for (Eigen::Index k = 1; k < x.rows(); ++k) x(k, 0) = x(k - 1, 0) * (1.0 - dt) + std::sqrt(dt) * e(k, 0);
  return TimeSeries(x, dt);
}

double max_normalised_inner(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& design) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < residuals.cols(); ++i)
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
      const double denom = residuals.col(i).norm() * design.col(j).norm();
      if (denom > 0.0) worst = std::max(worst, std::abs(residuals.col(i).dot(design.col(j))) / denom);
    }
  return worst;
}

}  // namespace

TEST_CASE("main level recovers a constant drift") {
  const double dt = 0.01;
  Eigen::MatrixXd x(200, 1);
  for (Eigen::Index k = 0; k < 200; ++k) x(k, 0) = 0.3 + 0.7 * dt * static_cast<double>(k);
  const MainLevelFit fit = fit_main_level(TimeSeries(x, dt), std::nullopt, RidgeSpec::none());
  CHECK(std::abs(fit.main.F[0] - 0.7) < 1e-8);
  CHECK(std::abs(fit.main.A(0, 0)) < 1e-8);
  CHECK(std::abs(fit.main.B(0, 0)) < 1e-8);
  CHECK(fit.residual.length() == 199);
  CHECK(fit.residual.data().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("main level recovers a rotation with the -A sign convention") {
  const double dt = 1e-4;
  Eigen::Matrix2d rot;
  rot << 0, -1, 1, 0;
  Eigen::MatrixXd x(5000, 2);
  x.row(0) << 1.0, 0.0;
  for (Eigen::Index k = 1; k < x.rows(); ++k) x.row(k) = x.row(k - 1) + dt * (rot * x.row(k - 1).transpose()).transpose();
  const MainLevelFit fit = fit_main_level(TimeSeries(x, dt), std::nullopt, RidgeSpec::none(), false);
  CHECK((fit.main.A + rot).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit.main.F.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("hidden level fits") {
  const TimeSeries ts(normals(5001, 2, 1), 1.0);
  SUBCASE("zero residual gives a zero operator") {
    const TimeSeries zero(Eigen::MatrixXd::Zero(5000, 2), 1.0, {"r0_x1", "r0_x2"});
    const LevelFit f = fit_level(1, ts, {zero}, RidgeSpec::automatic());
    CHECK(f.op.L.rows() == 2);
    CHECK(f.op.L.cols() == 4);
    CHECK(f.op.L.cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.residual.data().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("an exactly linear increment leaves no residual") {
    Eigen::MatrixXd r(5000, 2);
    r.row(0) << 0.1, -0.2;
    Eigen::MatrixXd l(2, 4);
    l << 0.1, 0.0, -0.5, 0.1, 0.0, 0.2, 0.0, -0.3;
    for (Eigen::Index k = 1; k < 5000; ++k) {
      Eigen::VectorXd z(4);
      z << ts.data().row(k - 1).transpose(), r.row(k - 1).transpose();
      r.row(k) = r.row(k - 1) + (l * z).transpose();
    }
    const LevelFit f = fit_level(1, ts, {TimeSeries(r, 1.0, {"r0_x1", "r0_x2"})}, RidgeSpec::none());
    CHECK((f.op.L - l).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(f.residual.data().cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("white residual has self block near -I") {
    const TimeSeries white(normals(5000, 2, 2), 1.0, {"r0_x1", "r0_x2"});
    const LevelFit f = fit_level(1, ts, {white}, RidgeSpec::none());
    CHECK((f.op.self_block() + Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 0.05);
    CHECK(f.op.L.leftCols(2).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("stopping test") {
  const TimeSeries ts(normals(100001, 2, 3), 1.0);
  StoppingConfig config;
  SUBCASE("white residual stops with R2 near one half") {
    const TimeSeries white(normals(100000, 2, 4), 1.0, {"r0_x1", "r0_x2"});
    const StoppingResult r = stopping_test(ts, {white}, config, RidgeSpec::automatic());
    CHECK(r.stop);
    CHECK(r.diagnostics.trial_r2.size() == 2);
    for (Eigen::Index c = 0; c < 2; ++c) CHECK(std::abs(r.diagnostics.trial_r2[c] - 0.5) <= 0.02);
  }
  SUBCASE("AR(1) residual does not stop") {
    const Eigen::MatrixXd e = normals(100000, 2, 5);
    Eigen::MatrixXd r(100000, 2);
    r.row(0) = e.row(0);
    for (Eigen::Index k = 1; k < r.rows(); ++k) r.row(k) = 0.9 * r.row(k - 1) + e.row(k);
    const StoppingResult s = stopping_test(ts, {TimeSeries(r, 1.0, {"r0_x1", "r0_x2"})}, config, RidgeSpec::automatic());
    CHECK_FALSE(s.stop);
    CHECK(s.diagnostics.lag1[0] == doctest::Approx(0.9).epsilon(0.02));
  }
  SUBCASE("short residual is rejected") {
    const TimeSeries tiny(normals(10, 2, 6), 1.0, {"r0_x1", "r0_x2"});
    CHECK_THROWS_AS(stopping_test(ts.slice(0, 11), {tiny}, config, RidgeSpec::automatic()), ConfigError);
  }
  SUBCASE("configuration is validated") {
    StoppingConfig bad;
    bad.max_levels = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = StoppingConfig{};
    bad.lag1_tolerance = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("noise estimation") {
  const double dt = 0.01;
  SUBCASE("scaled white residual gives unit covariance") {
    const TimeSeries r(normals(100000, 2, 7) / std::sqrt(dt), dt);
    const NoiseSpec n = estimate_noise(r, dt);
    CHECK((n.Q - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 0.02);
    CHECK((n.factor * n.factor.transpose() - n.Q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(n.factor(0, 1) == 0.0);
  }
  SUBCASE("zero residual gives zero noise") {
    const NoiseSpec n = estimate_noise(TimeSeries(Eigen::MatrixXd::Zero(100, 2), dt), dt);
    CHECK(n.Q.cwiseAbs().maxCoeff() == 0.0);
    CHECK(n.factor.cwiseAbs().maxCoeff() == 0.0);
    CHECK(n.mean.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("correlated channels") {
    const Eigen::MatrixXd e = normals(100000, 2, 8);
    Eigen::MatrixXd r(100000, 2);
    r.col(0) = e.col(0);
    r.col(1) = 0.5 * e.col(0) + std::sqrt(0.75) * e.col(1);
    const NoiseSpec n = estimate_noise(TimeSeries(r * 3.0, dt), dt);
    CHECK(n.Q(0, 1) / std::sqrt(n.Q(0, 0) * n.Q(1, 1)) == doctest::Approx(0.5).epsilon(0.02));
  }
  SUBCASE("mean of the last level is kept for the increment") {
    const TimeSeries r(Eigen::MatrixXd::Constant(100, 1, 2.0), dt);
    const NoiseSpec n = estimate_noise(r, dt);
    CHECK(n.mean[0] == doctest::Approx(2.0));
    CHECK(n.increment(Eigen::VectorXd::Constant(1, 5.0), dt)[0] == doctest::Approx(2.0 * dt));
  }
}

TEST_CASE("fit_emr on an Ornstein-Uhlenbeck series") {
  const TimeSeries ts = ou_series(100000, 0.01, 9);
  const EMRModel m = fit_emr(ts);
  CHECK(m.p() <= 2);
  CHECK(m.report.stop_reason == "criterion");
  CHECK(m.report.levels.size() == m.p() + 1);
  CHECK(std::abs(m.report.levels.back().trial_r2[0] - 0.5) <= 0.05);
  CHECK(m.main.A(0, 0) == doctest::Approx(1.0).epsilon(0.5));
  SUBCASE("level cap is reported") {
    FitOptions o;
    o.stopping.max_levels = 1;
    o.stopping.lag1_tolerance = 1e-9;
    const EMRModel capped = fit_emr(ts, o);
    CHECK(capped.p() == 1);
    CHECK(capped.report.stop_reason == "max_levels");
  }
}

TEST_CASE("unconstrained unregularised fits are orthogonal at every level") {
  ClimateParams params;
  ClimateIntegration in;
  in.duration = 300.0;
  in.burn_in = 10.0;
  const TimeSeries ts = simulate_climate(params, in).observed;
  const MainLevelFit main = fit_main_level(ts, std::nullopt, RidgeSpec::none());
  CHECK(max_normalised_inner(main.solution.residuals, main.design.values) <= 1e-8);
  std::vector<TimeSeries> stack{main.residual};
  for (std::size_t m = 1; m <= 3; ++m) {
    const LevelFit f = fit_level(m, ts, stack, RidgeSpec::none());
    CHECK(max_normalised_inner(f.solution.residuals, f.design) <= 1e-8);
    CHECK(((f.targets - f.design * f.solution.coefficients) - f.solution.residuals).cwiseAbs().maxCoeff() == 0.0);
    stack.push_back(f.residual);
  }
}

TEST_CASE("energy-constrained climate fit") {
  ClimateParams params;
  ClimateIntegration in;
  in.duration = 1000.0;
  const TimeSeries ts = simulate_climate(params, in).observed;
  FitOptions o;
  o.constraints = energy_constraints(2);
  const EMRModel m = fit_emr(ts, o);
  const EnergyAudit audit = energy_audit(m.main);
  CHECK(audit.max_cubic_form <= 1e-10);
  CHECK(audit.max_equality_violation <= 1e-10);
  CHECK(audit.min_diag_A >= 0.0);
  CHECK(m.constrained);

  const EMRModel free = fit_emr(ts);
  CHECK(energy_audit(free.main).max_cubic_form > 1e-6);
}

TEST_CASE("energy audit of a hand-built conservative B") {
  QuadraticMainLevel main;
  main.F = Eigen::Vector2d::Zero();
  main.A = Eigen::Matrix2d::Identity();
  main.B = Eigen::MatrixXd::Zero(2, 3);
  main.B(0, static_cast<Eigen::Index>(monomial_offset(2, 1, 1))) = 1.0;   // B_122
  main.B(1, static_cast<Eigen::Index>(monomial_offset(2, 0, 1))) = -1.0;  // B_212
  CHECK(energy_audit(main).max_cubic_form < 1e-15);
  main.B(1, 0) = 0.3;
  CHECK(energy_audit(main).max_cubic_form > 1e-3);
}

namespace {

EMRModel appendix_d_model() {
  EMRModel m;
  m.d = 1;
  m.dt = 1e-3;
  m.names = {"x"};
  m.main.F = Eigen::VectorXd::Zero(1);
  m.main.A = Eigen::MatrixXd::Zero(1, 1);
  m.main.B = Eigen::MatrixXd::Zero(1, 1);
  m.main.quadratic = false;
  LevelOperator l;
  l.level = 1;
  l.L = Eigen::RowVector2d(-1.0, -3.0);  // [q - A a, a + A] for a = -2, q = 1, A = -1
  m.levels.push_back(l);
  m.noise.Q = Eigen::MatrixXd::Zero(1, 1);
  m.noise.factor = Eigen::MatrixXd::Zero(1, 1);
  return m;
}

}  // namespace

TEST_CASE("grand linear operator") {
  SUBCASE("p = 0 reduces to -A") {
    EMRModel m = appendix_d_model();
    m.levels.clear();
    m.main.A(0, 0) = 0.75;
    const auto ev = grand_eigenvalues(m);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].real() == doctest::Approx(-0.75));
  }
  SUBCASE("Appendix D construction has the eigenvalues of M") {
    const EMRModel m = appendix_d_model();
    const Eigen::MatrixXd g = grand_linear_operator(m);
    CHECK(g.rows() == 2);
    const auto ev = grand_eigenvalues(m);
    CHECK(std::abs(ev[0].real() - (-3.0 + std::sqrt(5.0)) / 2.0) < 1e-12);
    CHECK(std::abs(ev[1].real() - (-3.0 - std::sqrt(5.0)) / 2.0) < 1e-12);
  }
  SUBCASE("block layout for p = 2") {
    EMRModel m = appendix_d_model();
    m.d = 2;
    m.names = {"a", "b"};
    m.main.F = Eigen::Vector2d::Zero();
    m.main.A = Eigen::Matrix2d::Identity();
    m.main.B = Eigen::MatrixXd::Zero(2, 3);
    m.levels = {{1, normals(2, 4, 10)}, {2, normals(2, 6, 11)}};
    m.noise.Q = Eigen::Matrix2d::Zero();
    m.noise.factor = Eigen::Matrix2d::Zero();
    const Eigen::MatrixXd g = grand_linear_operator(m);
    CHECK(g.rows() == 6);
    CHECK((g.block(0, 0, 2, 2) + Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.block(0, 2, 2, 2) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.block(2, 0, 2, 4) - m.levels[0].L).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.block(2, 4, 2, 2) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.block(4, 0, 2, 6) - m.levels[1].L).cwiseAbs().maxCoeff() == 0.0);
    const auto got = grand_eigenvalues(m);
    const auto expected = oracle::eigen_eigenvalues(g);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-10);
  }
}

TEST_CASE("fitting is deterministic and serialisation is lossless") {
  const TimeSeries ts = ou_series(20000, 0.01, 12);
  const EMRModel a = fit_emr(ts);
  const EMRModel b = fit_emr(ts);
  CHECK(model_to_json(a) == model_to_json(b));
  const EMRModel back = model_from_json(model_to_json(a));
  CHECK(model_to_json(back) == model_to_json(a));
  CHECK((back.main.A - a.main.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.p() == a.p());
  CHECK((back.noise.mean - a.noise.mean).cwiseAbs().maxCoeff() == 0.0);
  const std::string path = (std::filesystem::temp_directory_path() / "emrkit_test_model.json").string();
  save_model(a, path);
  CHECK(model_to_json(load_model(path)) == model_to_json(a));
  std::filesystem::remove(path);
  CHECK(model_to_json(a).find("\"sign_convention\"") != std::string::npos);
  CHECK_THROWS_AS(model_from_json("{\"schema\": \"other\"}"), ConfigError);
  CHECK_THROWS_AS(model_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ConfigError);
}
