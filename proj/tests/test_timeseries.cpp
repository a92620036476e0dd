#include <doctest.h>

#include "emr/error.hpp"
#include "emr/timeseries.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace emr;

namespace {

Eigen::MatrixXd normals(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(gen);
  return m;
}

Eigen::MatrixXd uniforms(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(gen);
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("emrkit_test_" + name)).string();
}

}  // namespace

TEST_CASE("time series validates its invariants") {
  CHECK_THROWS_AS(TimeSeries(Eigen::MatrixXd::Zero(1, 2), 0.1), ConfigError);
  CHECK_THROWS_AS(TimeSeries(Eigen::MatrixXd::Zero(3, 2), 0.0), ConfigError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 1);
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(TimeSeries(bad, 1.0), ConfigError);
  CHECK_THROWS_AS(TimeSeries(Eigen::MatrixXd::Zero(3, 2), 1.0, {"a"}), ConfigError);
  const TimeSeries ts(Eigen::MatrixXd::Zero(3, 2), 0.5);
  CHECK(ts.names() == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("slice and select keep time origin and channel order") {
  Eigen::MatrixXd m(4, 3);
  m << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
  const TimeSeries ts(m, 0.5, {"a", "b", "c"});
  const TimeSeries s = ts.slice(1, 2);
  CHECK(s.length() == 2);
  CHECK(s.t0() == doctest::Approx(0.5));
  CHECK(s.data()(0, 0) == 3);
  const TimeSeries c = ts.select({2, 0});
  CHECK(c.names() == std::vector<std::string>{"c", "a"});
  CHECK(c.data()(3, 1) == 9);
  CHECK_THROWS_AS(ts.slice(3, 2), ConfigError);
  CHECK_THROWS_AS(ts.select({3}), ConfigError);
}

TEST_CASE("csv loading honours skip and rejects short or malformed input") {
  const std::string path = temp_path("three.csv");
  {
    std::ofstream out(path);
    out << "u,v\n1,2\n3,4\n5,6\n";
  }
  const TimeSeries all = load_csv(path, 0.1);
  CHECK(all.length() == 3);
  CHECK(all.names() == std::vector<std::string>{"u", "v"});
  CHECK(all.data()(2, 1) == 6);
  CHECK_THROWS_AS(load_csv(path, 0.1, 2), ConfigError);
  {
    std::ofstream out(path);
    out << "u,v\n1,2\n3\n";
  }
  CHECK_THROWS_AS(load_csv(path, 0.1), ConfigError);
  {
    std::ofstream out(path);
    out << "u\n1\nabc\n";
  }
  CHECK_THROWS_AS(load_csv(path, 0.1), ConfigError);
  CHECK_THROWS_AS(load_csv(temp_path("missing.csv"), 0.1), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("csv transient removal on a run of 1.5e5 rows leaves 1.4e5") {
  Eigen::MatrixXd m(150000, 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, 0) = static_cast<double>(i);
  const std::string path = temp_path("long.csv");
  save_csv(TimeSeries(m, 0.035, {"N1"}), path);
  const TimeSeries ts = load_csv(path, 0.035, 10000);
  CHECK(ts.length() == 140000);
  CHECK(ts.data()(0, 0) == 10000);
  std::filesystem::remove(path);
}

TEST_CASE("csv round trip is lossless") {
  const Eigen::MatrixXd m = normals(50, 3, 3) * 1e3;
  const std::string path = temp_path("roundtrip.csv");
  save_csv(TimeSeries(m, 0.25), path, true);
  const TimeSeries back = load_csv(path, 0.25);
  REQUIRE(back.channels() == 4);
  CHECK(back.names()[0] == "t");
  CHECK((back.data().rightCols(3) - m).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("finite differences") {
  const TimeSeries constant(Eigen::MatrixXd::Constant(10, 2, 3.0), 0.1);
  const TimeSeries dc = finite_differences(constant);
  CHECK(dc.length() == 9);
  CHECK(dc.data().cwiseAbs().maxCoeff() == 0.0);

  const double dt = 0.01;
  Eigen::MatrixXd ramp(100, 1), wave(1000, 1);
  for (Eigen::Index k = 0; k < 100; ++k) ramp(k, 0) = static_cast<double>(k) * dt;
  for (Eigen::Index k = 0; k < 1000; ++k) wave(k, 0) = std::sin(static_cast<double>(k) * dt);
  CHECK((finite_differences(TimeSeries(ramp, dt)).data().array() - 1.0).abs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd dw = finite_differences(TimeSeries(wave, dt)).data();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < dw.rows(); ++k)
    worst = std::max(worst, std::abs(dw(k, 0) - std::cos(static_cast<double>(k) * dt)));
  CHECK(worst < dt);
}

TEST_CASE("EOF compression") {
  SUBCASE("rank-one data gives the centred channel") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(200, 2);
    m.col(0) = normals(200, 1, 5).col(0);
    const EofResult r = eof_compress(TimeSeries(m, 1.0), 1);
    const Eigen::VectorXd centred = m.col(0).array() - m.col(0).mean();
    const Eigen::VectorXd pc = r.components.channel(0);
    CHECK(std::min((pc - centred).cwiseAbs().maxCoeff(), (pc + centred).cwiseAbs().maxCoeff()) < 1e-10);
  }
  SUBCASE("keeping every mode reconstructs exactly") {
    const Eigen::MatrixXd m = normals(300, 3, 6) * Eigen::Matrix3d::Random(3, 3);
    const EofResult r = eof_compress(TimeSeries(m, 1.0), 3);
    const Eigen::MatrixXd back = eof_reconstruct(r.components.data(), r.basis);
    CHECK((back - m).cwiseAbs().maxCoeff() < 1e-10 * m.cwiseAbs().maxCoeff());
    CHECK((r.basis.modes.transpose() * r.basis.modes - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("explained variances equal covariance eigenvalues") {
    Eigen::MatrixXd mix(4, 4);
    mix << 2, 0.3, 0, 0, 0.1, 1, 0.5, 0, 0, 0, 0.7, 0.2, 0.4, 0, 0, 0.3;
    const Eigen::MatrixXd m = normals(2000, 4, 7) * mix;
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    const Eigen::VectorXd expected = oracle::jacobi_eigenvalues(c.transpose() * c / 1999.0);
    const EofResult r = eof_compress(TimeSeries(m, 1.0), 2);
    CHECK(std::abs(r.basis.explained_variance[0] - expected[0]) < 1e-10 * expected[0]);
    CHECK(std::abs(r.basis.explained_variance[1] - expected[1]) < 1e-10 * expected[0]);
    // Mean squared reconstruction error equals the discarded variance.
    const Eigen::MatrixXd back = eof_reconstruct(r.components.data(), r.basis);
    const double err = (back - m).squaredNorm() / 1999.0;
    CHECK(std::abs(err - (expected[2] + expected[3])) < 1e-8);
  }
  CHECK_THROWS_AS(eof_compress(TimeSeries(Eigen::MatrixXd::Zero(5, 2), 1.0), 3), ConfigError);
  CHECK_THROWS_AS(eof_compress(TimeSeries(Eigen::MatrixXd::Zero(5, 2), 1.0), 0), ConfigError);
}

TEST_CASE("autocorrelation") {
  SUBCASE("matches the direct double loop and starts at one") {
    const Eigen::MatrixXd m = normals(500, 2, 8);
    const AcfCurve c = acf(TimeSeries(m, 1.0), 20);
    CHECK(c.values(0, 0) == 1.0);
    CHECK(c.values(0, 1) == 1.0);
    for (std::size_t l = 0; l <= 20; ++l) CHECK(c.values(static_cast<Eigen::Index>(l), 1) == doctest::Approx(oracle::naive_acf(m.col(1), l)).epsilon(1e-12));
    CHECK(c.values.cwiseAbs().maxCoeff() <= 1.0);
  }
  SUBCASE("AR(1) decays as phi^l") {
    const Eigen::MatrixXd e = normals(100000, 1, 9);
    Eigen::MatrixXd x(100000, 1);
    x(0, 0) = e(0, 0);
    for (Eigen::Index k = 1; k < x.rows(); ++k) x(k, 0) = 0.9 * x(k - 1, 0) + e(k, 0);
    const AcfCurve c = acf(TimeSeries(x, 1.0), 10);
    for (int l = 0; l <= 10; ++l) CHECK(std::abs(c.values(l, 0) - std::pow(0.9, l)) <= 0.03);
  }
  SUBCASE("white noise is uncorrelated at lag one") {
    const AcfCurve c = acf(TimeSeries(normals(100000, 1, 10), 1.0), 1);
    CHECK(std::abs(c.values(1, 0)) <= 0.02);
  }
  SUBCASE("constant channel is flagged") {
    Eigen::MatrixXd m = normals(50, 2, 11);
    m.col(1).setConstant(2.0);
    const AcfCurve c = acf(TimeSeries(m, 1.0), 5);
    CHECK(c.degenerate[1]);
    CHECK_FALSE(c.degenerate[0]);
    CHECK(c.values.col(1).tail(5).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(acf(TimeSeries(Eigen::MatrixXd::Zero(5, 1), 1.0), 5), ConfigError);
}

TEST_CASE("histograms") {
  SUBCASE("uniform samples have unit density") {
    const Eigen::MatrixXd u = uniforms(1000000, 2, 12);
    Eigen::VectorXd edges = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
    const Histogram1D h = pdf1d_on_edges(u.col(0), edges);
    CHECK((h.density.array() - 1.0).abs().maxCoeff() <= 0.02);
    const Histogram2D h2 = pdf2d_on_edges(u.col(0), u.col(1), edges, edges);
    CHECK((h2.density.array() - 1.0).abs().maxCoeff() <= 0.05);
    CHECK(std::abs(h2.integral() - 1.0) < 1e-12);
  }
  SUBCASE("default range covers the data with padding and integrates to one") {
    const TimeSeries ts(normals(10000, 2, 13), 1.0);
    const Histogram1D h = pdf1d(ts, 1);
    CHECK(h.density.size() == static_cast<Eigen::Index>(kDefaultBins));
    CHECK(std::abs(h.integral() - 1.0) < 1e-12);
    CHECK(h.edges[0] < ts.channel(1).minCoeff());
    CHECK(h.edges[h.edges.size() - 1] > ts.channel(1).maxCoeff());
    const Histogram2D h2 = pdf2d(ts, 0, 1, 20);
    CHECK(std::abs(h2.integral() - 1.0) < 1e-12);
    CHECK(h2.density.rows() == 20);
  }
  SUBCASE("constant series collapses to one occupied bin") {
    const TimeSeries ts(Eigen::MatrixXd::Constant(100, 1, 4.0), 1.0);
    const Histogram1D h = pdf1d(ts, 0, 10);
    CHECK(std::abs(h.integral() - 1.0) < 1e-12);
    CHECK((h.density.array() > 0.0).count() == 1);
  }
  SUBCASE("L1 distance") {
    Histogram1D a{Eigen::VectorXd::LinSpaced(3, 0.0, 2.0), Eigen::Vector2d(1.0, 0.0)};
    Histogram1D b{a.edges, Eigen::Vector2d(0.0, 1.0)};
    CHECK(l1_distance(a, b) == doctest::Approx(2.0));
    CHECK(l1_distance(a, a) == 0.0);
  }
  CHECK_THROWS_AS(pdf1d(TimeSeries(Eigen::MatrixXd::Zero(5, 1), 1.0), 1), ConfigError);
  CHECK_THROWS_AS(pdf1d(TimeSeries(Eigen::MatrixXd::Zero(5, 1), 1.0), 0, 1), ConfigError);
}

TEST_CASE("pearson correlation") {
  const Eigen::MatrixXd m = normals(100000, 2, 14);
  const Eigen::VectorXd x = m.col(0), y = m.col(1);
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pearson(x, -x) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::abs(pearson(x, y)) <= 0.02);
  const Eigen::VectorXd z = x + 0.5 * y;
  CHECK(pearson(x, z) == doctest::Approx(oracle::naive_pearson(x, z)).epsilon(1e-12));
  const Eigen::VectorXd affine = (3.0 * z.array() + 7.0).matrix();
  CHECK(std::abs(pearson(x, affine) - pearson(x, z)) < 1e-12);
  CHECK_THROWS_AS(pearson(x, Eigen::VectorXd::Constant(x.size(), 1.0)), ConfigError);
  CHECK_THROWS_AS(pearson(x.head(5), y.head(4)), ConfigError);
}

TEST_CASE("variance by channel") {
  Eigen::MatrixXd m(1000000, 2);
  m.col(0) = normals(1000000, 1, 15).col(0);
  m.col(1).setConstant(2.0);
  const Eigen::VectorXd v = variance_by_channel(TimeSeries(m, 1.0));
  CHECK(std::abs(v[0] - 1.0) <= 0.01);
  CHECK(v[1] == 0.0);
  const Eigen::Index n = 1001;
  Eigen::MatrixXd ramp(n, 1);
  for (Eigen::Index k = 0; k < n; ++k) ramp(k, 0) = static_cast<double>(k);
  const double expected = static_cast<double>(n) * static_cast<double>(n + 1) / 12.0;
  CHECK(variance_by_channel(TimeSeries(ramp, 1.0))[0] == doctest::Approx(expected).epsilon(1e-12));
}
