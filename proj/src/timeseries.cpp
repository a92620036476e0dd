#include "emr/timeseries.hpp"

#include "emr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emr {

TimeSeries::TimeSeries(Eigen::MatrixXd data, double dt, std::vector<std::string> names, double t0)
    : data_(std::move(data)), dt_(dt), names_(std::move(names)), t0_(t0) {
  if (data_.rows() < 2) throw ConfigError("time series needs at least 2 samples");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw ConfigError("time step dt must be positive");
  if (!data_.allFinite()) throw ConfigError("time series contains non-finite values");
  if (names_.empty()) names_ = default_names(channels());
  if (names_.size() != channels())
    throw ConfigError("expected " + std::to_string(channels()) + " channel names, got " +
                      std::to_string(names_.size()));
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length()) throw ConfigError("slice exceeds series length");
  return TimeSeries(data_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)),
                    dt_, names_, t0_ + static_cast<double>(begin) * dt_);
}

TimeSeries TimeSeries::select(const std::vector<std::size_t>& columns) const {
  Eigen::MatrixXd out(data_.rows(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= channels()) throw ConfigError("channel index out of range");
    out.col(static_cast<Eigen::Index>(j)) = channel(columns[j]);
    names.push_back(names_[columns[j]]);
  }
  return TimeSeries(std::move(out), dt_, std::move(names), t0_);
}

std::vector<std::string> TimeSeries::default_names(std::size_t d, const std::string& prefix) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back(prefix + std::to_string(i + 1));
  return names;
}

double Histogram1D::integral() const {
  double total = 0.0;
  for (Eigen::Index b = 0; b < density.size(); ++b) total += density[b] * (edges[b + 1] - edges[b]);
  return total;
}

double Histogram2D::integral() const {
  double total = 0.0;
  for (Eigen::Index a = 0; a < density.rows(); ++a)
    for (Eigen::Index b = 0; b < density.cols(); ++b)
      total += density(a, b) * (x_edges[a + 1] - x_edges[a]) * (y_edges[b + 1] - y_edges[b]);
  return total;
}

TimeSeries finite_differences(const TimeSeries& ts) {
  const auto n = static_cast<Eigen::Index>(ts.length()) - 1;
  Eigen::MatrixXd diff = (ts.data().bottomRows(n) - ts.data().topRows(n)) / ts.dt();
  return TimeSeries(std::move(diff), ts.dt(), ts.names(), ts.t0());
}

EofResult eof_compress(const TimeSeries& ts, std::size_t d_keep) {
  const std::size_t d = ts.channels();
  if (d_keep < 1 || d_keep > d) throw ConfigError("d_keep must lie in [1, d]");
  const Eigen::VectorXd mean = ts.data().colwise().mean();
  const Eigen::MatrixXd centered = ts.data().rowwise() - mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(ts.length() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("covariance eigen-decomposition failed");

  // Eigen returns ascending eigenvalues; reorder descending with a stable tie-break on index.
  std::vector<Eigen::Index> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return solver.eigenvalues()[a] > solver.eigenvalues()[b];
  });

  EofBasis basis;
  basis.mean = mean;
  basis.modes.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d_keep));
  basis.explained_variance.resize(static_cast<Eigen::Index>(d_keep));
  basis.all_variances.resize(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    const double lambda = std::max(0.0, solver.eigenvalues()[order[j]]);
    basis.all_variances[static_cast<Eigen::Index>(j)] = lambda;
    if (j >= d_keep) continue;
    Eigen::VectorXd mode = solver.eigenvectors().col(order[j]);
    // Sign convention: largest-magnitude entry positive.
    Eigen::Index imax = 0;
    mode.cwiseAbs().maxCoeff(&imax);
    if (mode[imax] < 0) mode = -mode;
    basis.modes.col(static_cast<Eigen::Index>(j)) = mode;
    basis.explained_variance[static_cast<Eigen::Index>(j)] = lambda;
  }

  Eigen::MatrixXd pcs = centered * basis.modes;
  TimeSeries components(std::move(pcs), ts.dt(), TimeSeries::default_names(d_keep, "pc"), ts.t0());
  return {std::move(components), std::move(basis)};
}

Eigen::MatrixXd eof_reconstruct(const Eigen::MatrixXd& components, const EofBasis& basis) {
  return (components * basis.modes.transpose()).rowwise() + basis.mean.transpose();
}

Eigen::VectorXd acf_channel(Eigen::Ref<const Eigen::VectorXd> x, std::size_t max_lag) {
  const auto n = x.size();
  if (static_cast<Eigen::Index>(max_lag) >= n) throw ConfigError("max_lag must be below series length");
  const Eigen::VectorXd c = x.array() - x.mean();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(max_lag) + 1);
  const double c0 = c.squaredNorm();
  if (!(c0 > 0.0)) return out;
  out[0] = 1.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    const auto l = static_cast<Eigen::Index>(lag);
    out[l] = c.head(n - l).dot(c.tail(n - l)) / c0;
  }
  return out;
}

AcfCurve acf(const TimeSeries& ts, std::size_t max_lag) {
  if (max_lag >= ts.length()) throw ConfigError("max_lag must be below series length");
  AcfCurve curve;
  curve.max_lag = max_lag;
  curve.values.resize(static_cast<Eigen::Index>(max_lag) + 1, static_cast<Eigen::Index>(ts.channels()));
  for (std::size_t i = 0; i < ts.channels(); ++i) {
    const Eigen::VectorXd x = ts.channel(i);
    curve.values.col(static_cast<Eigen::Index>(i)) = acf_channel(x, max_lag);
    curve.degenerate.push_back(curve.values(0, static_cast<Eigen::Index>(i)) == 0.0);
  }
  return curve;
}

Eigen::VectorXd padded_edges(double lo, double hi, std::size_t bins) {
  if (bins < 2) throw ConfigError("histograms need at least 2 bins");
  double span = hi - lo;
  if (!(span > 0.0)) {
    // Constant data: a unit-scale window centred on the value.
    const double half = std::max(std::abs(lo), 1.0) * kRangePadding * static_cast<double>(bins);
    lo -= half;
    hi += half;
    span = hi - lo;
  } else {
    lo -= kRangePadding * span;
    hi += kRangePadding * span;
  }
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(bins) + 1, lo, hi);
}

namespace {

// Index of the bin holding v on equal-width edges, or -1 outside.
Eigen::Index bin_of(double v, const Eigen::VectorXd& edges) {
  const Eigen::Index bins = edges.size() - 1;
  if (v < edges[0] || v > edges[bins]) return -1;
  const double w = (edges[bins] - edges[0]) / static_cast<double>(bins);
  auto b = static_cast<Eigen::Index>((v - edges[0]) / w);
  return std::clamp<Eigen::Index>(b, 0, bins - 1);
}

}  // namespace

Histogram1D pdf1d_on_edges(Eigen::Ref<const Eigen::VectorXd> x, const Eigen::VectorXd& edges) {
  Histogram1D h;
  h.edges = edges;
  h.density = Eigen::VectorXd::Zero(edges.size() - 1);
  double inside = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const Eigen::Index b = bin_of(x[k], edges);
    if (b < 0) continue;
    h.density[b] += 1.0;
    inside += 1.0;
  }
  if (inside > 0.0)
    for (Eigen::Index b = 0; b < h.density.size(); ++b)
      h.density[b] /= inside * (edges[b + 1] - edges[b]);
  return h;
}

Histogram1D pdf1d(const TimeSeries& ts, std::size_t channel, std::size_t bins) {
  if (channel >= ts.channels()) throw ConfigError("channel index out of range");
  const Eigen::VectorXd x = ts.channel(channel);
  return pdf1d_on_edges(x, padded_edges(x.minCoeff(), x.maxCoeff(), bins));
}

Histogram2D pdf2d_on_edges(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y,
                           const Eigen::VectorXd& x_edges, const Eigen::VectorXd& y_edges) {
  if (x.size() != y.size()) throw ConfigError("pdf2d inputs differ in length");
  Histogram2D h;
  h.x_edges = x_edges;
  h.y_edges = y_edges;
  h.density = Eigen::MatrixXd::Zero(x_edges.size() - 1, y_edges.size() - 1);
  double inside = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const Eigen::Index a = bin_of(x[k], x_edges);
    const Eigen::Index b = bin_of(y[k], y_edges);
    if (a < 0 || b < 0) continue;
    h.density(a, b) += 1.0;
    inside += 1.0;
  }
  if (inside > 0.0)
    for (Eigen::Index a = 0; a < h.density.rows(); ++a)
      for (Eigen::Index b = 0; b < h.density.cols(); ++b)
        h.density(a, b) /= inside * (x_edges[a + 1] - x_edges[a]) * (y_edges[b + 1] - y_edges[b]);
  return h;
}

Histogram2D pdf2d(const TimeSeries& ts, std::size_t i, std::size_t j, std::size_t bins) {
  if (i >= ts.channels() || j >= ts.channels()) throw ConfigError("channel index out of range");
  const Eigen::VectorXd x = ts.channel(i);
  const Eigen::VectorXd y = ts.channel(j);
  return pdf2d_on_edges(x, y, padded_edges(x.minCoeff(), x.maxCoeff(), bins),
                        padded_edges(y.minCoeff(), y.maxCoeff(), bins));
}

double pearson(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y) {
  if (x.size() != y.size()) throw ConfigError("pearson inputs differ in length");
  if (x.size() < 2) throw ConfigError("pearson needs at least 2 samples");
  const Eigen::VectorXd cx = x.array() - x.mean();
  const Eigen::VectorXd cy = y.array() - y.mean();
  const double sx = cx.norm();
  const double sy = cy.norm();
  if (!(sx > 0.0) || !(sy > 0.0)) throw ConfigError("pearson undefined for a constant input");
  return std::clamp(cx.dot(cy) / (sx * sy), -1.0, 1.0);
}

Eigen::VectorXd variance_by_channel(const TimeSeries& ts) {
  const Eigen::MatrixXd centered = ts.data().rowwise() - ts.data().colwise().mean();
  return centered.colwise().squaredNorm().transpose() / static_cast<double>(ts.length() - 1);
}

double l1_distance(const Histogram1D& a, const Histogram1D& b) {
  if (a.edges.size() != b.edges.size() || !a.edges.isApprox(b.edges))
    throw ConfigError("l1_distance needs histograms on identical edges");
  double total = 0.0;
  for (Eigen::Index k = 0; k < a.density.size(); ++k)
    total += std::abs(a.density[k] - b.density[k]) * (a.edges[k + 1] - a.edges[k]);
  return total;
}

}  // namespace emr
