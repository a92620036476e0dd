#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace emr {

/// Uniformly sampled multivariate series. Rows are time steps, columns channels.
///
/// The constructor validates: at least two rows, dt > 0, finite entries and
/// one name per column. Instances are immutable once built.
class TimeSeries {
 public:
  TimeSeries(Eigen::MatrixXd data, double dt, std::vector<std::string> names = {},
             double t0 = 0.0);

  const Eigen::MatrixXd& data() const { return data_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  const std::vector<std::string>& names() const { return names_; }

  std::size_t length() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(data_.cols()); }

  auto channel(std::size_t i) const { return data_.col(static_cast<Eigen::Index>(i)); }
  auto row(std::size_t k) const { return data_.row(static_cast<Eigen::Index>(k)); }

  /// Rows [begin, begin + count); t0 shifts accordingly.
  TimeSeries slice(std::size_t begin, std::size_t count) const;
  /// Keeps the listed channels in the given order.
  TimeSeries select(const std::vector<std::size_t>& columns) const;

  static std::vector<std::string> default_names(std::size_t d, const std::string& prefix = "x");

 private:
  Eigen::MatrixXd data_;
  double dt_;
  std::vector<std::string> names_;
  double t0_;
};

struct Histogram1D {
  Eigen::VectorXd edges;    // B + 1 ascending
  Eigen::VectorXd density;  // B
  double integral() const;
};

struct Histogram2D {
  Eigen::VectorXd x_edges;
  Eigen::VectorXd y_edges;
  Eigen::MatrixXd density;  // Bx x By
  double integral() const;
};

struct AcfCurve {
  std::size_t max_lag = 0;
  Eigen::MatrixXd values;       // (max_lag + 1) x d
  std::vector<bool> degenerate;  // true for zero-variance channels
};

struct EofBasis {
  Eigen::VectorXd mean;                // full dimension
  Eigen::MatrixXd modes;               // full dim x d_keep, orthonormal columns
  Eigen::VectorXd explained_variance;  // d_keep, nonincreasing
  Eigen::VectorXd all_variances;       // every covariance eigenvalue, nonincreasing
};

struct EofResult {
  TimeSeries components;
  EofBasis basis;
};

/// Drops the first `skip_transient` rows of a CSV with a header of channel names.
TimeSeries load_csv(const std::string& path, double dt, std::size_t skip_transient = 0);
void save_csv(const TimeSeries& ts, const std::string& path, bool with_time = false);

/// Row k is (x_{k+1} - x_k) / dt; length N - 1.
TimeSeries finite_differences(const TimeSeries& ts);

EofResult eof_compress(const TimeSeries& ts, std::size_t d_keep);
/// Maps principal components back to the full space.
Eigen::MatrixXd eof_reconstruct(const Eigen::MatrixXd& components, const EofBasis& basis);

/// Biased estimator c(l)/c(0), c(l) = (1/N) sum (x_k - mean)(x_{k+l} - mean).
AcfCurve acf(const TimeSeries& ts, std::size_t max_lag);
Eigen::VectorXd acf_channel(Eigen::Ref<const Eigen::VectorXd> x, std::size_t max_lag);

inline constexpr std::size_t kDefaultBins = 50;
inline constexpr double kRangePadding = 0.01;

Histogram1D pdf1d(const TimeSeries& ts, std::size_t channel, std::size_t bins = kDefaultBins);
/// Same estimator over caller-supplied edges (for comparing two series on one grid).
Histogram1D pdf1d_on_edges(Eigen::Ref<const Eigen::VectorXd> x, const Eigen::VectorXd& edges);
Histogram2D pdf2d(const TimeSeries& ts, std::size_t i, std::size_t j,
                  std::size_t bins = kDefaultBins);
Histogram2D pdf2d_on_edges(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y,
                           const Eigen::VectorXd& x_edges, const Eigen::VectorXd& y_edges);
/// Equal-width edges covering [lo, hi] padded by kRangePadding of the span on each side.
Eigen::VectorXd padded_edges(double lo, double hi, std::size_t bins);

double pearson(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<const Eigen::VectorXd> y);

/// Unbiased (N - 1) sample variance per channel.
Eigen::VectorXd variance_by_channel(const TimeSeries& ts);

/// L1 distance between two densities on identical edges.
double l1_distance(const Histogram1D& a, const Histogram1D& b);

}  // namespace emr
