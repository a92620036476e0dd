#include "emr/hessenberg_qr.hpp"

#include "emr/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace emr {

Eigen::VectorXd balance(Eigen::MatrixXd& a) {
  constexpr double kRadix = 2.0;
  constexpr double kRadix2 = kRadix * kRadix;
  const Eigen::Index n = a.rows();
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
      double r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadix2;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadix2;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        scale[i] *= f;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return scale;
}

Eigen::MatrixXd hessenberg(const Eigen::MatrixXd& input) {
  Eigen::MatrixXd a = input;
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    Eigen::VectorXd v = a.col(k).tail(n - k - 1);
    const double alpha = v.norm();
    if (alpha == 0.0) continue;
    v[0] += v[0] >= 0.0 ? alpha : -alpha;
    const double vnorm2 = v.squaredNorm();
    if (vnorm2 == 0.0) continue;
    // Reflector P = I - 2 v v^T / (v^T v) applied as P A P.
    auto rows = a.bottomRows(n - k - 1);
    const Eigen::RowVectorXd w = v.transpose() * rows;
    rows.noalias() -= (2.0 / vnorm2) * v * w;
    auto cols = a.rightCols(n - k - 1);
    const Eigen::VectorXd u = cols * v;
    cols.noalias() -= (2.0 / vnorm2) * u * v.transpose();
    a.col(k).tail(n - k - 2).setZero();
  }
  return a;
}

namespace {

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

}  // namespace

std::vector<std::complex<double>> nonsymmetric_eigenvalues(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw ConfigError("eigenvalues need a square matrix");
  if (!matrix.allFinite()) throw NumericalError("matrix has non-finite entries");
  const int n = static_cast<int>(matrix.rows());
  std::vector<std::complex<double>> out;
  if (n == 0) return out;

  Eigen::MatrixXd work = matrix;
  balance(work);
  Eigen::MatrixXd h = hessenberg(work);
  // 1-based accessor keeps the iteration close to its textbook form.
  auto a = [&h](int i, int j) -> double& { return h(i - 1, j - 1); };

  std::vector<double> wr(static_cast<std::size_t>(n) + 1, 0.0), wi(static_cast<std::size_t>(n) + 1, 0.0);
  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

  const long sweep_cap = 100L * n;
  long sweeps = 0;
  int nn = n;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (++sweeps > sweep_cap)
            throw NumericalError("QR iteration did not converge within " + std::to_string(sweep_cap) + " sweeps");
          if (its > 0 && its % 10 == 0) {
            // Exceptional shift.
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[static_cast<std::size_t>(i)], wi[static_cast<std::size_t>(i)]);
  std::sort(out.begin(), out.end(), [](const auto& u, const auto& v) {
    return u.real() != v.real() ? u.real() > v.real() : u.imag() > v.imag();
  });
  return out;
}

}  // namespace emr
