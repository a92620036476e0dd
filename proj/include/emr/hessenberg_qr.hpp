#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace emr {

/// Eigenvalues of a dense real nonsymmetric matrix: radix-2 balancing, Householder
/// reduction to upper Hessenberg form, then Francis double-shift QR iteration.
/// Results are sorted by decreasing real part, ties by decreasing imaginary part.
/// Throws NumericalError after 100 * n QR sweeps without deflation.
std::vector<std::complex<double>> nonsymmetric_eigenvalues(const Eigen::MatrixXd& matrix);

/// In-place radix-2 balancing; returns the diagonal similarity scale.
Eigen::VectorXd balance(Eigen::MatrixXd& a);
/// Householder reduction; the result is similar to the input and zero below the subdiagonal.
Eigen::MatrixXd hessenberg(const Eigen::MatrixXd& a);

}  // namespace emr
