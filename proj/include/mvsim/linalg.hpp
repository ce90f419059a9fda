#pragma once

#include <Eigen/Dense>

namespace mvsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Smallest eigenvalue of the symmetric part of a small square matrix.
double min_symmetric_eigenvalue(const Mat& a);

/// Eigenvalues (ascending) of the symmetric part of a small square matrix.
/// Closed form for d <= 2, cyclic Jacobi otherwise.
Vec symmetric_eigenvalues(const Mat& a);

/// Spectral norm (largest singular value).
double operator_norm(const Mat& a);

bool all_finite(const Mat& a);

}  // namespace mvsim
