#pragma once

#include "mvsim/linalg.hpp"

namespace mvsim {

/// Law of the initial condition: a point mass or a Gaussian.
struct InitialLaw {
    enum class Kind { kPoint, kGaussian };

    Kind kind = Kind::kPoint;
    Vec mean;
    Mat covariance;  // zero for a point mass

    int d() const { return static_cast<int>(mean.size()); }

    static InitialLaw point(Vec x0);
    /// Throws ArgumentError unless covariance is symmetric PSD of matching size.
    static InitialLaw gaussian(Vec mean, Mat covariance);

    /// Lower Cholesky-like factor L with L L^T = covariance (PSD-safe).
    Mat factor() const;
};

}  // namespace mvsim
