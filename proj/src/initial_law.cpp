#include "mvsim/initial_law.hpp"

#include <cmath>

#include "mvsim/error.hpp"

namespace mvsim {

InitialLaw InitialLaw::point(Vec x0) {
    if (x0.size() < 1) throw ArgumentError("InitialLaw: dimension must be >= 1");
    if (!x0.allFinite()) throw ArgumentError("InitialLaw: point is not finite");
    InitialLaw law;
    law.kind = Kind::kPoint;
    law.covariance = Mat::Zero(x0.size(), x0.size());
    law.mean = std::move(x0);
    return law;
}

InitialLaw InitialLaw::gaussian(Vec mean, Mat covariance) {
    const auto d = mean.size();
    if (d < 1) throw ArgumentError("InitialLaw: dimension must be >= 1");
    if (covariance.rows() != d || covariance.cols() != d)
        throw ArgumentError("InitialLaw: covariance must be d x d");
    if (!mean.allFinite() || !covariance.allFinite())
        throw ArgumentError("InitialLaw: parameters are not finite");
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ArgumentError("InitialLaw: covariance is not symmetric");
    if (min_symmetric_eigenvalue(covariance) < -1e-12 * scale)
        throw ArgumentError("InitialLaw: covariance is not positive semidefinite");
    InitialLaw law;
    law.kind = covariance.isZero(0.0) ? Kind::kPoint : Kind::kGaussian;
    law.mean = std::move(mean);
    law.covariance = std::move(covariance);
    return law;
}

Mat InitialLaw::factor() const {
    const Mat sym = 0.5 * (covariance + covariance.transpose());
    Eigen::LDLT<Mat> ldlt(sym);
    Mat l = ldlt.matrixL();
    Vec dvals = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    return ldlt.transpositionsP().transpose() * l * dvals.asDiagonal();
}

}  // namespace mvsim
