#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvsim/linalg.hpp"

namespace mvsim {

/// A map phi: R^d -> R whose expectation under the current law enters the
/// coefficients. The measure dependence of a model is carried entirely by
/// the vector s = (E[phi_1(X)], ..., E[phi_q(X)]).
struct StatisticFunctional {
    std::string id;
    std::function<double(const Vec&)> phi;
    int dim = 0;  // expected input dimension; 0 accepts any
};

using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& s)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x, const Vec& s)>;
using JacobianFn = std::function<Mat(double t, const Vec& x, const Vec& s)>;
/// One d x d Jacobian per noise column.
using DiffusionJacobianFn = std::function<std::vector<Mat>(double t, const Vec& x, const Vec& s)>;

/// Drift b(t,x,s), diffusion sigma(t,x,s) with m columns, their state
/// Jacobians, and the statistic functionals defining s.
struct CoefficientModel {
    std::string name;
    int d = 1;
    int m = 1;
    std::vector<StatisticFunctional> functionals;
    DriftFn b;
    DiffusionFn sigma;
    JacobianFn db_dx;
    DiffusionJacobianFn dsigma_dx;
    /// Coefficients do not depend on t. Lets grid solvers cache fields.
    bool autonomous = false;

    int q() const { return static_cast<int>(functionals.size()); }
};

Vec eval_drift(const CoefficientModel& model, double t, const Vec& x, const Vec& s);
Mat eval_diffusion(const CoefficientModel& model, double t, const Vec& x, const Vec& s);
/// A = sigma sigma^T.
Mat diffusion_matrix(const CoefficientModel& model, double t, const Vec& x, const Vec& s);
Mat eval_drift_jacobian(const CoefficientModel& model, double t, const Vec& x, const Vec& s);
std::vector<Mat> eval_diffusion_jacobians(const CoefficientModel& model, double t, const Vec& x,
                                          const Vec& s);

/// Axis-aligned box in (t, x) space.
struct SampleRegion {
    double t_lo = 0.0;
    double t_hi = 0.0;
    Vec x_lo;
    Vec x_hi;
};

struct EllipticityReport {
    double lambda_min_estimate = 0.0;
    double argmin_t = 0.0;
    Vec argmin_x;
    Vec argmin_s;
    std::size_t n_samples = 0;
};

/// Smallest eigenvalue of A over n quasi-uniform (Halton, seed-shifted)
/// points of the region, cycling through s_samples. Reports evidence for
/// uniform ellipticity; never asserts it.
EllipticityReport check_ellipticity(const CoefficientModel& model, const SampleRegion& region,
                                    std::span<const Vec> s_samples, std::size_t n,
                                    std::uint64_t seed);

/// A point at which coefficient Jacobians are audited.
struct ProbePoint {
    double t = 0.0;
    Vec x;
    Vec s;
};

/// max |analytic - central difference| / (1 + |analytic|) over points and
/// entries of db/dx and every dsigma^k/dx.
double jacobian_consistency_probe(const CoefficientModel& model, std::span<const ProbePoint> points,
                                  double h);

}  // namespace mvsim
