#pragma once

#include <filesystem>
#include <vector>

#include "mvsim/particle.hpp"

namespace mvsim {

/// How the Ito-correction term sum_k Z (dsigma^k)^2 ds of the inverse
/// equation is integrated: against the realised quadratic variation
/// (dW^k)^2, or against dt.
enum class CorrectionIntegrator { kQuadraticVariation, kTime };

/// State-Jacobian flow Y(t) of one trajectory and its Ito inverse Z(t).
struct FirstVariationPath {
    TimeGrid grid;
    std::vector<Mat> Y;
    std::vector<Mat> Z;
    std::size_t path_index = 0;
};

/// Euler scheme for dY = Db Y dt + sum_k Dsigma^k Y dW^k and
/// dZ = -Z Db dt + sum_k Z Dsigma^k Dsigma^k ds - sum_k Z Dsigma^k dW^k,
/// driven by the increments of trajectory `particle` of `paths`, with the
/// coefficients' measure argument read from `flow`.
FirstVariationPath simulate_first_variation(
    const CoefficientModel& model, const PathBundle& paths, std::size_t particle,
    const StatisticFlow& flow,
    CorrectionIntegrator correction = CorrectionIntegrator::kQuadraticVariation);

/// ||Z(t_k) Y(t_k) - I||_F at every grid step.
std::vector<double> zy_residual(const FirstVariationPath& fv);

/// D_r^j X(t) = Y(t) Y(r)^{-1} sigma^j(r); zero when r > t.
Vec malliavin_derivative(const FirstVariationPath& fv, const PathBundle& paths,
                         const CoefficientModel& model, const StatisticFlow& flow, int r_index,
                         int t_index, int j);

struct MalliavinCovariance {
    double t = 0.0;
    double dt = 0.0;
    Mat Q;
    double lambda_min = 0.0;
    double gamma = 1.0;   // sup_{r <= t} max(||Y(r)||, ||Y(r)^{-1}||)
    double lambda = 0.0;  // ellipticity constant supplied by the caller
};

/// Q(t) = Y(t) (int_0^t Y^{-1} A Y^{-T} dr) Y(t)^T with trapezoid quadrature
/// on the simulation grid; Y^{-1} applied by linear solves.
MalliavinCovariance malliavin_covariance(const FirstVariationPath& fv, const PathBundle& paths,
                                         const CoefficientModel& model, const StatisticFlow& flow,
                                         int t_index, double lambda = 0.0);

/// Covariance at every step k = 1..M, sharing one pass over the path.
std::vector<MalliavinCovariance> malliavin_covariance_curve(const FirstVariationPath& fv,
                                                            const PathBundle& paths,
                                                            const CoefficientModel& model,
                                                            const StatisticFlow& flow,
                                                            double lambda = 0.0);

struct BoundCheck {
    bool holds = false;
    double margin = 0.0;  // lambda_min - t lambda / gamma^4
    double bound = 0.0;   // t lambda / gamma^4
    double slack = 0.0;   // c dt ||Q||
    bool degenerate = false;  // lambda ~ 0, the bound carries no information
};

/// lambda_min(Q(t)) >= t lambda / gamma^4 - c dt ||Q||.
BoundCheck ellipticity_bound_check(const MalliavinCovariance& cov, double slack_factor = 10.0);

/// Central-difference Jacobian of x0 -> X(T) (one particle, fixed noise and
/// frozen flow), the finite-difference counterpart of Y(T).
Mat flow_jacobian_fd(const CoefficientModel& model, const Vec& x0, const TimeGrid& grid,
                     std::uint64_t seed, const StatisticFlow& flow, double h);

/// Rows "t,lambda_min,bound,zy_residual" for steps 1..M of one path.
void write_malliavin_diagnostics_csv(const std::vector<MalliavinCovariance>& curve,
                                     const std::vector<double>& residual,
                                     const std::filesystem::path& path);

}  // namespace mvsim
