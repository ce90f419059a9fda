#include "mvsim/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvsim/error.hpp"
#include "mvsim/io.hpp"

namespace mvsim {

namespace {

constexpr double kMaxCondition = 1e12;

void check_alignment(const PathBundle& paths, const StatisticFlow& flow, const CoefficientModel& model) {
    if (paths.d != model.d) throw ArgumentError("first variation: path dimension does not match model");
    if (paths.increments.m != model.m) throw ArgumentError("first variation: noise dimension does not match model");
    if (flow.time_grid.size() != static_cast<std::size_t>(paths.grid.M) + 1 || flow.q() != model.q())
        throw ArgumentError("first variation: statistic flow is not aligned with the path grid");
}

// Y^{-1} rhs by LU; throws when Y is singular to working precision.
Mat solve_checked(const Mat& y, const Mat& rhs, int step) {
    const Eigen::JacobiSVD<Mat> svd(y);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    const double cond = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    if (!(cond < kMaxCondition))
        throw ConditioningError("Y is singular to tolerance at step " + std::to_string(step) +
                                    " (condition " + format_double(cond) + ")",
                                cond);
    return y.partialPivLu().solve(rhs);
}

double inverse_norm(const Mat& y) {
    const Eigen::JacobiSVD<Mat> svd(y);
    const auto& sv = svd.singularValues();
    return 1.0 / sv(sv.size() - 1);
}

MalliavinCovariance finish(const Mat& yt, const Mat& integral, double t, double dt, double gamma,
                           double lambda) {
    MalliavinCovariance cov;
    cov.t = t;
    cov.dt = dt;
    Mat q = yt * integral * yt.transpose();
    cov.Q = 0.5 * (q + q.transpose());
    cov.lambda_min = min_symmetric_eigenvalue(cov.Q);
    cov.gamma = gamma;
    cov.lambda = lambda;
    return cov;
}

}  // namespace

FirstVariationPath simulate_first_variation(const CoefficientModel& model, const PathBundle& paths,
                                            std::size_t particle, const StatisticFlow& flow,
                                            CorrectionIntegrator correction) {
    check_alignment(paths, flow, model);
    if (particle >= paths.n) throw ArgumentError("first variation: particle index out of range");
    const int d = model.d;
    const int m = model.m;
    const double dt = paths.grid.dt();

    FirstVariationPath fv;
    fv.grid = paths.grid;
    fv.path_index = particle;
    fv.Y.reserve(static_cast<std::size_t>(paths.grid.M) + 1);
    fv.Z.reserve(static_cast<std::size_t>(paths.grid.M) + 1);
    fv.Y.push_back(Mat::Identity(d, d));
    fv.Z.push_back(Mat::Identity(d, d));
    for (int k = 0; k < paths.grid.M; ++k) {
        const double t = paths.grid.time(k);
        const Vec x = paths.state_vec(k, particle);
        const Vec s = flow.at(static_cast<std::size_t>(k));
        const Mat db = eval_drift_jacobian(model, t, x, s);
        const std::vector<Mat> ds = eval_diffusion_jacobians(model, t, x, s);
        const Mat& y = fv.Y.back();
        const Mat& z = fv.Z.back();
        Mat y_next = y + db * y * dt;
        Mat z_next = z - z * db * dt;
        for (int c = 0; c < m; ++c) {
            const double dw = paths.increments.at(k, particle, c);
            const double qv = correction == CorrectionIntegrator::kQuadraticVariation ? dw * dw : dt;
            const Mat& sc = ds[static_cast<std::size_t>(c)];
            y_next += sc * y * dw;
            z_next += z * sc * sc * qv - z * sc * dw;
        }
        if (!y_next.allFinite() || !z_next.allFinite())
            throw NumericError("first variation is not finite at step " + std::to_string(k + 1));
        fv.Y.push_back(std::move(y_next));
        fv.Z.push_back(std::move(z_next));
    }
    return fv;
}

std::vector<double> zy_residual(const FirstVariationPath& fv) {
    std::vector<double> out(fv.Y.size());
    for (std::size_t k = 0; k < fv.Y.size(); ++k) {
        const auto d = fv.Y[k].rows();
        out[k] = (fv.Z[k] * fv.Y[k] - Mat::Identity(d, d)).norm();
    }
    return out;
}

Vec malliavin_derivative(const FirstVariationPath& fv, const PathBundle& paths,
                         const CoefficientModel& model, const StatisticFlow& flow, int r_index,
                         int t_index, int j) {
    check_alignment(paths, flow, model);
    if (t_index < 0 || t_index > fv.grid.M || r_index < 0 || r_index > fv.grid.M)
        throw ArgumentError("malliavin_derivative: time index outside the grid");
    if (j < 0 || j >= model.m) throw ArgumentError("malliavin_derivative: noise index out of range");
    if (r_index > t_index) return Vec::Zero(model.d);
    const Vec x = paths.state_vec(r_index, fv.path_index);
    const Mat sig = eval_diffusion(model, fv.grid.time(r_index), x, flow.at(static_cast<std::size_t>(r_index)));
    const Mat g = solve_checked(fv.Y[static_cast<std::size_t>(r_index)], sig.col(j), r_index);
    return fv.Y[static_cast<std::size_t>(t_index)] * g;
}

MalliavinCovariance malliavin_covariance(const FirstVariationPath& fv, const PathBundle& paths,
                                         const CoefficientModel& model, const StatisticFlow& flow,
                                         int t_index, double lambda) {
    check_alignment(paths, flow, model);
    if (t_index < 1 || t_index > fv.grid.M)
        throw ArgumentError("malliavin_covariance: t_index must lie in [1, M]");
    const double dt = fv.grid.dt();
    Mat integral = Mat::Zero(model.d, model.d);
    double gamma = 1.0;
    for (int r = 0; r <= t_index; ++r) {
        const auto ur = static_cast<std::size_t>(r);
        const Mat sig = eval_diffusion(model, fv.grid.time(r), paths.state_vec(r, fv.path_index), flow.at(ur));
        const Mat g = solve_checked(fv.Y[ur], sig, r);
        const double w = (r == 0 || r == t_index) ? 0.5 * dt : dt;
        integral += w * (g * g.transpose());
        gamma = std::max({gamma, operator_norm(fv.Y[ur]), inverse_norm(fv.Y[ur])});
    }
    return finish(fv.Y[static_cast<std::size_t>(t_index)], integral, fv.grid.time(t_index), dt, gamma, lambda);
}

std::vector<MalliavinCovariance> malliavin_covariance_curve(const FirstVariationPath& fv,
                                                            const PathBundle& paths,
                                                            const CoefficientModel& model,
                                                            const StatisticFlow& flow, double lambda) {
    check_alignment(paths, flow, model);
    const double dt = fv.grid.dt();
    std::vector<MalliavinCovariance> out;
    out.reserve(static_cast<std::size_t>(fv.grid.M));
    Mat running = Mat::Zero(model.d, model.d);  // sum of G G^T over r < k, first term halved
    double gamma = 1.0;
    for (int k = 0; k <= fv.grid.M; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const Mat sig = eval_diffusion(model, fv.grid.time(k), paths.state_vec(k, fv.path_index), flow.at(uk));
        const Mat g = solve_checked(fv.Y[uk], sig, k);
        const Mat ggt = g * g.transpose();
        gamma = std::max({gamma, operator_norm(fv.Y[uk]), inverse_norm(fv.Y[uk])});
        if (k > 0) out.push_back(finish(fv.Y[uk], dt * (running + 0.5 * ggt), fv.grid.time(k), dt, gamma, lambda));
        running += (k == 0 ? 0.5 : 1.0) * ggt;
    }
    return out;
}

BoundCheck ellipticity_bound_check(const MalliavinCovariance& cov, double slack_factor) {
    if (cov.lambda < 0.0) throw ArgumentError("ellipticity_bound_check: lambda must be >= 0");
    BoundCheck r;
    r.bound = cov.t * cov.lambda / std::pow(cov.gamma, 4);
    r.slack = slack_factor * cov.dt * operator_norm(cov.Q);
    r.margin = cov.lambda_min - r.bound;
    r.holds = cov.lambda_min >= r.bound - r.slack;
    r.degenerate = cov.lambda <= 1e-10;
    return r;
}

Mat flow_jacobian_fd(const CoefficientModel& model, const Vec& x0, const TimeGrid& grid,
                     std::uint64_t seed, const StatisticFlow& flow, double h) {
    if (!(h > 0.0)) throw ArgumentError("flow_jacobian_fd: h must be positive");
    const int d = model.d;
    Mat jac(d, d);
    for (int j = 0; j < d; ++j) {
        Vec xp = x0;
        Vec xm = x0;
        xp(j) += h;
        xm(j) -= h;
        const PathBundle up = simulate_frozen_flow(model, InitialLaw::point(xp), grid, 1, seed, flow);
        const PathBundle dn = simulate_frozen_flow(model, InitialLaw::point(xm), grid, 1, seed, flow);
        jac.col(j) = (up.state_vec(grid.M, 0) - dn.state_vec(grid.M, 0)) / (2.0 * h);
    }
    return jac;
}

void write_malliavin_diagnostics_csv(const std::vector<MalliavinCovariance>& curve,
                                     const std::vector<double>& residual,
                                     const std::filesystem::path& path) {
    if (residual.size() != curve.size() + 1)
        throw ArgumentError("diagnostics: residual curve must cover steps 0..M");
    std::string out = "t,lambda_min,bound,zy_residual\n";
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const auto& c = curve[k];
        out += format_double(c.t) + ',' + format_double(c.lambda_min) + ',' +
               format_double(c.t * c.lambda / std::pow(c.gamma, 4)) + ',' + format_double(residual[k + 1]) + '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace mvsim
