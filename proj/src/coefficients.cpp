#include "mvsim/coefficients.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mvsim/error.hpp"
#include "mvsim/rng.hpp"

namespace mvsim {

namespace {

std::string describe(double t, const Vec& x, const Vec& s) {
    std::ostringstream os;
    os.precision(10);
    os << "t=" << t << " x=(";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? "," : "") << x(i);
    os << ") s=(";
    for (Eigen::Index i = 0; i < s.size(); ++i) os << (i ? "," : "") << s(i);
    os << ")";
    return os.str();
}

void check_args(const CoefficientModel& model, const Vec& x, const Vec& s, const char* op) {
    if (x.size() != model.d)
        throw ArgumentError(std::string(op) + ": state has dimension " + std::to_string(x.size()) +
                            ", model '" + model.name + "' expects " + std::to_string(model.d));
    if (s.size() != model.q())
        throw ArgumentError(std::string(op) + ": statistic vector has length " +
                            std::to_string(s.size()) + ", model '" + model.name + "' expects " +
                            std::to_string(model.q()));
}

void check_finite(const Mat& out, const char* op, double t, const Vec& x, const Vec& s) {
    if (!out.allFinite())
        throw NumericError(std::string(op) + " is not finite at " + describe(t, x, s));
}

double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

Vec eval_drift(const CoefficientModel& model, double t, const Vec& x, const Vec& s) {
    check_args(model, x, s, "eval_drift");
    Vec out = model.b(t, x, s);
    if (out.size() != model.d) throw ArgumentError("eval_drift: drift returned wrong dimension");
    check_finite(out, "drift", t, x, s);
    return out;
}

Mat eval_diffusion(const CoefficientModel& model, double t, const Vec& x, const Vec& s) {
    check_args(model, x, s, "eval_diffusion");
    Mat out = model.sigma(t, x, s);
    if (out.rows() != model.d || out.cols() != model.m)
        throw ArgumentError("eval_diffusion: diffusion must be " + std::to_string(model.d) + "x" +
                            std::to_string(model.m));
    check_finite(out, "diffusion", t, x, s);
    return out;
}

Mat diffusion_matrix(const CoefficientModel& model, double t, const Vec& x, const Vec& s) {
    const Mat sig = eval_diffusion(model, t, x, s);
    return sig * sig.transpose();
}

Mat eval_drift_jacobian(const CoefficientModel& model, double t, const Vec& x, const Vec& s) {
    check_args(model, x, s, "eval_drift_jacobian");
    if (!model.db_dx) throw ArgumentError("model '" + model.name + "' has no drift Jacobian");
    Mat out = model.db_dx(t, x, s);
    if (out.rows() != model.d || out.cols() != model.d)
        throw ArgumentError("eval_drift_jacobian: Jacobian must be d x d");
    check_finite(out, "drift Jacobian", t, x, s);
    return out;
}

std::vector<Mat> eval_diffusion_jacobians(const CoefficientModel& model, double t, const Vec& x,
                                          const Vec& s) {
    check_args(model, x, s, "eval_diffusion_jacobians");
    if (!model.dsigma_dx)
        throw ArgumentError("model '" + model.name + "' has no diffusion Jacobian");
    std::vector<Mat> out = model.dsigma_dx(t, x, s);
    if (static_cast<int>(out.size()) != model.m)
        throw ArgumentError("eval_diffusion_jacobians: expected one Jacobian per noise column");
    for (const Mat& j : out) {
        if (j.rows() != model.d || j.cols() != model.d)
            throw ArgumentError("eval_diffusion_jacobians: Jacobian must be d x d");
        check_finite(j, "diffusion Jacobian", t, x, s);
    }
    return out;
}

EllipticityReport check_ellipticity(const CoefficientModel& model, const SampleRegion& region,
                                    std::span<const Vec> s_samples, std::size_t n,
                                    std::uint64_t seed) {
    if (n < 1) throw ArgumentError("check_ellipticity: n must be >= 1");
    if (region.x_lo.size() != model.d || region.x_hi.size() != model.d)
        throw ArgumentError("check_ellipticity: region dimension does not match model");
    if (region.t_hi < region.t_lo || (region.x_hi - region.x_lo).minCoeff() < 0.0)
        throw ArgumentError("check_ellipticity: empty region");
    if (static_cast<std::size_t>(model.d) + 1 > std::size(kPrimes))
        throw ArgumentError("check_ellipticity: dimension too large for the Halton sampler");
    if (s_samples.empty() && model.q() > 0)
        throw ArgumentError("check_ellipticity: model needs statistic samples");

    // Cranley-Patterson shift keeps prefixes nested for a fixed seed.
    const NormalStream shifts(seed, StreamPurpose::kSampling, 0);
    std::vector<double> shift(static_cast<std::size_t>(model.d) + 1);
    for (std::size_t k = 0; k < shift.size(); ++k) shift[k] = shifts.uniform_at(k);

    const Vec empty_s(0);
    EllipticityReport report;
    report.lambda_min_estimate = std::numeric_limits<double>::infinity();
    report.n_samples = n;
    Vec x(model.d);
    for (std::size_t i = 0; i < n; ++i) {
        auto coord = [&](std::size_t k) {
            const double u = radical_inverse(i + 1, kPrimes[k]) + shift[k];
            return u - std::floor(u);
        };
        const double t = region.t_lo + coord(0) * (region.t_hi - region.t_lo);
        for (int j = 0; j < model.d; ++j)
            x(j) = region.x_lo(j) + coord(j + 1) * (region.x_hi(j) - region.x_lo(j));
        const Vec& s = s_samples.empty() ? empty_s : s_samples[i % s_samples.size()];
        const Mat a = diffusion_matrix(model, t, x, s);
        const double lam = std::max(0.0, min_symmetric_eigenvalue(a));
        if (lam < report.lambda_min_estimate) {
            report.lambda_min_estimate = lam;
            report.argmin_t = t;
            report.argmin_x = x;
            report.argmin_s = s;
        }
    }
    return report;
}

double jacobian_consistency_probe(const CoefficientModel& model, std::span<const ProbePoint> points,
                                  double h) {
    if (!(h > 0.0)) throw ArgumentError("jacobian_consistency_probe: h must be positive");
    double worst = 0.0;
    auto account = [&](double analytic, double fd) {
        if (!std::isfinite(analytic) || !std::isfinite(fd))
            throw NumericError("jacobian_consistency_probe: non-finite evaluation");
        worst = std::max(worst, std::abs(analytic - fd) / (1.0 + std::abs(analytic)));
    };
    for (const ProbePoint& p : points) {
        const Mat jb = eval_drift_jacobian(model, p.t, p.x, p.s);
        const std::vector<Mat> js = eval_diffusion_jacobians(model, p.t, p.x, p.s);
        for (int j = 0; j < model.d; ++j) {
            Vec xp = p.x;
            Vec xm = p.x;
            xp(j) += h;
            xm(j) -= h;
            const Vec db = (eval_drift(model, p.t, xp, p.s) - eval_drift(model, p.t, xm, p.s)) / (2 * h);
            const Mat dsig =
                (eval_diffusion(model, p.t, xp, p.s) - eval_diffusion(model, p.t, xm, p.s)) / (2 * h);
            for (int i = 0; i < model.d; ++i) {
                account(jb(i, j), db(i));
                for (int k = 0; k < model.m; ++k) account(js[k](i, j), dsig(i, k));
            }
        }
    }
    return worst;
}

}  // namespace mvsim
