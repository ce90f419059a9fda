#include "mvsim/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mvsim {

namespace {

Vec jacobi_eigenvalues(Mat a) {
    const Eigen::Index n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * std::max(1.0, a.squaredNorm())) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    Vec ev = a.diagonal();
    std::sort(ev.data(), ev.data() + ev.size());
    return ev;
}

}  // namespace

Vec symmetric_eigenvalues(const Mat& a) {
    const Mat s = 0.5 * (a + a.transpose());
    const Eigen::Index n = s.rows();
    if (n == 1) return Vec::Constant(1, s(0, 0));
    if (n == 2) {
        const double mean = 0.5 * (s(0, 0) + s(1, 1));
        const double half_diff = 0.5 * (s(0, 0) - s(1, 1));
        const double r = std::hypot(half_diff, s(0, 1));
        Vec ev(2);
        ev << mean - r, mean + r;
        return ev;
    }
    return jacobi_eigenvalues(s);
}

double min_symmetric_eigenvalue(const Mat& a) {
    if (a.size() == 0) return 0.0;
    return symmetric_eigenvalues(a)(0);
}

double operator_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    const Vec ev = symmetric_eigenvalues(a.transpose() * a);
    return std::sqrt(std::max(0.0, ev(ev.size() - 1)));
}

bool all_finite(const Mat& a) { return a.allFinite(); }

}  // namespace mvsim
