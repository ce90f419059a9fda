#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "mvsim/coefficients.hpp"
#include "mvsim/measures.hpp"
#include "mvsim/particle.hpp"

namespace mvsim::test {

/// b = B x, constant sigma, no measure dependence.
inline CoefficientModel linear_model(const Mat& B, const Mat& sigma) {
    CoefficientModel m;
    m.name = "linear";
    m.d = static_cast<int>(B.rows());
    m.m = static_cast<int>(sigma.cols());
    m.autonomous = true;
    m.b = [B](double, const Vec& x, const Vec&) -> Vec { return B * x; };
    m.sigma = [sigma](double, const Vec&, const Vec&) -> Mat { return sigma; };
    m.db_dx = [B](double, const Vec&, const Vec&) -> Mat { return B; };
    const int d = m.d;
    const int cols = m.m;
    m.dsigma_dx = [d, cols](double, const Vec&, const Vec&) {
        return std::vector<Mat>(static_cast<std::size_t>(cols), Mat::Zero(d, d));
    };
    return m;
}

inline StatisticFlow constant_flow(const TimeGrid& grid, const Vec& s) {
    StatisticFlow f;
    f.time_grid = grid.instants();
    f.stats.resize(grid.M + 1, s.size());
    for (int k = 0; k <= grid.M; ++k) f.stats.row(k) = s.transpose();
    return f;
}

inline PointMatrix column(std::initializer_list<double> v) {
    PointMatrix p(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) p(i++, 0) = x;
    return p;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("mvsim-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace mvsim::test
