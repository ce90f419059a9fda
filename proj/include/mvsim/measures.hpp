#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mvsim/coefficients.hpp"
#include "mvsim/linalg.hpp"

namespace mvsim {

/// N x d row-major particle positions.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Weighted particle cloud. Weights are nonnegative and sum to one.
struct EmpiricalMeasure {
    PointMatrix points;
    Vec weights;

    int d() const { return static_cast<int>(points.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(points.rows()); }

    /// Equal weights 1/N.
    static EmpiricalMeasure uniform(PointMatrix points);
    /// Validates and normalises nothing: weights must already sum to one.
    static EmpiricalMeasure weighted(PointMatrix points, Vec weights);
};

/// Uniform axis with `cells` intervals and cells + 1 nodes.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int cells = 1;

    int nodes() const { return cells + 1; }
    double step() const { return (hi - lo) / cells; }
    double node(int i) const { return i == cells ? hi : lo + i * step(); }
    bool operator==(const Axis&) const = default;
};

/// Nodal density on a 1D or 2D uniform grid. Values are row-major with the
/// first axis outermost.
struct GridDensity {
    std::vector<Axis> axes;
    std::vector<double> values;
    double time = 0.0;
    double mass_tol = 1e-6;

    int dims() const { return static_cast<int>(axes.size()); }
    std::size_t node_count() const;
    std::size_t index(int i, int j = 0) const;
    Vec node_point(std::size_t flat) const;
    /// Trapezoid-rule integral of the values.
    double mass() const;
    bool mass_valid() const;

    static GridDensity zeros(std::vector<Axis> axes, double time = 0.0);
};

/// Trapezoid quadrature weights on the grid, in node order.
std::vector<double> trapezoid_weights(const std::vector<Axis>& axes);

/// Gaussian density sampled at the nodes (no renormalisation).
GridDensity gaussian_density(std::vector<Axis> axes, const Vec& mean, const Mat& covariance,
                             double time = 0.0);

/// Measure statistics at a time grid: row k holds (E[phi_1], ..., E[phi_q]).
struct StatisticFlow {
    std::vector<double> time_grid;
    Mat stats;

    int q() const { return static_cast<int>(stats.cols()); }
    Vec at(std::size_t k) const { return stats.row(static_cast<Eigen::Index>(k)).transpose(); }
    void validate() const;
};

Vec empirical_statistics(const EmpiricalMeasure& mu, std::span<const StatisticFunctional> functionals);
Vec grid_statistics(const GridDensity& p, std::span<const StatisticFunctional> functionals);

/// Trapezoid integral of ||x||^order against p.
double grid_moment(const GridDensity& p, double order);
/// Weighted mean of ||x||^order over the cloud.
double empirical_moment(const EmpiricalMeasure& mu, double order);

/// Silverman's rule 1.06 * sd * N^{-1/5} for a 1D cloud.
double silverman_bandwidth(const EmpiricalMeasure& mu);

/// Gaussian kernel density estimate on the axis, renormalised to unit
/// trapezoid mass. bandwidth = nullopt selects Silverman's rule.
GridDensity kde_1d(const EmpiricalMeasure& mu, const Axis& grid, std::optional<double> bandwidth);

/// Product-Gaussian kernel estimate on a 2D grid, renormalised to unit
/// trapezoid mass. Default bandwidths sd_i * N^{-1/6} per axis.
GridDensity kde_2d(const EmpiricalMeasure& mu, const Axis& gx, const Axis& gy,
                   std::optional<Vec> bandwidth);

/// Exact 1D W2 through the quantile coupling.
double w2_empirical_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Root mean square of 1D W2 over random unit directions; deterministic in seed.
double w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_slices,
                 std::uint64_t seed);

/// The unit directions w2_sliced uses for a given (d, n_slices, seed).
std::vector<Vec> slice_directions(int d, int n_slices, std::uint64_t seed);

/// W2 to the point mass at the origin: sqrt(sum w_i ||x_i||^2).
double w2_to_dirac0(const EmpiricalMeasure& mu);

/// Exact 1D W2 for d == 1, sliced otherwise.
double w2_auto(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_slices,
               std::uint64_t seed);

/// Trapezoid integral of |p - r| over a shared grid.
double l1_grid_distance(const GridDensity& p, const GridDensity& r);

// CSV: "x[,y],p" one node per row; clouds as "w,x1[,x2,...]".
void write_grid_csv(const GridDensity& p, const std::filesystem::path& path);
/// Axes are reconstructed from the node coordinates.
GridDensity read_grid_csv(const std::filesystem::path& path);
void write_cloud_csv(const EmpiricalMeasure& mu, const std::filesystem::path& path);
EmpiricalMeasure read_cloud_csv(const std::filesystem::path& path);

}  // namespace mvsim
