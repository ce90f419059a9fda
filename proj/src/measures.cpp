#include "mvsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "mvsim/error.hpp"
#include "mvsim/io.hpp"
#include "mvsim/parallel.hpp"
#include "mvsim/rng.hpp"

namespace mvsim {

namespace {

void check_functional_dims(std::span<const StatisticFunctional> functionals, int d, const char* op) {
    for (const auto& f : functionals) {
        if (f.dim != 0 && f.dim != d)
            throw ArgumentError(std::string(op) + ": functional '" + f.id + "' expects dimension " +
                                std::to_string(f.dim) + ", measure has " + std::to_string(d));
    }
}

// Indices sorted by (value, index).
std::vector<std::size_t> sorted_order(const Eigen::Ref<const Vec>& v) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double va = v(static_cast<Eigen::Index>(a));
        const double vb = v(static_cast<Eigen::Index>(b));
        return va < vb || (va == vb && a < b);
    });
    return idx;
}

double w2_projected(const Vec& xa, const Vec& wa, const Vec& xb, const Vec& wb) {
    const auto oa = sorted_order(xa);
    const auto ob = sorted_order(xb);
    std::size_t ia = 0;
    std::size_t ib = 0;
    double ra = wa(static_cast<Eigen::Index>(oa[0]));
    double rb = wb(static_cast<Eigen::Index>(ob[0]));
    double cost = 0.0;
    while (ia < oa.size() && ib < ob.size()) {
        const double piece = std::min(ra, rb);
        const double diff = xa(static_cast<Eigen::Index>(oa[ia])) - xb(static_cast<Eigen::Index>(ob[ib]));
        cost += piece * diff * diff;
        ra -= piece;
        rb -= piece;
        // The exhausted side advances; ties advance both.
        if (ra <= 0.0 && ++ia < oa.size()) ra = wa(static_cast<Eigen::Index>(oa[ia]));
        if (rb <= 0.0 && ++ib < ob.size()) rb = wb(static_cast<Eigen::Index>(ob[ib]));
    }
    return std::sqrt(std::max(0.0, cost));
}

void check_cloud(const EmpiricalMeasure& mu, const char* op) {
    if (mu.size() < 1) throw ArgumentError(std::string(op) + ": empty cloud");
    if (mu.weights.size() != mu.points.rows())
        throw ArgumentError(std::string(op) + ": weight count does not match point count");
}

}  // namespace

EmpiricalMeasure EmpiricalMeasure::uniform(PointMatrix points) {
    if (points.rows() < 1 || points.cols() < 1)
        throw ArgumentError("EmpiricalMeasure: need at least one point of dimension >= 1");
    if (!points.allFinite()) throw ArgumentError("EmpiricalMeasure: points must be finite");
    EmpiricalMeasure mu;
    mu.weights = Vec::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
    mu.points = std::move(points);
    return mu;
}

EmpiricalMeasure EmpiricalMeasure::weighted(PointMatrix points, Vec weights) {
    if (points.rows() < 1 || points.cols() < 1)
        throw ArgumentError("EmpiricalMeasure: need at least one point of dimension >= 1");
    if (weights.size() != points.rows())
        throw ArgumentError("EmpiricalMeasure: weight count does not match point count");
    if (!points.allFinite()) throw ArgumentError("EmpiricalMeasure: points must be finite");
    if (!weights.allFinite() || weights.minCoeff() < 0.0)
        throw ArgumentError("EmpiricalMeasure: weights must be finite and nonnegative");
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < weights.size(); ++i) total += weights(i);
    if (std::abs(static_cast<double>(total - 1.0L)) > 1e-12)
        throw ArgumentError("EmpiricalMeasure: weights must sum to 1");
    EmpiricalMeasure mu;
    mu.points = std::move(points);
    mu.weights = std::move(weights);
    return mu;
}

std::size_t GridDensity::node_count() const {
    std::size_t n = 1;
    for (const Axis& a : axes) n *= static_cast<std::size_t>(a.nodes());
    return n;
}

std::size_t GridDensity::index(int i, int j) const {
    if (dims() == 1) return static_cast<std::size_t>(i);
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(axes[1].nodes()) +
           static_cast<std::size_t>(j);
}

Vec GridDensity::node_point(std::size_t flat) const {
    Vec x(dims());
    if (dims() == 1) {
        x(0) = axes[0].node(static_cast<int>(flat));
    } else {
        const auto ny = static_cast<std::size_t>(axes[1].nodes());
        x(0) = axes[0].node(static_cast<int>(flat / ny));
        x(1) = axes[1].node(static_cast<int>(flat % ny));
    }
    return x;
}

double GridDensity::mass() const {
    const auto w = trapezoid_weights(axes);
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) m += w[k] * values[k];
    return m;
}

bool GridDensity::mass_valid() const { return std::abs(mass() - 1.0) <= mass_tol; }

GridDensity GridDensity::zeros(std::vector<Axis> axes, double time) {
    if (axes.empty() || axes.size() > 2) throw ArgumentError("GridDensity: only 1D and 2D grids");
    for (const Axis& a : axes)
        if (!(a.hi > a.lo) || a.cells < 1) throw ArgumentError("GridDensity: invalid axis");
    GridDensity g;
    g.axes = std::move(axes);
    g.values.assign(g.node_count(), 0.0);
    g.time = time;
    return g;
}

std::vector<double> trapezoid_weights(const std::vector<Axis>& axes) {
    auto axis_weights = [](const Axis& a) {
        std::vector<double> w(static_cast<std::size_t>(a.nodes()), a.step());
        w.front() *= 0.5;
        w.back() *= 0.5;
        return w;
    };
    const auto wx = axis_weights(axes[0]);
    if (axes.size() == 1) return wx;
    const auto wy = axis_weights(axes[1]);
    std::vector<double> w;
    w.reserve(wx.size() * wy.size());
    for (double a : wx)
        for (double b : wy) w.push_back(a * b);
    return w;
}

GridDensity gaussian_density(std::vector<Axis> axes, const Vec& mean, const Mat& covariance,
                             double time) {
    GridDensity g = GridDensity::zeros(std::move(axes), time);
    const int d = g.dims();
    if (mean.size() != d || covariance.rows() != d || covariance.cols() != d)
        throw ArgumentError("gaussian_density: parameter dimension does not match grid");
    Eigen::LLT<Mat> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw ArgumentError("gaussian_density: covariance must be positive definite");
    const Mat inv = llt.solve(Mat::Identity(d, d));
    const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    const double norm = -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet);
    for (std::size_t k = 0; k < g.values.size(); ++k) {
        const Vec r = g.node_point(k) - mean;
        g.values[k] = std::exp(norm - 0.5 * r.dot(inv * r));
    }
    return g;
}

void StatisticFlow::validate() const {
    if (time_grid.empty()) throw ArgumentError("StatisticFlow: empty time grid");
    if (stats.rows() != static_cast<Eigen::Index>(time_grid.size()))
        throw ArgumentError("StatisticFlow: row count does not match time grid");
    for (std::size_t k = 1; k < time_grid.size(); ++k)
        if (!(time_grid[k] > time_grid[k - 1]))
            throw ArgumentError("StatisticFlow: time grid must be strictly increasing");
    if (!stats.allFinite()) throw NumericError("StatisticFlow: non-finite statistic");
}

Vec empirical_statistics(const EmpiricalMeasure& mu, std::span<const StatisticFunctional> functionals) {
    check_cloud(mu, "empirical_statistics");
    check_functional_dims(functionals, mu.d(), "empirical_statistics");
    Vec out = Vec::Zero(static_cast<Eigen::Index>(functionals.size()));
    Vec x(mu.d());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        x = mu.points.row(static_cast<Eigen::Index>(i)).transpose();
        for (std::size_t k = 0; k < functionals.size(); ++k) {
            const double v = functionals[k].phi(x);
            if (!std::isfinite(v))
                throw NumericError("functional '" + functionals[k].id + "' is not finite at particle " +
                                   std::to_string(i));
            out(static_cast<Eigen::Index>(k)) += mu.weights(static_cast<Eigen::Index>(i)) * v;
        }
    }
    return out;
}

Vec grid_statistics(const GridDensity& p, std::span<const StatisticFunctional> functionals) {
    check_functional_dims(functionals, p.dims(), "grid_statistics");
    const auto w = trapezoid_weights(p.axes);
    Vec out = Vec::Zero(static_cast<Eigen::Index>(functionals.size()));
    for (std::size_t n = 0; n < p.values.size(); ++n) {
        if (p.values[n] == 0.0) continue;
        const Vec x = p.node_point(n);
        for (std::size_t k = 0; k < functionals.size(); ++k) {
            const double v = functionals[k].phi(x);
            if (!std::isfinite(v))
                throw NumericError("functional '" + functionals[k].id + "' is not finite at grid node " +
                                   std::to_string(n));
            out(static_cast<Eigen::Index>(k)) += w[n] * v * p.values[n];
        }
    }
    return out;
}

double grid_moment(const GridDensity& p, double order) {
    const auto w = trapezoid_weights(p.axes);
    double m = 0.0;
    for (std::size_t n = 0; n < p.values.size(); ++n)
        m += w[n] * std::pow(p.node_point(n).norm(), order) * p.values[n];
    return m;
}

double empirical_moment(const EmpiricalMeasure& mu, double order) {
    double m = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        m += mu.weights(static_cast<Eigen::Index>(i)) *
             std::pow(mu.points.row(static_cast<Eigen::Index>(i)).norm(), order);
    return m;
}

double silverman_bandwidth(const EmpiricalMeasure& mu) {
    check_cloud(mu, "silverman_bandwidth");
    if (mu.d() != 1) throw ArgumentError("silverman_bandwidth: cloud must be 1D");
    const auto x = mu.points.col(0);
    const double mean = mu.weights.dot(x);
    const double var = mu.weights.dot((x.array() - mean).square().matrix());
    const double sd = std::sqrt(std::max(0.0, var));
    if (!(sd > 0.0)) throw ArgumentError("silverman_bandwidth: cloud has zero spread");
    return 1.06 * sd * std::pow(static_cast<double>(mu.size()), -0.2);
}

GridDensity kde_1d(const EmpiricalMeasure& mu, const Axis& grid, std::optional<double> bandwidth) {
    check_cloud(mu, "kde_1d");
    if (mu.d() != 1) throw ArgumentError("kde_1d: cloud must be 1D");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(mu);
    if (!(h > 0.0)) throw ArgumentError("kde_1d: bandwidth must be positive");

    const Vec x = mu.points.col(0);
    const auto order = sorted_order(x);
    std::vector<double> xs(order.size());
    std::vector<double> ws(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        xs[i] = x(static_cast<Eigen::Index>(order[i]));
        ws[i] = mu.weights(static_cast<Eigen::Index>(order[i]));
    }

    GridDensity g = GridDensity::zeros({grid});
    const double reach = 10.0 * h;
    const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
    parallel_for(g.values.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const double node = grid.node(static_cast<int>(n));
            auto lo = std::lower_bound(xs.begin(), xs.end(), node - reach);
            auto hi = std::upper_bound(lo, xs.end(), node + reach);
            double acc = 0.0;
            for (auto it = lo; it != hi; ++it) {
                const double z = (node - *it) / h;
                acc += ws[static_cast<std::size_t>(it - xs.begin())] * std::exp(-0.5 * z * z);
            }
            g.values[n] = norm * acc;
        }
    }, 64);
    const double mass = g.mass();
    if (!(mass > 0.0))
        throw NumericError("kde_1d: estimate has no mass on the grid (cloud outside the axis?)");
    for (double& v : g.values) v /= mass;
    g.mass_tol = 1e-10;
    return g;
}

GridDensity kde_2d(const EmpiricalMeasure& mu, const Axis& gx, const Axis& gy,
                   std::optional<Vec> bandwidth) {
    check_cloud(mu, "kde_2d");
    if (mu.d() != 2) throw ArgumentError("kde_2d: cloud must be 2D");
    Vec h(2);
    if (bandwidth) {
        if (bandwidth->size() != 2) throw ArgumentError("kde_2d: need one bandwidth per axis");
        h = *bandwidth;
    } else {
        const Vec mean = mu.points.transpose() * mu.weights;
        for (int j = 0; j < 2; ++j) {
            const double var = mu.weights.dot((mu.points.col(j).array() - mean(j)).square().matrix());
            h(j) = std::sqrt(std::max(0.0, var)) * std::pow(static_cast<double>(mu.size()), -1.0 / 6.0);
        }
    }
    if (!(h.minCoeff() > 0.0)) throw ArgumentError("kde_2d: bandwidth must be positive");

    GridDensity g = GridDensity::zeros({gx, gy});
    const int ny = gy.nodes();
    const double norm = 1.0 / (2.0 * std::numbers::pi * h(0) * h(1));
    auto window = [](const Axis& a, double c, double reach) {
        const int lo = std::max(0, static_cast<int>(std::ceil((c - reach - a.lo) / a.step())));
        const int hi = std::min(a.cells, static_cast<int>(std::floor((c + reach - a.lo) / a.step())));
        return std::pair{lo, hi};
    };
    std::vector<double> ky;
    // Particle order is fixed, so the scatter is reproducible.
    for (std::size_t p = 0; p < mu.size(); ++p) {
        const double px = mu.points(static_cast<Eigen::Index>(p), 0);
        const double py = mu.points(static_cast<Eigen::Index>(p), 1);
        const double w = mu.weights(static_cast<Eigen::Index>(p)) * norm;
        const auto [ilo, ihi] = window(gx, px, 8.0 * h(0));
        const auto [jlo, jhi] = window(gy, py, 8.0 * h(1));
        if (ilo > ihi || jlo > jhi) continue;
        ky.resize(static_cast<std::size_t>(jhi - jlo + 1));
        for (int j = jlo; j <= jhi; ++j) {
            const double z = (gy.node(j) - py) / h(1);
            ky[static_cast<std::size_t>(j - jlo)] = std::exp(-0.5 * z * z);
        }
        for (int i = ilo; i <= ihi; ++i) {
            const double z = (gx.node(i) - px) / h(0);
            const double kx = w * std::exp(-0.5 * z * z);
            double* row = g.values.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(ny);
            for (int j = jlo; j <= jhi; ++j) row[j] += kx * ky[static_cast<std::size_t>(j - jlo)];
        }
    }
    const double mass = g.mass();
    if (!(mass > 0.0)) throw NumericError("kde_2d: estimate has no mass on the grid");
    for (double& v : g.values) v /= mass;
    g.mass_tol = 1e-10;
    return g;
}

double w2_empirical_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    check_cloud(a, "w2_empirical_1d");
    check_cloud(b, "w2_empirical_1d");
    if (a.d() != 1 || b.d() != 1) throw ArgumentError("w2_empirical_1d: both clouds must be 1D");
    return w2_projected(a.points.col(0), a.weights, b.points.col(0), b.weights);
}

std::vector<Vec> slice_directions(int d, int n_slices, std::uint64_t seed) {
    if (n_slices < 1) throw ArgumentError("w2_sliced: n_slices must be >= 1");
    const NormalStream normals(seed, StreamPurpose::kSlicing, 0);
    std::vector<Vec> dirs;
    dirs.reserve(static_cast<std::size_t>(n_slices));
    std::uint64_t idx = 0;
    while (dirs.size() < static_cast<std::size_t>(n_slices)) {
        Vec v(d);
        for (int j = 0; j < d; ++j) v(j) = normals.at(idx++);
        const double n = v.norm();
        if (n > 1e-12) dirs.push_back(v / n);
    }
    return dirs;
}

double w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_slices,
                 std::uint64_t seed) {
    check_cloud(a, "w2_sliced");
    check_cloud(b, "w2_sliced");
    if (a.d() != b.d()) throw ArgumentError("w2_sliced: dimension mismatch");
    const auto dirs = slice_directions(a.d(), n_slices, seed);
    std::vector<double> sq(dirs.size());
    parallel_for(dirs.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const Vec pa = a.points * dirs[k];
            const Vec pb = b.points * dirs[k];
            const double w = w2_projected(pa, a.weights, pb, b.weights);
            sq[k] = w * w;
        }
    }, 1);
    double acc = 0.0;
    for (double v : sq) acc += v;
    return std::sqrt(acc / static_cast<double>(sq.size()));
}

double w2_to_dirac0(const EmpiricalMeasure& mu) {
    check_cloud(mu, "w2_to_dirac0");
    if (!mu.points.allFinite()) throw NumericError("w2_to_dirac0: non-finite point");
    return std::sqrt(mu.weights.dot(mu.points.rowwise().squaredNorm()));
}

double w2_auto(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_slices,
               std::uint64_t seed) {
    if (a.d() == 1 && b.d() == 1) return w2_empirical_1d(a, b);
    return w2_sliced(a, b, n_slices, seed);
}

double l1_grid_distance(const GridDensity& p, const GridDensity& r) {
    if (p.axes != r.axes || p.values.size() != r.values.size())
        throw ArgumentError("l1_grid_distance: densities live on different grids");
    const auto w = trapezoid_weights(p.axes);
    double acc = 0.0;
    for (std::size_t n = 0; n < p.values.size(); ++n) acc += w[n] * std::abs(p.values[n] - r.values[n]);
    return acc;
}

void write_grid_csv(const GridDensity& p, const std::filesystem::path& path) {
    std::string out = p.dims() == 1 ? "x,p\n" : "x,y,p\n";
    out.reserve(p.values.size() * 48);
    for (std::size_t n = 0; n < p.values.size(); ++n) {
        const Vec x = p.node_point(n);
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            out += format_double(x(j));
            out += ',';
        }
        out += format_double(p.values[n]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

namespace {

std::vector<std::vector<double>> parse_csv_rows(const std::filesystem::path& path, std::string& header) {
    std::istringstream in(read_file(path));
    if (!std::getline(in, header)) throw IoError("empty CSV file " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("malformed number '" + cell + "' in " + path.string());
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Axis axis_from_nodes(std::vector<double> nodes) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (nodes.size() < 2) throw IoError("grid CSV needs at least two nodes per axis");
    return Axis{nodes.front(), nodes.back(), static_cast<int>(nodes.size()) - 1};
}

}  // namespace

GridDensity read_grid_csv(const std::filesystem::path& path) {
    std::string header;
    const auto rows = parse_csv_rows(path, header);
    const int dims = header == "x,p" ? 1 : header == "x,y,p" ? 2 : 0;
    if (dims == 0) throw IoError("unexpected grid CSV header '" + header + "' in " + path.string());
    std::vector<std::vector<double>> coords(static_cast<std::size_t>(dims));
    for (const auto& r : rows) {
        if (r.size() != static_cast<std::size_t>(dims) + 1) throw IoError("ragged row in " + path.string());
        for (int j = 0; j < dims; ++j) coords[static_cast<std::size_t>(j)].push_back(r[static_cast<std::size_t>(j)]);
    }
    std::vector<Axis> axes;
    for (auto& c : coords) axes.push_back(axis_from_nodes(std::move(c)));
    GridDensity g = GridDensity::zeros(std::move(axes));
    if (g.node_count() != rows.size()) throw IoError("grid CSV is not a full rectangular grid: " + path.string());
    for (std::size_t n = 0; n < rows.size(); ++n) g.values[n] = rows[n].back();
    return g;
}

void write_cloud_csv(const EmpiricalMeasure& mu, const std::filesystem::path& path) {
    std::string out = "w";
    for (int j = 0; j < mu.d(); ++j) out += ",x" + std::to_string(j + 1);
    out += '\n';
    out.reserve(mu.size() * 24 * static_cast<std::size_t>(mu.d() + 1));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        out += format_double(mu.weights(static_cast<Eigen::Index>(i)));
        for (int j = 0; j < mu.d(); ++j) {
            out += ',';
            out += format_double(mu.points(static_cast<Eigen::Index>(i), j));
        }
        out += '\n';
    }
    write_file_atomic(path, out);
}

EmpiricalMeasure read_cloud_csv(const std::filesystem::path& path) {
    std::string header;
    const auto rows = parse_csv_rows(path, header);
    if (rows.empty()) throw IoError("cloud CSV has no particles: " + path.string());
    const auto cols = rows.front().size();
    if (cols < 2) throw IoError("cloud CSV needs a weight and at least one coordinate");
    PointMatrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
    Vec w(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw IoError("ragged row in " + path.string());
        w(static_cast<Eigen::Index>(i)) = rows[i][0];
        for (std::size_t j = 1; j < cols; ++j)
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = rows[i][j];
    }
    return EmpiricalMeasure::weighted(std::move(pts), std::move(w));
}

}  // namespace mvsim
