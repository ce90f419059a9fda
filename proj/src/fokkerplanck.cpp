#include "mvsim/fokkerplanck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "mvsim/error.hpp"
#include "mvsim/io.hpp"
#include "mvsim/parallel.hpp"

namespace mvsim {

namespace {

std::vector<Vec> node_points(const GridDensity& g) {
    std::vector<Vec> pts(g.node_count());
    for (std::size_t n = 0; n < pts.size(); ++n) pts[n] = g.node_point(n);
    return pts;
}

void zero_boundary(GridDensity& g) {
    const int nx = g.axes[0].cells;
    if (g.dims() == 1) {
        g.values.front() = 0.0;
        g.values.back() = 0.0;
        return;
    }
    const int ny = g.axes[1].cells;
    for (int i = 0; i <= nx; ++i) {
        g.values[g.index(i, 0)] = 0.0;
        g.values[g.index(i, ny)] = 0.0;
    }
    for (int j = 0; j <= ny; ++j) {
        g.values[g.index(0, j)] = 0.0;
        g.values[g.index(nx, j)] = 0.0;
    }
}

FPFields fields_at(const CoefficientModel& model, double t, const Vec& s, const std::vector<Vec>& pts) {
    const int d = model.d;
    const auto ud = static_cast<std::size_t>(d);
    FPFields f;
    f.d = d;
    f.s = s;
    f.b.resize(pts.size() * ud);
    f.a.resize(pts.size() * ud * ud);
    std::size_t bad = std::numeric_limits<std::size_t>::max();
    std::mutex bad_mutex;
    parallel_for(pts.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const Vec b = model.b(t, pts[n], s);
            const Mat sig = model.sigma(t, pts[n], s);
            const Mat a = sig * sig.transpose();
            if (!b.allFinite() || !a.allFinite()) {
                std::lock_guard lock(bad_mutex);
                bad = std::min(bad, n);
                continue;
            }
            for (int i = 0; i < d; ++i) {
                f.b[n * ud + static_cast<std::size_t>(i)] = b(i);
                for (int j = 0; j < d; ++j) f.a[(n * ud + static_cast<std::size_t>(i)) * ud + static_cast<std::size_t>(j)] = a(i, j);
            }
        }
    }, 1024);
    if (bad != std::numeric_limits<std::size_t>::max()) {
        std::string where;
        for (Eigen::Index j = 0; j < pts[bad].size(); ++j) where += (j ? "," : "") + format_double(pts[bad](j));
        throw NumericError("Fokker-Planck coefficient is not finite at node (" + where + "), t=" + format_double(t));
    }
    return f;
}

// Precomputed phi_k(node) * trapezoid weight, so statistics are a dot product.
struct StatisticKernel {
    std::vector<std::vector<double>> weighted_phi;

    StatisticKernel(const CoefficientModel& model, const GridDensity& g, const std::vector<Vec>& pts) {
        const auto w = trapezoid_weights(g.axes);
        for (const auto& f : model.functionals) {
            if (f.dim != 0 && f.dim != g.dims())
                throw ArgumentError("functional '" + f.id + "' does not match the grid dimension");
            std::vector<double> v(pts.size());
            for (std::size_t n = 0; n < pts.size(); ++n) {
                const double phi = f.phi(pts[n]);
                if (!std::isfinite(phi))
                    throw NumericError("functional '" + f.id + "' is not finite at grid node " + std::to_string(n));
                v[n] = w[n] * phi;
            }
            weighted_phi.push_back(std::move(v));
        }
    }

    Vec operator()(const std::vector<double>& p) const {
        Vec s(static_cast<Eigen::Index>(weighted_phi.size()));
        for (std::size_t k = 0; k < weighted_phi.size(); ++k) {
            double acc = 0.0;
            for (std::size_t n = 0; n < p.size(); ++n) acc += weighted_phi[k][n] * p[n];
            s(static_cast<Eigen::Index>(k)) = acc;
        }
        return s;
    }
};

inline double pos(double v) { return v > 0.0 ? v : 0.0; }
inline double neg(double v) { return v < 0.0 ? v : 0.0; }

// One explicit step; returns the mass that left through the boundary.
double step_1d(const FPFields& f, const Axis& ax, double dt, std::vector<double>& p, std::vector<double>& scratch) {
    const int n = ax.cells;
    const double dx = ax.step();
    std::vector<double>& flux = scratch;  // flux[i] at interface i + 1/2
    flux.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        flux[ui] = pos(f.b[ui]) * p[ui] + neg(f.b[ui + 1]) * p[ui + 1] -
                   0.5 * (f.a[ui + 1] * p[ui + 1] - f.a[ui] * p[ui]) / dx;
    }
    for (int i = 1; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        p[ui] -= dt / dx * (flux[ui] - flux[ui - 1]);
    }
    return dt * (flux[static_cast<std::size_t>(n - 1)] - flux[0]);
}

double step_2d(const FPFields& f, const Axis& ax, const Axis& ay, double dt, std::vector<double>& p,
               std::vector<double>& fx, std::vector<double>& fy) {
    const int nx = ax.cells;
    const int ny = ay.cells;
    const double dx = ax.step();
    const double dy = ay.step();
    const auto stride = static_cast<std::size_t>(ny) + 1;
    auto at = [stride](int i, int j) { return static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j); };
    auto b1 = [&](std::size_t n) { return f.b[2 * n]; };
    auto b2 = [&](std::size_t n) { return f.b[2 * n + 1]; };
    auto u11 = [&](std::size_t n) { return f.a[4 * n] * p[n]; };
    auto u12 = [&](std::size_t n) { return f.a[4 * n + 1] * p[n]; };
    auto u22 = [&](std::size_t n) { return f.a[4 * n + 3] * p[n]; };

    // fx(i, j): interface (i + 1/2, j), i in [0, nx), j in [1, ny)
    // fy(i, j): interface (i, j + 1/2), i in [1, nx), j in [0, ny)
    fx.assign(static_cast<std::size_t>(nx) * stride, 0.0);
    fy.assign((static_cast<std::size_t>(nx) + 1) * stride, 0.0);
    parallel_for(static_cast<std::size_t>(nx), [&](std::size_t begin, std::size_t end) {
        for (auto ui = begin; ui < end; ++ui) {
            const int i = static_cast<int>(ui);
            for (int j = 1; j < ny; ++j) {
                const auto c = at(i, j);
                const auto e = at(i + 1, j);
                const double cross = (u12(at(i, j + 1)) + u12(at(i + 1, j + 1)) - u12(at(i, j - 1)) -
                                      u12(at(i + 1, j - 1))) / (4.0 * dy);
                fx[at(i, j)] = pos(b1(c)) * p[c] + neg(b1(e)) * p[e] - 0.5 * (u11(e) - u11(c)) / dx - 0.5 * cross;
            }
            if (i == 0) continue;
            for (int j = 0; j < ny; ++j) {
                const auto c = at(i, j);
                const auto nn = at(i, j + 1);
                const double cross = (u12(at(i + 1, j)) + u12(at(i + 1, j + 1)) - u12(at(i - 1, j)) -
                                      u12(at(i - 1, j + 1))) / (4.0 * dx);
                fy[at(i, j)] = pos(b2(c)) * p[c] + neg(b2(nn)) * p[nn] - 0.5 * (u22(nn) - u22(c)) / dy - 0.5 * cross;
            }
        }
    }, 16);
    parallel_for(static_cast<std::size_t>(nx), [&](std::size_t begin, std::size_t end) {
        for (auto ui = std::max<std::size_t>(begin, 1); ui < end; ++ui) {
            const int i = static_cast<int>(ui);
            for (int j = 1; j < ny; ++j)
                p[at(i, j)] -= dt * ((fx[at(i, j)] - fx[at(i - 1, j)]) / dx + (fy[at(i, j)] - fy[at(i, j - 1)]) / dy);
        }
    }, 16);
    double out = 0.0;
    for (int j = 1; j < ny; ++j) out += (fx[at(nx - 1, j)] - fx[at(0, j)]) * dy;
    for (int i = 1; i < nx; ++i) out += (fy[at(i, ny - 1)] - fy[at(i, 0)]) * dx;
    return dt * out;
}

}  // namespace

FPProblem make_fp_problem(const CoefficientModel& model, const InitialLaw& law, std::vector<Axis> axes,
                          double T, std::vector<double> snapshot_times) {
    if (law.kind != InitialLaw::Kind::kGaussian)
        throw ArgumentError("Fokker-Planck needs an initial law with a density (Gaussian, positive covariance)");
    if (static_cast<int>(axes.size()) != model.d || law.d() != model.d)
        throw ArgumentError("Fokker-Planck grid dimension does not match the model");
    if (model.d > 2) throw ArgumentError("Fokker-Planck solver supports d <= 2");
    if (!(T > 0.0)) throw ArgumentError("Fokker-Planck horizon must be positive");
    for (double t : snapshot_times)
        if (t < 0.0 || t > T) throw ArgumentError("snapshot time " + format_double(t) + " outside [0, T]");
    for (int i = 0; i < model.d; ++i) {
        const double sd = std::sqrt(law.covariance(i, i));
        const Axis& a = axes[static_cast<std::size_t>(i)];
        if (law.mean(i) - 6.0 * sd < a.lo || law.mean(i) + 6.0 * sd > a.hi)
            throw ArgumentError("Fokker-Planck domain must contain six standard deviations of p0 on axis " +
                                std::to_string(i));
    }
    FPProblem prob;
    prob.model = model;
    prob.T = T;
    prob.snapshot_times = std::move(snapshot_times);
    prob.p0 = gaussian_density(std::move(axes), law.mean, law.covariance, 0.0);
    zero_boundary(prob.p0);
    const double mass = prob.p0.mass();
    if (!(mass > 0.0)) throw NumericError("initial density has no mass on the grid");
    for (double& v : prob.p0.values) v /= mass;
    prob.p0.mass_tol = 1e-8;
    return prob;
}

FPFields derive_fp_coefficients(const CoefficientModel& model, double t, const GridDensity& p) {
    if (p.dims() != model.d) throw ArgumentError("derive_fp_coefficients: grid dimension does not match model");
    if (!p.mass_valid()) throw ArgumentError("derive_fp_coefficients: density mass is not 1 within tolerance");
    const Vec s = grid_statistics(p, model.functionals);
    return fields_at(model, t, s, node_points(p));
}

double fp_stable_dt(const FPFields& f, const std::vector<Axis>& axes) {
    const auto d = static_cast<std::size_t>(f.d);
    const std::size_t nodes = f.b.size() / d;
    double rate = 0.0;
    if (d == 1) {
        double amax = 0.0, bmax = 0.0;
        for (std::size_t n = 0; n < nodes; ++n) {
            amax = std::max(amax, f.a[n]);
            bmax = std::max(bmax, std::abs(f.b[n]));
        }
        const double dx = axes[0].step();
        rate = 2.0 * amax / (dx * dx) + bmax / dx;
    } else {
        double a11 = 0.0, a22 = 0.0, a12 = 0.0, b1 = 0.0, b2 = 0.0;
        for (std::size_t n = 0; n < nodes; ++n) {
            a11 = std::max(a11, f.a[4 * n]);
            a12 = std::max(a12, std::abs(f.a[4 * n + 1]));
            a22 = std::max(a22, f.a[4 * n + 3]);
            b1 = std::max(b1, std::abs(f.b[2 * n]));
            b2 = std::max(b2, std::abs(f.b[2 * n + 1]));
        }
        const double dx = axes[0].step();
        const double dy = axes[1].step();
        rate = 2.0 * a11 / (dx * dx) + 2.0 * a22 / (dy * dy) + 2.0 * a12 / (dx * dy) + b1 / dx + b2 / dy;
    }
    return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

FPSolution solve_fp(const FPProblem& prob) {
    const CoefficientModel& model = prob.model;
    const GridDensity& p0 = prob.p0;
    if (p0.dims() != model.d) throw ArgumentError("solve_fp: grid dimension does not match model");
    if (std::abs(p0.mass() - 1.0) > 1e-8) throw ArgumentError("solve_fp: p0 must have unit mass within 1e-8");
    if (!(prob.T > 0.0)) throw ArgumentError("solve_fp: T must be positive");
    if (prob.dt_policy == DtPolicy::kFixed && !(prob.dt_fixed > 0.0))
        throw ArgumentError("solve_fp: fixed dt must be positive");
    std::vector<double> targets = prob.snapshot_times;
    std::sort(targets.begin(), targets.end());
    for (double t : targets)
        if (t < 0.0 || t > prob.T * (1.0 + 1e-12)) throw ArgumentError("solve_fp: snapshot time outside [0, T]");

    const auto pts = node_points(p0);
    const StatisticKernel stats(model, p0, pts);
    const bool frozen_fields = model.autonomous && model.q() == 0;

    FPSolution sol;
    std::vector<double> p = p0.values;
    std::vector<double> scratch_a, scratch_b;
    double t = 0.0;
    double flux_total = 0.0;
    auto record = [&](const Vec& s) {
        GridDensity g = p0;
        g.values = p;
        sol.step_times.push_back(t);
        sol.mass_curve.push_back(g.mass());
        sol.min_value_curve.push_back(*std::min_element(p.begin(), p.end()));
        sol.boundary_flux.push_back(flux_total);
        sol.stats_curve.push_back(s);
    };
    auto snapshot = [&] {
        GridDensity g = p0;
        g.values = p;
        g.time = t;
        g.mass_tol = prob.conservation_tol + flux_total;
        sol.snapshots.push_back(std::move(g));
    };

    std::size_t next_target = 0;
    while (next_target < targets.size() && targets[next_target] <= 0.0) {
        snapshot();
        ++next_target;
    }
    record(stats(p));

    FPFields fields;
    if (frozen_fields) fields = fields_at(model, 0.0, Vec(0), pts);
    sol.dt_min = std::numeric_limits<double>::infinity();
    const double t_eps = 1e-12 * prob.T;
    while (t < prob.T - t_eps) {
        const Vec s = stats(p);
        if (!frozen_fields) fields = fields_at(model, t, s, pts);
        const double stable = fp_stable_dt(fields, p0.axes);
        double dt = prob.dt_policy == DtPolicy::kAuto ? prob.cfl_safety * stable : prob.dt_fixed;
        if (prob.dt_policy == DtPolicy::kFixed && dt > stable)
            throw StabilityError("fixed dt " + format_double(dt) + " exceeds the stability limit " +
                                 format_double(stable) + " at t=" + format_double(t));
        const double target = next_target < targets.size() ? std::min(targets[next_target], prob.T) : prob.T;
        if (t + dt >= target - t_eps) dt = target - t;
        const double out = p0.dims() == 1
                               ? step_1d(fields, p0.axes[0], dt, p, scratch_a)
                               : step_2d(fields, p0.axes[0], p0.axes[1], dt, p, scratch_a, scratch_b);
        flux_total += out;
        t = (dt == target - t) ? target : t + dt;
        ++sol.steps;
        sol.dt_min = std::min(sol.dt_min, dt);
        sol.dt_max = std::max(sol.dt_max, dt);
        sol.max_cfl = std::max(sol.max_cfl, dt / stable);
        record(s);

        const double mass = sol.mass_curve.back();
        if (!std::isfinite(mass)) throw NumericError("Fokker-Planck density became non-finite at t=" + format_double(t));
        const double drift = std::abs(mass + flux_total - 1.0);
        sol.max_conservation_error = std::max(sol.max_conservation_error, drift);
        if (drift > prob.conservation_tol)
            throw ConservationError("mass drifted by " + format_double(drift) + " net of boundary flux at t=" + format_double(t));
        if (sol.min_value_curve.back() < prob.positivity_floor)
            throw PositivityError("density undershoot " + format_double(sol.min_value_curve.back()) + " at t=" + format_double(t));
        while (next_target < targets.size() && targets[next_target] <= t + t_eps) {
            snapshot();
            ++next_target;
        }
    }
    while (next_target < targets.size()) {
        snapshot();
        ++next_target;
    }
    if (sol.steps == 0) sol.dt_min = 0.0;
    return sol;
}

std::vector<Vec> fp_statistics_curve(const FPSolution& solution, std::span<const StatisticFunctional> functionals) {
    std::vector<Vec> out;
    out.reserve(solution.snapshots.size());
    for (const auto& g : solution.snapshots) out.push_back(grid_statistics(g, functionals));
    return out;
}

}  // namespace mvsim
