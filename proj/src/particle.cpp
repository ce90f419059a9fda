#include "mvsim/particle.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <mutex>
#include <string>

#include "mvsim/error.hpp"
#include "mvsim/io.hpp"
#include "mvsim/parallel.hpp"
#include "mvsim/rng.hpp"

namespace mvsim {

TimeGrid::TimeGrid(double horizon, int steps) : T(horizon), M(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ArgumentError("TimeGrid: T must be positive");
    if (steps < 1) throw ArgumentError("TimeGrid: M must be >= 1");
}

std::vector<double> TimeGrid::instants() const {
    std::vector<double> t(static_cast<std::size_t>(M) + 1);
    for (int k = 0; k <= M; ++k) t[static_cast<std::size_t>(k)] = time(k);
    return t;
}

int TimeGrid::index_of(double t) const {
    if (t < -1e-12 || t > T * (1.0 + 1e-12)) throw ArgumentError("TimeGrid: time outside [0, T]");
    const long k = std::lround(t / dt());
    return static_cast<int>(std::clamp<long>(k, 0, M));
}

Vec PathBundle::state_vec(int step, std::size_t particle) const {
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = state(step, particle, j);
    return x;
}

EmpiricalMeasure PathBundle::snapshot(int step) const {
    if (step < 0 || step > grid.M) throw ArgumentError("PathBundle::snapshot: step outside grid");
    PointMatrix pts(static_cast<Eigen::Index>(n), d);
    const double* base = states.data() + static_cast<std::size_t>(step) * n * static_cast<std::size_t>(d);
    std::copy(base, base + n * static_cast<std::size_t>(d), pts.data());
    return EmpiricalMeasure::uniform(std::move(pts));
}

BrownianIncrements generate_brownian(std::uint64_t seed, std::size_t n, int m, const TimeGrid& grid) {
    if (n < 1 || m < 1) throw ArgumentError("generate_brownian: N and m must be >= 1");
    BrownianIncrements inc;
    inc.n = n;
    inc.m = m;
    inc.grid = grid;
    inc.values.resize(static_cast<std::size_t>(grid.M) * n * static_cast<std::size_t>(m));
    const double scale = std::sqrt(grid.dt());
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const NormalStream stream(seed, StreamPurpose::kBrownian, static_cast<std::uint32_t>(i));
            std::uint64_t idx = 0;
            for (int k = 0; k < grid.M; ++k)
                for (int c = 0; c < m; ++c)
                    inc.values[(static_cast<std::size_t>(k) * n + i) * static_cast<std::size_t>(m) +
                               static_cast<std::size_t>(c)] = scale * stream.at(idx++);
        }
    });
    return inc;
}

PointMatrix sample_initial(const InitialLaw& law, std::size_t n, std::uint64_t seed) {
    const int d = law.d();
    PointMatrix pts(static_cast<Eigen::Index>(n), d);
    if (law.kind == InitialLaw::Kind::kPoint) {
        for (std::size_t i = 0; i < n; ++i) pts.row(static_cast<Eigen::Index>(i)) = law.mean.transpose();
        return pts;
    }
    const Mat factor = law.factor();
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Vec z(d);
        for (std::size_t i = begin; i < end; ++i) {
            const NormalStream stream(seed, StreamPurpose::kInitialLaw, static_cast<std::uint32_t>(i));
            for (int j = 0; j < d; ++j) z(j) = stream.at(static_cast<std::uint64_t>(j));
            pts.row(static_cast<Eigen::Index>(i)) = (law.mean + factor * z).transpose();
        }
    });
    return pts;
}

namespace {

void check_model(const CoefficientModel& model, const InitialLaw& law) {
    if (model.d < 1 || model.m < 1) throw ArgumentError("model '" + model.name + "' has invalid dimensions");
    if (law.d() != model.d)
        throw ArgumentError("initial law dimension " + std::to_string(law.d()) + " does not match model '" +
                            model.name + "' (d=" + std::to_string(model.d) + ")");
    for (const auto& f : model.functionals)
        if (f.dim != 0 && f.dim != model.d)
            throw ArgumentError("functional '" + f.id + "' does not match model dimension");
}

// Equal-weight cloud statistics with the same summation order as
// empirical_statistics, so interacting runs are reproducible bit for bit.
Vec cloud_statistics(const CoefficientModel& model, const double* cloud, std::size_t n) {
    const int q = model.q();
    Vec s = Vec::Zero(q);
    if (q == 0) return s;
    const int d = model.d;
    std::vector<double> phi(n * static_cast<std::size_t>(q));
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Vec x(d);
        for (std::size_t i = begin; i < end; ++i) {
            for (int j = 0; j < d; ++j) x(j) = cloud[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
            for (int k = 0; k < q; ++k)
                phi[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(k)] =
                    model.functionals[static_cast<std::size_t>(k)].phi(x);
        }
    });
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < q; ++k) {
            const double v = phi[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(k)];
            if (!std::isfinite(v))
                throw NumericError("functional '" + model.functionals[static_cast<std::size_t>(k)].id +
                                   "' is not finite at particle " + std::to_string(i));
            s(k) += w * v;
        }
    }
    return s;
}

template <class StatsAt>
PathBundle euler_maruyama(const CoefficientModel& model, const PointMatrix& init, BrownianIncrements increments,
                          std::uint64_t seed, StatsAt&& stats_at) {
    const TimeGrid grid = increments.grid;
    const std::size_t n = increments.n;
    if (n < 1) throw ArgumentError("simulation needs N >= 1");
    if (static_cast<std::size_t>(init.rows()) != n || init.cols() != model.d)
        throw ArgumentError("initial cloud shape does not match N x d");
    if (increments.m != model.m) throw ArgumentError("increments carry the wrong noise dimension");
    const int d = model.d;
    const int m = model.m;
    const auto ud = static_cast<std::size_t>(d);
    const auto um = static_cast<std::size_t>(m);

    PathBundle out;
    out.n = n;
    out.d = d;
    out.grid = grid;
    out.seed = seed;
    out.states.resize((static_cast<std::size_t>(grid.M) + 1) * n * ud);
    std::copy(init.data(), init.data() + n * ud, out.states.begin());
    out.increments = std::move(increments);
    out.flow.time_grid = grid.instants();
    out.flow.stats.resize(grid.M + 1, model.q());

    const double dt = grid.dt();
    for (int k = 0; k < grid.M; ++k) {
        const double t = grid.time(k);
        const double* cur = out.states.data() + static_cast<std::size_t>(k) * n * ud;
        double* next = out.states.data() + (static_cast<std::size_t>(k) + 1) * n * ud;
        const Vec s = stats_at(k, cur);
        out.flow.stats.row(k) = s.transpose();
        if (k == 0) {
            // Shape and finiteness check once through the validating entry points.
            const Vec x0 = Eigen::Map<const Vec>(cur, d);
            eval_drift(model, t, x0, s);
            eval_diffusion(model, t, x0, s);
        }
        std::size_t bad = std::numeric_limits<std::size_t>::max();
        std::mutex bad_mutex;
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            Vec x(d);
            Vec dw(m);
            std::size_t first_bad = std::numeric_limits<std::size_t>::max();
            for (std::size_t i = begin; i < end; ++i) {
                for (int j = 0; j < d; ++j) x(j) = cur[i * ud + static_cast<std::size_t>(j)];
                for (int c = 0; c < m; ++c) dw(c) = out.increments.values[(static_cast<std::size_t>(k) * n + i) * um + static_cast<std::size_t>(c)];
                const Vec b = model.b(t, x, s);
                const Mat sig = model.sigma(t, x, s);
                const Vec xn = x + b * dt + sig * dw;
                for (int j = 0; j < d; ++j) next[i * ud + static_cast<std::size_t>(j)] = xn(j);
                if (first_bad == std::numeric_limits<std::size_t>::max() && !xn.allFinite()) first_bad = i;
            }
            if (first_bad != std::numeric_limits<std::size_t>::max()) {
                std::lock_guard lock(bad_mutex);
                bad = std::min(bad, first_bad);
            }
        });
        if (bad != std::numeric_limits<std::size_t>::max())
            throw SimulationError("state blew up (non-finite) at step " + std::to_string(k + 1) + ", particle " +
                                      std::to_string(bad),
                                  static_cast<std::size_t>(k) + 1, bad);
    }
    out.flow.stats.row(grid.M) =
        stats_at(grid.M, out.states.data() + static_cast<std::size_t>(grid.M) * n * ud).transpose();
    return out;
}

}  // namespace

PathBundle simulate_interacting(const CoefficientModel& model, const InitialLaw& law,
                                const TimeGrid& grid, std::size_t n, std::uint64_t seed) {
    check_model(model, law);
    if (n < 1) throw ArgumentError("simulation needs N >= 1");
    return euler_maruyama(model, sample_initial(law, n, seed), generate_brownian(seed, n, model.m, grid), seed,
                          [&](int, const double* cloud) {
        return cloud_statistics(model, cloud, n);
    });
}

namespace {

void check_flow(const CoefficientModel& model, const TimeGrid& grid, const StatisticFlow& flow) {
    flow.validate();
    if (flow.q() != model.q())
        throw ArgumentError("simulate_frozen_flow: flow carries " + std::to_string(flow.q()) +
                            " statistics, model expects " + std::to_string(model.q()));
    const auto instants = grid.instants();
    if (flow.time_grid.size() != instants.size())
        throw ArgumentError("simulate_frozen_flow: flow time grid does not match the simulation grid");
    for (std::size_t k = 0; k < instants.size(); ++k)
        if (std::abs(flow.time_grid[k] - instants[k]) > 1e-12 * std::max(1.0, grid.T))
            throw ArgumentError("simulate_frozen_flow: flow time grid does not match the simulation grid");
}

}  // namespace

PathBundle simulate_frozen_flow(const CoefficientModel& model, const InitialLaw& law,
                                const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                const StatisticFlow& flow) {
    check_model(model, law);
    if (n < 1) throw ArgumentError("simulation needs N >= 1");
    check_flow(model, grid, flow);
    return euler_maruyama(model, sample_initial(law, n, seed), generate_brownian(seed, n, model.m, grid), seed,
                          [&](int k, const double*) { return flow.at(static_cast<std::size_t>(k)); });
}

PathBundle simulate_driven(const CoefficientModel& model, const PointMatrix& init,
                           const BrownianIncrements& increments, const StatisticFlow& flow) {
    check_flow(model, increments.grid, flow);
    return euler_maruyama(model, init, increments, 0,
                          [&](int k, const double*) { return flow.at(static_cast<std::size_t>(k)); });
}

BrownianIncrements coarsen(const BrownianIncrements& fine, int factor) {
    if (factor < 1 || fine.grid.M % factor != 0)
        throw ArgumentError("coarsen: factor must divide the number of steps");
    BrownianIncrements out;
    out.n = fine.n;
    out.m = fine.m;
    out.grid = TimeGrid(fine.grid.T, fine.grid.M / factor);
    out.values.assign(static_cast<std::size_t>(out.grid.M) * out.n * static_cast<std::size_t>(out.m), 0.0);
    for (int k = 0; k < out.grid.M; ++k)
        for (std::size_t i = 0; i < out.n; ++i)
            for (int c = 0; c < out.m; ++c) {
                double acc = 0.0;
                for (int r = 0; r < factor; ++r) acc += fine.at(k * factor + r, i, c);
                out.values[(static_cast<std::size_t>(k) * out.n + i) * static_cast<std::size_t>(out.m) +
                           static_cast<std::size_t>(c)] = acc;
            }
    return out;
}

StatisticFlow empirical_flow(const PathBundle& paths, const CoefficientModel& model) {
    if (paths.d != model.d) throw ArgumentError("empirical_flow: bundle dimension does not match model");
    StatisticFlow flow;
    flow.time_grid = paths.grid.instants();
    flow.stats.resize(paths.grid.M + 1, model.q());
    for (int k = 0; k <= paths.grid.M; ++k)
        flow.stats.row(k) =
            cloud_statistics(model, paths.states.data() + static_cast<std::size_t>(k) * paths.n * static_cast<std::size_t>(paths.d), paths.n)
                .transpose();
    return flow;
}

std::vector<double> moment_curve(const PathBundle& paths, double p) {
    if (!(p >= 1.0)) throw ArgumentError("moment_curve: order must be >= 1");
    std::vector<double> curve(static_cast<std::size_t>(paths.grid.M) + 1, 0.0);
    const auto ud = static_cast<std::size_t>(paths.d);
    for (int k = 0; k <= paths.grid.M; ++k) {
        const double* cloud = paths.states.data() + static_cast<std::size_t>(k) * paths.n * ud;
        double acc = 0.0;
        for (std::size_t i = 0; i < paths.n; ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < ud; ++j) sq += cloud[i * ud + j] * cloud[i * ud + j];
            acc += std::pow(std::sqrt(sq), p);
        }
        curve[static_cast<std::size_t>(k)] = acc / static_cast<double>(paths.n);
    }
    return curve;
}

bool write_trajectories_csv(const PathBundle& paths, const std::filesystem::path& path, bool force,
                            std::size_t max_scalars) {
    if (paths.trajectory_scalars() > max_scalars && !force) return false;
    std::string out = "t,particle";
    for (int j = 0; j < paths.d; ++j) out += ",x" + std::to_string(j + 1);
    out += '\n';
    for (int k = 0; k <= paths.grid.M; ++k) {
        const std::string t = format_double(paths.grid.time(k));
        for (std::size_t i = 0; i < paths.n; ++i) {
            out += t;
            out += ',';
            out += std::to_string(i);
            for (int j = 0; j < paths.d; ++j) {
                out += ',';
                out += format_double(paths.state(k, i, j));
            }
            out += '\n';
        }
    }
    write_file_atomic(path, out);
    return true;
}

}  // namespace mvsim
