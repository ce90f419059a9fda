#include "mvsim/picard.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mvsim/error.hpp"

namespace mvsim {

namespace {

std::vector<double> default_checkpoints(const TimeGrid& grid) {
    std::vector<double> t;
    for (int k = 1; k <= 10; ++k) t.push_back(grid.T * k / 10.0);
    return t;
}

}  // namespace

CheckpointSet checkpoints_of(const PathBundle& paths, const std::vector<double>& times) {
    CheckpointSet set;
    set.times = times;
    set.clouds.reserve(times.size());
    for (double t : times) set.clouds.push_back(paths.snapshot(paths.grid.index_of(t)));
    return set;
}

double convergence_gap(const CheckpointSet& a, const CheckpointSet& b, int n_slices,
                       std::uint64_t slice_seed) {
    if (a.times.size() != b.times.size() || a.clouds.size() != a.times.size() ||
        b.clouds.size() != b.times.size())
        throw ArgumentError("convergence_gap: checkpoint sets differ in length");
    for (std::size_t k = 0; k < a.times.size(); ++k)
        if (std::abs(a.times[k] - b.times[k]) > 1e-12)
            throw ArgumentError("convergence_gap: checkpoint times differ");
    double gap = 0.0;
    for (std::size_t k = 0; k < a.clouds.size(); ++k)
        gap = std::max(gap, w2_auto(a.clouds[k], b.clouds[k], n_slices, slice_seed));
    return gap;
}

PicardRun picard_run(const CoefficientModel& model, const InitialLaw& law, const TimeGrid& grid,
                     std::size_t n, std::uint64_t seed, const PicardOptions& options) {
    if (!(options.tol > 0.0)) throw ArgumentError("picard_run: tol must be positive");
    if (options.max_iters < 1) throw ArgumentError("picard_run: max_iters must be >= 1");
    const std::vector<double> times =
        options.checkpoint_times.empty() ? default_checkpoints(grid) : options.checkpoint_times;

    // mu^0: law of the initial condition, constant in time.
    const Vec s0 = empirical_statistics(EmpiricalMeasure::uniform(sample_initial(law, n, seed)),
                                        model.functionals);
    StatisticFlow flow;
    flow.time_grid = grid.instants();
    flow.stats = s0.transpose().replicate(grid.M + 1, 1);

    PicardRun run;
    for (int iter = 1; iter <= options.max_iters; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        PathBundle paths = simulate_frozen_flow(model, law, grid, n, seed, flow);
        PicardIterate it{empirical_flow(paths, model), checkpoints_of(paths, times)};
        run.wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (!run.iterates.empty())
            run.gaps.push_back(convergence_gap(run.iterates.back().checkpoints, it.checkpoints,
                                               options.n_slices, options.slice_seed));
        flow = it.flow;
        run.iterates.push_back(std::move(it));
        run.final_paths = std::move(paths);
        run.n_iters = iter;
        if (!run.gaps.empty() && run.gaps.back() <= options.tol) {
            run.converged = true;
            break;
        }
    }
    return run;
}

PicardComparison picard_vs_direct(const CoefficientModel& model, const InitialLaw& law,
                                  const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                  const PicardOptions& options) {
    PicardComparison cmp;
    cmp.run = picard_run(model, law, grid, n, seed, options);
    cmp.direct = simulate_interacting(model, law, grid, n, seed);
    const auto& limit = cmp.run.iterates.back().checkpoints;
    cmp.discrepancy = convergence_gap(limit, checkpoints_of(cmp.direct, limit.times), options.n_slices,
                                      options.slice_seed);
    return cmp;
}

}  // namespace mvsim
