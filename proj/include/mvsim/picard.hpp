#pragma once

#include <cstdint>
#include <vector>

#include "mvsim/particle.hpp"

namespace mvsim {

/// Particle clouds of one iterate at the monitored times.
struct CheckpointSet {
    std::vector<double> times;
    std::vector<EmpiricalMeasure> clouds;
};

struct PicardIterate {
    StatisticFlow flow;
    CheckpointSet checkpoints;
};

struct PicardOptions {
    double tol = 1e-3;
    int max_iters = 20;
    std::vector<double> checkpoint_times;  // empty: every tenth of the horizon
    int n_slices = 64;                     // sliced W2 for d >= 2
    std::uint64_t slice_seed = 0x5eed;
};

struct PicardRun {
    std::vector<PicardIterate> iterates;  // X_1 .. X_n
    std::vector<double> gaps;             // gaps[k] = W2 gap between X_{k+1} and X_{k+2}
    std::vector<double> wall_seconds;     // per inner solve
    bool converged = false;
    int n_iters = 0;
    PathBundle final_paths;               // trajectories of the last inner solve
};

/// Max over checkpoints of W2 between corresponding clouds (exact in 1D,
/// sliced otherwise).
double convergence_gap(const CheckpointSet& a, const CheckpointSet& b, int n_slices = 64,
                       std::uint64_t slice_seed = 0x5eed);

/// Frozen-flow iteration started from the initial law held constant in time.
/// Every inner solve reuses the same seed, so iterates share their noise.
PicardRun picard_run(const CoefficientModel& model, const InitialLaw& law, const TimeGrid& grid,
                     std::size_t n, std::uint64_t seed, const PicardOptions& options);

struct PicardComparison {
    PicardRun run;
    PathBundle direct;
    double discrepancy = 0.0;  // sup over checkpoints of W2(Picard limit, interacting)
};

/// Compares the Picard limit with the interacting system under the same seed.
PicardComparison picard_vs_direct(const CoefficientModel& model, const InitialLaw& law,
                                  const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                  const PicardOptions& options);

/// Checkpoint clouds of a bundle at the given times (nearest grid steps).
CheckpointSet checkpoints_of(const PathBundle& paths, const std::vector<double>& times);

}  // namespace mvsim
