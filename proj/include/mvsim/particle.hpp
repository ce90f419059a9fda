#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mvsim/coefficients.hpp"
#include "mvsim/initial_law.hpp"
#include "mvsim/measures.hpp"

namespace mvsim {

/// Uniform grid on [0, T] with M steps.
struct TimeGrid {
    double T = 1.0;
    int M = 100;

    TimeGrid() = default;
    TimeGrid(double horizon, int steps);

    double dt() const { return T / M; }
    double time(int k) const { return k == M ? T : k * dt(); }
    std::vector<double> instants() const;
    /// Nearest grid index of a time in [0, T].
    int index_of(double t) const;
    bool operator==(const TimeGrid&) const = default;
};

/// Brownian increments laid out [step][particle][component].
struct BrownianIncrements {
    std::size_t n = 0;
    int m = 0;
    TimeGrid grid;
    std::vector<double> values;

    double at(int step, std::size_t particle, int k) const {
        return values[(static_cast<std::size_t>(step) * n + particle) * static_cast<std::size_t>(m) +
                      static_cast<std::size_t>(k)];
    }
};

/// N trajectories on a shared time grid together with the noise that drove
/// them and the statistic flow seen by the coefficients.
struct PathBundle {
    std::size_t n = 0;
    int d = 0;
    TimeGrid grid;
    std::uint64_t seed = 0;
    std::vector<double> states;  // [step][particle][coordinate]
    BrownianIncrements increments;
    StatisticFlow flow;

    double state(int step, std::size_t particle, int j) const {
        return states[(static_cast<std::size_t>(step) * n + particle) * static_cast<std::size_t>(d) +
                      static_cast<std::size_t>(j)];
    }
    Vec state_vec(int step, std::size_t particle) const;
    /// The particle cloud at one grid step, equal weights.
    EmpiricalMeasure snapshot(int step) const;
    std::size_t trajectory_scalars() const { return states.size(); }
};

/// i.i.d. N(0, dt) increments from per-particle counter-based streams.
/// Identical for identical arguments, independent of the worker count.
BrownianIncrements generate_brownian(std::uint64_t seed, std::size_t n, int m, const TimeGrid& grid);

/// Draws N initial states from the law (per-particle streams, seed-determined).
PointMatrix sample_initial(const InitialLaw& law, std::size_t n, std::uint64_t seed);

/// Euler-Maruyama for the interacting system: the statistic vector at each
/// step is the empirical average over the live cloud.
PathBundle simulate_interacting(const CoefficientModel& model, const InitialLaw& law,
                                const TimeGrid& grid, std::size_t n, std::uint64_t seed);

/// Euler-Maruyama with the statistics read from a frozen flow, so particles
/// evolve independently.
PathBundle simulate_frozen_flow(const CoefficientModel& model, const InitialLaw& law,
                                const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                const StatisticFlow& flow);

/// Statistic flow of a bundle: empirical statistics of each step's cloud.
/// Euler-Maruyama from a given initial cloud and given increments under a
/// frozen flow on the increments' grid. Used for refinement studies.
PathBundle simulate_driven(const CoefficientModel& model, const PointMatrix& init,
                           const BrownianIncrements& increments, const StatisticFlow& flow);

/// Sums each run of `factor` consecutive increments: the same Brownian
/// path seen on a grid with factor-times larger steps.
BrownianIncrements coarsen(const BrownianIncrements& fine, int factor);

StatisticFlow empirical_flow(const PathBundle& paths, const CoefficientModel& model);

/// Sample mean of ||X(t_k)||^p at each grid step.
std::vector<double> moment_curve(const PathBundle& paths, double p);

/// Rows "t,particle,x1[,x2...]". Returns false (and writes nothing) when the
/// bundle exceeds max_scalars unless force is set.
bool write_trajectories_csv(const PathBundle& paths, const std::filesystem::path& path,
                            bool force = false, std::size_t max_scalars = 100'000'000);

}  // namespace mvsim
