#pragma once

#include <vector>

#include "mvsim/coefficients.hpp"
#include "mvsim/initial_law.hpp"
#include "mvsim/measures.hpp"

namespace mvsim {

enum class DtPolicy { kAuto, kFixed };

/// Nonlocal forward Kolmogorov problem
///   dp/dt = -sum_i d_i(b_i p) + 1/2 sum_ij d_i d_j (A_ij p),
/// with b and A = sigma sigma^T taken from the model at statistics
/// recomputed from p itself.
struct FPProblem {
    CoefficientModel model;
    GridDensity p0;
    double T = 1.0;
    DtPolicy dt_policy = DtPolicy::kAuto;
    double dt_fixed = 0.0;
    double cfl_safety = 0.9;
    std::vector<double> snapshot_times;
    double conservation_tol = 1e-4;
    double positivity_floor = -1e-3;
};

/// Builds p0 from a Gaussian law: sampled at the nodes, zero on the
/// boundary, renormalised to unit trapezoid mass. Throws unless the box
/// holds at least six standard deviations on each side.
FPProblem make_fp_problem(const CoefficientModel& model, const InitialLaw& law,
                          std::vector<Axis> axes, double T, std::vector<double> snapshot_times);

/// Drift b_i and diffusion A_ij at every node, node-major.
struct FPFields {
    int d = 1;
    Vec s;
    std::vector<double> b;  // node * d + i
    std::vector<double> a;  // (node * d + i) * d + j
};

FPFields derive_fp_coefficients(const CoefficientModel& model, double t, const GridDensity& p);

struct FPSolution {
    std::vector<GridDensity> snapshots;
    std::vector<double> step_times;       // t after each step, index 0 = initial
    std::vector<double> mass_curve;
    std::vector<double> min_value_curve;
    std::vector<double> boundary_flux;    // cumulative mass that left through the boundary
    std::vector<Vec> stats_curve;         // statistics used at each step
    std::size_t steps = 0;
    double dt_min = 0.0;
    double dt_max = 0.0;
    double max_cfl = 0.0;                 // max of dt * stability rate
    double max_conservation_error = 0.0;  // max |mass + flux - 1|
};

/// Largest stable explicit step for the given fields:
/// 1 / (2 max A11/dx^2 + 2 max A22/dy^2 + 2 max|A12|/(dx dy) + max|b1|/dx + max|b2|/dy).
double fp_stable_dt(const FPFields& fields, const std::vector<Axis>& axes);

/// Explicit Euler, donor-cell upwind advection in flux form, centred
/// differences of A p for diffusion (mixed term in flux form), p = 0 on the
/// boundary nodes.
FPSolution solve_fp(const FPProblem& problem);

/// grid_statistics of each snapshot.
std::vector<Vec> fp_statistics_curve(const FPSolution& solution,
                                     std::span<const StatisticFunctional> functionals);

}  // namespace mvsim
