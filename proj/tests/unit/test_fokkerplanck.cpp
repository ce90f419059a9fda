#include <doctest.h>

#include <cmath>

#include "mvsim/error.hpp"
#include "mvsim/fokkerplanck.hpp"
#include "mvsim/particle.hpp"
#include "mvsim/presets.hpp"
#include "support.hpp"

using namespace mvsim;

namespace {

FPProblem heat_problem(int cells, double T, std::vector<double> snaps) {
    const auto bm = make_preset("bm", {{"sigma", std::sqrt(2.0)}, {"init_var", 1.0}});
    return make_fp_problem(bm.model, bm.law, {Axis{-10.0, 10.0, cells}}, T, std::move(snaps));
}

std::vector<Axis> preset_axes(const PresetInstance& p) {
    std::vector<Axis> axes;
    for (std::size_t i = 0; i < p.fp_grid.lo.size(); ++i)
        axes.push_back(Axis{p.fp_grid.lo[i], p.fp_grid.hi[i], p.fp_grid.cells[i]});
    return axes;
}

}  // namespace

TEST_CASE("derived coefficients") {
    const auto heat = make_preset("bm", {{"sigma", std::sqrt(2.0)}});
    const Axis axis{-5.0, 5.0, 50};
    const GridDensity p = gaussian_density({axis}, Vec::Zero(1), Mat::Identity(1, 1));
    const FPFields f = derive_fp_coefficients(heat.model, 0.0, p);
    CHECK(std::all_of(f.b.begin(), f.b.end(), [](double v) { return v == 0.0; }));
    CHECK(std::all_of(f.a.begin(), f.a.end(), [](double v) { return std::abs(v - 2.0) < 1e-14; }));

    const auto ex2 = make_preset("example5-2");
    const Axis a2{-3.0, 5.0, 16};
    Mat cov = Mat::Identity(2, 2) * 0.5;
    const FPFields f2 = derive_fp_coefficients(ex2.model, 0.0, gaussian_density({a2, a2}, Vec::Constant(2, 1.0), cov));
    for (std::size_t node = 0; node < f2.a.size() / 4; ++node) {
        CHECK(f2.a[node * 4 + 0] == doctest::Approx(0.25 * 2));
        CHECK(f2.a[node * 4 + 1] == doctest::Approx(0.4));
        CHECK(f2.a[node * 4 + 3] == doctest::Approx(0.25 * 2));
    }

    const auto ex1 = make_preset("example5-1");
    const Axis a1{-8.0, 8.0, 160};
    const GridDensity p1 = gaussian_density({a1}, Vec::Constant(1, 0.5), Mat::Identity(1, 1));
    const double t = 0.3;
    const FPFields f1 = derive_fp_coefficients(ex1.model, t, p1);
    const double I = grid_statistics(p1, ex1.model.functionals)(0);
    CHECK(f1.s(0) == doctest::Approx(I));
    for (int i = 0; i < a1.nodes(); i += 17) {
        const double x = a1.node(i);
        CHECK(f1.b[static_cast<std::size_t>(i)] == doctest::Approx(0.1 * (x + std::sin(t) + I)));
        CHECK(f1.a[static_cast<std::size_t>(i)] == doctest::Approx(x * x / 10));
    }
}

TEST_CASE("heat equation matches the heat kernel") {
    const FPSolution sol = solve_fp(heat_problem(2000, 1.0, {0.5, 1.0}));
    const Axis axis{-10.0, 10.0, 2000};
    for (const auto& snap : sol.snapshots) {
        const GridDensity exact = gaussian_density({axis}, Vec::Zero(1), Mat::Constant(1, 1, 1.0 + 2 * snap.time));
        CHECK(l1_grid_distance(snap, exact) < 1e-3);
    }
    CHECK(sol.snapshots.size() == 2);
    CHECK(sol.snapshots[0].time == 0.5);
    CHECK(sol.snapshots[1].time == 1.0);
}

TEST_CASE("heat equation converges under grid refinement") {
    double err[2];
    for (int r = 0; r < 2; ++r) {
        const int cells = 100 << r;
        const FPSolution sol = solve_fp(heat_problem(cells, 1.0, {1.0}));
        const GridDensity exact = gaussian_density({Axis{-10.0, 10.0, cells}}, Vec::Zero(1), Mat::Constant(1, 1, 3.0));
        err[r] = l1_grid_distance(sol.snapshots.back(), exact);
    }
    CHECK(err[0] / err[1] >= 1.8);
}

TEST_CASE("pure diffusion obeys the maximum principle") {
    const auto prob = heat_problem(400, 1.0, {0.1, 0.2, 0.5, 1.0});
    const double top = *std::max_element(prob.p0.values.begin(), prob.p0.values.end());
    for (const auto& s : solve_fp(prob).snapshots) CHECK(*std::max_element(s.values.begin(), s.values.end()) <= top);

    const auto bm2 = make_preset("bm", {{"d", 2}});
    Mat cov = Mat::Identity(2, 2);
    const auto law = InitialLaw::gaussian(Vec::Zero(2), cov * 0.3);
    const Axis a{-5.0, 5.0, 60};
    const auto p2 = make_fp_problem(bm2.model, law, {a, a}, 0.5, {0.25, 0.5});
    const double top2 = *std::max_element(p2.p0.values.begin(), p2.p0.values.end());
    for (const auto& s : solve_fp(p2).snapshots) CHECK(*std::max_element(s.values.begin(), s.values.end()) <= top2);
}

TEST_CASE("mass accounting for every preset") {
    for (const auto& info : list_presets()) {
        if (info.name == "gbm") continue;  // point mass start has no grid density
        const auto p = make_preset(info.name, info.name == "bm" ? ParamMap{{"d", 2}} : ParamMap{});
        auto axes = preset_axes(p);
        if (axes.size() == 2)
            for (auto& a : axes) a.cells = 80;
        const auto sol = solve_fp(make_fp_problem(p.model, p.law, axes, 0.2, {0.2}));
        CAPTURE(info.name);
        for (std::size_t k = 0; k < sol.mass_curve.size(); ++k)
            CHECK(std::abs(sol.mass_curve[k] + sol.boundary_flux[k] - 1.0) < 1e-8);
        CHECK(sol.max_cfl <= 0.9 + 1e-12);
    }
}

TEST_CASE("example 5.1 on the coarse published grid") {
    const auto ex = make_preset("example5-1");
    const auto sol = solve_fp(make_fp_problem(ex.model, ex.law, {Axis{-8.0, 8.0, 800}}, 1.0, {0.25, 0.5, 0.75, 1.0}));
    for (std::size_t k = 0; k < sol.mass_curve.size(); ++k) {
        CHECK(sol.mass_curve[k] <= 1.0 + 1e-12);
        CHECK(sol.mass_curve[k] + sol.boundary_flux[k] >= 0.999);
    }
    const auto I = fp_statistics_curve(sol, ex.model.functionals);
    for (const Vec& s : I) {
        CHECK(std::isfinite(s(0)));
        CHECK(std::abs(s(0)) <= 1.0);
    }
    // the density drifts right and spreads
    CHECK(grid_moment(sol.snapshots.back(), 2.0) > grid_moment(sol.snapshots.front(), 2.0));
}

TEST_CASE("statistics curves") {
    const auto ou = make_preset("ou");
    const auto sol = solve_fp(make_fp_problem(ou.model, ou.law, {Axis{-8.0, 8.0, 400}}, 0.5, {0.5}));
    const std::vector<StatisticFunctional> odd{{"odd", [](const Vec& y) { return std::sin(y(0)) / (1 + y(0) * y(0)); }, 1}};
    for (const Vec& s : fp_statistics_curve(sol, odd)) CHECK(std::abs(s(0)) < 1e-12);

    const auto mf = make_preset("meanfield-ou");
    const auto msol = solve_fp(make_fp_problem(mf.model, mf.law, {Axis{-3.0, 4.0, 1400}}, 1.0, {1.0}));
    REQUIRE(msol.stats_curve.size() == msol.step_times.size());
    for (std::size_t k = 0; k < msol.step_times.size(); k += 97)
        CHECK(std::abs(msol.stats_curve[k](0) - std::exp(-0.5 * msol.step_times[k])) < 1e-3);
}

TEST_CASE("particles and the density agree for mean-field ou") {
    const auto mf = make_preset("meanfield-ou");
    const Axis axis{mf.fp_grid.lo[0], mf.fp_grid.hi[0], mf.fp_grid.cells[0]};
    const auto sol = solve_fp(make_fp_problem(mf.model, mf.law, {axis}, 1.0, {1.0}));
    const auto paths = simulate_interacting(mf.model, mf.law, TimeGrid(1.0, 100), 100000, 3);
    CHECK(l1_grid_distance(kde_1d(paths.snapshot(100), axis, std::nullopt), sol.snapshots.back()) < 0.03);
}

TEST_CASE("solver errors") {
    auto prob = heat_problem(200, 0.1, {0.1});
    prob.dt_policy = DtPolicy::kFixed;
    prob.dt_fixed = 1.0;
    CHECK_THROWS_AS(solve_fp(prob), StabilityError);

    auto tight = heat_problem(200, 0.1, {0.1});
    tight.conservation_tol = -1.0;  // any accounting result at all is out of tolerance
    CHECK_THROWS_AS(solve_fp(tight), ConservationError);
    auto lumpy = heat_problem(200, 0.1, {0.1});
    lumpy.p0.values[static_cast<std::size_t>(100)] += 1e-3;
    CHECK_THROWS_AS(solve_fp(lumpy), ArgumentError);

    auto floor = heat_problem(200, 0.1, {0.1});
    floor.positivity_floor = 1e-300;
    CHECK_THROWS_AS(solve_fp(floor), PositivityError);

    const auto gbm = make_preset("gbm");
    CHECK_THROWS_AS(make_fp_problem(gbm.model, gbm.law, {Axis{-2.0, 6.0, 100}}, 1.0, {1.0}), ArgumentError);
    const auto bm = make_preset("bm");
    CHECK_THROWS_AS(make_fp_problem(bm.model, bm.law, {Axis{-3.0, 3.0, 100}}, 1.0, {1.0}), ArgumentError);
    CHECK_THROWS_AS(make_fp_problem(bm.model, bm.law, {Axis{-10.0, 10.0, 100}}, 1.0, {2.0}), ArgumentError);

    auto nan = test::linear_model(Mat::Identity(1, 1), Mat::Identity(1, 1));
    nan.b = [](double, const Vec& x, const Vec&) -> Vec { return x(0) > 3 ? Vec::Constant(1, std::nan("")) : x; };
    const auto law = InitialLaw::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    try {
        solve_fp(make_fp_problem(nan, law, {Axis{-8.0, 8.0, 160}}, 0.1, {0.1}));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("node (") != std::string::npos);
    }
}

TEST_CASE("fixed step below the limit is honoured") {
    auto prob = heat_problem(200, 0.1, {0.05, 0.1});
    const double stable = fp_stable_dt(derive_fp_coefficients(prob.model, 0.0, prob.p0), prob.p0.axes);
    prob.dt_policy = DtPolicy::kFixed;
    prob.dt_fixed = 0.5 * stable;
    const auto sol = solve_fp(prob);
    CHECK(sol.dt_max <= prob.dt_fixed);
    CHECK(sol.snapshots.back().time == 0.1);
}
