#include <doctest.h>

#include <cmath>

#include "mvsim/error.hpp"
#include "mvsim/picard.hpp"
#include "mvsim/presets.hpp"
#include "support.hpp"

using namespace mvsim;
using test::column;

namespace {
CheckpointSet single(const PointMatrix& p) { return {{1.0}, {EmpiricalMeasure::uniform(p)}}; }
}  // namespace

TEST_CASE("convergence gap") {
    const CheckpointSet a{{0.5, 1.0},
                          {EmpiricalMeasure::uniform(column({0, 1, 2})), EmpiricalMeasure::uniform(column({3, 1}))}};
    CHECK(convergence_gap(a, a) == 0.0);
    CheckpointSet b = a;
    b.clouds[1].points.array() += 0.75;
    CHECK(convergence_gap(a, b) == doctest::Approx(0.75));
    CHECK(convergence_gap(single(column({0, 1})), single(column({0, 3}))) == doctest::Approx(std::sqrt(2.0)));

    CheckpointSet c = a;
    c.times[0] = 0.25;
    CHECK_THROWS_AS(convergence_gap(a, c), ArgumentError);
    CHECK_THROWS_AS(convergence_gap(a, single(column({0}))), ArgumentError);
}

TEST_CASE("convergence gap ignores particle labels") {
    const PointMatrix p = column({0.3, -2, 5, 1.25, 0});
    PointMatrix q = p;
    q.col(0).reverseInPlace();
    const PointMatrix r = column({1, 2, 3, 4, 5});
    CHECK(convergence_gap(single(p), single(r)) == convergence_gap(single(q), single(r)));
}

TEST_CASE("without measure dependence one comparison suffices") {
    const auto ou = make_preset("ou");
    const auto run = picard_run(ou.model, ou.law, TimeGrid(1.0, 50), 500, 3, {});
    CHECK(run.n_iters == 2);
    REQUIRE(run.gaps.size() == 1);
    CHECK(run.gaps[0] == 0.0);
    CHECK(run.converged);
    CHECK(picard_vs_direct(ou.model, ou.law, TimeGrid(1.0, 50), 500, 3, {}).discrepancy == 0.0);
}

TEST_CASE("mean-field ou picard limit") {
    const auto mf = make_preset("meanfield-ou");
    PicardOptions opt;
    const auto cmp = picard_vs_direct(mf.model, mf.law, TimeGrid(1.0, 100), 10000, 21, opt);
    CHECK(cmp.run.converged);
    CHECK(std::abs(cmp.run.iterates.back().flow.at(100)(0) - std::exp(-0.5)) < 0.02);
    CHECK(cmp.discrepancy < 3 * opt.tol);
}

TEST_CASE("example 5.1 gaps decay") {
    const auto ex = make_preset("example5-1");
    PicardOptions opt;
    opt.tol = 1e-14;
    opt.max_iters = 5;
    const auto run = picard_run(ex.model, ex.law, TimeGrid(1.0, 100), 10000, 4, opt);
    CHECK_FALSE(run.converged);
    CHECK(run.n_iters == 5);
    REQUIRE(run.gaps.size() == 4);
    for (std::size_t k = 1; k < run.gaps.size(); ++k) CHECK(run.gaps[k] < run.gaps[k - 1]);
}

TEST_CASE("tighter tolerance never loosens the result") {
    const auto ex = make_preset("example5-1");
    double prev_gap = INFINITY;
    double prev_disc = INFINITY;
    for (double tol : {1e-2, 1e-3, 1e-4}) {
        PicardOptions opt;
        opt.tol = tol;
        const auto cmp = picard_vs_direct(ex.model, ex.law, TimeGrid(1.0, 100), 5000, 6, opt);
        CHECK(std::isfinite(cmp.discrepancy));
        CHECK(cmp.run.gaps.back() <= prev_gap);
        CHECK(cmp.discrepancy <= prev_disc);
        prev_gap = cmp.run.gaps.back();
        prev_disc = cmp.discrepancy;
    }
}

TEST_CASE("checkpoints follow the requested times") {
    const auto mf = make_preset("meanfield-ou");
    PicardOptions opt;
    opt.checkpoint_times = {0.25, 1.0};
    const auto run = picard_run(mf.model, mf.law, TimeGrid(1.0, 40), 100, 2, opt);
    const auto& cp = run.iterates.back().checkpoints;
    CHECK(cp.times == opt.checkpoint_times);
    CHECK(cp.clouds[1].points == run.final_paths.snapshot(40).points);
}
