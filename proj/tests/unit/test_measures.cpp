#include <doctest.h>

#include <cmath>
#include <numbers>
#include <fstream>
#include <random>

#include "mvsim/error.hpp"
#include "mvsim/measures.hpp"
#include "mvsim/rng.hpp"
#include "support.hpp"

using namespace mvsim;
using test::column;

namespace {

StatisticFunctional fn(std::function<double(const Vec&)> f) { return {"f", std::move(f), 1}; }
const StatisticFunctional kKernel = fn([](const Vec& y) { return std::sin(y(0)) / (1.0 + y(0) * y(0)); });
const StatisticFunctional kSquare = fn([](const Vec& y) { return y(0) * y(0); });
const StatisticFunctional kIdentity = fn([](const Vec& y) { return y(0); });

EmpiricalMeasure normal_cloud(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    const NormalStream s(seed, StreamPurpose::kSampling, 0);
    PointMatrix p(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) p(static_cast<Eigen::Index>(i), 0) = mean + sd * s.at(i);
    return EmpiricalMeasure::uniform(p);
}

GridDensity box_density(const Axis& axis, double lo, double hi) {
    GridDensity g = GridDensity::zeros({axis});
    for (int i = 0; i < axis.nodes(); ++i) {
        const double x = axis.node(i);
        g.values[static_cast<std::size_t>(i)] = (x >= lo - 1e-12 && x <= hi + 1e-12) ? 1.0 : 0.0;
    }
    return g;
}

}  // namespace

TEST_CASE("empirical statistics examples") {
    const std::vector<StatisticFunctional> k{kKernel};
    CHECK(empirical_statistics(EmpiricalMeasure::uniform(column({0, 0, 0})), k)(0) == 0.0);
    const std::vector<StatisticFunctional> sq{kSquare};
    CHECK(empirical_statistics(EmpiricalMeasure::uniform(column({1, -1})), sq)(0) == doctest::Approx(1.0));
    const double half_pi = std::numbers::pi / 2;
    CHECK(empirical_statistics(EmpiricalMeasure::uniform(column({0, half_pi})), k)(0) ==
          doctest::Approx(0.5 / (1.0 + half_pi * half_pi)));
    CHECK(0.5 / (1.0 + half_pi * half_pi) == doctest::Approx(0.1444).epsilon(1e-3));
}

TEST_CASE("empirical statistics errors") {
    const std::vector<StatisticFunctional> inv{fn([](const Vec& y) { return 1.0 / y(0); })};
    try {
        empirical_statistics(EmpiricalMeasure::uniform(column({1, 2, 0, 3})), inv);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    const std::vector<StatisticFunctional> two{{"f", [](const Vec&) { return 0.0; }, 2}};
    CHECK_THROWS_AS(empirical_statistics(EmpiricalMeasure::uniform(column({1})), two), ArgumentError);
}

TEST_CASE("weighted measures need unit mass") {
    Vec w(2);
    w << 0.25, 0.75;
    CHECK_NOTHROW(EmpiricalMeasure::weighted(column({0, 1}), w));
    w << 0.25, 0.7;
    CHECK_THROWS_AS(EmpiricalMeasure::weighted(column({0, 1}), w), ArgumentError);
}

TEST_CASE("grid statistics") {
    const Axis axis{-8.0, 8.0, 1600};
    const GridDensity n01 = gaussian_density({axis}, Vec::Zero(1), Mat::Identity(1, 1));
    const std::vector<StatisticFunctional> odd{kKernel, kIdentity};
    const Vec s = grid_statistics(n01, odd);
    CHECK(std::abs(s(0)) < 1e-12);
    CHECK(std::abs(s(1)) < 1e-12);
    const std::vector<StatisticFunctional> sq{kSquare};
    CHECK(grid_statistics(n01, sq)(0) == doctest::Approx(1.0).epsilon(1e-4));

    GridDensity uni = GridDensity::zeros({Axis{0.0, 1.0, 1000}});
    std::fill(uni.values.begin(), uni.values.end(), 1.0);
    const std::vector<StatisticFunctional> id{kIdentity};
    CHECK(std::abs(grid_statistics(uni, id)(0) - 0.5) < 1e-6);

    const GridDensity plane = GridDensity::zeros({axis, axis});
    CHECK_THROWS_AS(grid_statistics(plane, id), ArgumentError);
}

TEST_CASE("kde examples") {
    const Axis axis{-2.0, 2.0, 400};
    const GridDensity one = kde_1d(EmpiricalMeasure::uniform(column({0.0})), axis, 0.3);
    const GridDensity ref = gaussian_density({axis}, Vec::Zero(1), Mat::Constant(1, 1, 0.09));
    CHECK(l1_grid_distance(one, ref) < 1e-6);

    const GridDensity two = kde_1d(EmpiricalMeasure::uniform(column({-1.0, 1.0})), axis, 0.1);
    const int mid = axis.cells / 2;
    int left = 0, right = mid;
    for (int i = 0; i < mid; ++i)
        if (two.values[static_cast<std::size_t>(i)] > two.values[static_cast<std::size_t>(left)]) left = i;
    for (int i = mid; i < axis.nodes(); ++i)
        if (two.values[static_cast<std::size_t>(i)] > two.values[static_cast<std::size_t>(right)]) right = i;
    CHECK(std::abs(axis.node(left) + 1.0) <= axis.step());
    CHECK(std::abs(axis.node(right) - 1.0) <= axis.step());

    const Axis wide{-8.0, 8.0, 1600};
    const GridDensity est = kde_1d(normal_cloud(100000, 5), wide, std::nullopt);
    CHECK(l1_grid_distance(est, gaussian_density({wide}, Vec::Zero(1), Mat::Identity(1, 1))) < 0.02);
    CHECK(std::abs(est.mass() - 1.0) < 1e-10);

    CHECK_THROWS_AS(kde_1d(normal_cloud(10, 1), axis, 0.0), ArgumentError);
    CHECK_THROWS_AS(kde_1d(normal_cloud(10, 1), axis, -1.0), ArgumentError);
}

TEST_CASE("kde has unit mass") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        PointMatrix p(2 + trial * 7, 1);
        for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, 0) = u(gen);
        const GridDensity g = kde_1d(EmpiricalMeasure::uniform(p), Axis{-5.0, 5.0, 300}, std::nullopt);
        CHECK(std::abs(g.mass() - 1.0) < 1e-10);
    }
}

TEST_CASE("kde statistics approach the empirical statistics") {
    const auto mu = normal_cloud(400, 21);
    const std::vector<StatisticFunctional> k{kKernel};
    const double target = empirical_statistics(mu, k)(0);
    const double coarse = std::abs(grid_statistics(kde_1d(mu, Axis{-8.0, 8.0, 1600}, 0.2), k)(0) - target);
    const double fine = std::abs(grid_statistics(kde_1d(mu, Axis{-8.0, 8.0, 3200}, 0.1), k)(0) - target);
    CHECK(fine <= 0.5 * coarse);
}

TEST_CASE("two dimensional kde") {
    const Axis a{-6.0, 6.0, 120};
    PointMatrix p(1, 2);
    p << 0.5, -0.5;
    Vec h(2);
    h << 0.4, 0.6;
    const GridDensity g = kde_2d(EmpiricalMeasure::uniform(p), a, a, h);
    Vec mean(2);
    mean << 0.5, -0.5;
    Mat cov = Mat::Zero(2, 2);
    cov(0, 0) = 0.16;
    cov(1, 1) = 0.36;
    CHECK(l1_grid_distance(g, gaussian_density({a, a}, mean, cov)) < 1e-3);
    CHECK(std::abs(g.mass() - 1.0) < 1e-10);
}

TEST_CASE("w2 in one dimension") {
    const auto a = EmpiricalMeasure::uniform(column({0.3, -1.0, 2.0}));
    CHECK(w2_empirical_1d(a, a) == 0.0);
    CHECK(w2_empirical_1d(EmpiricalMeasure::uniform(column({0})), EmpiricalMeasure::uniform(column({-2.5}))) ==
          doctest::Approx(2.5));
    CHECK(w2_empirical_1d(EmpiricalMeasure::uniform(column({0, 1})), EmpiricalMeasure::uniform(column({0, 3}))) ==
          doctest::Approx(std::sqrt(2.0)));
    PointMatrix plane(1, 2);
    plane << 0, 0;
    CHECK_THROWS_AS(w2_empirical_1d(EmpiricalMeasure::uniform(plane), EmpiricalMeasure::uniform(plane)),
                    ArgumentError);
}

TEST_CASE("w2 handles unequal sizes and weights") {
    // {0,1} vs {0.5}: every atom moves 0.5.
    CHECK(w2_empirical_1d(EmpiricalMeasure::uniform(column({0, 1})), EmpiricalMeasure::uniform(column({0.5}))) ==
          doctest::Approx(0.5));
    Vec w(2);
    w << 0.25, 0.75;
    const auto weighted = EmpiricalMeasure::weighted(column({0, 4}), w);
    CHECK(w2_empirical_1d(weighted, EmpiricalMeasure::uniform(column({0, 4, 4, 4}))) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("w2 is a metric on random clouds") {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 25;
        PointMatrix a(n, 1), b(n, 1), c(n, 1);
        for (int i = 0; i < n; ++i) {
            a(i, 0) = z(gen);
            b(i, 0) = 3 * z(gen) + 1;
            c(i, 0) = 0.5 * z(gen) - 2;
        }
        const auto A = EmpiricalMeasure::uniform(a), B = EmpiricalMeasure::uniform(b), C = EmpiricalMeasure::uniform(c);
        CHECK(w2_empirical_1d(A, B) == w2_empirical_1d(B, A));
        CHECK(w2_empirical_1d(A, C) <= w2_empirical_1d(A, B) + w2_empirical_1d(B, C) + 1e-10);
    }
}

TEST_CASE("sliced w2") {
    PointMatrix a(500, 2);
    const NormalStream s(3, StreamPurpose::kSampling, 0);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        a(i, 0) = s.at(2 * static_cast<std::uint64_t>(i));
        a(i, 1) = s.at(2 * static_cast<std::uint64_t>(i) + 1);
    }
    PointMatrix b = a;
    b.col(0).array() += 3.0;
    b.col(1).array() -= 4.0;
    const auto A = EmpiricalMeasure::uniform(a), B = EmpiricalMeasure::uniform(b);
    CHECK(w2_sliced(A, A, 32, 1) == 0.0);
    CHECK(w2_sliced(A, B, 4000, 1) == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(0.03));

    PointMatrix p(1, 2), q(1, 2);
    p << 1.0, 2.0;
    q << -0.5, 0.25;
    const auto dirs = slice_directions(2, 50, 8);
    double acc = 0.0;
    for (const Vec& th : dirs) acc += std::pow(th.dot(Vec(p.row(0).transpose() - q.row(0).transpose())), 2);
    CHECK(w2_sliced(EmpiricalMeasure::uniform(p), EmpiricalMeasure::uniform(q), 50, 8) ==
          doctest::Approx(std::sqrt(acc / 50)));
    CHECK_THROWS_AS(w2_sliced(A, B, 0, 1), ArgumentError);
}

TEST_CASE("w2 to the origin") {
    PointMatrix z = PointMatrix::Zero(4, 2);
    CHECK(w2_to_dirac0(EmpiricalMeasure::uniform(z)) == 0.0);
    PointMatrix p(1, 2);
    p << 3, 4;
    CHECK(w2_to_dirac0(EmpiricalMeasure::uniform(p)) == doctest::Approx(5.0));
    CHECK(w2_to_dirac0(EmpiricalMeasure::uniform(column({1, -1}))) == doctest::Approx(1.0));
}

TEST_CASE("l1 grid distance") {
    const Axis axis{-8.0, 8.0, 16000};
    const GridDensity p = gaussian_density({axis}, Vec::Zero(1), Mat::Identity(1, 1));
    CHECK(l1_grid_distance(p, p) == 0.0);
    Vec shift(1);
    shift << 0.1;
    const GridDensity r = gaussian_density({axis}, shift, Mat::Identity(1, 1));
    CHECK(l1_grid_distance(p, r) == doctest::Approx(2 * (test::normal_cdf(0.05) - test::normal_cdf(-0.05))).epsilon(1e-5));

    const Axis unit{-1.0, 3.0, 4000};
    CHECK(l1_grid_distance(box_density(unit, 0, 1), box_density(unit, 1, 2)) == doctest::Approx(2.0).epsilon(2e-3));
    CHECK_THROWS_AS(l1_grid_distance(p, GridDensity::zeros({Axis{-8.0, 8.0, 100}})), ArgumentError);
}

TEST_CASE("csv round trips") {
    test::TempDir dir("measures");
    const Axis ax{-1.0, 2.0, 30};
    const Axis ay{0.0, 1.0, 10};
    Mat cov = Mat::Identity(2, 2) * 0.3;
    const GridDensity g = gaussian_density({ax, ay}, Vec::Constant(2, 0.5), cov, 0.25);
    write_grid_csv(g, dir.path / "g.csv");
    const GridDensity back = read_grid_csv(dir.path / "g.csv");
    CHECK(back.axes == g.axes);
    CHECK(back.values == g.values);

    const GridDensity line = gaussian_density({ax}, Vec::Zero(1), Mat::Identity(1, 1));
    write_grid_csv(line, dir.path / "line.csv");
    const std::string text = [&] {
        std::ifstream in(dir.path / "line.csv");
        return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    CHECK(text.rfind("x,p\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == ax.nodes() + 1);

    Vec w(3);
    w << 0.2, 0.3, 0.5;
    PointMatrix pts(3, 2);
    pts << 1, 2, 3, 4, 5, 6.125;
    const auto mu = EmpiricalMeasure::weighted(pts, w);
    write_cloud_csv(mu, dir.path / "c.csv");
    const auto mu2 = read_cloud_csv(dir.path / "c.csv");
    CHECK(mu2.points == mu.points);
    CHECK(mu2.weights == mu.weights);
    CHECK_THROWS_AS(read_grid_csv(dir.path / "missing.csv"), IoError);
}
