#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mvsim/error.hpp"
#include "mvsim/harness.hpp"
#include "support.hpp"

using namespace mvsim;
using nlohmann::json;

namespace {

json base() {
    return json{{"preset", "bm"}, {"methods", {"particles"}}, {"seed", 1}, {"particles", {{"N", 100}, {"steps", 10}}}};
}

std::string config_error_field(const json& doc) {
    try {
        parse_config(doc, "out");
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t lines(const std::filesystem::path& p) {
    const auto s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config validation names the field") {
    json j = base();
    j["methods"] = json::array();
    CHECK(config_error_field(j) == "methods");
    j = base();
    j.erase("seed");
    CHECK(config_error_field(j) == "seed");
    j = base();
    j["preset"] = "nope";
    CHECK(config_error_field(j) == "preset.name");
    j = base();
    j["snapshot_times"] = {0.5, 1.5};
    CHECK(config_error_field(j) == "snapshot_times[1]");
    j = base();
    j["snapshot_times"] = {0.55};
    CHECK(config_error_field(j) == "snapshot_times[0]");
    j = base();
    j["methods"] = {"particles", "teleport"};
    CHECK(config_error_field(j) == "methods[1]");
    j = base();
    j["particles"]["N"] = 0;
    CHECK(config_error_field(j) == "particles.N");
    j = base();
    j["sead"] = 3;
    CHECK(config_error_field(j) == "sead");
    j = base();
    j["preset"] = {{"name", "ou"}, {"params", {{"thetta", 2}}}};
    CHECK(config_error_field(j) == "preset.params");
    j = base();
    j["fp"] = {{"lo", {-1, -1}}};
    j["methods"] = {"fp"};
    CHECK(config_error_field(j) == "fp");
    j = base();
    j["fp"] = {{"as_printed", true}};
    CHECK(config_error_field(j) == "fp.as_printed");
    CHECK(config_error_field(base()) == "<none>");
}

TEST_CASE("config defaults and overrides") {
    json j = base();
    j["preset"] = {{"name", "ou"}, {"params", {{"theta", 2.5}}}};
    j["fp"] = {{"dt", "auto"}, {"cells", {300}}};
    const auto cfg = parse_config(j, "fallback");
    CHECK(cfg.preset == "ou");
    CHECK(cfg.params.at("theta") == 2.5);
    CHECK(cfg.snapshot_times == std::vector<double>{1.0});
    CHECK(cfg.output_dir == "fallback");
    CHECK_FALSE(cfg.fp_dt);
    CHECK(cfg.fp_cells == std::vector<int>{300});
}

TEST_CASE("invalid json is a config error") {
    test::TempDir dir("cfg");
    std::ofstream(dir.path / "bad.json") << "{ \"preset\": ";
    CHECK_THROWS_AS(load_config(dir.path / "bad.json"), ConfigError);
}

TEST_CASE("brownian motion: particles against the density") {
    test::TempDir dir("bm");
    json j = base();
    j["methods"] = {"particles", "fp"};
    j["particles"] = {{"N", 100000}, {"steps", 10}};
    j["output_dir"] = dir.path.string();
    const auto cfg = parse_config(j);
    const auto r = run_experiment(cfg);
    CHECK(r.failures.empty());
    REQUIRE(r.snapshots.back().l1_particle_fp);
    CHECK(*r.snapshots.back().l1_particle_fp < 0.03);

    const auto density = plot_path(cfg.output_dir, "bm", "fp", "t1");
    REQUIRE(std::filesystem::exists(density));
    CHECK(slurp(density).rfind("x,p\n", 0) == 0);
    CHECK(lines(density) == 2001 + 1);
    CHECK(std::filesystem::exists(cfg.output_dir / "bm" / "report.json"));
}

TEST_CASE("initial moments of the particle cloud") {
    test::TempDir dir("moments");
    json j = base();
    const std::size_t n = 20000;
    j["particles"] = {{"N", n}, {"steps", 10}};
    j["snapshot_times"] = {0.0};
    j["output_dir"] = dir.path.string();
    const auto r = run_experiment(parse_config(j));
    const MomentRow m = r.snapshots.front().moments.at("particles");
    const double rn = std::sqrt(static_cast<double>(n));
    // |Z|, Z^2, Z^4 for a standard normal start
    CHECK(std::abs(m.m1 - std::sqrt(2 / M_PI)) < 4 * std::sqrt(1 - 2 / M_PI) / rn);
    CHECK(std::abs(m.m2 - 1.0) < 4 * std::sqrt(2.0) / rn);
    CHECK(std::abs(m.m4 - 3.0) < 4 * std::sqrt(96.0) / rn);
}

TEST_CASE("example 5.1 with every method") {
    test::TempDir dir("ex51");
    const json j{{"preset", "example5-1"},
                 {"methods", {"particles", "picard", "fp", "malliavin"}},
                 {"seed", 5},
                 {"snapshot_times", {0.5, 1.0}},
                 {"particles", {{"N", 2000}, {"steps", 100}}},
                 {"malliavin", {{"paths", 20}}},
                 {"output_dir", dir.path.string()}};
    const auto cfg = parse_config(j);
    const auto r = run_experiment(cfg);
    CHECK(r.failures.empty());
    REQUIRE(r.malliavin);
    CHECK(r.malliavin->degenerate);
    CHECK(r.malliavin->violations == 0);
    REQUIRE(r.fp);
    CHECK(r.fp->max_conservation_error < 1e-8);
    REQUIRE(r.picard);
    CHECK(lines(plot_path(cfg.output_dir, "example5-1", "picard", "gaps")) ==
          static_cast<std::size_t>(r.picard->n_iters - 1) + 1);
    CHECK(r.snapshots.back().w2_particle_picard);

    const json rep = json::parse(slurp(cfg.output_dir / "example5-1" / "report.json"));
    CHECK(rep["config"]["seed"] == 5);
    CHECK(rep["malliavin"]["degenerate"] == true);
    CHECK(rep.contains("environment"));
    for (const auto& f : rep["files"]) CHECK(std::filesystem::exists(cfg.output_dir / "example5-1" / f.get<std::string>()));
}

TEST_CASE("elliptic malliavin gate") {
    test::TempDir dir("gate");
    const json j{{"preset", "meanfield-ou"},
                 {"methods", {"malliavin"}},
                 {"seed", 2},
                 {"particles", {{"N", 500}, {"steps", 100}}},
                 {"output_dir", dir.path.string()}};
    const auto r = run_experiment(parse_config(j));
    REQUIRE(r.malliavin);
    CHECK_FALSE(r.malliavin->degenerate);
    CHECK(r.malliavin->min_margin >= -r.malliavin->max_slack);
    CHECK(r.malliavin->violations == 0);
}

TEST_CASE("example 5.2 surfaces at the published panel times") {
    test::TempDir dir("ex52");
    const json j{{"preset", "example5-2"},
                 {"methods", {"fp"}},
                 {"seed", 1},
                 {"snapshot_times", {0.25, 0.5, 0.75, 1.0}},
                 {"fp", {{"cells", {100, 100}}}},
                 {"output_dir", dir.path.string()}};
    const auto cfg = parse_config(j);
    const auto r = run_experiment(cfg);
    CHECK(r.failures.empty());
    for (const char* label : {"t0.25", "t0.5", "t0.75", "t1"}) {
        const auto p = plot_path(cfg.output_dir, "example5-2", "fp", label);
        REQUIRE(std::filesystem::exists(p));
        CHECK(slurp(p).rfind("x,y,p\n", 0) == 0);
        CHECK(lines(p) == 101 * 101 + 1);
    }
}

TEST_CASE("printed forms run behind the switch") {
    test::TempDir dir("printed");
    const json j{{"preset", "example5-1"}, {"methods", {"fp"}}, {"seed", 1}, {"fp", {{"as_printed", true}, {"cells", {400}}}},
                 {"output_dir", dir.path.string()}};
    const auto cfg = parse_config(j);
    const auto r = run_experiment(cfg);
    CHECK(r.failures.empty());
    REQUIRE(r.fp);
    CHECK(r.fp->as_printed);
    CHECK(std::filesystem::exists(plot_path(cfg.output_dir, "example5-1", "fp-as-printed", "t1")));
}

TEST_CASE("a failing method leaves a partial report") {
    test::TempDir dir("partial");
    json j = base();
    j["methods"] = {"particles", "fp"};
    j["fp"] = {{"lo", {-2.0}}, {"hi", {2.0}}};
    j["output_dir"] = dir.path.string();
    const auto cfg = parse_config(j);
    const auto r = run_experiment(cfg);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].method == "fp");
    CHECK(r.snapshots.back().moments.count("particles") == 1);
    const json rep = json::parse(slurp(cfg.output_dir / "bm" / "report.json"));
    CHECK(rep["failures"].size() == 1);
}

TEST_CASE("identical configs give identical bytes") {
    test::TempDir a("det-a");
    test::TempDir b("det-b");
    json j{{"preset", "meanfield-ou"},
           {"methods", {"particles", "picard", "fp", "malliavin"}},
           {"seed", 9},
           {"snapshot_times", {0.5, 1.0}},
           {"particles", {{"N", 1000}, {"steps", 50}}},
           {"fp", {{"cells", {300}}}},
           {"malliavin", {{"paths", 10}}}};
    j["output_dir"] = a.path.string();
    j["threads"] = 1;
    run_experiment(parse_config(j));
    j["output_dir"] = b.path.string();
    j["threads"] = 3;
    run_experiment(parse_config(j));
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a.path)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto rel = std::filesystem::relative(e.path(), a.path);
        CAPTURE(rel.string());
        CHECK(slurp(e.path()) == slurp(b.path / rel));
    }
    CHECK(files > 10);
}

TEST_CASE("plot data helpers") {
    test::TempDir dir("plot");
    CHECK(plot_path("root", "ou", "fp", "t0.5") == std::filesystem::path("root/ou/fp/ou_fp_t0.5.csv"));
    CHECK(time_label(0.25) == "t0.25");
    CHECK(time_label(1.0) == "t1");
    emit_plotdata({"a", "b"}, {{1, 2, 3}, {4, 5, 6}}, dir.path / "c.csv");
    CHECK(slurp(dir.path / "c.csv") == "a,b\n1,4\n2,5\n3,6\n");
    CHECK_THROWS_AS(emit_plotdata({"a"}, {{1}, {2}}, dir.path / "d.csv"), ArgumentError);
    CHECK_THROWS_AS(emit_plotdata({"a", "b"}, {{1}, {2, 3}}, dir.path / "d.csv"), ArgumentError);
    emit_gap_log({0.5, 0.01}, nullptr, dir.path / "g.csv");
    CHECK(slurp(dir.path / "g.csv") == "iter,gap\n2,0.5\n3,0.01\n");
}
