// Command-line front end for the mvsim toolkit.
#include <cstdlib>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "mvsim/error.hpp"
#include "mvsim/harness.hpp"
#include "mvsim/io.hpp"

namespace {

using namespace mvsim;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string outdir;
    bool as_printed = false;
    std::optional<unsigned> threads;
};

std::filesystem::path default_outdir() {
    if (const char* env = std::getenv("MVSIM_OUTDIR"); env && *env) return env;
    return "mvsim-out";
}

ExperimentConfig prepare(const std::string& path, const Overrides& o, std::optional<Method> only) {
    ExperimentConfig cfg = load_config(path, default_outdir());
    if (o.seed) cfg.seed = *o.seed;
    if (!o.outdir.empty()) cfg.output_dir = o.outdir;
    if (o.as_printed) cfg.as_printed = true;
    if (o.threads) cfg.threads = *o.threads;
    if (only) {
        // malliavin reuses particle paths when they are requested alongside it
        cfg.methods = {*only};
    }
    validate_config(cfg);
    return cfg;
}

int report_outcome(const ExperimentConfig& cfg, const ComparisonReport& r) {
    std::cout << "wrote " << (cfg.output_dir / cfg.preset / "report.json").string() << " (" << r.files.size()
              << " files)\n";
    for (const auto& s : r.snapshots) {
        std::cout << "  t=" << format_double(s.t);
        if (s.l1_particle_fp) std::cout << "  L1(particles,fp)=" << format_double(*s.l1_particle_fp);
        if (s.w2_particle_picard) std::cout << "  W2(particles,picard)=" << format_double(*s.w2_particle_picard);
        std::cout << '\n';
    }
    if (r.picard)
        std::cout << "  picard: " << r.picard->n_iters << " iterations, "
                  << (r.picard->converged ? "converged" : "not converged") << '\n';
    if (r.fp)
        std::cout << "  fp: " << r.fp->steps << " steps, conservation error " << format_double(r.fp->max_conservation_error)
                  << ", min value " << format_double(r.fp->min_value) << '\n';
    if (r.malliavin)
        std::cout << "  malliavin: min lambda_min(Q(T)) " << format_double(r.malliavin->min_lambda_min)
                  << ", min margin " << format_double(r.malliavin->min_margin) << ", violations "
                  << r.malliavin->violations << (r.malliavin->degenerate ? " (degenerate: lambda ~ 0)" : "") << '\n';
    for (const auto& f : r.failures) std::cerr << "error: " << f.method << ": " << f.error << '\n';
    return r.failures.empty() ? 0 : 3;
}

int cmd_presets() {
    for (const auto& p : list_presets()) {
        std::cout << p.name << "  " << p.description;
        if (!p.reference.empty()) std::cout << "  [" << p.reference << "]";
        std::cout << '\n';
        for (const auto& [k, v] : p.defaults) std::cout << "    " << k << " = " << format_double(v) << '\n';
    }
    return 0;
}

int cmd_check_ellipticity(const std::string& name, std::uint64_t seed, std::size_t samples) {
    const PresetInstance inst = make_preset(name);
    const auto& m = inst.model;
    SampleRegion region{0.0, 1.0, Vec::Map(inst.fp_grid.lo.data(), m.d), Vec::Map(inst.fp_grid.hi.data(), m.d)};
    std::vector<Vec> s_samples;
    if (m.q() > 0) {
        // statistics of the initial law as a representative measure argument
        PointMatrix pts(1, m.d);
        for (int i = 0; i < m.d; ++i) pts(0, i) = inst.law.mean(i);
        s_samples.push_back(empirical_statistics(EmpiricalMeasure::uniform(pts), m.functionals));
    } else {
        s_samples.push_back(Vec(0));
    }
    const EllipticityReport rep = check_ellipticity(m, region, s_samples, samples, seed);
    std::cout << "preset " << name << ": min lambda(sigma sigma^T) over " << rep.n_samples
              << " samples = " << format_double(rep.lambda_min_estimate) << " at t=" << format_double(rep.argmin_t)
              << " x=(";
    for (int i = 0; i < rep.argmin_x.size(); ++i) std::cout << (i ? "," : "") << format_double(rep.argmin_x(i));
    std::cout << ")\n";
    if (inst.lambda) std::cout << "analytic constant: " << format_double(*inst.lambda) << '\n';
    if (rep.lambda_min_estimate <= 1e-10) std::cout << "degenerate: no uniform ellipticity on the sampled box\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"McKean-Vlasov simulation toolkit"};
    app.require_subcommand(1);

    Overrides o;
    std::uint64_t seed_value = 0;
    unsigned threads_value = 1;
    auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
    app.add_option("--outdir", o.outdir, "output root (default $MVSIM_OUTDIR or ./mvsim-out)");
    app.add_flag("--as-printed", o.as_printed, "solve the literal printed Fokker-Planck forms");
    auto* threads_opt = app.add_option("--threads", threads_value, "worker threads")->check(CLI::PositiveNumber);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run every method listed in a config");
    run->add_option("config", config_path, "config JSON")->required()->check(CLI::ExistingFile);
    auto* fp = app.add_subcommand("fp", "run only the Fokker-Planck solver for a config");
    fp->add_option("config", config_path, "config JSON")->required()->check(CLI::ExistingFile);
    auto* mal = app.add_subcommand("malliavin", "run only the Malliavin diagnostics for a config");
    mal->add_option("config", config_path, "config JSON")->required()->check(CLI::ExistingFile);
    auto* presets = app.add_subcommand("presets", "list presets and their default parameters");
    std::string preset_name;
    std::size_t samples = 4096;
    auto* ell = app.add_subcommand("check-ellipticity", "sample sigma sigma^T over the preset's grid box");
    ell->add_option("preset", preset_name)->required();
    ell->add_option("--samples", samples, "number of sample points")->check(CLI::PositiveNumber);

    for (auto* sub : {run, fp, mal, presets, ell}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) o.seed = seed_value;
    if (*threads_opt) o.threads = threads_value;

    try {
        if (*presets) return cmd_presets();
        if (*ell) return cmd_check_ellipticity(preset_name, o.seed.value_or(1), samples);
        std::optional<Method> only;
        if (*fp) only = Method::kFp;
        if (*mal) only = Method::kMalliavin;
        const ExperimentConfig cfg = prepare(config_path, o, only);
        return report_outcome(cfg, run_experiment(cfg));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
