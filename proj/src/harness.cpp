#include "mvsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "mvsim/error.hpp"
#include "mvsim/io.hpp"
#include "mvsim/malliavin.hpp"
#include "mvsim/parallel.hpp"
#include "mvsim/picard.hpp"

namespace mvsim {

using nlohmann::json;

namespace {

constexpr const char* kToolkitVersion = "0.1.0";

const std::map<std::string, Method>& method_table() {
    static const std::map<std::string, Method> table{
        {"particles", Method::kParticles},
        {"picard", Method::kPicard},
        {"fp", Method::kFp},
        {"malliavin", Method::kMalliavin},
    };
    return table;
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
}

double get_positive(const json& j, const std::string& path) {
    const double v = get_number(j, path);
    if (!(v > 0.0)) throw ConfigError(path, "must be positive");
    return v;
}

long long get_integer(const json& j, const std::string& path, long long min_value) {
    if (!j.is_number_integer()) throw ConfigError(path, "must be an integer");
    const auto v = j.get<long long>();
    if (v < min_value) throw ConfigError(path, "must be >= " + std::to_string(min_value));
    return v;
}

bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "must be true or false");
    return j.get<bool>();
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown field");
    }
}

template <class T, class F>
std::vector<T> get_array(const json& j, const std::string& path, F&& element) {
    if (!j.is_array()) throw ConfigError(path, "must be an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(element(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json moments_json(const MomentRow& m) { return json{{"order1", m.m1}, {"order2", m.m2}, {"order4", m.m4}}; }

MomentRow cloud_moments(const EmpiricalMeasure& mu) {
    return {empirical_moment(mu, 1.0), empirical_moment(mu, 2.0), empirical_moment(mu, 4.0)};
}

MomentRow grid_moments(const GridDensity& p) {
    return {grid_moment(p, 1.0), grid_moment(p, 2.0), grid_moment(p, 4.0)};
}

std::vector<Axis> fp_axes(const ExperimentConfig& cfg, const PresetInstance& inst) {
    const auto& lo = cfg.fp_lo.empty() ? inst.fp_grid.lo : cfg.fp_lo;
    const auto& hi = cfg.fp_hi.empty() ? inst.fp_grid.hi : cfg.fp_hi;
    const auto& cells = cfg.fp_cells.empty() ? inst.fp_grid.cells : cfg.fp_cells;
    const auto d = static_cast<std::size_t>(inst.model.d);
    if (lo.size() != d || hi.size() != d || cells.size() != d)
        throw ConfigError("fp", "lo, hi and cells need one entry per dimension (" + std::to_string(d) + ")");
    std::vector<Axis> axes;
    for (std::size_t i = 0; i < d; ++i) {
        if (!(hi[i] > lo[i])) throw ConfigError("fp.hi[" + std::to_string(i) + "]", "must exceed fp.lo");
        axes.push_back(Axis{lo[i], hi[i], cells[i]});
    }
    return axes;
}

std::string describe(const std::exception& e) { return e.what(); }

}  // namespace

std::string method_name(Method m) {
    for (const auto& [name, value] : method_table())
        if (value == m) return name;
    return "?";
}

bool ExperimentConfig::has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& default_outdir) {
    reject_unknown(doc, "",
                   {"preset", "methods", "seed", "T", "snapshot_times", "particles", "picard", "fp", "malliavin",
                    "kde", "output_dir", "threads", "record_timing", "export_trajectories"});
    ExperimentConfig cfg;

    if (!doc.contains("preset")) throw ConfigError("preset", "required");
    const json& preset = doc["preset"];
    if (preset.is_string()) {
        cfg.preset = preset.get<std::string>();
    } else if (preset.is_object()) {
        reject_unknown(preset, "preset", {"name", "params"});
        if (!preset.contains("name") || !preset["name"].is_string()) throw ConfigError("preset.name", "required string");
        cfg.preset = preset["name"].get<std::string>();
        if (preset.contains("params")) {
            const json& params = preset["params"];
            if (!params.is_object()) throw ConfigError("preset.params", "must be an object");
            for (const auto& [key, value] : params.items())
                cfg.params[key] = get_number(value, "preset.params." + key);
        }
    } else {
        throw ConfigError("preset", "must be a name or an object with name and params");
    }

    if (!doc.contains("methods")) throw ConfigError("methods", "required");
    cfg.methods = get_array<Method>(doc["methods"], "methods", [](const json& j, const std::string& path) {
        if (!j.is_string()) throw ConfigError(path, "must be a method name");
        const auto it = method_table().find(j.get<std::string>());
        if (it == method_table().end())
            throw ConfigError(path, "unknown method '" + j.get<std::string>() + "' (particles, picard, fp, malliavin)");
        return it->second;
    });

    if (!doc.contains("seed")) throw ConfigError("seed", "required");
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
        throw ConfigError("seed", "must be a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();

    if (doc.contains("T")) cfg.T = get_positive(doc["T"], "T");
    if (doc.contains("snapshot_times"))
        cfg.snapshot_times = get_array<double>(doc["snapshot_times"], "snapshot_times", get_number);
    else
        cfg.snapshot_times = {cfg.T};

    if (doc.contains("particles")) {
        const json& p = doc["particles"];
        reject_unknown(p, "particles", {"N", "steps"});
        if (p.contains("N")) cfg.n_particles = static_cast<std::size_t>(get_integer(p["N"], "particles.N", 1));
        if (p.contains("steps")) cfg.steps = static_cast<int>(get_integer(p["steps"], "particles.steps", 1));
    }
    if (doc.contains("picard")) {
        const json& p = doc["picard"];
        reject_unknown(p, "picard", {"tol", "max_iters", "n_slices"});
        if (p.contains("tol")) cfg.picard_tol = get_positive(p["tol"], "picard.tol");
        if (p.contains("max_iters")) cfg.picard_max_iters = static_cast<int>(get_integer(p["max_iters"], "picard.max_iters", 1));
        if (p.contains("n_slices")) cfg.n_slices = static_cast<int>(get_integer(p["n_slices"], "picard.n_slices", 1));
    }
    if (doc.contains("fp")) {
        const json& f = doc["fp"];
        reject_unknown(f, "fp", {"lo", "hi", "cells", "dt", "as_printed"});
        if (f.contains("lo")) cfg.fp_lo = get_array<double>(f["lo"], "fp.lo", get_number);
        if (f.contains("hi")) cfg.fp_hi = get_array<double>(f["hi"], "fp.hi", get_number);
        if (f.contains("cells"))
            cfg.fp_cells = get_array<int>(f["cells"], "fp.cells", [](const json& j, const std::string& path) {
                return static_cast<int>(get_integer(j, path, 2));
            });
        if (f.contains("dt")) {
            if (f["dt"].is_string()) {
                if (f["dt"].get<std::string>() != "auto") throw ConfigError("fp.dt", "must be \"auto\" or a positive number");
            } else {
                cfg.fp_dt = get_positive(f["dt"], "fp.dt");
            }
        }
        if (f.contains("as_printed")) cfg.as_printed = get_bool(f["as_printed"], "fp.as_printed");
    }
    if (doc.contains("malliavin")) {
        const json& m = doc["malliavin"];
        reject_unknown(m, "malliavin", {"paths", "diagnostic_paths", "slack_factor", "lambda"});
        if (m.contains("paths")) cfg.malliavin_paths = static_cast<std::size_t>(get_integer(m["paths"], "malliavin.paths", 1));
        if (m.contains("diagnostic_paths"))
            cfg.malliavin_diagnostic_paths = static_cast<std::size_t>(get_integer(m["diagnostic_paths"], "malliavin.diagnostic_paths", 0));
        if (m.contains("slack_factor")) {
            cfg.slack_factor = get_number(m["slack_factor"], "malliavin.slack_factor");
            if (cfg.slack_factor < 0.0) throw ConfigError("malliavin.slack_factor", "must be >= 0");
        }
        if (m.contains("lambda")) {
            cfg.lambda = get_number(m["lambda"], "malliavin.lambda");
            if (*cfg.lambda < 0.0) throw ConfigError("malliavin.lambda", "must be >= 0");
        }
    }
    if (doc.contains("kde")) {
        const json& k = doc["kde"];
        reject_unknown(k, "kde", {"bandwidth"});
        if (k.contains("bandwidth")) {
            if (k["bandwidth"].is_string()) {
                if (k["bandwidth"].get<std::string>() != "auto")
                    throw ConfigError("kde.bandwidth", "must be \"auto\" or a positive number");
            } else {
                cfg.kde_bandwidth = get_positive(k["bandwidth"], "kde.bandwidth");
            }
        }
    }
    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string()) throw ConfigError("output_dir", "must be a string");
        cfg.output_dir = doc["output_dir"].get<std::string>();
    } else {
        cfg.output_dir = default_outdir.empty() ? std::filesystem::path("mvsim-out") : default_outdir;
    }
    if (doc.contains("threads")) cfg.threads = static_cast<unsigned>(get_integer(doc["threads"], "threads", 1));
    if (doc.contains("record_timing")) cfg.record_timing = get_bool(doc["record_timing"], "record_timing");
    if (doc.contains("export_trajectories"))
        cfg.export_trajectories = get_bool(doc["export_trajectories"], "export_trajectories");

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::filesystem::path& default_outdir) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc, default_outdir);
}

void validate_config(const ExperimentConfig& cfg) {
    if (!has_preset(cfg.preset)) throw ConfigError("preset.name", "unknown preset '" + cfg.preset + "'");
    PresetInstance inst;
    try {
        inst = make_preset(cfg.preset, cfg.params);
    } catch (const ArgumentError& e) {
        throw ConfigError("preset.params", e.what());
    }
    if (cfg.methods.empty()) throw ConfigError("methods", "must name at least one method");
    if (!(cfg.T > 0.0)) throw ConfigError("T", "must be positive");
    if (cfg.threads < 1) throw ConfigError("threads", "must be >= 1");
    if (cfg.snapshot_times.empty()) throw ConfigError("snapshot_times", "must not be empty");
    const bool particle_grid = cfg.has(Method::kParticles) || cfg.has(Method::kPicard) || cfg.has(Method::kMalliavin);
    const double dt = cfg.T / cfg.steps;
    for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i) {
        const double t = cfg.snapshot_times[i];
        const std::string path = "snapshot_times[" + std::to_string(i) + "]";
        if (t < 0.0 || t > cfg.T) throw ConfigError(path, "must lie in [0, T]");
        if (particle_grid && std::abs(t / dt - std::round(t / dt)) > 1e-6)
            throw ConfigError(path, "is not a multiple of the particle step T/steps");
    }
    if (cfg.as_printed && !inst.as_printed)
        throw ConfigError("fp.as_printed", "preset '" + cfg.preset + "' has no printed variant");
    if (cfg.has(Method::kFp)) fp_axes(cfg, inst);
}

std::string time_label(double t) { return "t" + format_double(t); }

std::filesystem::path plot_path(const std::filesystem::path& root, const std::string& preset, const std::string& method,
                                const std::string& label) {
    return root / preset / method / (preset + "_" + method + "_" + label + ".csv");
}

void emit_plotdata(const GridDensity& p, const std::filesystem::path& path) { write_grid_csv(p, path); }

void emit_plotdata(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns,
                   const std::filesystem::path& path) {
    if (header.size() != columns.size()) throw ArgumentError("emit_plotdata: header and columns differ in count");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != rows) throw ArgumentError("emit_plotdata: ragged columns");
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
    out += '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (j) out += ',';
            out += format_double(columns[j][r]);
        }
        out += '\n';
    }
    write_file_atomic(path, out);
}

void emit_gap_log(const std::vector<double>& gaps, const std::vector<double>* wall_seconds,
                  const std::filesystem::path& path) {
    std::string out = wall_seconds ? "iter,gap,wall_time\n" : "iter,gap\n";
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        // gaps[k] compares inner solves k+1 and k+2; rows are labelled by the later one.
        out += std::to_string(k + 2) + ',' + format_double(gaps[k]);
        if (wall_seconds) out += ',' + format_double((*wall_seconds)[k + 1]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

json ComparisonReport::to_json(const ExperimentConfig& cfg) const {
    json j;
    j["toolkit_version"] = kToolkitVersion;
    j["environment"] = {
        {"compiler", __VERSION__},
        {"cxx_standard", static_cast<long>(__cplusplus)},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
    };
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(method_name(m));
    j["config"] = {
        {"preset", preset},
        {"params", params},
        {"methods", methods},
        {"seed", seed},
        {"T", cfg.T},
        {"snapshot_times", cfg.snapshot_times},
        {"particles", {{"N", cfg.n_particles}, {"steps", cfg.steps}}},
        {"picard", {{"tol", cfg.picard_tol}, {"max_iters", cfg.picard_max_iters}, {"n_slices", cfg.n_slices}}},
        {"fp", {{"as_printed", cfg.as_printed}, {"dt", cfg.fp_dt ? json(*cfg.fp_dt) : json("auto")}}},
        {"malliavin", {{"paths", cfg.malliavin_paths}, {"slack_factor", cfg.slack_factor}}},
        {"kde", {{"bandwidth", cfg.kde_bandwidth ? json(*cfg.kde_bandwidth) : json("auto")}}},
    };
    json snaps = json::array();
    for (const auto& s : snapshots) {
        json row{{"t", s.t}};
        if (s.l1_particle_fp) row["l1_particle_fp"] = *s.l1_particle_fp;
        if (s.w2_particle_picard) row["w2_particle_picard"] = *s.w2_particle_picard;
        json mom = json::object();
        for (const auto& [method, m] : s.moments) mom[method] = moments_json(m);
        row["moments"] = mom;
        snaps.push_back(row);
    }
    j["snapshots"] = snaps;
    if (fp)
        j["fp"] = {{"steps", fp->steps},
                   {"dt_min", fp->dt_min},
                   {"dt_max", fp->dt_max},
                   {"max_cfl", fp->max_cfl},
                   {"mass_min", fp->mass_min},
                   {"mass_max", fp->mass_max},
                   {"min_value", fp->min_value},
                   {"boundary_flux", fp->boundary_flux},
                   {"max_conservation_error", fp->max_conservation_error},
                   {"as_printed", fp->as_printed}};
    if (picard) {
        j["picard"] = {{"n_iters", picard->n_iters}, {"converged", picard->converged}, {"gaps", picard->gaps}};
        if (picard->discrepancy_to_interacting) j["picard"]["discrepancy_to_interacting"] = *picard->discrepancy_to_interacting;
    }
    if (malliavin)
        j["malliavin"] = {{"paths", malliavin->paths},
                          {"lambda", malliavin->lambda},
                          {"lambda_estimated", malliavin->lambda_estimated},
                          {"degenerate", malliavin->degenerate},
                          {"min_lambda_min", malliavin->min_lambda_min},
                          {"min_margin", malliavin->min_margin},
                          {"max_slack", malliavin->max_slack},
                          {"violations", malliavin->violations},
                          {"max_zy_residual", malliavin->max_zy_residual}};
    json fail = json::array();
    for (const auto& f : failures) fail.push_back({{"method", f.method}, {"error", f.error}});
    j["failures"] = fail;
    std::vector<std::string> names;
    for (const auto& f : files) names.push_back(f.generic_string());
    std::sort(names.begin(), names.end());
    j["files"] = names;
    return j;
}

ComparisonReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    set_thread_count(cfg.threads);
    const PresetInstance inst = make_preset(cfg.preset, cfg.params);
    const CoefficientModel& model = inst.model;
    const std::filesystem::path root = cfg.output_dir;
    const std::filesystem::path preset_dir = root / cfg.preset;
    const std::string& name = cfg.preset;

    ComparisonReport report;
    report.preset = name;
    report.params = inst.params;
    report.seed = cfg.seed;
    std::vector<double> times = cfg.snapshot_times;
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (double t : times) report.snapshots.push_back(SnapshotMetrics{t, {}, {}, {}});

    auto written = [&](const std::filesystem::path& p) {
        report.files.push_back(std::filesystem::relative(p, preset_dir));
    };
    auto fail = [&](Method m, const std::exception& e) {
        report.failures.push_back({method_name(m), describe(e)});
    };

    const TimeGrid grid(cfg.T, cfg.steps);
    std::optional<PathBundle> particles;
    std::optional<PicardRun> picard;

    if (cfg.has(Method::kParticles)) {
        try {
            particles = simulate_interacting(model, inst.law, grid, cfg.n_particles, cfg.seed);
            for (auto& snap : report.snapshots) {
                const EmpiricalMeasure cloud = particles->snapshot(grid.index_of(snap.t));
                const auto path = plot_path(root, name, "particles", time_label(snap.t));
                write_cloud_csv(cloud, path);
                written(path);
                snap.moments["particles"] = cloud_moments(cloud);
            }
            const auto m2 = moment_curve(*particles, 2.0);
            const auto path = plot_path(root, name, "particles", "moment2");
            emit_plotdata({"t", "moment2"}, {grid.instants(), m2}, path);
            written(path);
            if (cfg.export_trajectories) {
                const auto tpath = plot_path(root, name, "particles", "trajectories");
                if (write_trajectories_csv(*particles, tpath))
                    written(tpath);
                else
                    std::cerr << "warning: trajectory export skipped (" << particles->trajectory_scalars()
                              << " scalars exceeds the 1e8 limit)\n";
            }
        } catch (const Error& e) {
            particles.reset();
            fail(Method::kParticles, e);
        }
    }

    if (cfg.has(Method::kPicard)) {
        try {
            PicardOptions opt;
            opt.tol = cfg.picard_tol;
            opt.max_iters = cfg.picard_max_iters;
            opt.checkpoint_times = times;
            opt.n_slices = cfg.n_slices;
            opt.slice_seed = cfg.seed;
            picard = picard_run(model, inst.law, grid, cfg.n_particles, cfg.seed, opt);
            PicardSummary sum{picard->n_iters, picard->converged, picard->gaps, {}};
            const auto& limit = picard->iterates.back().checkpoints;
            for (std::size_t k = 0; k < report.snapshots.size(); ++k) {
                auto& snap = report.snapshots[k];
                const auto path = plot_path(root, name, "picard", time_label(snap.t));
                write_cloud_csv(limit.clouds[k], path);
                written(path);
                snap.moments["picard"] = cloud_moments(limit.clouds[k]);
                if (particles) {
                    const auto direct = particles->snapshot(grid.index_of(snap.t));
                    snap.w2_particle_picard = w2_auto(direct, limit.clouds[k], cfg.n_slices, cfg.seed);
                }
            }
            if (particles)
                sum.discrepancy_to_interacting =
                    convergence_gap(limit, checkpoints_of(*particles, limit.times), cfg.n_slices, cfg.seed);
            const auto path = plot_path(root, name, "picard", "gaps");
            emit_gap_log(picard->gaps, cfg.record_timing ? &picard->wall_seconds : nullptr, path);
            written(path);
            report.picard = std::move(sum);
        } catch (const Error& e) {
            picard.reset();
            fail(Method::kPicard, e);
        }
    }

    if (cfg.has(Method::kMalliavin)) {
        try {
            std::optional<PathBundle> own;
            const PathBundle* source = particles ? &*particles : picard ? &picard->final_paths : nullptr;
            if (!source) {
                own = simulate_interacting(model, inst.law, grid, cfg.n_particles, cfg.seed);
                source = &*own;
            }
            const PathBundle& paths = *source;
            const StatisticFlow& flow = paths.flow;
            MalliavinSummary sum;
            if (cfg.lambda) {
                sum.lambda = *cfg.lambda;
            } else if (inst.lambda) {
                sum.lambda = *inst.lambda;
            } else {
                SampleRegion region{0.0, cfg.T, Vec::Map(inst.fp_grid.lo.data(), model.d),
                                    Vec::Map(inst.fp_grid.hi.data(), model.d)};
                const std::vector<Vec> s_samples{flow.at(0)};
                sum.lambda = check_ellipticity(model, region, s_samples, 4096, cfg.seed).lambda_min_estimate;
                sum.lambda_estimated = true;
            }
            sum.paths = std::min(cfg.malliavin_paths, paths.n);
            struct PathResult {
                MalliavinCovariance cov;
                BoundCheck check;
                double max_residual = 0.0;
            };
            std::vector<PathResult> results(sum.paths);
            std::vector<std::string> errors(sum.paths);
            parallel_for(sum.paths, [&](std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    try {
                        const auto fv = simulate_first_variation(model, paths, i, flow);
                        const auto res = zy_residual(fv);
                        results[i].max_residual = *std::max_element(res.begin(), res.end());
                        results[i].cov = malliavin_covariance(fv, paths, model, flow, grid.M, sum.lambda);
                        results[i].check = ellipticity_bound_check(results[i].cov, cfg.slack_factor);
                        if (i < cfg.malliavin_diagnostic_paths) {
                            const auto curve = malliavin_covariance_curve(fv, paths, model, flow, sum.lambda);
                            write_malliavin_diagnostics_csv(curve, res,
                                                            plot_path(root, name, "malliavin", "path" + std::to_string(i)));
                        }
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            }, 1);
            for (std::size_t i = 0; i < sum.paths; ++i)
                if (!errors[i].empty()) throw Error("path " + std::to_string(i) + ": " + errors[i]);
            for (std::size_t i = 0; i < std::min(sum.paths, cfg.malliavin_diagnostic_paths); ++i)
                written(plot_path(root, name, "malliavin", "path" + std::to_string(i)));

            std::vector<std::vector<double>> cols(8);
            sum.min_lambda_min = std::numeric_limits<double>::infinity();
            sum.min_margin = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < sum.paths; ++i) {
                const auto& r = results[i];
                sum.min_lambda_min = std::min(sum.min_lambda_min, r.cov.lambda_min);
                sum.min_margin = std::min(sum.min_margin, r.check.margin);
                sum.max_slack = std::max(sum.max_slack, r.check.slack);
                sum.max_zy_residual = std::max(sum.max_zy_residual, r.max_residual);
                if (!r.check.holds) ++sum.violations;
                const double row[] = {static_cast<double>(i), r.cov.lambda_min, r.check.bound, r.check.margin,
                                      r.check.slack, r.cov.gamma, r.check.holds ? 1.0 : 0.0, r.max_residual};
                for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(row[c]);
            }
            sum.degenerate = sum.lambda <= 1e-10;
            const auto path = plot_path(root, name, "malliavin", "summary");
            emit_plotdata({"path", "lambda_min", "bound", "margin", "slack", "gamma", "holds", "max_zy_residual"},
                          cols, path);
            written(path);
            report.malliavin = sum;
        } catch (const Error& e) {
            fail(Method::kMalliavin, e);
        }
    }

    if (cfg.has(Method::kFp)) {
        try {
            const CoefficientModel& fp_model = cfg.as_printed ? inst.as_printed->model : model;
            const InitialLaw& fp_law = cfg.as_printed ? inst.as_printed->law : inst.law;
            FPProblem prob = make_fp_problem(fp_model, fp_law, fp_axes(cfg, inst), cfg.T, times);
            if (cfg.fp_dt) {
                prob.dt_policy = DtPolicy::kFixed;
                prob.dt_fixed = *cfg.fp_dt;
            }
            const FPSolution sol = solve_fp(prob);
            FpSummary sum;
            sum.steps = sol.steps;
            sum.dt_min = sol.dt_min;
            sum.dt_max = sol.dt_max;
            sum.max_cfl = sol.max_cfl;
            sum.mass_min = *std::min_element(sol.mass_curve.begin(), sol.mass_curve.end());
            sum.mass_max = *std::max_element(sol.mass_curve.begin(), sol.mass_curve.end());
            sum.min_value = *std::min_element(sol.min_value_curve.begin(), sol.min_value_curve.end());
            sum.boundary_flux = sol.boundary_flux.back();
            sum.max_conservation_error = sol.max_conservation_error;
            sum.as_printed = cfg.as_printed;
            const std::string method = cfg.as_printed ? "fp-as-printed" : "fp";
            for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
                auto& snap = report.snapshots[k];
                const GridDensity& g = sol.snapshots[k];
                const auto path = plot_path(root, name, method, time_label(snap.t));
                emit_plotdata(g, path);
                written(path);
                snap.moments[method] = grid_moments(g);
                if (particles) {
                    const EmpiricalMeasure cloud = particles->snapshot(grid.index_of(snap.t));
                    const GridDensity est = g.dims() == 1 ? kde_1d(cloud, g.axes[0], cfg.kde_bandwidth)
                                                          : kde_2d(cloud, g.axes[0], g.axes[1], std::nullopt);
                    snap.l1_particle_fp = l1_grid_distance(est, g);
                    const auto kpath = plot_path(root, name, "particles", "kde_" + time_label(snap.t));
                    emit_plotdata(est, kpath);
                    written(kpath);
                }
            }
            const auto mpath = plot_path(root, name, method, "mass");
            emit_plotdata({"t", "mass", "boundary_flux", "min_value"},
                          {sol.step_times, sol.mass_curve, sol.boundary_flux, sol.min_value_curve}, mpath);
            written(mpath);
            if (fp_model.q() > 0) {
                std::vector<std::string> header{"t"};
                std::vector<std::vector<double>> cols{sol.step_times};
                for (int k = 0; k < fp_model.q(); ++k) {
                    header.push_back(fp_model.functionals[static_cast<std::size_t>(k)].id);
                    std::vector<double> c;
                    for (const Vec& s : sol.stats_curve) c.push_back(s(k));
                    cols.push_back(std::move(c));
                }
                const auto spath = plot_path(root, name, method, "stats");
                emit_plotdata(header, cols, spath);
                written(spath);
            }
            report.fp = sum;
        } catch (const Error& e) {
            fail(Method::kFp, e);
        }
    }

    const auto report_path = preset_dir / "report.json";
    report.files.push_back("report.json");
    write_file_atomic(report_path, report.to_json(cfg).dump(2) + "\n");
    return report;
}

}  // namespace mvsim
