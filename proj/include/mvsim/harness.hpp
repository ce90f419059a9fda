#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvsim/fokkerplanck.hpp"
#include "mvsim/presets.hpp"

namespace mvsim {

enum class Method { kParticles, kPicard, kFp, kMalliavin };

std::string method_name(Method m);

struct ExperimentConfig {
    std::string preset;
    ParamMap params;
    std::vector<Method> methods;
    std::uint64_t seed = 0;
    double T = 1.0;
    std::vector<double> snapshot_times;

    std::size_t n_particles = 10000;
    int steps = 200;

    double picard_tol = 1e-3;
    int picard_max_iters = 20;
    int n_slices = 64;

    // Empty vectors fall back to the preset's grid.
    std::vector<double> fp_lo;
    std::vector<double> fp_hi;
    std::vector<int> fp_cells;
    std::optional<double> fp_dt;  // nullopt = auto CFL
    bool as_printed = false;

    std::size_t malliavin_paths = 100;
    std::size_t malliavin_diagnostic_paths = 3;
    double slack_factor = 10.0;
    std::optional<double> lambda;  // overrides the preset's ellipticity constant

    std::optional<double> kde_bandwidth;  // 1D only; nullopt = Silverman

    std::filesystem::path output_dir;
    unsigned threads = 1;
    bool record_timing = false;
    bool export_trajectories = false;

    bool has(Method m) const;
};

/// Parses and validates a JSON config. Errors are ConfigError naming the
/// field path. `default_outdir` is used when the document has none.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& default_outdir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::filesystem::path& default_outdir = {});
/// Re-checks invariants after command-line overrides.
void validate_config(const ExperimentConfig& cfg);

struct MomentRow {
    double m1 = 0.0;
    double m2 = 0.0;
    double m4 = 0.0;
};

struct SnapshotMetrics {
    double t = 0.0;
    std::optional<double> l1_particle_fp;
    std::optional<double> w2_particle_picard;
    std::map<std::string, MomentRow> moments;  // keyed by method name
};

struct FpSummary {
    std::size_t steps = 0;
    double dt_min = 0.0;
    double dt_max = 0.0;
    double max_cfl = 0.0;
    double mass_min = 0.0;
    double mass_max = 0.0;
    double min_value = 0.0;
    double boundary_flux = 0.0;
    double max_conservation_error = 0.0;
    bool as_printed = false;
};

struct PicardSummary {
    int n_iters = 0;
    bool converged = false;
    std::vector<double> gaps;
    std::optional<double> discrepancy_to_interacting;
};

struct MalliavinSummary {
    std::size_t paths = 0;
    double lambda = 0.0;
    bool lambda_estimated = false;
    bool degenerate = false;
    double min_lambda_min = 0.0;  // min over paths of lambda_min(Q(T))
    double min_margin = 0.0;      // min over paths of lambda_min - T lambda / gamma^4
    double max_slack = 0.0;
    std::size_t violations = 0;   // paths where the bound fails by more than the slack
    double max_zy_residual = 0.0;
};

struct MethodFailure {
    std::string method;
    std::string error;
};

struct ComparisonReport {
    std::string preset;
    ParamMap params;
    std::uint64_t seed = 0;
    std::vector<SnapshotMetrics> snapshots;
    std::optional<FpSummary> fp;
    std::optional<PicardSummary> picard;
    std::optional<MalliavinSummary> malliavin;
    std::vector<MethodFailure> failures;
    std::vector<std::filesystem::path> files;  // artifacts written, relative to the preset directory

    nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

/// Runs the configured methods (particles -> picard -> malliavin; fp
/// independent), writes CSV artifacts and report.json under
/// <output_dir>/<preset>/. Method failures are recorded, not thrown.
ComparisonReport run_experiment(const ExperimentConfig& cfg);

/// "<preset>_<method>_<label>.csv" placed under <root>/<preset>/<method>/.
std::filesystem::path plot_path(const std::filesystem::path& root, const std::string& preset,
                                const std::string& method, const std::string& label);
std::string time_label(double t);

/// Two-column or three-column density CSV.
void emit_plotdata(const GridDensity& p, const std::filesystem::path& path);
/// Header plus one row per entry; columns must have equal length.
void emit_plotdata(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns,
                   const std::filesystem::path& path);
/// Picard gap log: "iter,gap" with n_iters - 1 rows, plus wall_time when given.
void emit_gap_log(const std::vector<double>& gaps, const std::vector<double>* wall_seconds,
                  const std::filesystem::path& path);

}  // namespace mvsim
