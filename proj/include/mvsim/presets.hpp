#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvsim/coefficients.hpp"
#include "mvsim/initial_law.hpp"

namespace mvsim {

using ParamMap = std::map<std::string, double>;

struct PresetInfo {
    std::string name;
    std::string description;
    std::string reference;
    ParamMap defaults;
};

/// Rectangular truncation box and cell counts for grid solvers.
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> cells;
};

/// A literal transcription of a published Fokker-Planck equation, kept for
/// archival comparison against the one derived from the SDE.
struct PrintedVariant {
    CoefficientModel model;
    InitialLaw law;
    std::string note;
};

struct PresetInstance {
    PresetInfo info;
    ParamMap params;
    CoefficientModel model;
    InitialLaw law;
    GridSpec fp_grid;
    /// Analytic ellipticity constant when known (0 for degenerate models).
    std::optional<double> lambda;
    std::optional<PrintedVariant> as_printed;
};

/// Sorted by name; stable across calls.
std::vector<PresetInfo> list_presets();

/// Builds a preset; overrides must name existing parameters.
PresetInstance make_preset(const std::string& name, const ParamMap& overrides = {});

bool has_preset(const std::string& name);

}  // namespace mvsim
