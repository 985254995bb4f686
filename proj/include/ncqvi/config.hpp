#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncqvi/io.hpp"
#include "ncqvi/solver.hpp"

namespace ncqvi {

struct OutputsBlock {
    std::vector<double> taus;   // levels to export; empty: grid.tau_max
    std::vector<double> nu{0.0};  // nu slices for region reports
    double y_max = 60.0;        // half height of the area-fraction raster
    std::string stem;           // file stem; empty: experiment tag
};

/// W - terminal_asymptote sweep over z in [z_lo, z_hi] at fixed y, one row per ladder tau.
struct TerminalBlock {
    std::vector<double> y;
    std::vector<double> taus;
    std::vector<double> nu{0.0};
    double z_lo = 0.2;
    double z_hi = 0.8;
    int nz = 121;
};

struct McBlock {
    double z = 0.5;
    double y = 20.0;
    double tau = 0.05;
    long paths = 100000;
    std::uint64_t seed = 1;
    double dt = 1e-3;
};

struct RunConfig {
    std::string experiment;
    std::string description;
    ProblemSpec problem;
    GridSpec grid;
    SolverParams solver;
    OutputsBlock outputs;
    std::optional<TerminalBlock> terminal;
    std::optional<McBlock> mc;
    json source;  // the validated key tree, echoed into every artifact
};

/// Strict parse of a whole run configuration.  Unknown keys, ranges, and levels that are
/// not on the time grid are rejected with the offending key path.  The solver's retained
/// levels become the union of outputs.taus and terminal.taus.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::string& path);

struct Preset {
    std::string name;
    std::string group;        // figure the panel belongs to
    std::string description;
    json config;
};

const std::vector<Preset>& preset_table();
/// Panels of a preset name or of a whole group, in table order.  Throws ValidationError
/// for an unknown name.
std::vector<const Preset*> find_presets(const std::string& name);
/// Exactly one panel; a group name with several panels is rejected.
const Preset& find_preset(const std::string& name);

struct TerminalRow {
    double tau;
    double y;
    double nu;
    double z;
    double W;
    double asymptote;
};

struct TerminalSummary {
    double y;
    double nu;
    std::vector<double> taus;
    std::vector<double> max_abs;  // per tau, max |W - asymptote| over the sweep
    bool decreasing() const;
};

struct TerminalReport {
    std::vector<TerminalRow> rows;
    std::vector<TerminalSummary> summaries;
};

/// Evaluates the sweep on a solution that retained every ladder tau.  Sweep points whose
/// position is insolvent or below the floor are skipped.
TerminalReport terminal_sweep(const Solution& s, const TerminalBlock& b);
void write_terminal_csv(const TerminalReport& r, const std::string& path);

}  // namespace ncqvi
