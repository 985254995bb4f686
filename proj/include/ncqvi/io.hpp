#pragma once

#include <string>

#include <json.hpp>

#include "ncqvi/grid.hpp"
#include "ncqvi/problem.hpp"
#include "ncqvi/solver.hpp"

namespace ncqvi {

using json = nlohmann::ordered_json;

json to_json(const MarketModel& m);
json to_json(const CostSpec& c);
json to_json(const Utility& u);
json to_json(const ProblemSpec& p);
json to_json(const GridSpec& g);
json to_json(const SolverParams& s);
json to_json(const Diagnostics& d);

/// Strict readers: unknown keys and out-of-range values throw ValidationError naming
/// the offending key path.
MarketModel market_from_json(const json& j, const std::string& path = "problem.market");
CostSpec costs_from_json(const json& j, const std::string& path = "problem.costs");
Utility utility_from_json(const json& j, double K, const std::string& path = "problem.utility");
ProblemSpec problem_from_json(const json& j, const std::string& path = "problem");
GridSpec grid_from_json(const json& j, const std::string& path = "grid");
SolverParams params_from_json(const json& j, const std::string& path = "solver");

/// Tracks which keys of an object were read; finish() rejects the rest.
class KeyReader {
public:
    KeyReader(const json& j, std::string path);
    bool has(const std::string& key) const;
    const json& get(const std::string& key);
    double number(const std::string& key, double fallback);
    double number(const std::string& key);
    int integer(const std::string& key, int fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key, const std::string& fallback);
    std::string key_path(const std::string& key) const { return path_ + "." + key; }
    void finish() const;

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

/// Snapshot container: "QVISNAP1\n", header byte length on its own line, JSON header
/// (problem, grid spec and nodes, params, diagnostics, level list), then per retained level
/// the little-endian float64 blocks W, residual_pde, residual_sell, residual_buy.
void write_snapshot(const Solution& s, const std::string& path, const json& config = json::object());
Solution read_snapshot(const std::string& path);

}  // namespace ncqvi
