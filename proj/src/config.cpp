#include "ncqvi/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ncqvi/analytic.hpp"
#include "ncqvi/error.hpp"

namespace ncqvi {

namespace {

std::vector<double> numbers(KeyReader& r, const std::string& key) {
    const json& v = r.get(key);
    if (!v.is_array()) throw ValidationError(r.key_path(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ValidationError(r.key_path(key) + " must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

bool on_grid(double tau, double dtau, int steps) {
    const double n = tau / dtau;
    const long r = std::lround(n);
    return r >= 1 && r <= steps && std::abs(n - static_cast<double>(r)) <= 1e-6;
}

void check_levels(const std::vector<double>& taus, const std::string& key, const GridSpec& g, int steps) {
    const double dtau = g.tau_max / steps;
    for (double t : taus) {
        if (!on_grid(t, dtau, steps)) {
            std::ostringstream os;
            os << key << ": T-t=" << t << " is not a multiple of grid.tau_max/solver.time_steps=" << dtau
               << " within (0, " << g.tau_max << "]";
            throw ValidationError(os.str());
        }
    }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    KeyReader r(j, "config");
    const std::string experiment = r.string("experiment", "run");
    const std::string description = r.string("description", "");
    ProblemSpec problem = problem_from_json(r.get("problem"), "problem");
    GridSpec grid = r.has("grid") ? grid_from_json(r.get("grid"), "grid") : GridSpec{};
    SolverParams solver = r.has("solver") ? params_from_json(r.get("solver"), "solver") : SolverParams{};

    OutputsBlock out;
    if (r.has("outputs")) {
        KeyReader o(r.get("outputs"), "outputs");
        if (o.has("taus")) out.taus = numbers(o, "taus");
        if (o.has("nu")) out.nu = numbers(o, "nu");
        out.y_max = o.number("y_max", out.y_max);
        out.stem = o.string("stem", "");
        o.finish();
        if (!(out.y_max > 0.0)) throw ValidationError("outputs.y_max must be > 0");
    }
    if (out.taus.empty()) out.taus = {grid.tau_max};
    if (out.stem.empty()) out.stem = experiment;

    std::optional<TerminalBlock> terminal;
    if (r.has("terminal")) {
        KeyReader t(r.get("terminal"), "terminal");
        TerminalBlock b;
        b.y = numbers(t, "y");
        b.taus = numbers(t, "taus");
        if (t.has("nu")) b.nu = numbers(t, "nu");
        b.z_lo = t.number("z_lo", b.z_lo);
        b.z_hi = t.number("z_hi", b.z_hi);
        b.nz = t.integer("nz", b.nz);
        t.finish();
        if (b.y.empty() || b.taus.empty()) throw ValidationError("terminal.y and terminal.taus must be non-empty");
        if (!(b.z_hi > b.z_lo) || b.nz < 2) throw ValidationError("terminal: need z_hi > z_lo and nz >= 2");
        terminal = b;
    }

    std::optional<McBlock> mc;
    if (r.has("mc")) {
        KeyReader m(r.get("mc"), "mc");
        McBlock b;
        b.z = m.number("z", b.z);
        b.y = m.number("y", b.y);
        b.tau = m.number("tau", b.tau);
        b.paths = static_cast<long>(m.number("paths", static_cast<double>(b.paths)));
        b.seed = static_cast<std::uint64_t>(m.number("seed", static_cast<double>(b.seed)));
        b.dt = m.number("dt", b.dt);
        m.finish();
        if (b.paths < 1) throw ValidationError("mc.paths must be >= 1");
        if (!(b.dt > 0.0)) throw ValidationError("mc.dt must be > 0");
        if (!(b.tau > 0.0) || b.tau > problem.T) throw ValidationError("mc.tau must lie in (0, problem.T]");
        mc = b;
    }
    r.finish();

    if (grid.tau_max > problem.T) throw ValidationError("grid.tau_max must not exceed problem.T");
    check_levels(out.taus, "outputs.taus", grid, solver.time_steps);
    std::vector<double> keep = out.taus;
    if (terminal) {
        check_levels(terminal->taus, "terminal.taus", grid, solver.time_steps);
        keep.insert(keep.end(), terminal->taus.begin(), terminal->taus.end());
    }
    if (mc) {
        check_levels({mc->tau}, "mc.tau", grid, solver.time_steps);
        keep.push_back(mc->tau);
    }
    for (double t : solver.store_taus) keep.push_back(t);
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               keep.end());
    solver.store_taus = keep;

    // build once so that grid preconditions fail here rather than mid-run
    (void)make_grid(problem, grid, solver.time_steps);

    return RunConfig{experiment, description, std::move(problem), grid, solver, out, terminal, mc, j};
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

// ---------------------------------------------------------------- presets

namespace {

json gbm(double eta, double sigma = 0.3) { return json{{"model", "gbm"}, {"eta", eta}, {"sigma", sigma}}; }

json gmr() {
    return json{{"model", "gaussian_mean_return"}, {"sigma", 0.3},  {"kappa", 0.27},
                {"nu_bar", 0.1333},               {"zeta", 0.065}, {"rho", -0.93}};
}

json costs(double theta) { return json{{"theta1", theta}, {"theta2", theta}}; }

json goal() { return json{{"type", "goal_reaching"}, {"z_bar", 1.0}}; }
json aspiration(double c1) { return json{{"type", "aspiration"}, {"p", 0.5}, {"c1", c1}, {"c2", 1.5}, {"z_bar", 1.0}}; }
json sshaped() { return json{{"type", "s_shaped"}, {"lambda", 2.25}, {"p", 0.5}, {"z0", 1.0}}; }

json problem(json market, double theta, json utility, bool short_sale = true) {
    return json{{"K", 0.0},
                {"T", 1.0},
                {"short_sale", short_sale},
                {"market", std::move(market)},
                {"costs", costs(theta)},
                {"utility", std::move(utility)}};
}

// dtau = 0.001 for region panels
json region_run(const std::string& tag, const std::string& desc, json prob, double tau, json grid = json::object()) {
    grid["tau_max"] = tau;
    const int steps = static_cast<int>(std::lround(tau / 0.001));
    return json{{"experiment", tag},
                {"description", desc},
                {"problem", std::move(prob)},
                {"grid", std::move(grid)},
                {"solver", {{"time_steps", steps}}},
                {"outputs", {{"taus", {tau}}}}};
}

json wide_z() { return json{{"nz", 241}, {"z_max", 3.0}}; }

const std::vector<double> kLadder{0.02, 0.01, 0.005, 0.0025};

json terminal_run(const std::string& tag, const std::string& desc, json prob, std::vector<double> ys,
                  json grid = json::object(), std::vector<double> nus = {0.0}, double z_lo = 0.2, double z_hi = 0.8) {
    grid["tau_max"] = kLadder.front();
    return json{{"experiment", tag},
                {"description", desc},
                {"problem", std::move(prob)},
                {"grid", std::move(grid)},
                {"solver", {{"time_steps", 80}}},
                {"outputs", {{"taus", {kLadder.front()}}, {"nu", nus}}},
                {"terminal", {{"y", ys}, {"taus", kLadder}, {"nu", nus}, {"z_lo", z_lo}, {"z_hi", z_hi}, {"nz", 121}}}};
}

std::vector<Preset> build_table() {
    std::vector<Preset> t;
    auto add = [&](const std::string& group, json cfg) {
        const std::string name = cfg["experiment"].get<std::string>();
        const std::string desc = cfg["description"].get<std::string>();
        t.push_back({name, group, desc, std::move(cfg)});
    };

    const char* side[2] = {"left", "right"};
    const char* row[3] = {"top", "mid", "bottom"};
    const double taus[3] = {0.01, 0.05, 0.1};
    for (int s = 0; s < 2; ++s) {
        const double eta = s == 0 ? 0.0 : 0.04;
        for (int k = 0; k < 3; ++k) {
            std::ostringstream d;
            d << "goal reaching, eta=" << eta << ", theta=1e-3, sigma=0.3, T-t=" << taus[k];
            json cfg = region_run(std::string("fig1-") + row[k] + side[s], d.str(), problem(gbm(eta), 1e-3, goal()), taus[k]);
            if (s == 0 && k == 1) cfg["mc"] = {{"z", 0.5}, {"y", 20.0}, {"tau", 0.05}, {"paths", 100000}, {"seed", 1}};
            add("fig1", std::move(cfg));
        }
    }
    add("fig2", region_run("fig2-left", "goal reaching, eta=0.04, theta=2e-3, T-t=0.01",
                           problem(gbm(0.04), 2e-3, goal()), 0.01));
    add("fig2", region_run("fig2-right", "goal reaching, eta=0.04, theta=2e-3, T-t=0.1",
                           problem(gbm(0.04), 2e-3, goal()), 0.1));
    add("fig3", region_run("fig3-left", "aspiration p=0.5 c1=0 c2=1.5, eta=0, T-t=0.01",
                           problem(gbm(0.0), 1e-3, aspiration(0.0)), 0.01, wide_z()));
    add("fig3", region_run("fig3-right", "aspiration p=0.5 c1=0 c2=1.5, eta=0, T-t=0.1",
                           problem(gbm(0.0), 1e-3, aspiration(0.0)), 0.1, wide_z()));
    const char* quad[4] = {"upperleft", "upperright", "lowerleft", "lowerright"};
    const double qt[4] = {0.01, 0.05, 0.1, 0.2};
    for (int k = 0; k < 4; ++k) {
        std::ostringstream d;
        d << "aspiration p=0.5 c1=0 c2=1.5, eta=0.04, T-t=" << qt[k];
        add("fig4", region_run(std::string("fig4-") + quad[k], d.str(), problem(gbm(0.04), 1e-3, aspiration(0.0)),
                               qt[k], wide_z()));
    }
    for (const char* tag : {"fig5", "fig6"}) {
        json cfg{{"experiment", tag},
                 {"description", "goal reaching, Gaussian mean return, nu=+-0.1333 slices, theta=1e-3, T-t=0.1"},
                 {"problem", problem(gmr(), 1e-3, goal())},
                 {"grid", {{"nz", 121}, {"nv", 61}, {"nnu", 21}, {"tau_max", 0.1}}},
                 {"solver", {{"time_steps", 50}}},
                 {"outputs", {{"taus", {0.1}}, {"nu", {0.1333, -0.1333}}}}};
        add(tag, std::move(cfg));
    }
    add("figSS", region_run("figSS", "S-shaped lambda=2.25 p=0.5 z0=1, eta=0.04, theta=1e-3, T-t=0.01",
                            problem(gbm(0.04), 1e-3, sshaped()), 0.01, wide_z()));
    add("aspiration-jump", region_run("aspiration-jump-c1-0", "aspiration c1=0 (jump 1), eta=0.04, T-t=0.01",
                                      problem(gbm(0.04), 1e-3, aspiration(0.0)), 0.01, wide_z()));
    add("aspiration-jump", region_run("aspiration-jump-c1-1", "aspiration c1=1 (jump 2), eta=0.04, T-t=0.01",
                                      problem(gbm(0.04), 1e-3, aspiration(1.0)), 0.01, wide_z()));
    add("no-short-sale", region_run("no-short-sale", "goal reaching, short sales prohibited, eta=0.04, theta=1e-2, T-t=0.02",
                                    problem(gbm(0.04), 1e-2, goal(), false), 0.02, json{{"nv", 81}}));

    add("fig7", terminal_run("fig7", "terminal check, goal reaching, short sales prohibited, theta=1e-2, eta=0.04",
                             problem(gbm(0.04), 1e-2, goal(), false), {20.0}, json{{"nv", 81}}));
    add("fig8", terminal_run("fig8", "terminal check, goal reaching, short sales allowed, theta=1e-2, eta=0.04",
                             problem(gbm(0.04), 1e-2, goal()), {20.0, -20.0}));
    add("fig9", terminal_run("fig9", "terminal check, Gaussian mean return, nu=+-0.1333, theta=1e-3",
                             problem(gmr(), 1e-3, goal()), {1.0},
                             json{{"nz", 121}, {"nv", 61}, {"nnu", 21}}, {0.1333, -0.1333}));
    add("fig10", terminal_run("fig10-aspiration", "terminal check, aspiration, theta=1e-3, eta=0.04",
                              problem(gbm(0.04), 1e-3, aspiration(0.0)), {5.0, -5.0}, wide_z(), {0.0}, 0.2, 2.0));
    add("fig10", terminal_run("fig10-sshaped", "terminal check, S-shaped, theta=1e-3, eta=0.04",
                              problem(gbm(0.04), 1e-3, sshaped()), {10.0}, wide_z(), {0.0}, 0.2, 2.0));
    return t;
}

}  // namespace

const std::vector<Preset>& preset_table() {
    static const std::vector<Preset> table = build_table();
    return table;
}

std::vector<const Preset*> find_presets(const std::string& name) {
    std::vector<const Preset*> out;
    for (const auto& p : preset_table())
        if (p.name == name) return {&p};
    for (const auto& p : preset_table())
        if (p.group == name) out.push_back(&p);
    if (out.empty()) throw ValidationError("unknown preset '" + name + "' (see the presets command)");
    return out;
}

const Preset& find_preset(const std::string& name) {
    const auto v = find_presets(name);
    if (v.size() != 1) {
        std::string names;
        for (const auto* p : v) names += " " + p->name;
        throw ValidationError("preset group '" + name + "' has several panels; pick one of:" + names);
    }
    return *v.front();
}

// ---------------------------------------------------------------- terminal sweep

bool TerminalSummary::decreasing() const {
    for (std::size_t n = 1; n < max_abs.size(); ++n)
        if (!(max_abs[n] < max_abs[n - 1])) return false;
    return true;
}

TerminalReport terminal_sweep(const Solution& s, const TerminalBlock& b) {
    TerminalReport rep;
    const ProblemSpec& P = s.problem;
    for (double nu : b.nu) {
        for (double y : b.y) {
            TerminalSummary sum{y, nu, {}, {}};
            for (double tau : b.taus) {
                double worst = 0.0;
                for (int n = 0; n < b.nz; ++n) {
                    const double z = b.z_lo + (b.z_hi - b.z_lo) * n / (b.nz - 1);
                    if (z < P.K()) continue;
                    if (y < 0.0 && !P.short_sale_allowed) continue;
                    const double x = z - (1.0 - P.costs.theta1) * std::max(y, 0.0) + (1.0 + P.costs.theta2) * std::max(-y, 0.0);
                    const double W = s.value_zy(tau, z, y, nu);
                    const double a = terminal_asymptote({P.T - tau, x, y, P.costs, P.market.sigma, P.T, &P.utility});
                    rep.rows.push_back({tau, y, nu, z, W, a});
                    worst = std::max(worst, std::abs(W - a));
                }
                sum.taus.push_back(tau);
                sum.max_abs.push_back(worst);
            }
            rep.summaries.push_back(sum);
        }
    }
    return rep;
}

void write_terminal_csv(const TerminalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "tau,y,nu,z,W,asymptote,difference\n" << std::setprecision(17);
    for (const auto& row : r.rows)
        out << row.tau << ',' << row.y << ',' << row.nu << ',' << row.z << ',' << row.W << ',' << row.asymptote << ','
            << row.W - row.asymptote << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace ncqvi
