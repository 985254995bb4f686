#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncqvi/config.hpp"
#include "ncqvi/error.hpp"
#include "ncqvi/regions.hpp"
#include "ncqvi/sim.hpp"

namespace fs = std::filesystem;
using namespace ncqvi;

namespace {

enum Exit { kOk = 0, kValidation = 1, kSolver = 2, kCheck = 3 };

struct Common {
    std::string preset;
    std::string config;
    std::string out_dir;
    int jobs = 1;
    bool check = false;
    std::optional<int> steps, nz, nv, nnu;
    std::optional<double> lambda;
};

void add_common(CLI::App* sub, Common& c, bool with_overrides = true) {
    sub->add_option("--preset", c.preset, "shipped configuration (see presets)");
    sub->add_option("--config", c.config, "JSON run configuration");
    sub->add_option("--out", c.out_dir, "output directory (default $NCQVI_OUT or ./out)");
    sub->add_flag("--check", c.check, "exit 3 when the acceptance check of this command fails");
    if (!with_overrides) return;
    sub->add_option("--steps", c.steps, "override solver.time_steps");
    sub->add_option("--nz", c.nz, "override grid.nz");
    sub->add_option("--nv", c.nv, "override grid.nv");
    sub->add_option("--nnu", c.nnu, "override grid.nnu");
    sub->add_option("--lambda", c.lambda, "override solver.lambda");
}

std::string out_dir(const Common& c) {
    std::string d = c.out_dir;
    if (d.empty()) {
        const char* env = std::getenv("NCQVI_OUT");
        d = env && *env ? env : "out";
    }
    fs::create_directories(d);
    return d;
}

json raw_config(const Common& c) {
    if (c.preset.empty() == c.config.empty()) throw ValidationError("give exactly one of --preset or --config");
    if (!c.preset.empty()) return find_preset(c.preset).config;
    std::ifstream in(c.config);
    if (!in) throw IoError("cannot open config: " + c.config);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + c.config + " is not valid JSON: " + e.what());
    }
}

RunConfig load(const Common& c, const std::function<void(json&)>& edit = {}) {
    json j = raw_config(c);
    if (c.steps) j["solver"]["time_steps"] = *c.steps;
    if (c.nz) j["grid"]["nz"] = *c.nz;
    if (c.nv) j["grid"]["nv"] = *c.nv;
    if (c.nnu) j["grid"]["nnu"] = *c.nnu;
    if (c.lambda) j["solver"]["lambda"] = *c.lambda;
    if (edit) edit(j);
    return run_config_from_json(j);
}

std::string tau_tag(double tau) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    return buf;
}

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError(flag + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw ValidationError(flag + " must list at least one value");
    return out;
}

Solution run_solver(const RunConfig& cfg) {
    const TransformedGrid g = make_grid(cfg.problem, cfg.grid, cfg.solver.time_steps);
    std::printf("%s: %zu x %zu x %zu nodes, %d steps of %g\n", cfg.experiment.c_str(), g.nz(), g.nv(), g.nnu(),
                cfg.solver.time_steps, g.dtau);
    Solution s = solve_qvi(cfg.problem, g, cfg.solver);
    int total = 0, mx = 0;
    for (int n : s.diag.newton_iterations) {
        total += n;
        mx = std::max(mx, n);
    }
    std::printf("solved in %.1f s; newton total %d max %d; damping events %zu; m-matrix violations %zu\n",
                s.diag.seconds, total, mx, s.diag.damping_events, s.diag.mmatrix_violations);
    return s;
}

bool report_invariants(const Solution& s) {
    bool ok = true;
    for (const auto& f : s.levels) {
        const InvariantReport r = check_invariants(s, f);
        const bool pass = r.complementarity(s.tol_qvi) && r.monotonicity <= s.tol_qvi;
        std::printf("T-t=%-8g complementarity [%.2e, %.2e] monotonicity %.2e below U %.2e above bound %.2e  %s\n",
                    f.tau, r.worst_term, r.worst_min, r.monotonicity, r.lower_violation, r.upper_violation,
                    pass ? "ok" : "FAIL");
        ok = ok && pass;
    }
    return ok;
}

int cmd_solve(const Common& c) {
    const RunConfig cfg = load(c);
    const Solution s = run_solver(cfg);
    const std::string path = (fs::path(out_dir(c)) / (cfg.outputs.stem + ".qvi")).string();
    write_snapshot(s, path, cfg.source);
    std::printf("snapshot %s\n", path.c_str());
    const bool ok = report_invariants(s);
    return c.check && !ok ? kCheck : kOk;
}

int cmd_regions(const Common& c, const std::string& snapshot) {
    std::optional<RunConfig> cfg;
    Solution s = [&] {
        if (!snapshot.empty()) return read_snapshot(snapshot);
        cfg = load(c);
        return run_solver(*cfg);
    }();
    const std::string dir = out_dir(c);
    const std::string stem = cfg ? cfg->outputs.stem : fs::path(snapshot).stem().string();
    const std::vector<double> taus = cfg ? cfg->outputs.taus : [&] {
        std::vector<double> v;
        for (const auto& f : s.levels) v.push_back(f.tau);
        return v;
    }();
    const std::vector<double> nus = cfg ? cfg->outputs.nu : std::vector<double>{0.0};
    const double y_max = cfg ? cfg->outputs.y_max : 60.0;
    const std::string cfg_text = cfg ? cfg->source.dump() : std::string("{}");
    const bool has_nu = s.grid.nnu() > 1;

    for (double tau : taus) {
        const RegionMap m = classify_regions(s, tau);
        const std::string base = stem + "_tau" + tau_tag(tau);
        const std::string csv = (fs::path(dir) / (base + ".csv")).string();
        export_fields(m, csv, cfg_text);
        write_plot_script(csv, (fs::path(dir) / (base + ".gp")).string(), stem + ", T-t=" + tau_tag(tau), has_nu);
        std::printf("T-t=%g: NR %zu SR %zu BR %zu AMBIGUOUS %zu -> %s\n", tau, m.count(Label::NR), m.count(Label::SR),
                    m.count(Label::BR), m.count(Label::AMBIGUOUS), csv.c_str());
        for (double nu : nus) {
            if (!has_nu && nu != 0.0) continue;
            std::printf("  nu=%g trading area fraction (|y| <= %g): %.4f\n", nu, y_max,
                        trading_area_fraction(m, y_max, 200, 400, nu));
        }
        if (s.problem.utility.is_goal_reaching() && !has_nu) {
            const auto rows = compare_frictionless(m, s.problem.market.sigma, tau);
            const std::string fcsv = (fs::path(dir) / (base + "_frictionless.csv")).string();
            std::ofstream f(fcsv);
            if (!f) throw IoError("cannot open for writing: " + fcsv);
            f << "z,buy_upper_y,sell_lower_y,frictionless_target,sign\n";
            f.precision(17);
            int above = 0;
            for (const auto& r : rows) {
                f << r.z << ',' << r.buy_y << ',' << r.sell_y << ',' << r.target << ',' << r.sign << '\n';
                above += r.sign > 0;
            }
            std::printf("  buy boundary above the frictionless target in %d of %zu columns -> %s\n", above, rows.size(),
                        fcsv.c_str());
        }
    }
    const bool ok = report_invariants(s);
    return c.check && !ok ? kCheck : kOk;
}

int cmd_terminal(const Common& c, const std::string& ys, const std::string& taus) {
    const RunConfig cfg = load(c, [&](json& j) {
        if (ys.empty() && taus.empty()) return;
        json& t = j["terminal"];
        if (!t.is_object()) t = json::object();
        if (!ys.empty()) t["y"] = parse_list(ys, "--y");
        if (!taus.empty()) {
            const auto tv = parse_list(taus, "--tau");
            t["taus"] = tv;
            if (!j["grid"].contains("tau_max")) j["grid"]["tau_max"] = *std::max_element(tv.begin(), tv.end());
        }
    });
    if (!cfg.terminal) throw ValidationError("terminal-check needs a terminal block or --y and --tau");
    const Solution s = run_solver(cfg);
    const TerminalReport rep = terminal_sweep(s, *cfg.terminal);
    const std::string path = (fs::path(out_dir(c)) / (cfg.outputs.stem + "_terminal.csv")).string();
    write_terminal_csv(rep, path);
    bool ok = true;
    for (const auto& sm : rep.summaries) {
        std::printf("y=%g nu=%g max|W - asymptote| over z in [%g, %g]:", sm.y, sm.nu, cfg.terminal->z_lo,
                    cfg.terminal->z_hi);
        for (std::size_t n = 0; n < sm.taus.size(); ++n) std::printf("  %g: %.4f", sm.taus[n], sm.max_abs[n]);
        const bool pass = sm.decreasing() && !sm.max_abs.empty() && sm.max_abs.back() < 0.05;
        std::printf("  %s\n", pass ? "decreasing, last < 0.05" : "NOT (strictly decreasing and last < 0.05)");
        ok = ok && pass;
    }
    std::printf("csv %s\n", path.c_str());
    return c.check && !ok ? kCheck : kOk;
}

int cmd_verify_mc(const Common& c, std::optional<double> z, std::optional<double> y, std::optional<double> tau,
                  std::optional<long> paths, std::optional<long> seed, bool policy) {
    const RunConfig cfg = load(c, [&](json& j) {
        json& m = j["mc"];
        if (!m.is_object()) m = json::object();
        if (z) m["z"] = *z;
        if (y) m["y"] = *y;
        if (tau) m["tau"] = *tau;
        if (paths) m["paths"] = *paths;
        if (seed) m["seed"] = *seed;
        if (policy) {
            // every level up to the start, for the region rollout
            const double tmax = j["grid"].value("tau_max", GridSpec{}.tau_max);
            const int steps = j["solver"].value("time_steps", SolverParams{}.time_steps);
            const double t0 = m.value("tau", McBlock{}.tau);
            std::vector<double> keep;
            for (int n = 1; n <= steps && n * tmax / steps <= t0 + 1e-12; ++n) keep.push_back(n * tmax / steps);
            j["solver"]["store_taus"] = keep;
        }
    });
    const McBlock mc = *cfg.mc;
    const ProblemSpec& P = cfg.problem;
    const Solution s = run_solver(cfg);
    const double yy = mc.y;
    if (yy < 0.0 && !P.short_sale_allowed) throw DomainError("mc.y < 0 with short sales prohibited");
    const double x = mc.z - (1.0 - P.costs.theta1) * std::max(yy, 0.0) + (1.0 + P.costs.theta2) * std::max(-yy, 0.0);
    const double W = s.value_zy(mc.tau, mc.z, yy);

    StrategySpec base;
    base.initial = Position{P.T - mc.tau, x, yy, P.market.has_state() ? std::optional<double>(0.0) : std::nullopt};
    base.paths = mc.paths;
    base.seed = mc.seed;
    base.dt = mc.dt;
    base.jobs = c.jobs;

    json report{{"experiment", cfg.experiment}, {"tau", mc.tau}, {"z", mc.z}, {"y", yy}, {"x", x}, {"W", W}};
    std::printf("PDE W(T-t=%g, z=%g, y=%g) = %.6f\n", mc.tau, mc.z, yy, W);
    auto run = [&](const char* name, StrategySpec sp) {
        const McEstimate e = simulate_strategy(sp, P);
        std::printf("%-14s MC %.6f  SE %.6f  (hit w %.3f, hit K %.3f)\n", name, e.mean, e.std_error, e.frac_hit_w,
                    e.frac_hit_K);
        for (const auto& w : e.warnings) std::printf("  warning: %s\n", w.c_str());
        report[name] = {{"mean", e.mean}, {"std_error", e.std_error}, {"paths", e.paths_used},
                        {"frac_hit_w", e.frac_hit_w}, {"frac_hit_K", e.frac_hit_K}, {"warnings", e.warnings}};
        return e;
    };

    bool ok = true;
    const bool goal = P.utility.is_goal_reaching();
    double z_hat = mc.z;
    if (goal) {
        StrategySpec sp = base;
        sp.kind = StrategyKind::PiStar;
        sp.w = P.utility.jumps().front().at;
        const McEstimate e = run("pi_star", sp);
        const double lo = e.mean - 3.0 * e.std_error - 0.01;
        const double hi = std::min(z_hat, 1.0) + 5e-3;
        const bool pass = W >= lo && W <= hi;
        std::printf("sandwich %.6f <= W <= %.6f  %s\n", lo, hi, pass ? "ok" : "FAIL");
        report["sandwich"] = {{"lower", lo}, {"upper", hi}, {"pass", pass}};
        ok = pass;
    }
    {
        StrategySpec sp = base;
        sp.kind = StrategyKind::NoTrade;
        const McEstimate e = run("no_trade", sp);
        const bool pass = W >= e.mean - 3.0 * e.std_error - 0.01;
        report["no_trade"]["lower_bound_holds"] = pass;
        ok = ok && pass;
    }
    std::vector<RegionMap> maps;
    if (policy) {
        for (const auto& f : s.levels)
            if (f.tau <= mc.tau + 1e-12) maps.push_back(classify_regions(s, f.tau));
        StrategySpec sp = base;
        sp.kind = StrategyKind::RegionPolicy;
        for (const auto& m : maps) sp.policy.push_back(&m);
        const McEstimate e = run("region_policy", sp);
        std::printf("region policy minus W: %+.4f (3 SE %.4f)\n", e.mean - W, 3.0 * e.std_error);
    }
    const std::string path = (fs::path(out_dir(c)) / (cfg.outputs.stem + "_mc.json")).string();
    std::ofstream(path) << report.dump(2) << '\n';
    std::printf("report %s\n", path.c_str());
    return c.check && !ok ? kCheck : kOk;
}

int cmd_converge(const Common& c, const std::string& mode, int rungs) {
    const RunConfig cfg = load(c);
    LadderMode m;
    double limit;
    if (mode == "penalty") {
        m = LadderMode::Penalty;
        limit = 1e-4;
    } else if (mode == "mesh") {
        m = LadderMode::Mesh;
        limit = 1e-2;
    } else if (mode == "boundary") {
        m = LadderMode::Boundary;
        limit = 1e-3;
    } else {
        throw ValidationError("--mode must be penalty, mesh or boundary");
    }
    const ConvergenceReport r = convergence_study(cfg.problem, cfg.grid, cfg.solver, m, rungs);
    json rep{{"experiment", cfg.experiment}, {"mode", mode}, {"tau", r.tau}, {"diffs", r.diffs}, {"ratios", r.ratios},
             {"orders", r.orders}};
    json rj = json::array();
    for (const auto& g : r.rungs) {
        std::printf("%-28s %.1f s\n", g.label.c_str(), g.seconds);
        rj.push_back({{"label", g.label}, {"parameter", g.parameter}});
    }
    rep["rungs"] = rj;
    for (std::size_t n = 0; n < r.diffs.size(); ++n) std::printf("difference %zu -> %zu: %.3e\n", n, n + 1, r.diffs[n]);
    for (double q : r.ratios) std::printf("ratio %.3f\n", q);
    const bool ok = !r.diffs.empty() && r.diffs.back() < limit;
    std::printf("last difference %s %g\n", ok ? "<" : ">=", limit);
    rep["limit"] = limit;
    rep["pass"] = ok;
    const std::string path = (fs::path(out_dir(c)) / (cfg.outputs.stem + "_converge_" + mode + ".json")).string();
    std::ofstream(path) << rep.dump(2) << '\n';
    std::printf("report %s\n", path.c_str());
    return c.check && !ok ? kCheck : kOk;
}

int cmd_presets(const std::string& show) {
    if (!show.empty()) {
        for (const Preset* p : find_presets(show)) std::printf("%s\n", p->config.dump(2).c_str());
        return kOk;
    }
    std::string group;
    for (const auto& p : preset_table()) {
        if (p.group != group) {
            group = p.group;
            std::printf("%s\n", group.c_str());
        }
        std::printf("  %-22s %s\n", p.name.c_str(), p.description.c_str());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalty finite-difference solver for portfolio selection with non-concave utility and proportional costs"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker threads for Monte Carlo")->check(CLI::PositiveNumber);

    Common solve_c, regions_c, term_c, mc_c, conv_c;
    auto* solve = app.add_subcommand("solve", "solve and write a snapshot");
    add_common(solve, solve_c);

    auto* regions = app.add_subcommand("regions", "region CSVs, plot scripts and summaries");
    add_common(regions, regions_c);
    std::string snapshot;
    regions->add_option("--snapshot", snapshot, "classify a stored snapshot instead of solving");

    auto* term = app.add_subcommand("terminal-check", "W minus the terminal asymptote over a T-t ladder");
    add_common(term, term_c);
    std::string ys, taus;
    term->add_option("--y", ys, "comma separated stock positions");
    term->add_option("--tau", taus, "comma separated times to maturity");

    auto* mc = app.add_subcommand("verify-mc", "PDE value against Monte Carlo strategies");
    add_common(mc, mc_c);
    std::optional<double> mz, my, mtau;
    std::optional<long> mpaths, mseed;
    bool policy = false;
    mc->add_option("--z", mz, "liquidation wealth");
    mc->add_option("--y", my, "stock position");
    mc->add_option("--tau", mtau, "time to maturity");
    mc->add_option("--paths", mpaths, "number of paths");
    mc->add_option("--seed", mseed, "master seed");
    mc->add_flag("--policy", policy, "also roll out the solved region policy");

    auto* conv = app.add_subcommand("converge", "penalty, mesh or boundary ladder");
    add_common(conv, conv_c);
    std::string mode = "penalty";
    int rungs = 2;
    conv->add_option("--mode", mode, "penalty | mesh | boundary");
    conv->add_option("--rungs", rungs, "number of solves")->check(CLI::Range(2, 8));

    auto* pres = app.add_subcommand("presets", "list shipped configurations");
    std::string show;
    pres->add_option("--show", show, "print the configuration of a preset or group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    for (Common* c : {&solve_c, &regions_c, &term_c, &mc_c, &conv_c}) c->jobs = jobs;
    // a group preset runs its panels in order; the worst exit code wins
    auto panels = [](Common c, const std::function<int(const Common&)>& fn) {
        if (c.preset.empty()) return fn(c);
        int rc = kOk;
        for (const Preset* p : find_presets(c.preset)) {
            c.preset = p->name;
            rc = std::max(rc, fn(c));
        }
        return rc;
    };
    try {
        if (*solve) return panels(solve_c, cmd_solve);
        if (*regions) return panels(regions_c, [&](const Common& c) { return cmd_regions(c, snapshot); });
        if (*term) return panels(term_c, [&](const Common& c) { return cmd_terminal(c, ys, taus); });
        if (*mc) return panels(mc_c, [&](const Common& c) { return cmd_verify_mc(c, mz, my, mtau, mpaths, mseed, policy); });
        if (*conv) return panels(conv_c, [&](const Common& c) { return cmd_converge(c, mode, rungs); });
        if (*pres) return cmd_presets(show);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSolver;
    }
    return kOk;
}
