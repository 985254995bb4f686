// One PASS/FAIL line per acceptance criterion.  Exit status is 0 once every criterion has been
// evaluated; --strict makes any FAIL a non-zero exit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <optional>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ncqvi/analytic.hpp"
#include "ncqvi/config.hpp"
#include "ncqvi/error.hpp"
#include "ncqvi/regions.hpp"
#include "ncqvi/sim.hpp"

using namespace ncqvi;

namespace {

int failures = 0;

void line(int id, bool pass, const std::string& what) {
    std::printf("[%s] %2d %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    failures += !pass;
}

void note(const std::string& what) {
    std::printf("       %s\n", what.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProblemSpec goal(double eta, double theta, bool shorting = true) {
    return ProblemSpec{MarketModel::gbm(eta, 0.3), CostSpec{theta, theta}, make_utility(GoalReachingSpec{1.0}), 1.0,
                       shorting};
}

Solution solve(const ProblemSpec& p, GridSpec g, int steps, std::vector<double> keep, double lambda = 0.0) {
    SolverParams sp;
    sp.time_steps = steps;
    sp.store_taus = std::move(keep);
    sp.lambda = lambda;
    return solve_qvi(p, make_grid(p, g, steps), sp);
}

Solution solve_config(const RunConfig& c) { return solve_qvi(c.problem, make_grid(c.problem, c.grid, c.solver.time_steps), c.solver); }

RunConfig preset(const std::string& name) { return run_config_from_json(find_preset(name).config); }

template <class F>
void guarded(int id, const char* name, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        line(id, false, std::string(name) + ": threw " + e.what());
    }
}

bool interior(const TransformedGrid& g, std::size_t p) {
    std::size_t i, j, k;
    g.unravel(p, i, j, k);
    return !is_boundary_node(g, i, j);
}

// 4-connected components of NR nodes with v < 0 in the nu = first plane
int nr_components_below(const RegionMap& m, const TransformedGrid& g, int min_size, int& largest) {
    std::vector<char> seen(g.nz() * g.nv(), 0);
    int comps = 0;
    largest = 0;
    auto want = [&](long i, long j) {
        return i >= 0 && j >= 0 && i < long(g.nz()) && j < long(g.nv()) && g.v[j] < 0.0 &&
               m.labels[g.index(i, j, 0)] == Label::NR;
    };
    for (std::size_t j = 0; j < g.nv(); ++j)
        for (std::size_t i = 0; i < g.nz(); ++i) {
            if (seen[j * g.nz() + i] || !want(long(i), long(j))) continue;
            std::vector<std::pair<long, long>> stack{{long(i), long(j)}};
            seen[j * g.nz() + i] = 1;
            int size = 0;
            while (!stack.empty()) {
                auto [a, b] = stack.back();
                stack.pop_back();
                ++size;
                const long di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const long ni = a + di[d], nj = b + dj[d];
                    if (!want(ni, nj) || seen[nj * g.nz() + ni]) continue;
                    seen[nj * g.nz() + ni] = 1;
                    stack.push_back({ni, nj});
                }
            }
            largest = std::max(largest, size);
            comps += size >= min_size;
        }
    return comps;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ------------------------------------------------------------------ criteria

void c1() {
    Branch b;
    b.kind = BranchKind::Constant;
    b.offset = 1.0;
    const ProblemSpec p{MarketModel::gbm(0.04, 0.3), CostSpec{1e-3, 1e-3},
                        Utility({Piece{0.0, b}}, 0.0, GrowthBound{1.0, 0.0, 0.5}), 1.0, true};
    GridSpec g;
    g.nz = 201;
    g.nv = 101;
    g.tau_max = 0.1;
    const auto t0 = std::chrono::steady_clock::now();
    const Solution s = solve(p, g, 100, {});
    const double secs = seconds_since(t0);
    double dev = 0.0;
    for (double w : s.levels.back().W) dev = std::max(dev, std::abs(w - 1.0));
    line(1, dev < 1e-10 && secs < 5.0,
         fmt("constant utility: max |W - 1| = %.1e (< 1e-10) on 201x101, 100 steps, %.1f s (< 5 s)", dev, secs));
}

struct GoalZero {
    Solution s;
    double secs;
};

GoalZero goal_zero() {
    GridSpec g;
    g.tau_max = 0.1;
    const auto t0 = std::chrono::steady_clock::now();
    Solution s = solve(goal(0.0, 1e-3), g, 100, {0.01, 0.05, 0.1});
    return {std::move(s), seconds_since(t0)};
}

void c2(const Solution& s) {
    double lo = 0.0, hi = -1.0;
    for (double tau : {0.01, 0.05, 0.1}) {
        const LevelField& f = s.level(tau);
        for (std::size_t p = 0; p < s.grid.size(); ++p) {
            if (!interior(s.grid, p)) continue;
            std::size_t i, j, k;
            s.grid.unravel(p, i, j, k);
            lo = std::min(lo, f.W[p]);
            hi = std::max(hi, f.W[p] - s.grid.z[i]);
        }
    }
    line(2, lo >= 0.0 && hi <= 5e-3,
         fmt("concavified bound: min W = %.2e (>= 0), max W - z = %.2e (<= 5e-3) at T-t in {0.01, 0.05, 0.1}", lo, hi));
}

void c3() {
    struct Leg {
        const char* preset;
        double y;
    };
    bool ok = true;
    std::string detail;
    for (const Leg& leg : {Leg{"fig7", 20.0}, Leg{"fig8", -20.0}}) {
        RunConfig cfg = preset(leg.preset);
        const auto t0 = std::chrono::steady_clock::now();
        const Solution s = solve_config(cfg);
        const TerminalReport rep = terminal_sweep(s, *cfg.terminal);
        const double secs = seconds_since(t0);
        for (const auto& sm : rep.summaries) {
            std::string row = fmt("%s y=%+g:", leg.preset, sm.y);
            for (std::size_t n = 0; n < sm.taus.size(); ++n) row += fmt(" %g->%.4f", sm.taus[n], sm.max_abs[n]);
            const bool gated = sm.y == leg.y;
            const bool pass = sm.decreasing() && sm.max_abs.back() < 0.05 && secs < 120.0;
            row += fmt(" (%.0f s)%s", secs, gated ? (pass ? "" : "  <- not strictly decreasing or >= 0.05") : "  [info]");
            detail += "\n       " + row;
            if (gated) ok = ok && pass;
        }
    }
    line(3, ok, "terminal asymptote ladder 0.02/0.01/0.005/0.0025: max over z in [0.2, 0.8] of |W - asymptote| "
                "strictly decreasing and < 0.05" + detail);
}

void c4() {
    RunConfig cfg = preset("fig1-midleft");
    const McBlock mc = *cfg.mc;
    const Solution s = solve_config(cfg);
    const ProblemSpec& P = cfg.problem;
    const double x = mc.z - (1.0 - P.costs.theta1) * mc.y;
    const double W = s.value_zy(mc.tau, mc.z, mc.y);
    StrategySpec sp;
    sp.kind = StrategyKind::PiStar;
    sp.initial = Position{P.T - mc.tau, x, mc.y, {}};
    sp.paths = mc.paths;
    sp.seed = mc.seed;
    sp.dt = mc.dt;
    const McEstimate e = simulate_strategy(sp, P);
    const bool sandwich = W >= e.mean - 3.0 * e.std_error - 0.01 && W <= 0.5 + 5e-3;

    // hold-until-hit from x >= 0: exact first-passage probability of the log stock price
    bool cross = true;
    std::string cd;
    for (double tau : {0.05, 1.0}) {
        const double x0 = 0.3, z0 = 0.6, th = P.costs.theta1;
        const double y0 = (z0 - x0) / (1.0 - th);
        StrategySpec q;
        q.kind = StrategyKind::PiStar;
        q.initial = Position{P.T - tau, x0, y0, {}};
        q.paths = mc.paths;
        q.seed = mc.seed;
        q.dt = mc.dt;
        const McEstimate f = simulate_strategy(q, P);
        const double b = std::log((1.0 - x0) / (1.0 - th) / y0);
        const double exact = first_passage_prob(-0.5 * 0.3 * 0.3, 0.3, b, tau);
        const bool ok = std::abs(f.mean - exact) <= 3.0 * f.std_error + 1e-12;
        cross = cross && ok;
        cd += fmt(" T-t=%g: MC %.5f vs %.5f (3 SE %.5f);", tau, f.mean, exact, 3.0 * f.std_error);
    }
    line(4, sandwich && cross,
         fmt("MC sandwich: W = %.5f, pi* MC = %.5f (SE %.5f), need W >= %.5f and W <= 0.505; x >= 0 cross-check:", W,
             e.mean, e.std_error, e.mean - 3.0 * e.std_error - 0.01) +
             cd);
}

void c5() {
    const ProblemSpec p = goal(0.0, 1e-3);
    GridSpec base;
    base.tau_max = 0.1;
    SolverParams sp;
    sp.time_steps = 100;
    std::string d;
    bool ok = true;
    {
        const ConvergenceReport r = convergence_study(p, base, sp, LadderMode::Penalty, 2);
        const double secs = r.rungs[0].seconds + r.rungs[1].seconds;
        ok = ok && r.diffs[0] < 1e-4 && secs < 300.0;
        d += fmt("penalty %.2e (< 1e-4, %.0f s); ", r.diffs[0], secs);
    }
    {
        GridSpec coarse = base;
        coarse.nz = 51;
        coarse.nv = 41;
        SolverParams sc = sp;
        sc.time_steps = 25;
        const ConvergenceReport r = convergence_study(p, coarse, sc, LadderMode::Mesh, 3);
        double secs = 0.0;
        for (const auto& g : r.rungs) secs += g.seconds;
        ok = ok && r.diffs.back() < 1e-2 && secs < 300.0;
        d += fmt("mesh %.2e then %.2e (< 1e-2, ratio %.2f, %.0f s); ", r.diffs[0], r.diffs[1], r.ratios[0], secs);
    }
    {
        const ConvergenceReport r = convergence_study(p, base, sp, LadderMode::Boundary, 2);
        const double secs = r.rungs[0].seconds + r.rungs[1].seconds;
        ok = ok && r.diffs[0] < 1e-3 && secs < 300.0;
        d += fmt("v_max doubling %.2e (< 1e-3, %.0f s)", r.diffs[0], secs);
    }
    line(5, ok, "ladders at T-t=0.1, goal reaching eta=0: " + d);
}

void c6() {
    bool ok = true;
    std::size_t gbm_rows = 0, gmr_events = 0, gmr_rows = 0;
    std::string bad;
    std::vector<std::string> seen;
    for (const Preset& pr : preset_table()) {
        const RunConfig cfg = run_config_from_json(pr.config);
        const TransformedGrid g = make_grid(cfg.problem, cfg.grid, cfg.solver.time_steps);
        const BoundaryData bd = boundary_and_terminal_data(cfg.problem, g);
        const bool gmr = cfg.problem.market.has_state();
        const double lambda = 1e6 / g.dtau;
        for (int n = 1; n <= cfg.solver.time_steps; ++n) {
            const LevelSystem L = assemble_level(cfg.problem, g, bd, n * g.dtau, true);
            std::vector<std::uint8_t> all(g.size(), 1), none(g.size(), 0);
            for (const auto* act : {&none, &all}) {
                const MMatrixReport r = m_matrix_check(newton_matrix(L, g.dtau, lambda, *act, *act), L.damping_count);
                if (!r.pass()) {
                    ok = false;
                    bad += " " + pr.name;
                }
                (gmr ? gmr_rows : gbm_rows) += r.rows_checked;
            }
            if (!gmr && L.damping_count > 0) {
                ok = false;
                bad += " " + pr.name + "(damped)";
            }
            if (gmr) {
                gmr_events += L.damping_count;
                if (L.damping_count > 0 && L.damping_log.empty()) ok = false;
                for (const auto& e : L.damping_log)
                    if (!(e.ratio > 0.0 && e.ratio < 1.0)) ok = false;
            }
        }
    }
    line(6, ok,
         fmt("M-matrix on every assembled level of every preset (no trades and all trades active): %zu GBM rows with 0 "
             "damping, %zu GMR rows with %zu logged damping events",
             gbm_rows, gmr_rows, gmr_events) +
             (bad.empty() ? "" : "; violations in" + bad));
}

void c7(const Solution& s) {
    const RegionMap m01 = classify_regions(s, 0.01), m05 = classify_regions(s, 0.05), m10 = classify_regions(s, 0.1);
    const Label a = m01.at(0.5, 0.01), b = m01.at(0.5, -0.01), c = m01.at(0.5, 50.0);
    const double f10 = trading_area_fraction(m10, 60.0), f05 = trading_area_fraction(m05, 60.0),
                 f01 = trading_area_fraction(m01, 60.0);
    const bool ok = a == Label::BR && b == Label::SR && c == Label::NR && f10 < f05 && f05 < f01;
    line(7, ok,
         fmt("region topology at eta=0, T-t=0.01: (0.5,+0.01) %s, (0.5,-0.01) %s, (0.5,50) %s; trading area fraction "
             "%.4f < %.4f < %.4f for T-t 0.1, 0.05, 0.01",
             to_string(a), to_string(b), to_string(c), f10, f05, f01));
}

void c8() {
    GridSpec g;
    g.tau_max = 0.1;
    std::size_t counts[2];
    const double thetas[2] = {1e-3, 2e-3};
    for (int n = 0; n < 2; ++n) {
        const Solution s = solve(goal(0.04, thetas[n]), g, 100, {});
        const RegionMap m = classify_regions(s, 0.1);
        std::size_t c = 0;
        for (std::size_t p = 0; p < s.grid.size(); ++p) {
            std::size_t i, j, k;
            s.grid.unravel(p, i, j, k);
            c += s.grid.v[j] < 0.0 && m.labels[p] == Label::BR;
        }
        counts[n] = c;
    }
    line(8, counts[0] > 0 && counts[1] <= counts[0],
         fmt("risk premium at eta=0.04, T-t=0.1: BR nodes with y < 0: %zu at theta=1e-3, %zu at theta=2e-3", counts[0],
             counts[1]));
}

void c9(const Solution& s) {
    const RegionMap m = classify_regions(s, 0.01);
    const auto rows = compare_frictionless(m, 0.3, 0.01);
    int above = 0, inside = 0;
    double best_z = 0.0, best = -1e300;
    for (const auto& r : rows) {
        if (!(r.z > 0.1 && r.z < 0.9)) continue;
        ++inside;
        if (r.sign > 0) {
            ++above;
            if (r.buy_y - r.target > best) {
                best = r.buy_y - r.target;
                best_z = r.z;
            }
        }
    }
    line(9, above > 0,
         fmt("frictionless target exceedance at eta=0, T-t=0.01: buy boundary above browne_target in %d of %d columns "
             "with z in (0.1, 0.9); largest excess %.2f at z=%.3f",
             above, inside, best, best_z));
}

void c10() {
    bool ok = true;
    std::string d;
    for (const char* name : {"fig4-lowerleft", "figSS"}) {
        const RunConfig cfg = preset(name);
        const auto t0 = std::chrono::steady_clock::now();
        const Solution s = solve_config(cfg);
        const double secs = seconds_since(t0);
        const InvariantReport r = check_invariants(s, s.levels.back());
        const bool pass = r.monotonicity <= s.tol_qvi;
        ok = ok && pass;
        d += fmt("%s completes in %.0f s, monotonicity %.1e, complementarity [%.1e, %.1e], below U %.1e; ", name, secs,
                 r.monotonicity, r.worst_term, r.worst_min, r.lower_violation);
        if (std::strcmp(name, "fig4-lowerleft") == 0) {
            const RegionMap m = classify_regions(s, 0.1);
            int largest = 0;
            const int all = nr_components_below(m, s.grid, 1, largest);
            const int big = nr_components_below(m, s.grid, 5, largest);
            d += fmt("[soft] NR components in y < 0: %d (%d with >= 5 nodes, largest %d nodes) -> %s; ", all, big,
                     largest, big >= 2 ? "at least two" : "fewer than two");
        }
    }
    line(10, ok, "aspiration / S-shaped runs: " + d);
}

void c11() {
    const RunConfig cfg = preset("fig6");
    const auto t0 = std::chrono::steady_clock::now();
    const Solution s = solve_config(cfg);
    const double secs = seconds_since(t0);
    const InvariantReport r = check_invariants(s, s.levels.back());
    const RegionMap m = classify_regions(s, 0.1);
    const double nu = 0.1333;
    bool swap = true;
    std::string labels;
    for (double y : {1.0, -1.0}) {
        const Label a = m.at(0.5, y, nu), b = m.at(0.5, y, -nu);
        swap = swap && ((a == Label::BR && b == Label::SR) || (a == Label::SR && b == Label::BR));
        labels += fmt(" y=%+g: %s / %s;", y, to_string(a), to_string(b));
    }
    const double tol = s.tol_qvi;
    const bool inv = r.complementarity(tol) && r.monotonicity <= tol && r.lower_violation <= tol && r.upper_violation <= tol;
    line(11, secs < 600.0 && inv && swap,
         fmt("GMR 121x61x21: %.0f s (< 600), complementarity [%.1e, %.1e], monotonicity %.1e, bounds %.1e / %.1e (tol "
             "%.0e); labels at z=0.5 for nu=+0.1333 / -0.1333:",
             secs, r.worst_term, r.worst_min, r.monotonicity, r.lower_violation, r.upper_violation, tol) +
             labels + fmt(" damping events %zu", s.diag.damping_events));
}

void c12(const std::string& dir) {
    bool ok = true;
    std::string d;
    for (const char* name : {"fig1-topleft", "no-short-sale"}) {
        std::string first[2];
        for (int rep = 0; rep < 2; ++rep) {
            const RunConfig cfg = preset(name);
            const Solution s = solve_config(cfg);
            const RegionMap m = classify_regions(s, cfg.outputs.taus.front());
            const std::string path = dir + "/" + name + ".csv";
            export_fields(m, path, cfg.source.dump());
            const std::string bytes = slurp(path) + slurp(path + ".json");
            if (rep == 0) first[0] = bytes;
            else first[1] = bytes;
        }
        const bool same = !first[0].empty() && first[0] == first[1];
        ok = ok && same;
        d += fmt("%s %s (%zu bytes, fnv %s); ", name, same ? "identical" : "DIFFERENT", first[0].size(),
                 fnv1a_hex(first[0]).c_str());
    }
    {
        const ProblemSpec p = goal(0.0, 1e-3);
        StrategySpec sp;
        sp.kind = StrategyKind::PiStar;
        sp.initial = Position{0.95, 0.5 - 0.999 * 20.0, 20.0, {}};
        sp.paths = 20000;
        const McEstimate a = simulate_strategy(sp, p);
        sp.jobs = 3;
        const McEstimate b = simulate_strategy(sp, p);
        const bool same = a.mean == b.mean && a.std_error == b.std_error;
        ok = ok && same;
        d += fmt("MC with 1 vs 3 workers %s", same ? "identical" : "DIFFERENT");
    }
    line(12, ok, "determinism: " + d);
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::string dir = ".";
    for (int n = 1; n < argc; ++n) {
        if (std::strcmp(argv[n], "--strict") == 0) strict = true;
        else if (std::strcmp(argv[n], "--dir") == 0 && n + 1 < argc) dir = argv[++n];
    }
    const auto t0 = std::chrono::steady_clock::now();
    guarded(1, "constant utility", c1);
    {
        std::optional<GoalZero> gz;
        try {
            gz = goal_zero();
            note(fmt("goal reaching eta=0 base solve 201x161, 100 steps: %.0f s", gz->secs));
        } catch (const std::exception& e) {
            for (int id : {2, 7, 9}) line(id, false, std::string("base solve threw ") + e.what());
        }
        if (gz) {
            guarded(2, "concavified bound", [&] { c2(gz->s); });
            guarded(3, "terminal ladder", c3);
            guarded(4, "MC sandwich", c4);
            guarded(5, "ladders", c5);
            guarded(6, "M-matrix", c6);
            guarded(7, "topology", [&] { c7(gz->s); });
            guarded(8, "risk premium", c8);
            guarded(9, "exceedance", [&] { c9(gz->s); });
        }
    }
    guarded(10, "aspiration / S-shaped", c10);
    guarded(11, "GMR", c11);
    guarded(12, "determinism", [&] { c12(dir); });
    std::printf("acceptance: %d of 12 criteria failed, %.0f s\n", failures, seconds_since(t0));
    return strict && failures > 0 ? 1 : 0;
}
