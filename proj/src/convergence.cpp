#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ncqvi/error.hpp"
#include "ncqvi/solver.hpp"

namespace ncqvi {

std::string to_string(LadderMode m) {
    switch (m) {
        case LadderMode::Penalty: return "penalty";
        case LadderMode::Mesh: return "mesh";
        case LadderMode::Boundary: return "boundary";
    }
    return "?";
}

namespace {

// Base v nodes continued geometrically up to v_max_new (and mirrored below zero).
std::vector<double> extend_v(const std::vector<double>& v, double v_max_new) {
    std::vector<double> pos;
    for (double x : v)
        if (x >= 0.0) pos.push_back(x);
    const std::size_t n = pos.size();
    const double ratio = (pos[n - 1] - pos[n - 2]) / (pos[n - 2] - pos[n - 3]);
    double h = pos[n - 1] - pos[n - 2];
    while (pos.back() < v_max_new) {
        h *= ratio;
        pos.push_back(pos.back() + h);
    }
    // land exactly on v_max_new by stretching the last cell
    if (pos.back() > v_max_new) {
        if (pos.back() - v_max_new > 0.5 * h || pos.size() == n + 1) pos.back() = v_max_new;
        else {
            pos.pop_back();
            pos.back() = v_max_new;
        }
    }
    if (v.front() >= 0.0) return pos;
    std::vector<double> out;
    for (std::size_t i = pos.size(); i-- > 1;) out.push_back(-pos[i]);
    out.insert(out.end(), pos.begin(), pos.end());
    return out;
}

}  // namespace

ConvergenceReport convergence_study(const ProblemSpec& problem, const GridSpec& base, const SolverParams& params,
                                    LadderMode mode, int rungs) {
    if (rungs < 2) throw ValidationError("convergence_study needs at least 2 rungs");
    ConvergenceReport rep;
    rep.mode = mode;
    rep.tau = base.tau_max;

    const TransformedGrid g0 = make_grid(problem, base, params.time_steps);
    std::vector<Solution> sols;
    for (int r = 0; r < rungs; ++r) {
        GridSpec gs = base;
        SolverParams sp = params;
        sp.store_taus.clear();
        std::ostringstream label;
        double parameter = 0.0;
        switch (mode) {
            case LadderMode::Penalty: {
                const double lam0 = params.lambda > 0.0 ? params.lambda : 1e6 / g0.dtau;
                sp.lambda = lam0 * std::pow(2.0, r);
                parameter = sp.lambda;
                label << "lambda=" << sp.lambda;
                break;
            }
            case LadderMode::Mesh: {
                for (int q = 0; q < r; ++q) gs = refine_spec(gs);
                sp.time_steps = params.time_steps << r;
                parameter = std::pow(0.5, r);
                label << "h/" << (1 << r) << " (" << gs.nz << "x" << gs.nv << (g0.has_nu ? "x" + std::to_string(gs.nnu) : "")
                      << ", " << sp.time_steps << " steps)";
                break;
            }
            case LadderMode::Boundary: {
                gs.v_nodes = r == 0 ? g0.v : extend_v(g0.v, g0.v.back() * std::pow(2.0, r));
                gs.v_max = gs.v_nodes.back();
                parameter = gs.v_max;
                label << "v_max=" << gs.v_max << " (" << gs.v_nodes.size() << " v nodes)";
                break;
            }
        }
        const auto t0 = std::chrono::steady_clock::now();
        const TransformedGrid g = make_grid(problem, gs, sp.time_steps);
        sols.push_back(solve_qvi(problem, g, sp));
        rep.rungs.push_back(
            {label.str(), parameter, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }

    const BoundaryData bd = boundary_and_terminal_data(problem, g0);
    for (int r = 0; r + 1 < rungs; ++r) {
        const Solution& a = sols[r];
        const Solution& b = sols[r + 1];
        const LevelField& fa = a.levels.back();
        const LevelField& fb = b.levels.back();
        double d = 0.0;
        for (std::size_t p = 0; p < g0.size(); ++p) {
            if (bd.kind[p] != RowKind::Interior) continue;
            std::size_t i, j, k;
            g0.unravel(p, i, j, k);
            const double z = g0.z[i], v = g0.v[j], nu = g0.nu[k];
            d = std::max(d, std::abs(a.value(fa, z, v, nu) - b.value(fb, z, v, nu)));
        }
        rep.diffs.push_back(d);
    }
    for (std::size_t r = 0; r + 1 < rep.diffs.size(); ++r) {
        const double ratio = rep.diffs[r + 1] > 0.0 ? rep.diffs[r] / rep.diffs[r + 1] : INFINITY;
        rep.ratios.push_back(ratio);
        rep.orders.push_back(std::log2(ratio));
    }
    return rep;
}

}  // namespace ncqvi
