#include "ncqvi/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ncqvi/error.hpp"

namespace ncqvi {

void TransformedGrid::unravel(std::size_t p, std::size_t& i, std::size_t& j, std::size_t& k) const {
    i = p % z.size();
    p /= z.size();
    j = p % v.size();
    k = p / v.size();
}

std::size_t TransformedGrid::v_zero() const {
    auto it = std::find(v.begin(), v.end(), 0.0);
    return static_cast<std::size_t>(it - v.begin());
}

std::vector<double> refined_mesh(double a, double b, int n, const std::vector<RefinementWindow>& windows) {
    if (n < 2 || !(b > a)) throw AssemblyError("grid: need nz >= 2 and z_max > z_min");
    std::vector<double> br{a, b};
    for (const auto& w : windows) {
        for (double e : {w.center - w.half_width, w.center + w.half_width})
            if (e > a && e < b) br.push_back(e);
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());

    std::vector<double> dens(br.size() - 1, 1.0);
    std::vector<double> G(br.size(), 0.0);
    for (std::size_t s = 0; s + 1 < br.size(); ++s) {
        const double mid = 0.5 * (br[s] + br[s + 1]);
        for (const auto& w : windows)
            if (std::abs(mid - w.center) < w.half_width) dens[s] = std::max(dens[s], w.ratio);
        G[s + 1] = G[s] + dens[s] * (br[s + 1] - br[s]);
    }

    std::vector<double> z(n);
    std::size_t s = 0;
    for (int i = 0; i < n; ++i) {
        const double g = G.back() * i / (n - 1);
        while (s + 2 < G.size() && g > G[s + 1]) ++s;
        z[i] = br[s] + (g - G[s]) / dens[s];
    }
    z.front() = a;
    z.back() = b;
    return z;
}

std::vector<double> sinh_mesh(double v_max, double v_cluster, int n, bool half) {
    if (!(v_max > 0.0) || !(v_cluster > 0.0)) throw AssemblyError("grid: v_max and v_cluster must be > 0");
    if (half ? n < 2 : (n < 3 || n % 2 == 0))
        throw AssemblyError("grid.nv must be odd and >= 3 when shorting is allowed (v = 0 must be a node)");
    const double alpha = std::asinh(v_max / v_cluster);
    std::vector<double> v(n);
    const int m = half ? n - 1 : (n - 1) / 2;
    const int off = half ? 0 : m;
    for (int i = 0; i < n; ++i) {
        const int q = i - off;
        v[i] = (q == 0) ? 0.0 : v_cluster * std::sinh(alpha * q / m);
    }
    v.back() = v_max;
    if (!half) v.front() = -v_max;
    // exact antisymmetry
    if (!half)
        for (int q = 1; q <= m; ++q) v[off - q] = -v[off + q];
    return v;
}

GridSpec refine_spec(const GridSpec& spec) {
    GridSpec out = spec;
    out.nz = 2 * spec.nz - 1;
    out.nv = 2 * spec.nv - 1;
    if (spec.nnu > 1) out.nnu = 2 * spec.nnu - 1;
    auto mid = [](const std::vector<double>& a) {
        std::vector<double> r;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i > 0) r.push_back(0.5 * (a[i - 1] + a[i]));
            r.push_back(a[i]);
        }
        return r;
    };
    if (!spec.z_nodes.empty()) out.z_nodes = mid(spec.z_nodes);
    if (!spec.v_nodes.empty()) out.v_nodes = mid(spec.v_nodes);
    return out;
}

namespace {

double far_boundary(const ProblemSpec& problem) {
    return std::visit(
        [&](const auto& s) -> double {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, GoalReachingSpec>) return s.z_bar;
            else if constexpr (std::is_same_v<S, AspirationSpec>) return 8.0 * s.z_bar;
            else if constexpr (std::is_same_v<S, SShapedSpec>) return 8.0 * s.z0;
            else return problem.K() + 8.0;
        },
        problem.utility.spec());
}

void check_increasing(const std::vector<double>& a, const char* name) {
    for (std::size_t i = 1; i < a.size(); ++i)
        if (!(a[i] > a[i - 1])) throw AssemblyError(std::string("grid: ") + name + " nodes must be strictly increasing");
}

}  // namespace

TransformedGrid make_grid(const ProblemSpec& problem, const GridSpec& spec, int time_steps) {
    if (time_steps < 1) throw AssemblyError("solver.time_steps must be >= 1");
    if (!(spec.tau_max > 0.0) || spec.tau_max > problem.T)
        throw AssemblyError("grid.tau_max must lie in (0, T]");
    TransformedGrid g;
    g.spec = spec;
    g.T = problem.T;
    g.short_sale_allowed = problem.short_sale_allowed;

    const double K = problem.K();
    const double z_min = spec.z_min >= 0.0 ? spec.z_min : K;
    const double z_max = spec.z_max > 0.0 ? spec.z_max : far_boundary(problem);
    if (std::abs(z_min - K) > 1e-12) throw AssemblyError("grid.z_min must equal the liquidation floor K");
    if (problem.utility.is_goal_reaching()) {
        const double zb = std::get<GoalReachingSpec>(problem.utility.spec()).z_bar;
        if (std::abs(z_max - zb) > 1e-12) throw AssemblyError("grid.z_max must equal z_bar for goal reaching");
    }

    if (!spec.z_nodes.empty()) {
        g.z = spec.z_nodes;
    } else {
        std::vector<RefinementWindow> windows = spec.z_refine;
        if (windows.empty() && spec.auto_refine)
            for (const auto& j : problem.utility.jumps())
                windows.push_back({j.at, 0.05 * (z_max - z_min), 8.0});
        g.z = refined_mesh(z_min, z_max, spec.nz, windows);
        // jump locations become nodes so that U is sampled exactly there
        for (const auto& j : problem.utility.jumps()) {
            if (j.at <= z_min || j.at >= z_max) continue;
            auto it = std::min_element(g.z.begin(), g.z.end(),
                                       [&](double a, double b) { return std::abs(a - j.at) < std::abs(b - j.at); });
            if (it != g.z.begin() && it + 1 != g.z.end()) *it = j.at;
        }
    }
    check_increasing(g.z, "z");
    if (g.z.front() != z_min || g.z.back() != z_max) throw AssemblyError("grid: z nodes must span [z_min, z_max]");

    if (!spec.v_nodes.empty()) {
        g.v = spec.v_nodes;
    } else {
        g.v = sinh_mesh(spec.v_max, spec.v_cluster, spec.nv, !problem.short_sale_allowed);
    }
    check_increasing(g.v, "v");
    if (std::find(g.v.begin(), g.v.end(), 0.0) == g.v.end()) throw AssemblyError("grid: v = 0 must be a node");
    if (!problem.short_sale_allowed && g.v.front() != 0.0)
        throw AssemblyError("grid: short sales prohibited, v nodes must start at 0");
    if (problem.short_sale_allowed && g.v.front() >= 0.0)
        throw AssemblyError("grid: short sales allowed, v nodes must include negative values");

    if (problem.market.has_state()) {
        if (spec.nnu < 3 || !(spec.nu_max > spec.nu_min)) throw AssemblyError("grid: GMR needs nnu >= 3 and nu_max > nu_min");
        g.has_nu = true;
        g.nu.resize(spec.nnu);
        for (int k = 0; k < spec.nnu; ++k)
            g.nu[k] = spec.nu_min + (spec.nu_max - spec.nu_min) * k / (spec.nnu - 1);
        g.nu.back() = spec.nu_max;
    } else {
        g.nu = {0.0};
    }

    g.dtau = spec.tau_max / time_steps;
    g.t_levels.resize(time_steps);
    for (int n = 0; n < time_steps; ++n) g.t_levels[n] = problem.T - (n + 1) * g.dtau;
    return g;
}

ZV transform_point(double t, double x, double y, const CostSpec& costs, double T) {
    const double tau = T - t;
    if (!(tau >= 0.0)) throw DomainError("transform_point: t must not exceed T");
    return {liquidation_value(x, y, costs), std::sqrt(tau) * y};
}

XY inverse_transform(double t, double z, double v, const CostSpec& costs, double T) {
    if (!std::isfinite(z) || !std::isfinite(v)) throw DomainError("inverse_transform: non-finite input");
    const double tau = T - t;
    if (v == 0.0) return {z, 0.0};
    if (!(tau > 0.0)) throw DomainError("inverse_transform: degenerate time t = T with v != 0");
    const double y = v / std::sqrt(tau);
    const double c = y > 0.0 ? 1.0 - costs.theta1 : 1.0 + costs.theta2;
    return {z - c * y, y};
}

std::pair<std::size_t, double> locate(const std::vector<double>& nodes, double x) {
    const std::size_t n = nodes.size();
    if (n == 1) return {0, 0.0};
    if (x <= nodes.front()) return {0, 0.0};
    if (x >= nodes.back()) return {n - 2, 1.0};
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t lo = static_cast<std::size_t>(it - nodes.begin()) - 1;
    const double w = (x - nodes[lo]) / (nodes[lo + 1] - nodes[lo]);
    return {lo, w};
}

}  // namespace ncqvi
