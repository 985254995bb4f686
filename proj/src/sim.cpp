#include "ncqvi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "ncqvi/error.hpp"

namespace ncqvi {

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (path + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

enum Outcome : std::uint8_t { HitW, HitK, Expired };

struct PathResult {
    double value;
    Outcome outcome;
};

double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

struct Ctx {
    const StrategySpec& spec;
    const ProblemSpec& P;
    double tau0;
    double K;
    double theta1, theta2;
};

double zval(const Ctx& c, double x, double y) {
    return x + (1.0 - c.theta1) * std::max(y, 0.0) - (1.0 + c.theta2) * std::max(-y, 0.0);
}

// Log-space barriers for |Y| so that z reaches w (upper in z) or K.
struct Barriers {
    double up_w = std::numeric_limits<double>::infinity();  // log|Y| where z = w, on the side |Y| moves toward it
    double lo_w = -std::numeric_limits<double>::infinity();
    double up_K = std::numeric_limits<double>::infinity();
    double lo_K = -std::numeric_limits<double>::infinity();
};

Barriers barriers(const Ctx& c, double x, double y, double w) {
    Barriers b;
    if (y > 0.0) {
        const double c1 = 1.0 - c.theta1;
        if (std::isfinite(w) && w - x > 0.0) b.up_w = std::log((w - x) / c1);
        if (c.K - x > 0.0) b.lo_K = std::log((c.K - x) / c1);
    } else if (y < 0.0) {
        const double c2 = 1.0 + c.theta2;
        if (std::isfinite(w) && x - w > 0.0) b.lo_w = std::log((x - w) / c2);
        b.up_K = std::log(std::max(x - c.K, 1e-300) / c2);
    }
    return b;
}

// probability that a Brownian bridge from a0 to a1 (variance s2 over the step) touches b
double bridge_cross(double a0, double a1, double b, double s2) {
    if (!std::isfinite(b)) return 0.0;
    if ((a0 - b) * (a1 - b) <= 0.0) return 1.0;
    return std::exp(-2.0 * (b - a0) * (b - a1) / s2);
}

PathResult hold_path(const Ctx& c, double x, double y, double tau, double w, std::mt19937_64& rng) {
    const Utility& U = c.P.utility;
    auto finish = [&](double z, Outcome o) { return PathResult{U(std::max(z, c.K)), o}; };
    const double z0 = zval(c, x, y);
    if (z0 >= w) return finish(z0, HitW);
    if (z0 <= c.K) return finish(z0, HitK);
    if (y == 0.0) return finish(z0, Expired);

    std::normal_distribution<double> N01;
    std::uniform_real_distribution<double> U01;
    const MarketModel& m = c.P.market;
    const double sign = y > 0.0 ? 1.0 : -1.0;
    double a = std::log(std::abs(y));
    const Barriers b = barriers(c, x, y, w);
    const int steps = std::max(1, static_cast<int>(std::ceil(tau / c.spec.dt - 1e-9)));
    const double dt = tau / steps;

    if (m.kind == ModelKind::GBM) {
        const double drift = (m.eta - 0.5 * m.sigma * m.sigma) * dt;
        const double sd = m.sigma * std::sqrt(dt);
        for (int n = 0; n < steps; ++n) {
            const double a1 = a + drift + sd * N01(rng);
            const double zn = zval(c, x, sign * std::exp(a1));
            if (zn >= w) return finish(zn, HitW);
            if (zn <= c.K) return finish(zn, HitK);
            const double s2 = sd * sd;
            const double pw = std::max(bridge_cross(a, a1, b.up_w, s2), bridge_cross(a, a1, b.lo_w, s2));
            const double pk = std::max(bridge_cross(a, a1, b.up_K, s2), bridge_cross(a, a1, b.lo_K, s2));
            const double u1 = U01(rng), u2 = U01(rng);
            const bool hw = u1 < pw, hk = u2 < pk;
            if (hw && (!hk || pw >= pk)) return PathResult{U(w), HitW};
            if (hk) return PathResult{U(c.K), HitK};
            a = a1;
        }
        return finish(zval(c, x, sign * std::exp(a)), Expired);
    }

    // Gaussian mean return: Euler on (log|Y|, nu), substeps near the barriers
    double nu = c.spec.initial.nu.value_or(m.nu_bar);
    const double rho = m.rho, rc = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    double t = 0.0;
    while (t < tau - 1e-14) {
        const double zc = zval(c, x, sign * std::exp(a));
        const double dist = std::min(std::isfinite(w) ? w - zc : INFINITY, zc - c.K);
        const double scale = m.sigma * std::abs(zc - x) * std::sqrt(dt);
        const double h = std::min(tau - t, dist < 3.0 * scale ? dt / 10.0 : dt);
        const double e1 = N01(rng), e2 = N01(rng);
        const double eta = m.sigma * nu;
        a += (eta - 0.5 * m.sigma * m.sigma) * h + m.sigma * std::sqrt(h) * e1 * sign;
        nu += m.kappa * (m.nu_bar - nu) * h + m.zeta * std::sqrt(h) * (rho * e1 + rc * e2);
        t += h;
        const double zn = zval(c, x, sign * std::exp(a));
        if (zn >= w) return finish(zn, HitW);
        if (zn <= c.K) return finish(zn, HitK);
    }
    return finish(zval(c, x, sign * std::exp(a)), Expired);
}

const RegionMap* pick_map(const StrategySpec& s, double tau) {
    const RegionMap* best = nullptr;
    for (const RegionMap* m : s.policy)
        if (!best || std::abs(m->tau - tau) < std::abs(best->tau - tau)) best = m;
    return best;
}

// Trades (x, y) to the edge of the current trade region, located by bisection on the label.
void trade_to_boundary(const Ctx& c, const RegionMap& map, double& x, double& y, double nu) {
    const double z = zval(c, x, y);
    const Label l = map.at(z, y, nu);
    if (l != Label::BR && l != Label::SR) return;
    const bool buy = l == Label::BR;
    auto moved = [&](double d, double& xn, double& yn) {
        if (buy) {
            const double sell_part = std::min(d, std::max(-y, 0.0));
            xn = x - (1.0 + c.theta2) * d;
            yn = y + d;
            (void)sell_part;
        } else {
            xn = x + (1.0 - c.theta1) * d;
            yn = y - d;
        }
    };
    auto still = [&](double d) {
        double xn, yn;
        moved(d, xn, yn);
        const double zn = zval(c, xn, yn);
        if (zn <= c.K) return false;
        return map.at(zn, yn, nu) == l;
    };
    double lo = 0.0, hi = std::max(1e-3, 0.05 * std::abs(y) + 0.05);
    int guard = 0;
    while (still(hi) && guard++ < 60) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (still(mid)) lo = mid;
        else hi = mid;
    }
    double xn, yn;
    moved(hi, xn, yn);
    if (zval(c, xn, yn) <= c.K) moved(lo, xn, yn);
    x = xn;
    y = yn;
}

PathResult policy_path(const Ctx& c, std::mt19937_64& rng) {
    const Utility& U = c.P.utility;
    const MarketModel& m = c.P.market;
    const bool goal = U.is_goal_reaching();
    const double zbar = goal ? std::get<GoalReachingSpec>(U.spec()).z_bar : std::numeric_limits<double>::infinity();
    double x = c.spec.initial.x, y = c.spec.initial.y;
    double nu = c.spec.initial.nu.value_or(m.nu_bar);
    std::normal_distribution<double> N01;
    const double rc = std::sqrt(std::max(0.0, 1.0 - m.rho * m.rho));
    const int steps = std::max(1, static_cast<int>(std::ceil(c.tau0 / c.spec.dt - 1e-9)));
    const double dt = c.tau0 / steps;
    for (int n = 0; n < steps; ++n) {
        const double tau = c.tau0 - n * dt;
        if (const RegionMap* map = pick_map(c.spec, tau)) trade_to_boundary(c, *map, x, y, nu);
        double z = zval(c, x, y);
        if (z >= zbar) return {U(z), HitW};
        if (z <= c.K) return {U(c.K), HitK};
        const double e1 = N01(rng);
        const Coefficients cf = model_coefficients(m, nu);
        y *= std::exp((cf.eta - 0.5 * cf.sigma * cf.sigma) * dt + cf.sigma * std::sqrt(dt) * e1);
        if (m.has_state()) nu += m.kappa * (m.nu_bar - nu) * dt + m.zeta * std::sqrt(dt) * (m.rho * e1 + rc * N01(rng));
        z = zval(c, x, y);
        if (z >= zbar) return {U(z), HitW};
        if (z <= c.K) return {U(c.K), HitK};
    }
    return {U(std::max(zval(c, x, y), c.K)), Expired};
}

}  // namespace

McEstimate simulate_strategy(const StrategySpec& spec, const ProblemSpec& problem) {
    if (spec.paths < 1) throw ValidationError("strategy.paths must be >= 1");
    if (!(spec.dt > 0.0)) throw ValidationError("strategy.dt must be > 0");
    const Position& p0 = spec.initial;
    if (!std::isfinite(p0.x) || !std::isfinite(p0.y)) throw DomainError("strategy: non-finite initial position");
    const double tau0 = problem.T - p0.t;
    if (!(tau0 > 0.0)) throw DomainError("strategy: initial time must be before T");
    const double K = problem.K();
    if (!is_solvent(p0.x, p0.y, problem.costs, K)) throw DomainError("strategy: initial position is insolvent");
    const double z0 = liquidation_value(p0.x, p0.y, problem.costs);
    if (spec.kind == StrategyKind::PiStar && !(z0 < spec.w))
        throw DomainError("strategy: pi_star needs K <= z < w");
    if (spec.kind == StrategyKind::RegionPolicy && spec.policy.empty())
        throw ValidationError("strategy: region_policy needs at least one region map");

    Ctx c{spec, problem, tau0, K, problem.costs.theta1, problem.costs.theta2};
    McEstimate est;
    const double w = spec.kind == StrategyKind::PiStar ? spec.w : std::numeric_limits<double>::infinity();
    if (spec.kind != StrategyKind::RegionPolicy && p0.y != 0.0) {
        const MarketModel& m = problem.market;
        const double dist = std::min(std::isfinite(w) ? w - z0 : INFINITY, z0 - K);
        const double step_sd = m.sigma * std::abs(z0 - p0.x) * std::sqrt(spec.dt);
        if (step_sd > dist) {
            std::ostringstream os;
            os << "dt=" << spec.dt << " is coarse relative to the distance to the nearest barrier (" << dist << ")";
            est.warnings.push_back(os.str());
        }
    }

    const std::size_t n = static_cast<std::size_t>(spec.paths);
    std::vector<double> val(n), sq(n);
    std::vector<std::uint8_t> out(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::mt19937_64 rng(path_seed(spec.seed, i));
            const PathResult r = spec.kind == StrategyKind::RegionPolicy ? policy_path(c, rng)
                                                                         : hold_path(c, p0.x, p0.y, tau0, w, rng);
            val[i] = r.value;
            out[i] = r.outcome;
        }
    };
    const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(n)));
    if (jobs == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(work, n * j / jobs, n * (j + 1) / jobs);
        for (auto& t : pool) t.join();
    }

    const double mean = pairwise_sum(val.data(), n) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (val[i] - mean) * (val[i] - mean);
    const double var = n > 1 ? pairwise_sum(sq.data(), n) / static_cast<double>(n - 1) : 0.0;
    est.mean = mean;
    est.std_error = std::sqrt(var / static_cast<double>(n));
    est.paths_used = spec.paths;
    std::size_t hw = 0, hk = 0;
    for (auto o : out) {
        hw += o == HitW;
        hk += o == HitK;
    }
    est.frac_hit_w = static_cast<double>(hw) / static_cast<double>(n);
    est.frac_hit_K = static_cast<double>(hk) / static_cast<double>(n);
    est.frac_expired = 1.0 - est.frac_hit_w - est.frac_hit_K;
    return est;
}

}  // namespace ncqvi
