#include "ncqvi/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncqvi/analytic.hpp"
#include "ncqvi/error.hpp"

namespace ncqvi {

OperatorCoefficients operator_coefficients(const MarketModel& model, double theta, double tau, double v,
                                           double nu) {
    if (!(tau > 0.0)) throw DomainError("operator_coefficients: needs T - t > 0");
    const Coefficients c = model_coefficients(model, nu);
    const double sq = std::sqrt(tau);
    const double a = 0.5 * c.sigma * c.sigma * v * v;
    OperatorCoefficients o;
    o.a_vv = a;
    o.a_zv = a * 2.0 * (1.0 + theta) / sq;
    o.a_zz = a * (1.0 + theta) * (1.0 + theta) / tau;
    o.b_v = -(1.0 / (2.0 * tau) - c.eta) * v;
    o.b_z = c.eta * (1.0 + theta) * v / sq;
    if (model.has_state()) {
        o.a_nn = 0.5 * c.zeta * c.zeta;
        o.a_zn = model.rho * c.sigma * c.zeta * v * (1.0 + theta) / sq;
        o.a_vn = model.rho * c.sigma * c.zeta * v;
        o.b_n = c.m;
    }
    return o;
}

namespace {

struct Acc {
    std::vector<Entry> e;
    void add(std::size_t col, double w) {
        if (w != 0.0) e.push_back({col, w});
    }
    // bilinear interpolation on plane k; weights are non-negative
    void add_point(const TransformedGrid& g, std::size_t k, double z, double v, double w) {
        if (w == 0.0) return;
        const auto [i, a] = locate(g.z, z);
        const auto [j, b] = locate(g.v, v);
        add(g.index(i, j, k), w * (1.0 - a) * (1.0 - b));
        add(g.index(i + 1, j, k), w * a * (1.0 - b));
        add(g.index(i, j + 1, k), w * (1.0 - a) * b);
        add(g.index(i + 1, j + 1, k), w * a * b);
    }
};

struct RowOut {
    Difference sell, buy;
    double damping = 1.0;
};

void interior_row(const ProblemSpec& P, const TransformedGrid& g, double tau, std::size_t i, std::size_t j,
                  std::size_t k, Acc& acc, RowOut& out) {
    const auto& Z = g.z;
    const auto& V = g.v;
    const double sq = std::sqrt(tau);
    const double z = Z[i];
    const double v = V[j];
    const double y = v / sq;
    const Coefficients cf = model_coefficients(P.market, g.nu[k]);
    const double th = P.costs.theta1 + P.costs.theta2;
    const std::size_t p = g.index(i, j, k);

    double wp = 0.0, wm = 0.0, sp = 0.0, sm = 0.0, zp = z, zm = z, vp = v, vm = v;
    if (v != 0.0) {
        const double c = v > 0.0 ? 1.0 - P.costs.theta1 : 1.0 + P.costs.theta2;
        const double hz = std::min(Z[i + 1] - z, z - Z[i - 1]);
        const double hv = std::min(V[j + 1] - v, v - V[j - 1]);
        // geometric mean of the z and v cell sizes in y units: long arms smear z at small tau,
        // short ones magnify the v interpolation error
        const double s0 = g.spec.arm_cells * std::max(hz / c, std::sqrt(hz / c * hv / sq));
        sp = sm = s0;
        if (y > 0.0) sm = std::min(sm, y);
        else sp = std::min(sp, -y);
        sp = std::min({sp, V.back() / sq - y, (Z.back() - z) / c});
        sm = std::min({sm, y - V.front() / sq, (z - Z.front()) / c});
        const double A = 0.5 * cf.sigma * cf.sigma * y * y;
        wp = 2.0 * A / ((sp + sm) * sp);
        wm = 2.0 * A / ((sp + sm) * sm);
        const double dr = cf.eta * y;
        if (dr > 0.0) wp += dr / sp;
        else wm -= dr / sm;
        zp = z + c * sp;
        vp = sq * (y + sp);
        zm = z - c * sm;
        vm = y - sm == 0.0 ? 0.0 : sq * (y - sm);

        const double bv = std::abs(v) / (2.0 * tau);
        if (v > 0.0) acc.add(g.index(i, j - 1, k), bv / (v - V[j - 1]));
        else acc.add(g.index(i, j + 1, k), bv / (V[j + 1] - v));
    }

    if (g.has_nu) {
        const auto& N = g.nu;
        const std::size_t nk = N.size();
        double un = 0.0, dn = 0.0;
        const double m = cf.m;
        if (k > 0 && k + 1 < nk) {
            const double hp = N[k + 1] - N[k], hm = N[k] - N[k - 1];
            const double C = 0.5 * cf.zeta * cf.zeta;
            un = 2.0 * C / ((hp + hm) * hp);
            dn = 2.0 * C / ((hp + hm) * hm);
            if (m > 0.0) un += m / hp;
            else dn -= m / hm;

            const double Bc = P.market.rho * cf.sigma * cf.zeta * y;
            if (v != 0.0 && Bc != 0.0) {
                const double B = std::abs(Bc);
                double lim;
                if (Bc > 0.0) lim = std::min(2.0 * sp * hp * std::min(wp, un), 2.0 * sm * hm * std::min(wm, dn));
                else lim = std::min(2.0 * sp * hm * std::min(wp, dn), 2.0 * sm * hp * std::min(wm, un));
                const double Be = std::min(B, lim);
                out.damping = Be / B;
                if (Bc > 0.0) {
                    const double t1 = Be / (2.0 * sp * hp), t2 = Be / (2.0 * sm * hm);
                    acc.add_point(g, k + 1, zp, vp, t1);
                    acc.add_point(g, k - 1, zm, vm, t2);
                    wp = std::max(0.0, wp - t1);
                    un = std::max(0.0, un - t1);
                    wm = std::max(0.0, wm - t2);
                    dn = std::max(0.0, dn - t2);
                } else {
                    const double t1 = Be / (2.0 * sp * hm), t2 = Be / (2.0 * sm * hp);
                    acc.add_point(g, k - 1, zp, vp, t1);
                    acc.add_point(g, k + 1, zm, vm, t2);
                    wp = std::max(0.0, wp - t1);
                    dn = std::max(0.0, dn - t1);
                    wm = std::max(0.0, wm - t2);
                    un = std::max(0.0, un - t2);
                }
            }
        } else if (k == 0 && m > 0.0) {
            un = m / (N[1] - N[0]);
        } else if (k + 1 == nk && m < 0.0) {
            dn = -m / (N[k] - N[k - 1]);
        }
        if (un > 0.0) acc.add(g.index(i, j, k + 1), un);
        if (dn > 0.0) acc.add(g.index(i, j, k - 1), dn);
    }

    acc.add_point(g, k, zp, vp, wp);
    acc.add_point(g, k, zm, vm, wm);

    // gradient constraints, original units
    const double hz_m = z - Z[i - 1];
    const bool up = j + 1 < V.size();
    const bool down = j > 0;
    if (v >= 0.0 && up) {
        Difference& b = out.buy;
        b.n = 2;
        b.e[0] = {g.index(i, j + 1, k), sq / (V[j + 1] - v)};
        b.e[1] = {g.index(i - 1, j, k), th / hz_m};
    }
    if (v > 0.0 && down) {
        Difference& s = out.sell;
        s.n = 1;
        s.e[0] = {g.index(i, j - 1, k), sq / (v - V[j - 1])};
    }
    if (v <= 0.0 && down) {
        Difference& s = out.sell;
        s.n = 2;
        s.e[0] = {g.index(i, j - 1, k), sq / (v - V[j - 1])};
        s.e[1] = {g.index(i - 1, j, k), th / hz_m};
    }
    if (v < 0.0 && up) {
        Difference& b = out.buy;
        b.n = 1;
        b.e[0] = {g.index(i, j + 1, k), sq / (V[j + 1] - v)};
    }

    // merge duplicates, drop self references
    auto& e = acc.e;
    std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    std::size_t w = 0;
    for (std::size_t r = 0; r < e.size(); ++r) {
        if (e[r].col == p) continue;
        if (w > 0 && e[w - 1].col == e[r].col) e[w - 1].w += e[r].w;
        else e[w++] = e[r];
    }
    e.resize(w);
}

}  // namespace

bool is_boundary_node(const TransformedGrid& g, std::size_t i, std::size_t j) {
    if (i == 0 || i + 1 == g.nz()) return true;
    if (j + 1 == g.nv()) return true;
    if (j == 0 && g.short_sale_allowed) return true;
    return false;
}

BoundaryData boundary_and_terminal_data(const ProblemSpec& problem, const TransformedGrid& grid) {
    const std::size_t N = grid.size();
    const Utility& U = problem.utility;
    const double K = problem.K();
    if (grid.z.front() != K) throw AssemblyError("boundary: grid z_min does not match the floor K");
    if (grid.short_sale_allowed != problem.short_sale_allowed)
        throw AssemblyError("boundary: grid and problem disagree on short sales");
    if (problem.market.has_state() != grid.has_nu)
        throw AssemblyError("boundary: grid nu axis does not match the market model");

    BoundaryData bd;
    bd.kind.assign(N, RowKind::Interior);
    bd.partner.assign(N, 0);
    bd.seed.assign(N, 0.0);
    bd.far_field.assign(N, 0);
    bd.fixed.assign(N, 0.0);

    const double z_max = grid.z.back();
    bool far = false;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, AspirationSpec>) {
                far = true;
                bd.ff_offset = s.c1;
                bd.ff_scale = s.c2 / s.p;
                bd.ff_p = s.p;
            } else if constexpr (std::is_same_v<S, SShapedSpec>) {
                far = true;
                bd.ff_scale = 1.0;
                bd.ff_shift = s.z0;
                bd.ff_p = s.p;
            } else if constexpr (std::is_same_v<S, CrraSpec>) {
                far = true;
                bd.ff_scale = 1.0 / s.p;
                bd.ff_p = s.p;
            }
        },
        U.spec());
    const bool goal = U.is_goal_reaching();
    const double z_bar = goal ? std::get<GoalReachingSpec>(U.spec()).z_bar : 0.0;

    std::vector<double> Uz(grid.nz());
    for (std::size_t i = 0; i < grid.nz(); ++i) Uz[i] = U(grid.z[i]);

    for (std::size_t k = 0; k < grid.nnu(); ++k)
        for (std::size_t j = 0; j < grid.nv(); ++j)
            for (std::size_t i = 0; i < grid.nz(); ++i) {
                const std::size_t p = grid.index(i, j, k);
                bd.seed[p] = Uz[i];
                if (!is_boundary_node(grid, i, j)) continue;
                if (i == 0) {
                    bd.kind[p] = RowKind::Dirichlet;
                    bd.fixed[p] = Uz[0];
                } else if (i + 1 == grid.nz()) {
                    bd.kind[p] = RowKind::Dirichlet;
                    if (far) bd.far_field[p] = 1;
                    else bd.fixed[p] = U(z_max);
                } else if (goal) {
                    bd.kind[p] = RowKind::Dirichlet;
                    bd.fixed[p] = (grid.z[i] - K) / (z_bar - K);
                } else {
                    bd.kind[p] = RowKind::Neumann;
                    bd.partner[p] = grid.index(i, j + 1 == grid.nv() ? j - 1 : j + 1, k);
                }
            }
    return bd;
}

std::vector<double> BoundaryData::dirichlet_values(const ProblemSpec& problem, const TransformedGrid& grid,
                                                   double tau) const {
    std::vector<double> out = fixed;
    bool any = std::any_of(far_field.begin(), far_field.end(), [](std::uint8_t f) { return f != 0; });
    if (!any) return out;
    std::vector<double> F(grid.nnu(), 1.0);
    const MarketModel& m = problem.market;
    if (m.kind == ModelKind::GBM) {
        F[0] = crra_factor(m, ff_p, tau, 0.0, problem.T);
    } else {
        const RiccatiState s = integrate_riccati(m, ff_p, tau, problem.T / 2000.0);
        for (std::size_t k = 0; k < grid.nnu(); ++k) {
            const double nu = grid.nu[k];
            F[k] = std::exp(s.A * nu * nu + s.B * nu + s.C);
        }
    }
    const double zf = std::pow(grid.z.back() - ff_shift, ff_p);
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (!far_field[p]) continue;
        std::size_t i, j, k;
        grid.unravel(p, i, j, k);
        out[p] = ff_offset + ff_scale * zf * F[k];
    }
    return out;
}

double LevelSystem::apply_pde(const double* W, std::size_t p) const {
    if (kind[p] != RowKind::Interior) return 0.0;
    double s = 0.0;
    for (std::size_t q = start[p]; q < start[p + 1]; ++q) s += entries[q].w * (W[entries[q].col] - W[p]);
    return s;
}

StencilRow LevelSystem::row(std::size_t p) const {
    StencilRow r;
    r.node = p;
    r.kind = kind[p];
    r.pde.assign(entries.begin() + start[p], entries.begin() + start[p + 1]);
    r.pde_sum = pde_sum[p];
    r.sell = sell[p];
    r.buy = buy[p];
    r.value = value[p];
    r.partner = partner[p];
    return r;
}

LevelSystem assemble_level(const ProblemSpec& problem, const TransformedGrid& grid, const BoundaryData& bd,
                           double tau, bool allow_damping, std::size_t damping_log_cap) {
    if (!(tau > 0.0)) throw AssemblyError("assemble_level: time to maturity must be > 0");
    const std::size_t N = grid.size();
    LevelSystem L;
    L.tau = tau;
    L.kind = bd.kind;
    L.partner = bd.partner;
    L.value = bd.dirichlet_values(problem, grid, tau);
    L.start.assign(N + 1, 0);
    L.pde_sum.assign(N, 0.0);
    L.sell.assign(N, Difference{});
    L.buy.assign(N, Difference{});
    L.entries.reserve(N * 12);

    Acc acc;
    acc.e.reserve(64);
    for (std::size_t p = 0; p < N; ++p) {
        L.start[p] = L.entries.size();
        if (bd.kind[p] != RowKind::Interior) continue;
        std::size_t i, j, k;
        grid.unravel(p, i, j, k);
        acc.e.clear();
        RowOut out;
        interior_row(problem, grid, tau, i, j, k, acc, out);
        double s = 0.0;
        for (const Entry& e : acc.e) {
            if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
                std::ostringstream os;
                os << "assembly: negative or non-finite weight at node " << p << " (tau=" << tau << ")";
                throw AssemblyError(os.str());
            }
            s += e.w;
        }
        L.entries.insert(L.entries.end(), acc.e.begin(), acc.e.end());
        L.pde_sum[p] = s;
        L.sell[p] = out.sell;
        L.buy[p] = out.buy;
        if (out.damping < 1.0) {
            if (!allow_damping) {
                std::ostringstream os;
                os << "assembly: cross term at node " << p << " needs damping (ratio " << out.damping
                   << ") but damping is not authorized";
                throw AssemblyError(os.str());
            }
            ++L.damping_count;
            L.damping_min = std::min(L.damping_min, out.damping);
            if (L.damping_log.size() < damping_log_cap) L.damping_log.push_back({tau, p, out.damping});
        }
    }
    L.start[N] = L.entries.size();
    return L;
}

StencilRow operator_stencil(const ProblemSpec& problem, const TransformedGrid& grid, double t, std::size_t node) {
    const double tau = grid.T - t;
    if (!(tau > 0.0)) throw DomainError("operator_stencil: needs t < T");
    if (node >= grid.size()) throw AssemblyError("operator_stencil: node out of range");
    std::size_t i, j, k;
    grid.unravel(node, i, j, k);
    if (is_boundary_node(grid, i, j)) throw AssemblyError("operator_stencil: boundary node, use boundary assembly");
    Acc acc;
    RowOut out;
    interior_row(problem, grid, tau, i, j, k, acc, out);
    StencilRow r;
    r.node = node;
    r.pde = acc.e;
    for (const Entry& e : acc.e) r.pde_sum += e.w;
    r.sell = out.sell;
    r.buy = out.buy;
    r.damping = out.damping;
    return r;
}

}  // namespace ncqvi
