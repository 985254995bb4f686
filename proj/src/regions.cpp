#include "ncqvi/regions.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

#include "ncqvi/analytic.hpp"
#include "ncqvi/error.hpp"
#include "ncqvi/io.hpp"

namespace ncqvi {

const char* to_string(Label l) {
    switch (l) {
        case Label::NR: return "NR";
        case Label::SR: return "SR";
        case Label::BR: return "BR";
        case Label::AMBIGUOUS: return "AMBIGUOUS";
        case Label::BOUNDARY: return "BOUNDARY";
    }
    return "?";
}

namespace {

std::size_t nearest(const std::vector<double>& a, double x) {
    const auto [lo, w] = locate(a, x);
    return (a.size() == 1 || w < 0.5) ? lo : lo + 1;
}

// nearest v node with the same sign as v (v = 0 maps to the zero node)
std::size_t nearest_same_side(const TransformedGrid& g, double v) {
    const std::size_t j0 = g.v_zero();
    if (v == 0.0) return j0;
    std::size_t j = nearest(g.v, v);
    if (v > 0.0 && j <= j0) j = std::min(j0 + 1, g.nv() - 1);
    if (v < 0.0 && j >= j0) j = j0 > 0 ? j0 - 1 : j0;
    return j;
}

}  // namespace

Label RegionMap::at(double z, double y, double nu) const {
    const TransformedGrid& g = solution->grid;
    std::size_t i = nearest(g.z, z);
    i = std::clamp<std::size_t>(i, 1, g.nz() - 2);
    const std::size_t j = nearest_same_side(g, std::sqrt(tau) * y);
    const std::size_t k = g.nnu() == 1 ? 0 : nearest(g.nu, nu);
    return labels[g.index(i, j, k)];
}

std::size_t RegionMap::count(Label l) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)); }

RegionMap classify_regions(const Solution& solution, double tau, double tol) {
    const LevelField& f = solution.level(tau);
    const TransformedGrid& g = solution.grid;
    RegionMap m;
    m.tau = f.tau;
    m.t = f.t;
    m.tol = tol > 0.0 ? tol : solution.tol_qvi;
    m.solution = &solution;
    const std::size_t N = g.size();
    m.labels.assign(N, Label::BOUNDARY);
    m.r_pde.resize(N);
    m.r_sell = f.r_sell;
    m.r_buy = f.r_buy;
    const double dt = g.dtau;
    for (std::size_t p = 0; p < N; ++p) {
        m.r_pde[p] = f.r_pde[p] * dt;
        if (std::isnan(f.r_pde[p])) continue;
        const double rp = m.r_pde[p], rs = f.r_sell[p], rb = f.r_buy[p];
        if (rp <= m.tol) m.labels[p] = Label::NR;
        else if (std::abs(rs) <= m.tol && std::abs(rb) <= m.tol) m.labels[p] = Label::AMBIGUOUS;
        else m.labels[p] = rs <= rb ? Label::SR : Label::BR;
    }

    // label changes along v inside each (z, nu) column
    const double sq = std::sqrt(m.tau);
    for (std::size_t k = 0; k < g.nnu(); ++k)
        for (std::size_t i = 1; i + 1 < g.nz(); ++i)
            for (std::size_t j = 0; j + 1 < g.nv(); ++j) {
                const std::size_t a = g.index(i, j, k), b = g.index(i, j + 1, k);
                const Label la = m.labels[a], lb = m.labels[b];
                if (la == lb || la == Label::BOUNDARY || lb == Label::BOUNDARY) continue;
                // crossing of the residual that binds on the traded side
                auto res = [&](Label l, std::size_t p) {
                    return l == Label::SR ? m.r_sell[p] : l == Label::BR ? m.r_buy[p] : m.r_pde[p];
                };
                const Label traded = la == Label::NR || la == Label::AMBIGUOUS ? lb : la;
                const double ra = res(traded, a), rb = res(traded, b);
                double w = 0.5;
                if (std::isfinite(ra) && std::isfinite(rb) && ra != rb) w = std::clamp(-ra / (rb - ra), 0.0, 1.0);
                const double v = g.v[j] + w * (g.v[j + 1] - g.v[j]);
                m.interfaces.push_back({i, k, g.z[i], v / sq, la, lb});
            }
    return m;
}

double trading_area_fraction(const RegionMap& map, double y_max, int nz, int ny, double nu) {
    const TransformedGrid& g = map.solution->grid;
    const double z0 = g.z.front(), z1 = g.z.back();
    std::size_t hit = 0, total = 0;
    for (int a = 0; a < nz; ++a) {
        const double z = z0 + (z1 - z0) * (a + 0.5) / nz;
        for (int b = 0; b < ny; ++b) {
            const double y = -y_max + 2.0 * y_max * (b + 0.5) / ny;
            const Label l = map.at(z, y, nu);
            ++total;
            if (l == Label::SR || l == Label::BR) ++hit;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

std::vector<FrictionlessRow> compare_frictionless(const RegionMap& map, double sigma, double tau) {
    const Solution& s = *map.solution;
    if (!s.problem.utility.is_goal_reaching()) throw Error("compare_frictionless: only goal-reaching problems are supported");
    const TransformedGrid& g = s.grid;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<FrictionlessRow> rows;
    const std::size_t k = g.nnu() / 2;
    for (std::size_t i = 1; i + 1 < g.nz(); ++i) {
        const double z = g.z[i];
        if (!(z > 0.0 && z < 1.0)) continue;
        FrictionlessRow r{z, nan, nan, browne_target(z, sigma, tau), 0};
        for (const auto& f : map.interfaces) {
            if (f.i != i || f.k != k) continue;
            if (f.y > 0.0 && f.below == Label::BR && f.above != Label::BR) r.buy_y = std::isnan(r.buy_y) ? f.y : std::max(r.buy_y, f.y);
            if (f.y < 0.0 && f.above == Label::SR && f.below != Label::SR) r.sell_y = std::isnan(r.sell_y) ? f.y : std::min(r.sell_y, f.y);
        }
        if (!std::isnan(r.buy_y)) r.sign = r.buy_y > r.target ? 1 : (r.buy_y < r.target ? -1 : 0);
        rows.push_back(r);
    }
    return rows;
}

InvariantReport check_invariants(const Solution& s, const LevelField& f) {
    const TransformedGrid& g = s.grid;
    const Utility& U = s.problem.utility;
    const GrowthBound& gb = U.growth_bound();
    InvariantReport rep;
    rep.worst_term = std::numeric_limits<double>::infinity();
    rep.worst_min = -std::numeric_limits<double>::infinity();

    std::vector<double> F(g.nnu(), 1.0);
    const MarketModel& m = s.problem.market;
    if (m.kind == ModelKind::GBM) {
        F[0] = crra_factor(m, gb.p, f.tau, 0.0, s.problem.T);
    } else {
        const RiccatiState r = integrate_riccati(m, gb.p, f.tau, s.problem.T / 2000.0);
        for (std::size_t k = 0; k < g.nnu(); ++k) F[k] = std::exp(r.A * g.nu[k] * g.nu[k] + r.B * g.nu[k] + r.C);
    }

    for (std::size_t p = 0; p < g.size(); ++p) {
        std::size_t i, j, k;
        g.unravel(p, i, j, k);
        const double W = f.W[p];
        const double z = g.z[i];
        rep.lower_violation = std::max(rep.lower_violation, U(z) - W);
        rep.upper_violation = std::max(rep.upper_violation, W - (gb.C1 + gb.C2 * std::pow(std::max(z, 0.0), gb.p) * F[k]));
        if (i + 1 < g.nz()) rep.monotonicity = std::max(rep.monotonicity, W - f.W[p + 1]);
        if (std::isnan(f.r_pde[p])) continue;
        ++rep.interior;
        const double a = f.r_pde[p] * g.dtau, b = f.r_sell[p], c = f.r_buy[p];
        rep.worst_term = std::min({rep.worst_term, a, b, c});
        rep.worst_min = std::max(rep.worst_min, std::min({a, b, c}));
    }
    return rep;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

void export_fields(const RegionMap& map, const std::string& path, const std::string& config_json) {
    const Solution& s = *map.solution;
    const TransformedGrid& g = s.grid;
    const LevelField& f = s.level(map.tau);
    std::unique_ptr<FILE, int (*)(FILE*)> out(std::fopen(path.c_str(), "w"), &std::fclose);
    if (!out) throw IoError("cannot open for writing: " + path);
    const bool nu = g.has_nu;
    std::fputs(nu ? "t,z,v,nu,y,W,residual_pde,residual_sell,residual_buy,label\n"
                  : "t,z,v,y,W,residual_pde,residual_sell,residual_buy,label\n",
               out.get());
    const double sq = std::sqrt(map.tau);
    std::size_t rows = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (map.labels[p] == Label::BOUNDARY) continue;
        std::size_t i, j, k;
        g.unravel(p, i, j, k);
        std::fprintf(out.get(), "%.17g,%.17g,%.17g,", map.t, g.z[i], g.v[j]);
        if (nu) std::fprintf(out.get(), "%.17g,", g.nu[k]);
        std::fprintf(out.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", g.v[j] / sq, f.W[p], f.r_pde[p], f.r_sell[p],
                     f.r_buy[p], to_string(map.labels[p]));
        ++rows;
    }
    if (std::ferror(out.get())) throw IoError("write failed: " + path);

    json meta;
    meta["format"] = "qvi-fields-1";
    meta["csv"] = path;
    meta["rows"] = rows;
    meta["t"] = map.t;
    meta["tau"] = map.tau;
    meta["tol"] = map.tol;
    meta["config_hash"] = fnv1a_hex(config_json);
    meta["config"] = json::parse(config_json);
    meta["problem"] = to_json(s.problem);
    meta["grid"] = to_json(g.spec);
    meta["solver"] = to_json(s.params);
    meta["lambda"] = s.lambda;
    meta["tol_qvi"] = s.tol_qvi;
    meta["diagnostics"] = to_json(s.diag);
    json counts;
    for (Label l : {Label::NR, Label::SR, Label::BR, Label::AMBIGUOUS}) counts[to_string(l)] = map.count(l);
    meta["label_counts"] = counts;
    std::ofstream js(path + ".json");
    if (!js) throw IoError("cannot open for writing: " + path + ".json");
    js << meta.dump(2) << "\n";
    if (!js) throw IoError("write failed: " + path + ".json");
}

void write_plot_script(const std::string& csv_path, const std::string& script_path, const std::string& title,
                       bool has_nu) {
    std::ofstream o(script_path);
    if (!o) throw IoError("cannot open for writing: " + script_path);
    const int ycol = has_nu ? 5 : 4, lcol = has_nu ? 10 : 9;
    o << "# " << (has_nu ? "t,z,v,nu,y,W,residual_pde,residual_sell,residual_buy,label"
                         : "t,z,v,y,W,residual_pde,residual_sell,residual_buy,label")
      << "\n"
      << "set datafile separator ','\n"
      << "set title '" << title << "'\n"
      << "set xlabel 'z'\nset ylabel 'y'\n"
      << "set key outside\n";
    const char* names[] = {"BR", "SR", "NR"};
    const char* colors[] = {"#1f77b4", "#d62728", "#dddddd"};
    for (int n = 0; n < 3; ++n) {
        o << (n == 0 ? "plot '" + csv_path + "'" : std::string("     ''")) << " every ::1 using 2:(strcol(" << lcol << ") eq '"
          << names[n] << "' ? column(" << ycol << ") : 1/0) with points pt 7 ps 0.3 lc rgb '" << colors[n] << "' title '"
          << names[n] << "'" << (n < 2 ? ", \\\n" : "\n");
    }
    if (!o) throw IoError("write failed: " + script_path);
}

}  // namespace ncqvi
