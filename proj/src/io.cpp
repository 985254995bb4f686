#include "ncqvi/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ncqvi/error.hpp"

namespace ncqvi {

KeyReader::KeyReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + " must be an object");
}

bool KeyReader::has(const std::string& key) const { return j_.contains(key); }

const json& KeyReader::get(const std::string& key) {
    if (!j_.contains(key)) throw ValidationError(key_path(key) + " is required");
    seen_.push_back(key);
    return j_.at(key);
}

double KeyReader::number(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) throw ValidationError(key_path(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(key_path(key) + " must be finite");
    return d;
}

double KeyReader::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

int KeyReader::integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_number_integer()) throw ValidationError(key_path(key) + " must be an integer");
    return v.get<int>();
}

bool KeyReader::boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ValidationError(key_path(key) + " must be true or false");
    return v.get<bool>();
}

std::string KeyReader::string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_string()) throw ValidationError(key_path(key) + " must be a string");
    return v.get<std::string>();
}

void KeyReader::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
        if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
            throw ValidationError("unknown key " + key_path(it.key()));
}

namespace {

// Prefixes ValidationError messages from model validate() with the config path.
template <typename F>
void check(const std::string& path, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

const char* branch_name(BranchKind k) {
    switch (k) {
        case BranchKind::Constant: return "constant";
        case BranchKind::Power: return "power";
        case BranchKind::ScaledPower: return "scaled_power";
        case BranchKind::NegatedPower: return "negated_power";
    }
    return "?";
}

BranchKind branch_kind(const std::string& s, const std::string& path) {
    if (s == "constant") return BranchKind::Constant;
    if (s == "power") return BranchKind::Power;
    if (s == "scaled_power") return BranchKind::ScaledPower;
    if (s == "negated_power") return BranchKind::NegatedPower;
    throw ValidationError(path + " must be one of constant, power, scaled_power, negated_power");
}

}  // namespace

json to_json(const MarketModel& m) {
    json j;
    j["model"] = to_string(m.kind);
    j["r"] = m.r;
    if (m.kind == ModelKind::GBM) {
        j["eta"] = m.eta;
        j["sigma"] = m.sigma;
    } else {
        j["sigma"] = m.sigma;
        j["kappa"] = m.kappa;
        j["nu_bar"] = m.nu_bar;
        j["zeta"] = m.zeta;
        j["rho"] = m.rho;
    }
    return j;
}

json to_json(const CostSpec& c) { return json{{"theta1", c.theta1}, {"theta2", c.theta2}}; }

json to_json(const Utility& u) {
    return std::visit(
        [&](const auto& s) -> json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, GoalReachingSpec>) return json{{"type", "goal_reaching"}, {"z_bar", s.z_bar}};
            else if constexpr (std::is_same_v<S, AspirationSpec>)
                return json{{"type", "aspiration"}, {"p", s.p}, {"c1", s.c1}, {"c2", s.c2}, {"z_bar", s.z_bar}};
            else if constexpr (std::is_same_v<S, SShapedSpec>)
                return json{{"type", "s_shaped"}, {"lambda", s.lambda}, {"p", s.p}, {"z0", s.z0}};
            else if constexpr (std::is_same_v<S, CrraSpec>) return json{{"type", "crra"}, {"p", s.p}};
            else {
                json pieces = json::array();
                for (const auto& pc : u.pieces())
                    pieces.push_back({{"start", pc.start},
                                      {"kind", branch_name(pc.branch.kind)},
                                      {"offset", pc.branch.offset},
                                      {"coeff", pc.branch.coeff},
                                      {"exponent", pc.branch.exponent},
                                      {"shift", pc.branch.shift}});
                const auto& g = u.growth_bound();
                return json{{"type", "custom"}, {"pieces", pieces}, {"growth", {{"C1", g.C1}, {"C2", g.C2}, {"p", g.p}}}};
            }
        },
        u.spec());
}

json to_json(const ProblemSpec& p) {
    return json{{"market", to_json(p.market)},
                {"costs", to_json(p.costs)},
                {"utility", to_json(p.utility)},
                {"K", p.K()},
                {"T", p.T},
                {"short_sale", p.short_sale_allowed}};
}

json to_json(const GridSpec& g) {
    json j{{"nz", g.nz},
           {"nv", g.nv},
           {"v_max", g.v_max},
           {"v_cluster", g.v_cluster},
           {"nnu", g.nnu},
           {"nu_min", g.nu_min},
           {"nu_max", g.nu_max},
           {"arm_cells", g.arm_cells},
           {"tau_max", g.tau_max},
           {"auto_refine", g.auto_refine}};
    if (g.z_min >= 0.0) j["z_min"] = g.z_min;
    if (g.z_max > 0.0) j["z_max"] = g.z_max;
    if (!g.z_refine.empty()) {
        json w = json::array();
        for (const auto& r : g.z_refine) w.push_back({{"center", r.center}, {"half_width", r.half_width}, {"ratio", r.ratio}});
        j["refine"] = w;
    }
    if (!g.z_nodes.empty()) j["z_nodes"] = g.z_nodes;
    if (!g.v_nodes.empty()) j["v_nodes"] = g.v_nodes;
    return j;
}

json to_json(const SolverParams& s) {
    return json{{"lambda", s.lambda},
                {"newton_tol", s.newton_tol},
                {"newton_max_iter", s.newton_max_iter},
                {"time_steps", s.time_steps},
                {"store_taus", s.store_taus},
                {"tol_qvi", s.tol_qvi},
                {"allow_damping", s.allow_damping},
                {"linear", s.linear == LinearSolverKind::Iterative ? "iterative" : "direct"},
                {"linear_tol", s.linear_tol}};
}

json to_json(const Diagnostics& d) {
    json log = json::array();
    for (const auto& e : d.damping_log) log.push_back({{"tau", e.tau}, {"node", e.node}, {"ratio", e.ratio}});
    int total = 0, mx = 0;
    for (int n : d.newton_iterations) {
        total += n;
        mx = std::max(mx, n);
    }
    return json{{"newton_iterations_total", total},
                {"newton_iterations_max", mx},
                {"newton_iterations", d.newton_iterations},
                {"mmatrix_rows_checked", d.mmatrix_rows_checked},
                {"mmatrix_violations", d.mmatrix_violations},
                {"damping_events", d.damping_events},
                {"damping_min_ratio", d.damping_min},
                {"damping_log", log},
                {"linear_fallbacks", d.linear_fallbacks},
                {"linear_iterations", d.linear_iterations}};
}

MarketModel market_from_json(const json& j, const std::string& path) {
    KeyReader r(j, path);
    const std::string model = r.string("model", "gbm");
    MarketModel m;
    if (model == "gbm") {
        m.kind = ModelKind::GBM;
        m.r = r.number("r", 0.0);
        m.eta = r.number("eta", 0.0);
        m.sigma = r.number("sigma");
    } else if (model == "gaussian_mean_return" || model == "gmr") {
        m.kind = ModelKind::GaussianMeanReturn;
        m.r = r.number("r", 0.0);
        m.sigma = r.number("sigma");
        m.kappa = r.number("kappa");
        m.nu_bar = r.number("nu_bar");
        m.zeta = r.number("zeta");
        m.rho = r.number("rho");
    } else {
        throw ValidationError(r.key_path("model") + " must be gbm or gaussian_mean_return");
    }
    r.finish();
    check(path, [&] { m.validate(); });
    return m;
}

CostSpec costs_from_json(const json& j, const std::string& path) {
    KeyReader r(j, path);
    CostSpec c{r.number("theta1"), r.number("theta2")};
    r.finish();
    check(path, [&] { c.validate(); });
    return c;
}

Utility utility_from_json(const json& j, double K, const std::string& path) {
    KeyReader r(j, path);
    const std::string type = r.string("type", "");
    UtilitySpec spec;
    if (type == "goal_reaching") {
        spec = GoalReachingSpec{r.number("z_bar")};
    } else if (type == "aspiration") {
        spec = AspirationSpec{r.number("p"), r.number("c1"), r.number("c2"), r.number("z_bar")};
    } else if (type == "s_shaped") {
        spec = SShapedSpec{r.number("lambda"), r.number("p"), r.number("z0")};
    } else if (type == "crra") {
        spec = CrraSpec{r.number("p")};
    } else if (type == "custom") {
        std::vector<Piece> pieces;
        const json& arr = r.get("pieces");
        if (!arr.is_array() || arr.empty()) throw ValidationError(r.key_path("pieces") + " must be a non-empty array");
        for (std::size_t n = 0; n < arr.size(); ++n) {
            const std::string pp = r.key_path("pieces") + "[" + std::to_string(n) + "]";
            KeyReader q(arr[n], pp);
            Piece pc;
            pc.start = q.number("start");
            pc.branch.kind = branch_kind(q.string("kind", "constant"), q.key_path("kind"));
            pc.branch.offset = q.number("offset", 0.0);
            pc.branch.coeff = q.number("coeff", 0.0);
            pc.branch.exponent = q.number("exponent", 1.0);
            pc.branch.shift = q.number("shift", 0.0);
            q.finish();
            pieces.push_back(pc);
        }
        GrowthBound gb;
        if (r.has("growth")) {
            KeyReader q(r.get("growth"), r.key_path("growth"));
            gb = {q.number("C1"), q.number("C2"), q.number("p")};
            q.finish();
        }
        r.finish();
        if (std::abs(pieces.front().start - K) > 1e-12)
            throw ValidationError(path + ".pieces[0].start must equal the floor K");
        Utility u(pieces, K, gb, CustomSpec{});
        const AssumptionReport rep = validate_assumption(u, gb.C1, gb.C2, gb.p, 200);
        if (!rep.pass()) throw ValidationError(path + ": " + rep.findings.front().detail);
        return u;
    } else {
        throw ValidationError(r.key_path("type") + " must be goal_reaching, aspiration, s_shaped, crra or custom");
    }
    r.finish();
    try {
        return make_utility(spec, K);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

ProblemSpec problem_from_json(const json& j, const std::string& path) {
    KeyReader r(j, path);
    const double K = r.number("K", 0.0);
    if (K < 0.0) throw ValidationError(r.key_path("K") + " must be >= 0");
    MarketModel m = market_from_json(r.get("market"), r.key_path("market"));
    CostSpec c = costs_from_json(r.get("costs"), r.key_path("costs"));
    Utility u = utility_from_json(r.get("utility"), K, r.key_path("utility"));
    ProblemSpec p{m, c, u, r.number("T", 1.0), r.boolean("short_sale", true)};
    r.finish();
    check(path, [&] { p.validate(); });
    return p;
}

GridSpec grid_from_json(const json& j, const std::string& path) {
    KeyReader r(j, path);
    GridSpec g;
    g.nz = r.integer("nz", g.nz);
    g.nv = r.integer("nv", g.nv);
    g.z_min = r.number("z_min", g.z_min);
    g.z_max = r.number("z_max", g.z_max);
    g.v_max = r.number("v_max", g.v_max);
    g.v_cluster = r.number("v_cluster", g.v_cluster);
    g.nnu = r.integer("nnu", g.nnu);
    g.nu_min = r.number("nu_min", g.nu_min);
    g.nu_max = r.number("nu_max", g.nu_max);
    g.arm_cells = r.number("arm_cells", g.arm_cells);
    g.tau_max = r.number("tau_max", g.tau_max);
    g.auto_refine = r.boolean("auto_refine", g.auto_refine);
    if (r.has("refine")) {
        const json& arr = r.get("refine");
        if (!arr.is_array()) throw ValidationError(r.key_path("refine") + " must be an array");
        for (std::size_t n = 0; n < arr.size(); ++n) {
            KeyReader q(arr[n], r.key_path("refine") + "[" + std::to_string(n) + "]");
            RefinementWindow w{q.number("center"), q.number("half_width"), q.number("ratio", 8.0)};
            q.finish();
            if (!(w.half_width > 0.0) || !(w.ratio >= 1.0))
                throw ValidationError(r.key_path("refine") + ": half_width > 0 and ratio >= 1 required");
            g.z_refine.push_back(w);
        }
    }
    if (r.has("z_nodes")) g.z_nodes = r.get("z_nodes").get<std::vector<double>>();
    if (r.has("v_nodes")) g.v_nodes = r.get("v_nodes").get<std::vector<double>>();
    r.finish();
    if (g.nz < 3) throw ValidationError(path + ".nz must be >= 3");
    if (g.nv < 3) throw ValidationError(path + ".nv must be >= 3");
    if (!(g.v_max > 0.0)) throw ValidationError(path + ".v_max must be > 0");
    if (!(g.v_cluster > 0.0)) throw ValidationError(path + ".v_cluster must be > 0");
    if (!(g.arm_cells > 0.0)) throw ValidationError(path + ".arm_cells must be > 0");
    if (!(g.tau_max > 0.0)) throw ValidationError(path + ".tau_max must be > 0");
    return g;
}

SolverParams params_from_json(const json& j, const std::string& path) {
    KeyReader r(j, path);
    SolverParams s;
    s.lambda = r.number("lambda", s.lambda);
    s.newton_tol = r.number("newton_tol", s.newton_tol);
    s.newton_max_iter = r.integer("newton_max_iter", s.newton_max_iter);
    s.time_steps = r.integer("time_steps", s.time_steps);
    if (r.has("store_taus")) s.store_taus = r.get("store_taus").get<std::vector<double>>();
    s.tol_qvi = r.number("tol_qvi", s.tol_qvi);
    s.allow_damping = r.boolean("allow_damping", s.allow_damping);
    const std::string lin = r.string("linear", "iterative");
    if (lin == "iterative") s.linear = LinearSolverKind::Iterative;
    else if (lin == "direct") s.linear = LinearSolverKind::Direct;
    else throw ValidationError(r.key_path("linear") + " must be iterative or direct");
    s.linear_tol = r.number("linear_tol", s.linear_tol);
    r.finish();
    check(path, [&] { s.validate(); });
    return s;
}

void write_snapshot(const Solution& s, const std::string& path, const json& config) {
    json h;
    h["format"] = "QVISNAP1";
    h["config"] = config;
    h["problem"] = to_json(s.problem);
    h["grid_spec"] = to_json(s.grid.spec);
    h["grid"] = {{"z", s.grid.z}, {"v", s.grid.v}, {"nu", s.grid.nu}, {"T", s.grid.T}, {"dtau", s.grid.dtau},
                 {"time_steps", s.grid.t_levels.size()}};
    h["params"] = to_json(s.params);
    h["lambda"] = s.lambda;
    h["tol_qvi"] = s.tol_qvi;
    h["diagnostics"] = to_json(s.diag);
    json lv = json::array();
    for (const auto& f : s.levels) lv.push_back({{"tau", f.tau}, {"t", f.t}});
    h["levels"] = lv;
    h["block_order"] = {"W", "residual_pde", "residual_sell", "residual_buy"};
    const std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open snapshot for writing: " + path);
    out << "QVISNAP1\n" << header.size() << "\n" << header;
    for (const auto& f : s.levels)
        for (const auto* blk : {&f.W, &f.r_pde, &f.r_sell, &f.r_buy})
            out.write(reinterpret_cast<const char*>(blk->data()), static_cast<std::streamsize>(blk->size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path);
}

Solution read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path);
    std::string magic, len;
    std::getline(in, magic);
    if (magic != "QVISNAP1") throw IoError("not a snapshot (bad magic): " + path);
    std::getline(in, len);
    std::size_t n = 0;
    try {
        n = std::stoul(len);
    } catch (...) {
        throw IoError("corrupt snapshot header length: " + path);
    }
    std::string header(n, '\0');
    in.read(header.data(), static_cast<std::streamsize>(n));
    if (!in) throw IoError("truncated snapshot header: " + path);
    const json h = json::parse(header);

    ProblemSpec problem = problem_from_json(h.at("problem"));
    GridSpec gs = grid_from_json(h.at("grid_spec"), "grid_spec");
    SolverParams params = params_from_json(h.at("params"), "params");
    TransformedGrid g = make_grid(problem, gs, params.time_steps);
    g.z = h.at("grid").at("z").get<std::vector<double>>();
    g.v = h.at("grid").at("v").get<std::vector<double>>();
    g.nu = h.at("grid").at("nu").get<std::vector<double>>();

    Solution s{problem, g, params, h.at("lambda").get<double>(), h.at("tol_qvi").get<double>(), {}, {}};
    const std::size_t N = g.size();
    for (const auto& l : h.at("levels")) {
        LevelField f;
        f.tau = l.at("tau").get<double>();
        f.t = l.at("t").get<double>();
        for (auto* blk : {&f.W, &f.r_pde, &f.r_sell, &f.r_buy}) {
            blk->resize(N);
            in.read(reinterpret_cast<char*>(blk->data()), static_cast<std::streamsize>(N * sizeof(double)));
        }
        if (!in) throw IoError("truncated snapshot data: " + path);
        s.levels.push_back(std::move(f));
    }
    const json& d = h.at("diagnostics");
    s.diag.newton_iterations = d.at("newton_iterations").get<std::vector<int>>();
    s.diag.mmatrix_rows_checked = d.at("mmatrix_rows_checked").get<std::size_t>();
    s.diag.mmatrix_violations = d.at("mmatrix_violations").get<std::size_t>();
    s.diag.damping_events = d.at("damping_events").get<std::size_t>();
    s.diag.damping_min = d.at("damping_min_ratio").get<double>();
    s.diag.linear_fallbacks = d.at("linear_fallbacks").get<int>();
    s.diag.linear_iterations = d.at("linear_iterations").get<long>();
    return s;
}

}  // namespace ncqvi
