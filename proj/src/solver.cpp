#include "ncqvi/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "ncqvi/error.hpp"
#include "ncqvi/ilu0.hpp"

namespace ncqvi {

void SolverParams::validate() const {
    if (lambda < 0.0 || !std::isfinite(lambda)) throw ValidationError("solver.lambda must be > 0");
    if (!(newton_tol > 0.0)) throw ValidationError("solver.newton_tol must be > 0");
    if (newton_max_iter < 1) throw ValidationError("solver.newton_max_iter must be >= 1");
    if (time_steps < 1) throw ValidationError("solver.time_steps must be >= 1");
    if (tol_qvi < 0.0) throw ValidationError("solver.tol_qvi must be >= 0");
    if (!(linear_tol > 0.0)) throw ValidationError("solver.linear_tol must be > 0");
}

const LevelField& Solution::level(double tau) const {
    for (const auto& f : levels)
        if (std::abs(f.tau - tau) <= 1e-9 * std::max(1.0, grid.spec.tau_max)) return f;
    std::ostringstream os;
    os << "time level T-t=" << tau << " was not retained";
    throw Error(os.str());
}

double Solution::value(const LevelField& f, double z, double v, double nu) const {
    const auto [i, a] = locate(grid.z, z);
    const auto [j, b] = locate(grid.v, v);
    auto plane = [&](std::size_t k) {
        const double* W = f.W.data();
        return (1 - a) * (1 - b) * W[grid.index(i, j, k)] + a * (1 - b) * W[grid.index(i + 1, j, k)] +
               (1 - a) * b * W[grid.index(i, j + 1, k)] + a * b * W[grid.index(i + 1, j + 1, k)];
    };
    if (grid.nnu() == 1) return plane(0);
    const auto [k, c] = locate(grid.nu, nu);
    return (1 - c) * plane(k) + c * plane(k + 1);
}

double Solution::value_zy(double tau, double z, double y, double nu) const {
    return value(level(tau), z, std::sqrt(tau) * y, nu);
}

RowMatrix newton_matrix(const LevelSystem& L, double dtau, double lambda, const std::vector<std::uint8_t>& active_sell,
                        const std::vector<std::uint8_t>& active_buy) {
    const std::size_t N = L.size();
    RowMatrix A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    A.reserve(static_cast<Eigen::Index>(L.entries.size() + 5 * N));
    std::vector<std::pair<std::size_t, double>> buf;
    buf.reserve(64);
    for (std::size_t p = 0; p < N; ++p) {
        buf.clear();
        if (L.kind[p] == RowKind::Dirichlet) {
            buf.push_back({p, 1.0});
        } else if (L.kind[p] == RowKind::Neumann) {
            buf.push_back({p, 1.0});
            buf.push_back({L.partner[p], -1.0});
        } else {
            double diag = 1.0 / dtau + L.pde_sum[p];
            // row-scaled: the constraint error is about r_pde/lambda, and r_pde is huge at large |y|
            const double lam = lambda * std::max(1.0, dtau * L.pde_sum[p]);
            for (std::size_t q = L.start[p]; q < L.start[p + 1]; ++q) buf.push_back({L.entries[q].col, -L.entries[q].w});
            for (int side = 0; side < 2; ++side) {
                const bool on = side == 0 ? active_sell[p] : active_buy[p];
                if (!on) continue;
                const Difference& d = side == 0 ? L.sell[p] : L.buy[p];
                // g is a difference quotient; an arm of length 1/sum(w) turns it into a value gap
                double wsum = 0.0;
                for (int q = 0; q < d.n; ++q) wsum += d.e[q].w;
                const double lam_side = wsum > 0.0 ? lam * std::max(1.0, 1.0 / wsum) : lam;
                for (int q = 0; q < d.n; ++q) {
                    buf.push_back({d.e[q].col, -lam_side * d.e[q].w});
                    diag += lam_side * d.e[q].w;
                }
            }
            buf.push_back({p, diag});
        }
        std::sort(buf.begin(), buf.end());
        A.startVec(static_cast<Eigen::Index>(p));
        for (std::size_t r = 0; r < buf.size(); ++r) {
            double val = buf[r].second;
            while (r + 1 < buf.size() && buf[r + 1].first == buf[r].first) val += buf[++r].second;
            A.insertBack(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(buf[r].first)) = val;
        }
    }
    A.finalize();
    return A;
}

MMatrixReport m_matrix_check(const RowMatrix& A, std::size_t damping_events) {
    MMatrixReport rep;
    rep.damping_events = damping_events;
    for (Eigen::Index r = 0; r < A.outerSize(); ++r) {
        double diag = 0.0, off = 0.0;
        bool positive_off = false;
        for (RowMatrix::InnerIterator it(A, r); it; ++it) {
            if (it.col() == r) diag += it.value();
            else {
                off += std::abs(it.value());
                if (it.value() > 0.0) positive_off = true;
            }
        }
        ++rep.rows_checked;
        const std::size_t row = static_cast<std::size_t>(r);
        if (!(diag > 0.0)) rep.violations.push_back({row, "non-positive diagonal"});
        else if (positive_off) rep.violations.push_back({row, "positive off-diagonal"});
        else if (diag < off * (1.0 - 1e-12)) rep.violations.push_back({row, "diagonal below off-diagonal sum"});
    }
    return rep;
}

void qvi_residuals(const LevelSystem& L, double dtau, const std::vector<double>& W, const std::vector<double>& W_old,
                   LevelField& out) {
    const std::size_t N = L.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    out.r_pde.assign(N, nan);
    out.r_sell.assign(N, nan);
    out.r_buy.assign(N, nan);
    for (std::size_t p = 0; p < N; ++p) {
        if (L.kind[p] != RowKind::Interior) continue;
        out.r_pde[p] = (W[p] - W_old[p]) / dtau - L.apply_pde(W.data(), p);
        out.r_sell[p] = L.sell[p].n ? -L.sell[p].apply(W.data(), p) : inf;
        out.r_buy[p] = L.buy[p].n ? -L.buy[p].apply(W.data(), p) : inf;
    }
}

namespace {

class LinearSolver {
public:
    explicit LinearSolver(const SolverParams& p) : params_(p) {}

    // Solves A x = b with rows already scaled to unit diagonal; x holds the initial guess.
    // The iterative path solves for the correction so the relative tolerance tracks the residual.
    void solve(const RowMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, Diagnostics& diag) {
        if (params_.linear == LinearSolverKind::Iterative) {
            const Eigen::VectorXd r = b - A * x;
            if (r.lpNorm<Eigen::Infinity>() == 0.0) return;
            Eigen::BiCGSTAB<RowMatrix, Ilu0> it;
            it.setTolerance(params_.linear_tol);
            it.setMaxIterations(1000);
            it.compute(A);
            if (it.preconditioner().info() == Eigen::Success) {
                Eigen::VectorXd d = it.solve(r);
                diag.linear_iterations += it.iterations();
                if (it.info() == Eigen::Success && d.allFinite()) {
                    x += d;
                    return;
                }
            }
            ++diag.linear_fallbacks;
        }
        Eigen::SparseMatrix<double> C = A;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(C);
        if (lu.info() != Eigen::Success) throw SolverError("linear solve failed: singular Newton matrix");
        x = lu.solve(b);
    }

private:
    const SolverParams& params_;
};

std::string describe_node(const TransformedGrid& g, std::size_t p) {
    std::size_t i, j, k;
    g.unravel(p, i, j, k);
    std::ostringstream os;
    os << "node " << p << " (z=" << g.z[i] << ", v=" << g.v[j];
    if (g.has_nu) os << ", nu=" << g.nu[k];
    os << ")";
    return os.str();
}

}  // namespace

Solution solve_qvi(const ProblemSpec& problem, const TransformedGrid& grid, const SolverParams& params) {
    problem.validate();
    params.validate();
    if (static_cast<int>(grid.t_levels.size()) != params.time_steps)
        throw AssemblyError("grid time levels do not match solver.time_steps");
    const auto t0 = std::chrono::steady_clock::now();

    Solution sol{problem, grid, params, 0.0, 0.0, {}, {}};
    const double dtau = grid.dtau;
    const double lambda = params.lambda > 0.0 ? params.lambda : 1e6 / dtau;
    sol.lambda = lambda;
    sol.tol_qvi = params.tol_qvi > 0.0 ? params.tol_qvi : std::max(10.0 * params.newton_tol, 10.0 / (lambda * dtau));

    const int steps = params.time_steps;
    std::vector<std::uint8_t> keep(steps, 0);
    if (params.store_taus.empty()) keep[static_cast<std::size_t>(steps - 1)] = 1;
    for (double tau : params.store_taus) {
        const double n = tau / dtau;
        const long r = std::lround(n);
        if (r < 1 || r > steps || std::abs(n - r) > 1e-6) {
            std::ostringstream os;
            os << "solver.store_taus: T-t=" << tau << " is not on the time grid (step " << dtau << ")";
            throw ValidationError(os.str());
        }
        keep[r - 1] = 1;
    }

    const BoundaryData bd = boundary_and_terminal_data(problem, grid);
    const std::size_t N = grid.size();
    std::vector<double> W = bd.seed, W_old(N);
    std::vector<std::uint8_t> act_s(N, 0), act_b(N, 0), new_s(N), new_b(N);
    LinearSolver lin(params);
    Eigen::VectorXd x(static_cast<Eigen::Index>(N)), b(static_cast<Eigen::Index>(N));

    for (int n = 0; n < steps; ++n) {
        const double tau = (n + 1) * dtau;
        const LevelSystem L = assemble_level(problem, grid, bd, tau, params.allow_damping);
        sol.diag.damping_events += L.damping_count;
        sol.diag.damping_min = std::min(sol.diag.damping_min, L.damping_min);
        for (const auto& e : L.damping_log)
            if (sol.diag.damping_log.size() < 256) sol.diag.damping_log.push_back(e);

        W_old = W;
        for (std::size_t p = 0; p < N; ++p) {
            if (L.kind[p] == RowKind::Dirichlet) W[p] = L.value[p];
            x[static_cast<Eigen::Index>(p)] = W[p];
        }
        bool converged = false;
        int it = 0;
        std::size_t flips = 0, worst = 0;
        for (; it < params.newton_max_iter; ++it) {
            RowMatrix A = newton_matrix(L, dtau, lambda, act_s, act_b);
            if (it == 0) {
                const MMatrixReport rep = m_matrix_check(A, L.damping_count);
                sol.diag.mmatrix_rows_checked += rep.rows_checked;
                sol.diag.mmatrix_violations += rep.violations.size();
                if (!rep.pass()) {
                    throw AssemblyError("M-matrix test failed at " + describe_node(grid, rep.violations[0].row) + ": " +
                                        rep.violations[0].what);
                }
            }
            for (std::size_t p = 0; p < N; ++p) {
                double rhs = L.kind[p] == RowKind::Dirichlet ? L.value[p]
                             : L.kind[p] == RowKind::Neumann  ? 0.0
                                                              : W_old[p] / dtau;
                double* v = A.valuePtr();
                const int* c = A.innerIndexPtr();
                const int lo = A.outerIndexPtr()[p], hi = A.outerIndexPtr()[p + 1];
                double d = 0.0;
                for (int q = lo; q < hi; ++q)
                    if (c[q] == static_cast<int>(p)) d = v[q];
                for (int q = lo; q < hi; ++q) v[q] /= d;
                b[static_cast<Eigen::Index>(p)] = rhs / d;
            }
            lin.solve(A, b, x, sol.diag);

            double step = 0.0;
            for (std::size_t p = 0; p < N; ++p) {
                // scaled step: a single node can flip forever on a g of order the solve error
                const double xp = x[static_cast<Eigen::Index>(p)];
                step = std::max(step, std::abs(xp - W[p]) / std::max(1.0, std::abs(xp)));
                W[p] = x[static_cast<Eigen::Index>(p)];
            }
            flips = 0;
            double worst_g = -1.0;
            for (std::size_t p = 0; p < N; ++p) {
                if (L.kind[p] != RowKind::Interior) {
                    new_s[p] = new_b[p] = 0;
                    continue;
                }
                const double gs = L.sell[p].n ? L.sell[p].apply(W.data(), p) : 0.0;
                const double gb = L.buy[p].n ? L.buy[p].apply(W.data(), p) : 0.0;
                new_s[p] = gs > 0.0;
                new_b[p] = gb > 0.0;
                if (new_s[p] != act_s[p] || new_b[p] != act_b[p]) {
                    ++flips;
                    const double g = std::max(std::abs(gs), std::abs(gb));
                    if (g > worst_g) {
                        worst_g = g;
                        worst = p;
                    }
                }
            }
            act_s.swap(new_s);
            act_b.swap(new_b);
            if (flips == 0 || step <= params.newton_tol) {
                converged = true;
                ++it;
                break;
            }
        }
        if (!converged) {
            std::ostringstream os;
            os << "Newton did not converge in " << params.newton_max_iter << " iterations at T-t=" << tau << " ("
               << flips << " active-set changes); worst residual at " << describe_node(grid, worst);
            throw SolverError(os.str());
        }
        sol.diag.newton_iterations.push_back(it);

        if (keep[n]) {
            LevelField f;
            f.tau = tau;
            f.t = grid.t_levels[n];
            f.W = W;
            qvi_residuals(L, dtau, W, W_old, f);
            sol.levels.push_back(std::move(f));
        }
    }
    sol.diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace ncqvi
