#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "ncqvi/grid.hpp"
#include "ncqvi/problem.hpp"
#include "ncqvi/stencil.hpp"

namespace ncqvi {

enum class LinearSolverKind { Iterative, Direct };

struct SolverParams {
    double lambda = 0.0;  // 0: 1e6 / dtau
    double newton_tol = 1e-9;  // on max |dW| / max(1, |W|)
    int newton_max_iter = 60;
    int time_steps = 100;
    /// Times to maturity to retain; empty retains the last level only.
    std::vector<double> store_taus;
    double tol_qvi = 0.0;  // 0: derived from newton_tol and lambda
    bool allow_damping = true;
    LinearSolverKind linear = LinearSolverKind::Iterative;
    double linear_tol = 1e-13;

    void validate() const;
};

struct LevelField {
    double tau = 0.0;
    double t = 0.0;
    std::vector<double> W;
    /// Unpenalized QVI terms; NaN on boundary rows.  r_pde is W_tau - L W.
    std::vector<double> r_pde, r_sell, r_buy;
};

struct RowViolation {
    std::size_t row;
    std::string what;
};

struct MMatrixReport {
    std::size_t rows_checked = 0;
    std::vector<RowViolation> violations;
    std::size_t damping_events = 0;
    bool pass() const { return violations.empty(); }
};

struct Diagnostics {
    std::vector<int> newton_iterations;  // per time step
    std::size_t mmatrix_rows_checked = 0;
    std::size_t mmatrix_violations = 0;
    std::size_t damping_events = 0;
    double damping_min = 1.0;
    std::vector<DampingEvent> damping_log;
    int linear_fallbacks = 0;
    long linear_iterations = 0;
    double seconds = 0.0;
};

struct Solution {
    ProblemSpec problem;
    TransformedGrid grid;
    SolverParams params;
    double lambda = 0.0;
    double tol_qvi = 0.0;
    std::vector<LevelField> levels;
    Diagnostics diag;

    /// Retained level at time to maturity tau; throws Error when not retained.
    const LevelField& level(double tau) const;
    /// (Tri)linear interpolation of W in (z, v[, nu]).
    double value(const LevelField& f, double z, double v, double nu = 0.0) const;
    /// Value at original coordinates (z, y).
    double value_zy(double tau, double z, double y, double nu = 0.0) const;
};

Solution solve_qvi(const ProblemSpec& problem, const TransformedGrid& grid, const SolverParams& params);

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Linearized (active-set) system of one Newton iteration.
RowMatrix newton_matrix(const LevelSystem& L, double dtau, double lambda, const std::vector<std::uint8_t>& active_sell,
                        const std::vector<std::uint8_t>& active_buy);

/// Row test: positive diagonal, non-positive off-diagonals, diagonal >= sum |off|.
MMatrixReport m_matrix_check(const RowMatrix& A, std::size_t damping_events = 0);

/// Unpenalized residual triple at every node for a given W and previous level.
void qvi_residuals(const LevelSystem& L, double dtau, const std::vector<double>& W, const std::vector<double>& W_old,
                   LevelField& out);

enum class LadderMode { Penalty, Mesh, Boundary };
std::string to_string(LadderMode m);

struct LadderRung {
    std::string label;
    double parameter;
    double seconds;
};

struct ConvergenceReport {
    LadderMode mode;
    double tau;
    std::vector<LadderRung> rungs;
    std::vector<double> diffs;   // sup-norm difference between successive rungs
    std::vector<double> ratios;  // diffs[i] / diffs[i+1]
    std::vector<double> orders;  // log2 of ratios
};

/// Runs a ladder of `rungs` solves and compares them on the base grid interior at the
/// last time level.  Penalty: lambda doubles; Mesh: nested refinement of space and time;
/// Boundary: v_max doubles with the base v nodes kept.
ConvergenceReport convergence_study(const ProblemSpec& problem, const GridSpec& base, const SolverParams& params,
                                    LadderMode mode, int rungs = 2);

}  // namespace ncqvi
