#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ncqvi/grid.hpp"
#include "ncqvi/problem.hpp"

namespace ncqvi {

/// Continuous coefficients of the transformed operator at one point:
///   a_zz W_zz + a_zv W_zv + a_vv W_vv + b_z W_z + b_v W_v
///   + a_nn W_nn + a_zn W_zn + a_vn W_vn + b_n W_n.
struct OperatorCoefficients {
    double a_zz = 0, a_zv = 0, a_vv = 0, b_z = 0, b_v = 0;
    double a_nn = 0, a_zn = 0, a_vn = 0, b_n = 0;
};

/// theta = -theta1 on v >= 0, +theta2 on v < 0.
OperatorCoefficients operator_coefficients(const MarketModel& model, double theta, double tau, double v,
                                           double nu = 0.0);

struct Entry {
    std::size_t col;
    double w;
};

/// g = sum_q w_q (W_q - W_p), w_q >= 0.  At most two terms.
struct Difference {
    int n = 0;
    Entry e[2]{};
    double apply(const double* W, std::size_t p) const {
        double g = 0.0;
        for (int q = 0; q < n; ++q) g += e[q].w * (W[e[q].col] - W[p]);
        return g;
    }
};

enum class RowKind : std::uint8_t { Interior, Dirichlet, Neumann };

/// One node of the discretized operator.  Interior: L W_p = sum_q w_q (W_q - W_p), w_q >= 0.
/// The gradient constraints are g_sell <= 0 and g_buy <= 0, with g = -(V_y - (1-theta1) V_x)
/// and g = -((1+theta2) V_x - V_y) in original units.
struct StencilRow {
    std::size_t node = 0;
    RowKind kind = RowKind::Interior;
    std::vector<Entry> pde;
    double pde_sum = 0.0;
    Difference sell, buy;
    double value = 0.0;       // Dirichlet value
    std::size_t partner = 0;  // Neumann: W_p = W_partner
    double damping = 1.0;     // cross coefficient kept / requested
};

struct DampingEvent {
    double tau;
    std::size_t node;
    double ratio;
};

/// Node classification and boundary values.
struct BoundaryData {
    std::vector<RowKind> kind;
    std::vector<std::size_t> partner;
    std::vector<double> seed;  // W at maturity: U(z), constant in v and nu

    /// Far-field Dirichlet: offset + scale (z - shift)^p F(tau, nu); otherwise `fixed`.
    std::vector<std::uint8_t> far_field;
    std::vector<double> fixed;
    double ff_offset = 0, ff_scale = 0, ff_shift = 0, ff_p = 0.5;

    /// Dirichlet values at time to maturity tau.
    std::vector<double> dirichlet_values(const ProblemSpec& problem, const TransformedGrid& grid, double tau) const;
};

/// Rows z = K, z = z_max and the v edges of the mesh; with short sales prohibited v = 0 is
/// an interior (buy only) row.
bool is_boundary_node(const TransformedGrid& g, std::size_t i, std::size_t j);

BoundaryData boundary_and_terminal_data(const ProblemSpec& problem, const TransformedGrid& grid);

/// Flat storage of every row at one time level.
struct LevelSystem {
    double tau = 0.0;
    std::vector<RowKind> kind;
    std::vector<std::size_t> start;  // size N+1 into entries
    std::vector<Entry> entries;
    std::vector<double> pde_sum;
    std::vector<Difference> sell, buy;
    std::vector<double> value;
    std::vector<std::size_t> partner;
    std::size_t damping_count = 0;
    double damping_min = 1.0;
    std::vector<DampingEvent> damping_log;  // first events only

    std::size_t size() const { return kind.size(); }
    /// L W at node p (0 for boundary rows).
    double apply_pde(const double* W, std::size_t p) const;
    StencilRow row(std::size_t p) const;
};

/// Assembles all rows at time to maturity tau.  Throws AssemblyError when the cross
/// term needs damping and allow_damping is false.
LevelSystem assemble_level(const ProblemSpec& problem, const TransformedGrid& grid, const BoundaryData& bd,
                           double tau, bool allow_damping = true, std::size_t damping_log_cap = 64);

/// Stencil of a single interior node at time t.
StencilRow operator_stencil(const ProblemSpec& problem, const TransformedGrid& grid, double t, std::size_t node);

}  // namespace ncqvi
