#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ncqvi/market.hpp"
#include "ncqvi/problem.hpp"

namespace ncqvi {

/// Region of the z axis meshed `ratio` times finer than the rest.
struct RefinementWindow {
    double center;
    double half_width;
    double ratio = 8.0;
};

/// Mesh description.  Negative/zero bounds mean "derive from the problem".
struct GridSpec {
    int nz = 201;
    double z_min = -1.0;  // default K
    double z_max = -1.0;  // default: z_bar (goal reaching) or 8 z_bar
    std::vector<RefinementWindow> z_refine;  // empty + auto_refine: one window per jump
    bool auto_refine = true;

    int nv = 161;  // odd when shorting is allowed so that v = 0 is a node
    double v_max = 100.0;
    double v_cluster = 0.5;  // sinh stretching scale; nodes cluster within |v| < v_cluster

    int nnu = 21;
    double nu_min = -0.6665;
    double nu_max = 0.6665;

    /// Arm length of the y-direction stencil, in local mesh cells (z and v).
    double arm_cells = 2.0;

    double tau_max = 0.1;  // march from T down to t = T - tau_max

    /// Explicit node lists override the generated meshes when non-empty.
    std::vector<double> z_nodes;
    std::vector<double> v_nodes;
};

struct TransformedGrid {
    std::vector<double> z;
    std::vector<double> v;
    std::vector<double> nu;        // single entry 0 for GBM
    std::vector<double> t_levels;  // strictly decreasing, T - dtau ... T - tau_max
    double T = 1.0;
    double dtau = 0.0;
    bool short_sale_allowed = true;
    bool has_nu = false;
    GridSpec spec;

    std::size_t nz() const { return z.size(); }
    std::size_t nv() const { return v.size(); }
    std::size_t nnu() const { return nu.size(); }
    std::size_t size() const { return z.size() * v.size() * nu.size(); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return (k * v.size() + j) * z.size() + i;
    }
    /// (i, j, k) of a flat index.
    void unravel(std::size_t p, std::size_t& i, std::size_t& j, std::size_t& k) const;
    /// Index of the v = 0 node.
    std::size_t v_zero() const;
    double tau(std::size_t level) const { return T - t_levels[level]; }
};

/// Builds the grid for a problem.  Throws AssemblyError on inconsistent input.
TransformedGrid make_grid(const ProblemSpec& problem, const GridSpec& spec, int time_steps);

/// Node density map: uniform in a stretched coordinate with windows `ratio` times denser.
std::vector<double> refined_mesh(double a, double b, int n, const std::vector<RefinementWindow>& windows);
/// v = v_cluster sinh(alpha xi), xi uniform on [-1, 1] (or [0, 1] when half).
std::vector<double> sinh_mesh(double v_max, double v_cluster, int n, bool half);

/// Nested refinement: inserts midpoints (in the generating coordinate) between nodes.
GridSpec refine_spec(const GridSpec& spec);

struct ZV {
    double z;
    double v;
};
struct XY {
    double x;
    double y;
};

ZV transform_point(double t, double x, double y, const CostSpec& costs, double T);
/// Throws DomainError at t >= T with v != 0.
XY inverse_transform(double t, double z, double v, const CostSpec& costs, double T);

/// Bracketing interval and linear weight: nodes[lo] <= x <= nodes[lo+1], x clamped.
std::pair<std::size_t, double> locate(const std::vector<double>& nodes, double x);

}  // namespace ncqvi
