#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncqvi/solver.hpp"

namespace ncqvi {

enum class Label : std::uint8_t { NR, SR, BR, AMBIGUOUS, BOUNDARY };
const char* to_string(Label l);

/// Label change between consecutive v nodes of one (z, nu) column.
struct Interface {
    std::size_t i;
    std::size_t k;
    double z;
    double y;  // interpolated crossing, original stock units
    Label below;
    Label above;
};

struct RegionMap {
    double tau = 0.0;
    double t = 0.0;
    double tol = 0.0;
    const Solution* solution = nullptr;
    std::vector<Label> labels;  // per node; BOUNDARY on boundary rows
    std::vector<double> r_pde, r_sell, r_buy;  // r_pde scaled by dtau
    std::vector<Interface> interfaces;

    /// Label at (z, y): nearest z node, nearest v node on the same side of y = 0, nearest nu node.
    Label at(double z, double y, double nu = 0.0) const;
    std::size_t count(Label l) const;
};

/// NR when the (dtau-scaled) PDE residual is <= tol, otherwise the gradient constraint with
/// the smaller residual; AMBIGUOUS when both gradient residuals lie within tol of zero.
/// tol <= 0 uses the solution's tol_qvi.
RegionMap classify_regions(const Solution& solution, double tau, double tol = 0.0);

/// Fraction of a uniform (z, y) raster on (z_min, z_max) x [-y_max, y_max] labeled SR or BR.
double trading_area_fraction(const RegionMap& map, double y_max, int nz = 200, int ny = 400, double nu = 0.0);

struct FrictionlessRow {
    double z;
    double buy_y;   // upper edge of the buy region on y > 0 (NaN if none)
    double sell_y;  // lower edge of the sell region on y < 0 (NaN if none)
    double target;  // browne_target(z, sigma, tau)
    int sign;       // sign(buy_y - target), 0 when buy_y is NaN
};

/// Per z column comparison with the frictionless target.  Throws Error unless goal reaching.
std::vector<FrictionlessRow> compare_frictionless(const RegionMap& map, double sigma, double tau);

struct InvariantReport {
    double worst_term = 0.0;       // most negative QVI term (pde term dtau-scaled)
    double worst_min = 0.0;        // largest min of the three terms
    double monotonicity = 0.0;     // largest W(z1) - W(z2) with z1 < z2
    double lower_violation = 0.0;  // largest U(z) - W
    double upper_violation = 0.0;  // largest W - (C1 + C2 z^p F)
    std::size_t interior = 0;
    bool complementarity(double tol) const { return worst_term >= -tol && worst_min <= tol; }
};

InvariantReport check_invariants(const Solution& solution, const LevelField& level);

/// Writes t,z,v,y,W,residual_pde,residual_sell,residual_buy,label (with nu after v for
/// three-dimensional problems), one row per interior node, plus `<path>.json` metadata.
void export_fields(const RegionMap& map, const std::string& path, const std::string& config_json = "{}");

/// gnuplot script plotting the labels of an exported CSV in the (z, y) plane.
void write_plot_script(const std::string& csv_path, const std::string& script_path, const std::string& title,
                       bool has_nu = false);

/// 64-bit FNV-1a of a string, hex encoded.
std::string fnv1a_hex(const std::string& s);

}  // namespace ncqvi
