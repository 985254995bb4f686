#pragma once

#include <string>
#include <variant>
#include <vector>

namespace ncqvi {

/// Closed-form branch of a piecewise utility.
///   Constant      : offset
///   Power         : coeff * (z - shift)^exponent
///   ScaledPower   : offset + coeff * (z - shift)^exponent
///   NegatedPower  : -coeff * (shift - z)^exponent
enum class BranchKind { Constant, Power, ScaledPower, NegatedPower };

struct Branch {
    BranchKind kind = BranchKind::Constant;
    double offset = 0.0;
    double coeff = 0.0;
    double exponent = 1.0;
    double shift = 0.0;

    double operator()(double z) const;
};

struct Piece {
    double start;  // piece is active on [start, next start)
    Branch branch;
};

struct Jump {
    double at;
    double left;
    double right;
    double size() const { return right - left; }
};

/// Witnesses (C1, C2, p) for U(z) <= C1 + C2 z^p.
struct GrowthBound {
    double C1 = 1.0;
    double C2 = 1.0;
    double p = 0.5;
};

struct GoalReachingSpec {
    double z_bar = 1.0;
};
struct AspirationSpec {
    double p = 0.5;
    double c1 = 0.0;
    double c2 = 1.5;
    double z_bar = 1.0;
};
struct SShapedSpec {
    double lambda = 2.25;
    double p = 0.5;
    double z0 = 1.0;
};
struct CrraSpec {
    double p = 0.5;
};
/// Hand-assembled pieces; used for negative controls and custom experiments.
struct CustomSpec {};

using UtilitySpec = std::variant<GoalReachingSpec, AspirationSpec, SShapedSpec, CrraSpec, CustomSpec>;

std::string utility_name(const UtilitySpec& spec);

struct UtilityEval {
    double value;
    double left_limit;
    double jump_size;
};

/// Nondecreasing, right-continuous terminal utility on [K, inf), stored symbolically
/// so that left limits and jump sizes are exact.
class Utility {
public:
    /// Unvalidated construction from pieces (sorted by start, first start = floor).
    Utility(std::vector<Piece> pieces, double floor, GrowthBound bound, UtilitySpec spec = CustomSpec{});

    double operator()(double z) const;
    const std::vector<Piece>& pieces() const { return pieces_; }
    const std::vector<Jump>& jumps() const { return jumps_; }
    double floor() const { return floor_; }
    const GrowthBound& growth_bound() const { return bound_; }
    const UtilitySpec& spec() const { return spec_; }

    bool is_goal_reaching() const { return std::holds_alternative<GoalReachingSpec>(spec_); }

    /// Sum of all upward discontinuities.
    double total_jump() const;

private:
    std::vector<Piece> pieces_;
    std::vector<Jump> jumps_;
    double floor_;
    GrowthBound bound_;
    UtilitySpec spec_;
};

/// Builds and validates one of the shipped utility families.  Throws ValidationError
/// naming the violated constraint (0<p<1, lambda>1, c1>=0, c2>0, U(z_bar-)<U(z_bar), z_bar>K).
Utility make_utility(const UtilitySpec& spec, double K = 0.0);

/// (U(z), U(z-), U(z) - U(z-)), with U(K-) = U(K).  Throws DomainError for z < K.
UtilityEval eval_with_limits(const Utility& u, double z);

enum class FindingKind { Monotonicity, RightContinuity, GrowthBound, Witness };

struct Finding {
    FindingKind kind;
    double z;
    std::string detail;
};

struct AssumptionReport {
    std::vector<Finding> findings;
    bool pass() const { return findings.empty(); }
};

/// Dense-sampling check of monotonicity, right-continuity and the growth bound
/// C1 + C2 z^p; piece endpoints are checked exactly.
AssumptionReport validate_assumption(const Utility& u, double C1, double C2, double p,
                                     int samples_per_piece = 2000);

}  // namespace ncqvi
