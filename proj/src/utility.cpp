#include "ncqvi/utility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncqvi/error.hpp"

namespace ncqvi {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double safe_pow(double base, double exponent) {
    return std::pow(std::max(base, 0.0), exponent);
}

std::size_t piece_index(const std::vector<Piece>& pieces, double z) {
    auto it = std::upper_bound(pieces.begin(), pieces.end(), z,
                               [](double value, const Piece& p) { return value < p.start; });
    if (it == pieces.begin()) return 0;
    return static_cast<std::size_t>(std::distance(pieces.begin(), it) - 1);
}

}  // namespace

double Branch::operator()(double z) const {
    switch (kind) {
        case BranchKind::Constant:
            return offset;
        case BranchKind::Power:
            return coeff * safe_pow(z - shift, exponent);
        case BranchKind::ScaledPower:
            return offset + coeff * safe_pow(z - shift, exponent);
        case BranchKind::NegatedPower:
            return -coeff * safe_pow(shift - z, exponent);
    }
    return 0.0;
}

std::string utility_name(const UtilitySpec& spec) {
    return std::visit(overloaded{[](const GoalReachingSpec&) { return std::string("goal_reaching"); },
                                 [](const AspirationSpec&) { return std::string("aspiration"); },
                                 [](const SShapedSpec&) { return std::string("s_shaped"); },
                                 [](const CrraSpec&) { return std::string("crra"); },
                                 [](const CustomSpec&) { return std::string("custom"); }},
                      spec);
}

Utility::Utility(std::vector<Piece> pieces, double floor, GrowthBound bound, UtilitySpec spec)
    : pieces_(std::move(pieces)), floor_(floor), bound_(bound), spec_(spec) {
    if (pieces_.empty()) throw ValidationError("utility needs at least one piece");
    if (!std::is_sorted(pieces_.begin(), pieces_.end(),
                        [](const Piece& a, const Piece& b) { return a.start < b.start; }))
        throw ValidationError("utility pieces must be sorted by start");
    for (std::size_t k = 1; k < pieces_.size(); ++k) {
        const double at = pieces_[k].start;
        const double left = pieces_[k - 1].branch(at);
        const double right = pieces_[k].branch(at);
        if (std::abs(right - left) > 1e-14 * std::max(1.0, std::abs(right)))
            jumps_.push_back({at, left, right});
    }
}

double Utility::operator()(double z) const {
    return pieces_[piece_index(pieces_, z)].branch(z);
}

double Utility::total_jump() const {
    double total = 0.0;
    for (const auto& j : jumps_) total += std::max(j.size(), 0.0);
    return total;
}

Utility make_utility(const UtilitySpec& spec, double K) {
    if (!std::isfinite(K) || K < 0.0) throw ValidationError("utility: liquidation floor K must be >= 0");
    auto check_p = [](double p) {
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("utility: exponent p must lie in (0, 1)");
    };
    Utility u = std::visit(
        overloaded{
            [&](const GoalReachingSpec& s) {
                if (!(s.z_bar > K)) throw ValidationError("utility: goal level z_bar must exceed K");
                std::vector<Piece> pieces{{K, {BranchKind::Constant, 0.0, 0.0, 1.0, 0.0}},
                                          {s.z_bar, {BranchKind::Constant, 1.0, 0.0, 1.0, 0.0}}};
                return Utility(std::move(pieces), K, {1.0, 1.0, 0.5}, s);
            },
            [&](const AspirationSpec& s) {
                check_p(s.p);
                if (!(s.z_bar > K)) throw ValidationError("utility: aspiration level z_bar must exceed K");
                if (!(s.c1 >= 0.0)) throw ValidationError("utility: aspiration c1 must be >= 0");
                if (!(s.c2 > 0.0))
                    throw ValidationError("utility: aspiration c2 must be > 0 (nondecreasing upper branch)");
                const double below = std::pow(s.z_bar, s.p) / s.p;
                const double above = s.c1 + s.c2 * below;
                if (!(above > below))
                    throw ValidationError("utility: aspiration needs U(z_bar-) < U(z_bar) (upward jump)");
                std::vector<Piece> pieces{{K, {BranchKind::Power, 0.0, 1.0 / s.p, s.p, 0.0}},
                                          {s.z_bar, {BranchKind::ScaledPower, s.c1, s.c2 / s.p, s.p, 0.0}}};
                GrowthBound bound{s.c1 + 1.0, std::max(1.0, s.c2) / s.p, s.p};
                return Utility(std::move(pieces), K, bound, s);
            },
            [&](const SShapedSpec& s) {
                check_p(s.p);
                if (!(s.lambda > 1.0)) throw ValidationError("utility: loss aversion lambda must be > 1");
                if (!std::isfinite(s.z0)) throw ValidationError("utility: reference level z0 must be finite");
                std::vector<Piece> pieces;
                if (K < s.z0) pieces.push_back({K, {BranchKind::NegatedPower, 0.0, s.lambda, s.p, s.z0}});
                pieces.push_back({std::max(K, s.z0), {BranchKind::Power, 0.0, 1.0, s.p, s.z0}});
                return Utility(std::move(pieces), K, {1.0, 1.0, s.p}, s);
            },
            [&](const CrraSpec& s) {
                check_p(s.p);
                std::vector<Piece> pieces{{K, {BranchKind::Power, 0.0, 1.0 / s.p, s.p, 0.0}}};
                return Utility(std::move(pieces), K, {1.0, 1.0 / s.p, s.p}, s);
            },
            [&](const CustomSpec&) -> Utility {
                throw ValidationError("utility: custom utilities are built from pieces directly");
            }},
        spec);
    for (const auto& j : u.jumps())
        if (j.size() < 0.0) throw ValidationError("utility: downward jump violates monotonicity");
    return u;
}

UtilityEval eval_with_limits(const Utility& u, double z) {
    if (!std::isfinite(z) || z < u.floor()) {
        std::ostringstream os;
        os << "eval_with_limits: z = " << z << " below the liquidation floor K = " << u.floor();
        throw DomainError(os.str());
    }
    const auto& pieces = u.pieces();
    const std::size_t k = piece_index(pieces, z);
    const double value = pieces[k].branch(z);
    double left = value;
    if (k > 0 && z == pieces[k].start) left = pieces[k - 1].branch(z);
    return {value, left, value - left};
}

AssumptionReport validate_assumption(const Utility& u, double C1, double C2, double p,
                                     int samples_per_piece) {
    AssumptionReport report;
    auto add = [&](FindingKind kind, double z, const std::string& detail) {
        report.findings.push_back({kind, z, detail});
    };
    if (!(C1 > 0.0) || !(C2 > 0.0) || !(p > 0.0 && p < 1.0))
        add(FindingKind::Witness, u.floor(), "growth witnesses need C1>0, C2>0, 0<p<1");

    const auto& pieces = u.pieces();
    const int n = std::max(samples_per_piece, 2);
    const double tol = 1e-12;
    double previous = -INFINITY;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const double a = pieces[k].start;
        const double b = (k + 1 < pieces.size()) ? pieces[k + 1].start
                                                 : a + std::max(10.0, 10.0 * std::abs(a));
        // Exact endpoint check against the previous piece.
        if (k > 0) {
            const double left = pieces[k - 1].branch(a);
            const double right = pieces[k].branch(a);
            if (right < left - tol * std::max(1.0, std::abs(left))) {
                std::ostringstream os;
                os << "downward jump at " << a << " from " << left << " to " << right;
                add(FindingKind::Monotonicity, a, os.str());
            }
        }
        // Right-continuity at the piece start.
        const double at = u(a);
        // a jump keeps the gap as the probe shrinks; power branches lose it
        const double scale = std::max(1.0, std::abs(a));
        const double far_gap = std::abs(u(a + 1e-6 * scale) - at);
        const double near_gap = std::abs(u(a + 1e-12 * scale) - at);
        if (near_gap > 1e-9 * std::max(1.0, std::abs(at)) && near_gap > 0.5 * far_gap) {
            std::ostringstream os;
            os << "not right-continuous at " << a;
            add(FindingKind::RightContinuity, a, os.str());
        }
        bool flagged = false;
        for (int s = 0; s < n; ++s) {
            // Uniform samples on [a, b).
            const double frac = static_cast<double>(s) / n;
            const double z = a + (b - a) * frac;
            const double value = u(z);
            if (!flagged && value < previous - tol * std::max(1.0, std::abs(previous))) {
                std::ostringstream os;
                os << "U decreases near z = " << z;
                add(FindingKind::Monotonicity, z, os.str());
                flagged = true;
            }
            previous = value;
            const double bound = C1 + C2 * std::pow(std::max(z, 0.0), p);
            if (value > bound + tol * std::max(1.0, std::abs(bound))) {
                std::ostringstream os;
                os << "U(" << z << ") = " << value << " exceeds C1 + C2 z^p = " << bound;
                add(FindingKind::GrowthBound, z, os.str());
                break;
            }
        }
    }
    return report;
}

}  // namespace ncqvi
