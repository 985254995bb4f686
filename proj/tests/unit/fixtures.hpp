#pragma once

#include "ncqvi/grid.hpp"
#include "ncqvi/problem.hpp"
#include "ncqvi/solver.hpp"

namespace fx {

inline ncqvi::ProblemSpec goal(double eta = 0.0, double theta = 1e-3, bool shorting = true) {
    using namespace ncqvi;
    return ProblemSpec{MarketModel::gbm(eta, 0.3), CostSpec{theta, theta}, make_utility(GoalReachingSpec{1.0}), 1.0,
                       shorting};
}

inline ncqvi::Utility constant_one() {
    using namespace ncqvi;
    Branch b;
    b.kind = BranchKind::Constant;
    b.offset = 1.0;
    return Utility({Piece{0.0, b}}, 0.0, GrowthBound{1.0, 0.0, 0.5});
}

inline ncqvi::GridSpec small_grid(double tau_max = 0.05) {
    ncqvi::GridSpec g;
    g.nz = 51;
    g.nv = 41;
    g.tau_max = tau_max;
    return g;
}

inline ncqvi::Solution solve_small(const ncqvi::ProblemSpec& p, int steps = 20, double tau_max = 0.05,
                                   std::vector<double> keep = {}) {
    const ncqvi::TransformedGrid g = ncqvi::make_grid(p, small_grid(tau_max), steps);
    ncqvi::SolverParams sp;
    sp.time_steps = steps;
    sp.store_taus = std::move(keep);
    return ncqvi::solve_qvi(p, g, sp);
}

}  // namespace fx
