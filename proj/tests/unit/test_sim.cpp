#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "ncqvi/analytic.hpp"
#include "ncqvi/error.hpp"
#include "ncqvi/sim.hpp"

using namespace ncqvi;

namespace {

StrategySpec pi_star(double t, double x, double y, long paths, double dt = 1e-3) {
    StrategySpec s;
    s.kind = StrategyKind::PiStar;
    s.w = 1.0;
    s.initial = Position{t, x, y, {}};
    s.paths = paths;
    s.seed = 11;
    s.dt = dt;
    return s;
}

}  // namespace

TEST_CASE("no trade with no stock is deterministic") {
    const ProblemSpec p = fx::goal();
    StrategySpec s;
    s.kind = StrategyKind::NoTrade;
    s.initial = Position{0.5, 0.4, 0.0, {}};
    s.paths = 50;
    const McEstimate e = simulate_strategy(s, p);
    CHECK(e.mean == 0.0);
    CHECK(e.std_error == 0.0);
    s.initial.x = 1.3;
    CHECK(simulate_strategy(s, p).mean == 1.0);
}

TEST_CASE("hold until hit matches the single-barrier formula") {
    const ProblemSpec p{MarketModel::gbm(0.0, 0.3), CostSpec{1e-3, 1e-3}, make_utility(GoalReachingSpec{1.0}), 5.0, true};
    const double th = 1e-3;
    for (double tau : {0.05, 1.0, 4.0})
        for (double x : {0.0, 0.3})
            for (double z : {0.4, 0.6}) {
                if (z <= x) continue;
                const double y = (z - x) / (1.0 - th);
                const McEstimate e = simulate_strategy(pi_star(5.0 - tau, x, y, 20000), p);
                const double b = std::log((1.0 - x) / (1.0 - th) / y);
                const double exact = first_passage_prob(-0.045, 0.3, b, tau);
                CHECK(e.mean >= 0.0);
                CHECK(e.mean <= 1.0);
                CHECK(std::abs(e.mean - exact) <= 3.0 * e.std_error + 1e-9);
            }
}

TEST_CASE("driftless ever-hit probability") {
    const ProblemSpec p{MarketModel::gbm(0.0, 0.3), CostSpec{1e-3, 1e-3}, make_utility(GoalReachingSpec{1.0}), 400.0,
                        true};
    const double y = 0.5 / (1.0 - 1e-3);
    const McEstimate e = simulate_strategy(pi_star(0.0, 0.0, y, 4000, 0.2), p);
    const double b = std::log(1.0 / (1.0 - 1e-3) / y);
    CHECK(std::abs(e.mean - first_passage_prob(-0.045, 0.3, b, 400.0)) <= 3.0 * e.std_error);
    CHECK(e.mean == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("seeded estimates are bit-exact and independent of the worker count") {
    const ProblemSpec p = fx::goal(0.04);
    StrategySpec s = pi_star(0.95, 0.5 - 0.999 * 20.0, 20.0, 3000);
    const McEstimate a = simulate_strategy(s, p);
    const McEstimate b = simulate_strategy(s, p);
    s.jobs = 3;
    const McEstimate c = simulate_strategy(s, p);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.mean == c.mean);
    CHECK(a.frac_hit_w + a.frac_hit_K + a.frac_expired == doctest::Approx(1.0));
    s.seed = 12;
    CHECK(simulate_strategy(s, p).mean != a.mean);
}

TEST_CASE("strategy preconditions") {
    const ProblemSpec p = fx::goal();
    CHECK_THROWS_AS(simulate_strategy(pi_star(0.9, -1.0, 0.5, 10), p), DomainError);
    CHECK_THROWS_AS(simulate_strategy(pi_star(0.9, 1.2, 0.0, 10), p), DomainError);
    StrategySpec s = pi_star(0.9, 0.2, 0.1, 0);
    CHECK_THROWS_AS(simulate_strategy(s, p), ValidationError);
    s = pi_star(0.9, 0.2, 0.1, 10);
    s.kind = StrategyKind::RegionPolicy;
    CHECK_THROWS_AS(simulate_strategy(s, p), ValidationError);
    s = pi_star(0.9, -9.5, 10.0, 10, 0.05);
    CHECK_FALSE(simulate_strategy(s, p).warnings.empty());
}

TEST_CASE("region policy is sandwiched by no-trade and the value function") {
    const ProblemSpec p = fx::goal();
    const Solution sol = fx::solve_small(p, 20, 0.05, {0.0025, 0.005, 0.0075, 0.01, 0.0125, 0.015, 0.0175, 0.02, 0.0225,
                                                      0.025, 0.0275, 0.03, 0.0325, 0.035, 0.0375, 0.04, 0.0425,
                                                      0.045, 0.0475, 0.05});
    std::vector<RegionMap> maps;
    for (const LevelField& f : sol.levels) maps.push_back(classify_regions(sol, f.tau));
    StrategySpec s;
    s.kind = StrategyKind::RegionPolicy;
    for (const RegionMap& m : maps) s.policy.push_back(&m);
    const double y = 5.0;
    s.initial = Position{0.95, 0.5 - 0.999 * y, y, {}};
    s.paths = 4000;
    s.dt = 2.5e-3;
    const McEstimate pol = simulate_strategy(s, p);
    s.kind = StrategyKind::NoTrade;
    const McEstimate none = simulate_strategy(s, p);
    CHECK(pol.mean >= none.mean - 3.0 * pol.std_error);
    CHECK(pol.mean <= sol.value_zy(0.05, 0.5, y) + 0.02 + 3.0 * pol.std_error);
}

TEST_CASE("path seeds differ") {
    CHECK(path_seed(1, 0) != path_seed(1, 1));
    CHECK(path_seed(1, 0) != path_seed(2, 0));
}
