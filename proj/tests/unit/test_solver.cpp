#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "fixtures.hpp"
#include "ncqvi/error.hpp"
#include "ncqvi/io.hpp"
#include "ncqvi/stencil.hpp"

using namespace ncqvi;

namespace {

RowMatrix dense(std::initializer_list<std::initializer_list<double>> rows) {
    const int n = static_cast<int>(rows.size());
    RowMatrix A(n, n);
    int i = 0;
    for (const auto& r : rows) {
        int j = 0;
        for (double v : r) {
            if (v != 0.0) A.insert(i, j) = v;
            ++j;
        }
        ++i;
    }
    A.makeCompressed();
    return A;
}

}  // namespace

TEST_CASE("M-matrix check") {
    CHECK(m_matrix_check(dense({{2, -1}, {-1, 2}})).pass());
    const MMatrixReport bad = m_matrix_check(dense({{1, 0.5}, {0, 1}}));
    REQUIRE_FALSE(bad.pass());
    CHECK(bad.violations[0].row == 0);
    CHECK_FALSE(m_matrix_check(dense({{1, -2}, {0, 1}})).pass());
}

TEST_CASE("default assembly is an M-matrix without damping") {
    const ProblemSpec p = fx::goal();
    const TransformedGrid g = make_grid(p, GridSpec{}, 10);
    const BoundaryData bd = boundary_and_terminal_data(p, g);
    const LevelSystem L = assemble_level(p, g, bd, 0.01);
    CHECK(L.damping_count == 0);
    const std::size_t N = g.size();
    std::vector<std::uint8_t> none(N, 0), all(N, 1);
    CHECK(m_matrix_check(newton_matrix(L, g.dtau, 1e6 / g.dtau, none, none)).pass());
    CHECK(m_matrix_check(newton_matrix(L, g.dtau, 1e6 / g.dtau, all, all)).pass());
}

TEST_CASE("constant utility gives a constant value") {
    const ProblemSpec p{MarketModel::gbm(0.04, 0.3), CostSpec{1e-3, 1e-3}, fx::constant_one(), 1.0, true};
    GridSpec s = fx::small_grid();
    s.z_max = 2.0;
    const TransformedGrid g = make_grid(p, s, 20);
    SolverParams sp;
    sp.time_steps = 20;
    sp.store_taus = {0.0025, 0.05};
    const Solution sol = solve_qvi(p, g, sp);
    double worst = 0.0;
    for (const LevelField& f : sol.levels)
        for (double w : f.W) worst = std::max(worst, std::abs(w - 1.0));
    CHECK(worst < 1e-10);
}

TEST_CASE("goal-reaching solution bounds") {
    const Solution s = fx::solve_small(fx::goal(0.04), 20, 0.05, {0.01, 0.05});
    for (const LevelField& f : s.levels) {
        for (std::size_t p = 0; p < f.W.size(); ++p) {
            CHECK(f.W[p] >= -1e-12);
            CHECK(f.W[p] <= 1.0 + 1e-12);
        }
        // next to the goal the value approaches one
        const std::size_t i = s.grid.nz() - 2;
        for (std::size_t j = 0; j < s.grid.nv(); ++j) CHECK(f.W[s.grid.index(i, j)] > 0.9);
    }
    CHECK(s.diag.mmatrix_violations == 0);
    CHECK(s.diag.damping_events == 0);
    CHECK_THROWS_AS(s.level(0.02), Error);
}

TEST_CASE("solves are bit-reproducible") {
    const Solution a = fx::solve_small(fx::goal(0.04), 10);
    const Solution b = fx::solve_small(fx::goal(0.04), 10);
    CHECK(a.levels.back().W == b.levels.back().W);
}

TEST_CASE("store taus must lie on the time grid") {
    CHECK_THROWS_AS(fx::solve_small(fx::goal(), 10, 0.05, {0.0123}), ValidationError);
}

TEST_CASE("parameter validation") {
    SolverParams sp;
    sp.newton_tol = 0.0;
    CHECK_THROWS_AS(sp.validate(), ValidationError);
    sp = SolverParams{};
    sp.time_steps = 0;
    CHECK_THROWS_AS(sp.validate(), ValidationError);
}

TEST_CASE("Newton cap is reported") {
    const ProblemSpec p = fx::goal(0.04);
    const TransformedGrid g = make_grid(p, fx::small_grid(), 5);
    SolverParams sp;
    sp.time_steps = 5;
    sp.newton_max_iter = 1;
    CHECK_THROWS_AS(solve_qvi(p, g, sp), SolverError);
}

TEST_CASE("penalty ladder") {
    SolverParams sp;
    sp.time_steps = 20;
    const ConvergenceReport r = convergence_study(fx::goal(), fx::small_grid(), sp, LadderMode::Penalty, 2);
    REQUIRE(r.diffs.size() == 1);
    CHECK(r.diffs[0] < 1e-4);
}

TEST_CASE("snapshot round trip") {
    const Solution s = fx::solve_small(fx::goal(0.04), 10, 0.05, {0.025, 0.05});
    const std::string path = "snapshot_roundtrip.qvi";
    write_snapshot(s, path);
    const Solution r = read_snapshot(path);
    std::remove(path.c_str());
    REQUIRE(r.levels.size() == 2);
    CHECK(r.levels[1].W == s.levels[1].W);
    CHECK(r.grid.z == s.grid.z);
    CHECK(r.grid.v == s.grid.v);
    CHECK(r.lambda == s.lambda);
    CHECK(r.value_zy(0.05, 0.4, 3.0) == s.value_zy(0.05, 0.4, 3.0));
}
