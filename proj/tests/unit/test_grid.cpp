#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "ncqvi/error.hpp"

using namespace ncqvi;

TEST_CASE("transform examples") {
    const CostSpec c{1e-3, 1e-3};
    const ZV a = transform_point(0.99, 0.5, 0.5, c, 1.0);
    CHECK(a.z == doctest::Approx(0.9995).epsilon(1e-14));
    CHECK(a.v == doctest::Approx(0.05).epsilon(1e-14));
    const ZV b = transform_point(0.3, 0.7, 0.0, c, 1.0);
    CHECK(b.z == 0.7);
    CHECK(b.v == 0.0);
    const XY r = inverse_transform(0.99, 0.9995, 0.05, c, 1.0);
    CHECK(r.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(inverse_transform(1.0, 0.5, 0.1, c, 1.0), DomainError);
}

TEST_CASE("round trip at every node and level") {
    const ProblemSpec p = fx::goal(0.0, 2e-3);
    const TransformedGrid g = make_grid(p, fx::small_grid(), 10);
    double worst = 0.0;
    for (double t : g.t_levels)
        for (double z : g.z)
            for (double v : g.v) {
                const XY q = inverse_transform(t, z, v, p.costs, g.T);
                const ZV back = transform_point(t, q.x, q.y, p.costs, g.T);
                worst = std::max({worst, std::abs(back.z - z), std::abs(back.v - v)});
            }
    CHECK(worst < 1e-12);
}

TEST_CASE("meshes") {
    const ProblemSpec p = fx::goal();
    const TransformedGrid g = make_grid(p, GridSpec{}, 100);
    CHECK(g.z.front() == 0.0);
    CHECK(g.z.back() == 1.0);
    CHECK(g.v[g.v_zero()] == 0.0);
    CHECK(g.v.front() == doctest::Approx(-100.0));
    CHECK(g.v.back() == doctest::Approx(100.0));
    CHECK(g.dtau == doctest::Approx(0.001));
    CHECK(g.tau(99) == doctest::Approx(0.1));
    for (std::size_t i = 1; i < g.nz(); ++i) CHECK(g.z[i] > g.z[i - 1]);
    for (std::size_t j = 1; j < g.nv(); ++j) CHECK(g.v[j] > g.v[j - 1]);
    // the goal lies at the fine end of the mesh
    CHECK(g.z[g.nz() - 1] - g.z[g.nz() - 2] < 0.25 * (g.z[g.nz() / 2] - g.z[g.nz() / 2 - 1]));

    const TransformedGrid h = make_grid(fx::goal(0.04, 1e-3, false), GridSpec{}, 10);
    CHECK(h.v.front() == 0.0);

    const GridSpec r = refine_spec(fx::small_grid());
    CHECK(r.nz == 101);
    CHECK(r.nv == 81);
    const TransformedGrid fine = make_grid(p, r, 10);
    const TransformedGrid coarse = make_grid(p, fx::small_grid(), 10);
    for (std::size_t i = 0; i < coarse.nz(); ++i) CHECK(fine.z[2 * i] == doctest::Approx(coarse.z[i]).epsilon(1e-13));
}

TEST_CASE("grid consistency checks") {
    GridSpec g = fx::small_grid();
    g.z_max = 2.0;
    CHECK_THROWS_AS(make_grid(fx::goal(), g, 10), AssemblyError);
    g = fx::small_grid();
    g.nv = 40;
    CHECK_THROWS_AS(make_grid(fx::goal(), g, 10), AssemblyError);
}

TEST_CASE("locate") {
    const std::vector<double> n{0.0, 1.0, 3.0};
    auto [i, w] = locate(n, 2.0);
    CHECK(i == 1);
    CHECK(w == doctest::Approx(0.5));
    auto [j, u] = locate(n, 5.0);
    CHECK(j == 1);
    CHECK(u == 1.0);
}
