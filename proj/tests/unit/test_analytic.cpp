#include "doctest.h"

#include <cmath>

#include "ncqvi/analytic.hpp"
#include "ncqvi/error.hpp"

using namespace ncqvi;

TEST_CASE("normal functions") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804).epsilon(1e-10));
    CHECK(normal_cdf(-1.96) == doctest::Approx(0.0249979).epsilon(1e-6));
    for (double u : {1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9})
        CHECK(normal_cdf(normal_quantile(u)) == doctest::Approx(u).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
}

TEST_CASE("terminal asymptote of the goal-reaching utility") {
    const Utility u = make_utility(GoalReachingSpec{1.0});
    const CostSpec c{1e-3, 1e-3};
    // z = 1.2 above the goal
    CHECK(terminal_asymptote({0.5, 0.7, 0.5, c, 0.3, 1.0, &u}) == 1.0);
    // x = 0.5 and z = 0.9 with a long position
    const double y = 0.4 / (1.0 - 1e-3);
    CHECK(terminal_asymptote({0.0, 0.5, y, c, 0.3, 1.0, &u}) == doctest::Approx(0.50498).epsilon(1e-5));
    CHECK(terminal_asymptote({0.99, 0.5, y, c, 0.3, 1.0, &u}) == doctest::Approx(2.6e-11).epsilon(0.05));
}

TEST_CASE("terminal asymptote properties") {
    const Utility s = make_utility(SShapedSpec{2.25, 0.5, 1.0});
    const Utility a = make_utility(AspirationSpec{0.5, 0.0, 1.5, 1.0});
    const CostSpec c{1e-3, 1e-3};
    for (double x = 0.1; x < 3.0; x += 0.3)
        for (double y = -0.5; y <= 0.5; y += 0.25) {
            const double z = liquidation_value(x, y, c);
            if (z < 0.0) continue;
            CHECK(terminal_asymptote({0.9, x, y, c, 0.3, 1.0, &s}) == s(z));
        }
    // nondecreasing in z at a fixed offset z - x
    double prev = -1.0;
    for (double z = 0.05; z < 2.0; z += 0.01) {
        const double v = terminal_asymptote({0.95, z - 0.5, 0.5 / (1.0 - 1e-3), c, 0.3, 1.0, &a});
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    // left of the jump the correction vanishes as tau -> 0
    CHECK(terminal_asymptote({1.0 - 1e-8, 0.5, 0.3, c, 0.3, 1.0, &a}) ==
          doctest::Approx(a(liquidation_value(0.5, 0.3, c))).epsilon(1e-12));
    CHECK_THROWS_AS(terminal_asymptote({1.0, 0.5, 0.3, c, 0.3, 1.0, &a}), DomainError);
}

TEST_CASE("frictionless target") {
    CHECK(browne_target(0.5, 0.3, 0.01) == doctest::Approx(13.29808).epsilon(1e-6));
    CHECK(browne_target(1e-9, 0.3, 0.01) < 1e-3);
    CHECK(browne_target(1.0 - 1e-9, 0.3, 0.01) < 1e-3);
    for (double z : {0.1, 0.23, 0.4})
        CHECK(browne_target(z, 0.3, 0.05) == doctest::Approx(browne_target(1.0 - z, 0.3, 0.05)).epsilon(1e-12));
    CHECK_THROWS_AS(browne_target(1.0, 0.3, 0.01), DomainError);
}

TEST_CASE("frictionless power value") {
    CHECK(crra_frictionless_value(0.0, 2.0, 0.5, MarketModel::gbm(0.0, 0.3), 1.0) ==
          doctest::Approx(std::sqrt(2.0) / 0.5));
    CHECK(crra_frictionless_value(0.0, 1.0, 0.5, MarketModel::gbm(0.04, 0.3), 1.0) ==
          doctest::Approx(2.017857).epsilon(1e-6));
    const MarketModel m = MarketModel::gaussian_mean_return(0.3, 0.27, 0.1333, 0.065, -0.93);
    CHECK(crra_frictionless_value(1.0, 4.0, 0.5, m, 1.0, 0.1) == doctest::Approx(4.0));
}

TEST_CASE("Riccati factor against the constant-state limit") {
    // zeta = 0, nu = nu_bar = kappa-stationary: the factor reduces to the GBM exponent
    MarketModel m = MarketModel::gaussian_mean_return(0.3, 0.5, 0.1333, 1e-12, 0.0);
    const double eta = 0.3 * 0.1333;
    const double p = 0.5;
    const double gbm = crra_factor(MarketModel::gbm(eta, 0.3), p, 0.2, 0.0, 1.0);
    CHECK(crra_factor(m, p, 0.2, 0.1333, 1.0) == doctest::Approx(gbm).epsilon(1e-8));
}

TEST_CASE("Riccati explosion is reported with its time") {
    const MarketModel m = MarketModel::gaussian_mean_return(0.3, 0.01, 0.0, 2.0, 0.9);
    try {
        integrate_riccati(m, 0.9, 50.0, 1e-3);
        FAIL("expected an explosion");
    } catch (const ExplosionError& e) {
        CHECK(e.critical_time() > 0.0);
        CHECK(e.critical_time() < 50.0);
    }
}

TEST_CASE("first passage probability") {
    CHECK(first_passage_prob(0.0, 1.0, 1.0, 1.0) == doctest::Approx(0.317311).epsilon(1e-6));
    CHECK(first_passage_prob(0.1, 1.0, 1.0, 1.0) == doctest::Approx(0.34977).epsilon(1e-5));
    CHECK(first_passage_prob(0.0, 1.0, 1e-12, 1.0) == doctest::Approx(1.0));
    CHECK(first_passage_prob(-0.5, 0.3, 0.4, 1e4) == doctest::Approx(std::exp(2.0 * -0.5 * 0.4 / 0.09)).epsilon(1e-6));
}
