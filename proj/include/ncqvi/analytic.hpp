#pragma once

#include "ncqvi/market.hpp"
#include "ncqvi/utility.hpp"

namespace ncqvi {

/// Standard normal CDF, computed as erfc(-q/sqrt2)/2.
double normal_cdf(double q);
double normal_pdf(double q);
/// Inverse of normal_cdf; throws DomainError unless 0 < u < 1.
double normal_quantile(double u);

struct NormalFunctions {
    double cdf;
    double pdf;
};
NormalFunctions normal_functions(double q);

/// Evaluation point of the near-maturity asymptote of the value function.
struct AsymptoteQuery {
    double t;
    double x;
    double y;
    CostSpec costs;
    double sigma_hat;  // sigma at the limit state
    double T;
    const Utility* utility;
};

/// U(z) plus one 2 Phi correction per jump above z:
///   sum_j 2 Phi((z - zbar_j) / (|zbar_j - x| sigma_hat sqrt(T-t))) * jump_j.
/// The Phi factor is 0 when |zbar_j - x| = 0 and z < zbar_j.
double terminal_asymptote(const AsymptoteQuery& q);

/// Frictionless goal-reaching target phi(Phi^{-1}(z)) / (sigma sqrt(tau)).
double browne_target(double z, double sigma, double tau);

/// Exponential-affine factor F(t, nu) = exp(A nu^2 + B nu + C) of the frictionless
/// CRRA value under the Gaussian mean return model, in time to maturity tau.
struct RiccatiState {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
};

/// Integrates the Riccati system backward from A = B = C = 0 at maturity using
/// classical RK4 with step `step` (default horizon/2000).  Throws ExplosionError
/// when A diverges before tau is reached.
RiccatiState integrate_riccati(const MarketModel& model, double p, double tau, double step);

/// Growth factor F^(p)(t, nu) of the frictionless CRRA value; horizon is T (sets the RK4 step T/2000).
double crra_factor(const MarketModel& model, double p, double tau, double nu, double horizon);

/// Frictionless value of U(z) = z^p / p: (z^p / p) F^(p)(t, nu).
double crra_frictionless_value(double t, double z, double p, const MarketModel& model, double T,
                               double nu = 0.0);

/// P(max_{u <= tau} (a u + s B_u) >= b) for b > 0.
double first_passage_prob(double a, double s, double b, double tau);

}  // namespace ncqvi
