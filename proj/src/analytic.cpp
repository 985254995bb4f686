#include "ncqvi/analytic.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ncqvi/error.hpp"

namespace ncqvi {

double normal_cdf(double q) {
    return 0.5 * std::erfc(-q / std::numbers::sqrt2);
}

double normal_pdf(double q) {
    return std::exp(-0.5 * q * q) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("normal_quantile: argument must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

NormalFunctions normal_functions(double q) {
    return {normal_cdf(q), normal_pdf(q)};
}

double terminal_asymptote(const AsymptoteQuery& q) {
    if (q.utility == nullptr) throw DomainError("terminal_asymptote: utility missing");
    if (!(q.t < q.T)) throw DomainError("terminal_asymptote: requires t < T");
    const double z = liquidation_value(q.x, q.y, q.costs);
    const Utility& u = *q.utility;
    if (z < u.floor()) throw DomainError("terminal_asymptote: liquidation value below K");
    double value = u(z);
    const double scale = q.sigma_hat * std::sqrt(q.T - q.t);
    for (const Jump& j : u.jumps()) {
        if (!(j.at > z)) continue;
        const double distance = std::abs(j.at - q.x);
        double factor = 0.0;
        if (distance > 0.0 && scale > 0.0) factor = 2.0 * normal_cdf((z - j.at) / (distance * scale));
        value += factor * j.size();
    }
    return value;
}

double browne_target(double z, double sigma, double tau) {
    if (!(z > 0.0 && z < 1.0)) throw DomainError("browne_target: wealth must lie in (0, 1)");
    if (!(tau > 0.0) || !(sigma > 0.0)) throw DomainError("browne_target: needs sigma > 0, tau > 0");
    return normal_pdf(normal_quantile(z)) / (sigma * std::sqrt(tau));
}

namespace {

// d/dtau of (A, B, C) for the frictionless power-utility problem with eta = sigma nu.
RiccatiState riccati_rhs(const MarketModel& m, double delta, const RiccatiState& s) {
    const double zr = m.zeta * m.rho;
    const double lead = 1.0 + 2.0 * zr * s.A;
    const double z2 = m.zeta * m.zeta;
    RiccatiState d;
    d.A = 0.5 * delta * lead * lead - 2.0 * m.kappa * s.A + 2.0 * z2 * s.A * s.A;
    d.B = delta * zr * lead * s.B + 2.0 * m.kappa * m.nu_bar * s.A - m.kappa * s.B + 2.0 * z2 * s.A * s.B;
    d.C = 0.5 * delta * zr * zr * s.B * s.B + m.kappa * m.nu_bar * s.B + z2 * s.A + 0.5 * z2 * s.B * s.B;
    return d;
}

RiccatiState axpy(const RiccatiState& s, double h, const RiccatiState& d) {
    return {s.A + h * d.A, s.B + h * d.B, s.C + h * d.C};
}

}  // namespace

RiccatiState integrate_riccati(const MarketModel& model, double p, double tau, double step) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("integrate_riccati: p must lie in (0, 1)");
    if (!(tau >= 0.0)) throw DomainError("integrate_riccati: tau must be >= 0");
    if (!(step > 0.0)) throw DomainError("integrate_riccati: step must be > 0");
    const double delta = p / (1.0 - p);
    RiccatiState s;
    double elapsed = 0.0;
    const double blowup = 1e8;
    while (elapsed < tau) {
        const double h = std::min(step, tau - elapsed);
        const RiccatiState k1 = riccati_rhs(model, delta, s);
        const RiccatiState k2 = riccati_rhs(model, delta, axpy(s, 0.5 * h, k1));
        const RiccatiState k3 = riccati_rhs(model, delta, axpy(s, 0.5 * h, k2));
        const RiccatiState k4 = riccati_rhs(model, delta, axpy(s, h, k3));
        s.A += h / 6.0 * (k1.A + 2.0 * k2.A + 2.0 * k3.A + k4.A);
        s.B += h / 6.0 * (k1.B + 2.0 * k2.B + 2.0 * k3.B + k4.B);
        s.C += h / 6.0 * (k1.C + 2.0 * k2.C + 2.0 * k3.C + k4.C);
        elapsed += h;
        if (!std::isfinite(s.A) || std::abs(s.A) > blowup) {
            std::ostringstream os;
            os << "frictionless CRRA factor explodes at time to maturity " << elapsed;
            throw ExplosionError(os.str(), elapsed);
        }
    }
    return s;
}

double crra_factor(const MarketModel& model, double p, double tau, double nu, double horizon) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("crra_factor: p must lie in (0, 1)");
    if (tau <= 0.0) return 1.0;
    if (model.kind == ModelKind::GBM) {
        return std::exp(p * model.eta * model.eta * tau / (2.0 * (1.0 - p) * model.sigma * model.sigma));
    }
    const double step = (horizon > 0.0 ? horizon : tau) / 2000.0;
    const RiccatiState s = integrate_riccati(model, p, tau, step);
    return std::exp(s.A * nu * nu + s.B * nu + s.C);
}

double crra_frictionless_value(double t, double z, double p, const MarketModel& model, double T,
                               double nu) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("crra_frictionless_value: p must lie in (0, 1)");
    if (!(z >= 0.0)) throw DomainError("crra_frictionless_value: wealth must be >= 0");
    if (t > T) throw DomainError("crra_frictionless_value: t must not exceed T");
    return std::pow(z, p) / p * crra_factor(model, p, T - t, nu, T);
}

double first_passage_prob(double a, double s, double b, double tau) {
    if (!(s > 0.0) || !(tau > 0.0) || !(b > 0.0))
        throw DomainError("first_passage_prob: needs s > 0, tau > 0, b > 0");
    const double sq = s * std::sqrt(tau);
    const double first = normal_cdf((a * tau - b) / sq);
    const double expo = 2.0 * a * b / (s * s);
    const double tail = normal_cdf((-a * tau - b) / sq);
    // e^{expo} Phi(.) computed in log space to stay finite for large positive drift.
    double second = 0.0;
    if (tail > 0.0) second = std::exp(expo + std::log(tail));
    return std::min(1.0, first + second);
}

}  // namespace ncqvi
