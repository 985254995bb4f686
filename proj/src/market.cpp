#include "ncqvi/market.hpp"

#include <algorithm>
#include <cmath>

#include "ncqvi/error.hpp"

namespace ncqvi {

std::string to_string(ModelKind kind) {
    return kind == ModelKind::GBM ? "gbm" : "gaussian_mean_return";
}

MarketModel MarketModel::gbm(double eta, double sigma, double r) {
    MarketModel m;
    m.kind = ModelKind::GBM;
    m.r = r;
    m.eta = eta;
    m.sigma = sigma;
    m.validate();
    return m;
}

MarketModel MarketModel::gaussian_mean_return(double sigma, double kappa, double nu_bar, double zeta,
                                              double rho, double r) {
    MarketModel m;
    m.kind = ModelKind::GaussianMeanReturn;
    m.r = r;
    m.sigma = sigma;
    m.kappa = kappa;
    m.nu_bar = nu_bar;
    m.zeta = zeta;
    m.rho = rho;
    m.validate();
    return m;
}

void MarketModel::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(r)) throw ValidationError("market.r must be finite");
    if (!finite(sigma) || sigma <= 0.0) throw ValidationError("market.sigma must be > 0");
    if (kind == ModelKind::GBM) {
        if (!finite(eta)) throw ValidationError("market.eta must be finite");
        return;
    }
    if (!finite(zeta) || zeta <= 0.0) throw ValidationError("market.zeta must be > 0");
    if (!finite(kappa) || kappa < 0.0) throw ValidationError("market.kappa must be >= 0");
    if (!finite(nu_bar)) throw ValidationError("market.nu_bar must be finite");
    if (!finite(rho) || std::abs(rho) > 1.0) throw ValidationError("market.rho must lie in [-1, 1]");
}

double MarketModel::lipschitz_constant() const {
    if (kind == ModelKind::GBM) return 0.0;
    return std::max(sigma, kappa);
}

Coefficients model_coefficients(const MarketModel& model, double nu) {
    if (model.kind == ModelKind::GBM) {
        return {model.r + model.eta, model.sigma, 0.0, 0.0, model.eta};
    }
    const double eta = model.sigma * nu;
    return {model.r + eta, model.sigma, model.kappa * (model.nu_bar - nu), model.zeta, eta};
}

void CostSpec::validate() const {
    if (!std::isfinite(theta1) || theta1 <= 0.0 || theta1 >= 1.0)
        throw ValidationError("costs.theta1 must lie in (0, 1)");
    if (!std::isfinite(theta2) || theta2 <= 0.0) throw ValidationError("costs.theta2 must be > 0");
}

void CostSpec::validate_allow_zero() const {
    if (!std::isfinite(theta1) || theta1 < 0.0 || theta1 >= 1.0)
        throw ValidationError("costs.theta1 must lie in [0, 1)");
    if (!std::isfinite(theta2) || theta2 < 0.0) throw ValidationError("costs.theta2 must be >= 0");
}

double liquidation_value(double x, double y, const CostSpec& costs) {
    if (!std::isfinite(x) || !std::isfinite(y))
        throw DomainError("liquidation_value: non-finite position");
    if (y >= 0.0) return x + (1.0 - costs.theta1) * y;
    return x + (1.0 + costs.theta2) * y;
}

bool is_solvent(double x, double y, const CostSpec& costs, double K) {
    return liquidation_value(x, y, costs) >= K;
}

}  // namespace ncqvi
