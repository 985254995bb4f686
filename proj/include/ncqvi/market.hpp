#pragma once

#include <optional>
#include <string>

namespace ncqvi {

enum class ModelKind { GBM, GaussianMeanReturn };

std::string to_string(ModelKind kind);

/// Stock dynamics dS/S = mu(nu) dt + sigma(nu) dB with an optional
/// Ornstein-Uhlenbeck state d nu = kappa (nu_bar - nu) dt + zeta dB^x, d<B,B^x> = rho dt.
///
/// For GBM the state is absent and the excess return eta is constant.  For the
/// Gaussian mean return model mu(nu) = r + sigma nu, so eta(nu) = sigma nu.
struct MarketModel {
    ModelKind kind = ModelKind::GBM;
    double r = 0.0;
    double eta = 0.0;  // GBM only
    double sigma = 0.3;
    double kappa = 0.0;   // GMR only
    double nu_bar = 0.0;  // GMR only
    double zeta = 0.0;    // GMR only
    double rho = 0.0;     // GMR only

    static MarketModel gbm(double eta, double sigma, double r = 0.0);
    static MarketModel gaussian_mean_return(double sigma, double kappa, double nu_bar, double zeta,
                                            double rho, double r = 0.0);

    bool has_state() const { return kind == ModelKind::GaussianMeanReturn; }

    /// Throws ValidationError naming the violated constraint.
    void validate() const;

    /// Lipschitz constant of the coefficient functions in nu.
    double lipschitz_constant() const;
};

struct Coefficients {
    double mu;
    double sigma;
    double m;
    double zeta;
    double eta;
};

/// Coefficient functions at state level nu.  For GBM nu is ignored and m = zeta = 0.
Coefficients model_coefficients(const MarketModel& model, double nu);

/// Proportional cost rates: theta1 on sales, theta2 on purchases.
struct CostSpec {
    double theta1 = 1e-3;
    double theta2 = 1e-3;

    void validate() const;
    /// Same as validate() but allows theta1 = theta2 = 0 (frictionless reference runs).
    void validate_allow_zero() const;
};

struct Position {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    std::optional<double> nu;
};

/// Forward wealth after closing the stock position: x + (1-theta1) y^+ - (1+theta2) y^-.
double liquidation_value(double x, double y, const CostSpec& costs);

/// (x, y) lies in the solvency region {liquidation_value >= K}.
bool is_solvent(double x, double y, const CostSpec& costs, double K);

}  // namespace ncqvi
