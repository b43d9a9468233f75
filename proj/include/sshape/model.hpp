// Market, benchmark and scaling constants shared by every solver.
#pragma once

#include <stdexcept>
#include <string>

namespace sshape {

/// Thrown when a solver produces non-finite values.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Constant coefficients of the stock/bond market and the benchmark process.
/// All quantities in natural units (rates per year, volatilities per sqrt year).
struct MarketParams {
    double alpha = 0.05;   // riskless rate
    double sigma = 0.2;    // stock volatility
    double theta = 0.5;    // market price of risk (mu - alpha) / sigma
    double rho = 1.0;      // correlation between W and W^R
    double a = 0.03;       // benchmark drift
    double b = 0.1;        // benchmark volatility
    double T = 0.5;        // horizon
    double x0 = 1.0;       // initial wealth
    double r0 = 1.0;       // initial benchmark

    [[nodiscard]] double mu() const { return alpha + sigma * theta; }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const;
};

/// Quantities derived from MarketParams and the power exponent p / loss scale K.
struct DerivedParams {
    double alpha0 = 0.0;     // alpha - a - b^2 (p - 1)
    double theta_bar = 0.0;  // theta + rho b (p - 1)
    double alpha_bar = 0.0;  // alpha - a + rho b theta
    double p = 0.5;
    double K = 0.0;
};

DerivedParams derive(const MarketParams& params, double p, double K);

/// Bayes-formula factor H_s = exp(p (a + b^2 (p - 1) / 2) s).
double h_factor(const MarketParams& params, double p, double s);

/// Merton value exp(p (alpha + theta^2 / (2 (1 - p))) tau) for U(x) = x^p, per unit x^p.
double merton_growth(double alpha, double theta, double p, double tau);

}  // namespace sshape
