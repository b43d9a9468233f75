// Complete-market closed forms: the dual value function of the scaled problem and
// its maps back to primal quantities, plus the budget-equation route.
#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "sshape/mc.hpp"
#include "sshape/model.hpp"
#include "sshape/utility.hpp"

namespace sshape {

double normal_cdf(double x);
double normal_pdf(double x);

struct DualValue {
    double value = 0.0;
    double dy = 0.0;
    double dyy = 0.0;
};

/// Closed-form dual value g~(t, y) = E^Q[U~(Y_T, R_bar) | Y_t = y] for the power pair
/// when |rho| = 1, where Y is geometric with drift -alpha_bar and volatility theta_bar.
class ClosedFormDual {
public:
    ClosedFormDual(const MarketParams& params, const UtilitySpec& utility, double r_bar = 1.0);

    [[nodiscard]] DualValue evaluate(double t, double y) const;
    /// k(tau, y) = (log y - log u_hat - (alpha_bar + theta_bar^2/2) tau) / (theta_bar sqrt(tau)).
    [[nodiscard]] double k(double tau, double y) const;

    [[nodiscard]] const MarketParams& params() const { return params_; }
    [[nodiscard]] const DerivedParams& derived() const { return derived_; }
    [[nodiscard]] const DualUtility& dual_utility() const { return dual_; }
    [[nodiscard]] double r_bar() const { return r_bar_; }
    [[nodiscard]] double z_hat() const { return z_hat_; }
    [[nodiscard]] double u_hat() const { return u_hat_; }
    [[nodiscard]] double u0() const { return u0_; }

private:
    MarketParams params_;
    DerivedParams derived_;
    DualUtility dual_;
    double r_bar_;
    double z_hat_;
    double u_hat_;
    double u0_;
};

DualValue gtilde(double t, double y, const ClosedFormDual& cf);

struct PrimalPoint {
    double z = 0.0;        // Z* = -dy g~
    double value = 0.0;    // g~ + y Z*
    double control = 0.0;  // proportion pi*
};

PrimalPoint primal_from_dual(double t, double y, const ClosedFormDual& cf);

/// Solves -dy g~(t, y) = z by bisection in log y.
double find_y0(double z, const ClosedFormDual& cf, double t = 0.0);

/// Scaled conjugate g(t, z) = inf_y { g~(t, y) + z y }.
double conjugate_value(double z, const ClosedFormDual& cf, double t = 0.0);

/// Unscaled value v(0, x, r) = r^p H_T g(0, x/r); cf must be built with r_bar = 1.
double solve_value(double x, double r, const ClosedFormDual& cf);

struct Lemma31Report {
    double violation_fraction = 0.0;  // share of Z* farther than delta from {0} U [z_hat, inf)
    double split_probability = 0.0;   // share of samples with y >= u_hat
    std::size_t n = 0;
};

/// Exact draws of Y_t under Q started from y0 at time 0.
Eigen::VectorXd simulate_dual_states(double y0, double t, int n, std::uint64_t seed, const ClosedFormDual& cf);

Lemma31Report lemma31_check(const Eigen::Ref<const Eigen::VectorXd>& y_samples, double t,
                            const ClosedFormDual& cf, double delta);

/// psi(lambda) = -E[zeta_T dy U~(lambda zeta_T, R_T)] for a complete market (|rho| = 1).
mc::Estimate estimate_psi(double lambda, const MarketParams& params, const DualUtility& dual, int n_paths,
                          std::uint64_t seed);

/// Solves psi(lambda*) = x0 by bisection with common random numbers.
double solve_lambda_star(double x0, const MarketParams& params, const DualUtility& dual, int n_paths,
                         std::uint64_t seed);

/// Complete-market value E[U_bar(X*_T, R_T)] with X*_T = -dy U~(lambda* zeta_T, R_T), by
/// trapezoidal quadrature over W_T. Works for any supported utility pair.
double complete_market_value(double x0, double r0, const MarketParams& params, const DualUtility& dual,
                             int nodes = 20001);

}  // namespace sshape
