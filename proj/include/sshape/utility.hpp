// S-shaped utility, its concave envelope in wealth, and the Fenchel-Legendre dual.
#pragma once

#include <memory>
#include <variant>

namespace sshape {

/// z -> coef * z^p on [0, inf).
struct PowerUtility {
    double coef = 1.0;
    double p = 0.5;

    [[nodiscard]] double value(double z) const;
    [[nodiscard]] double deriv(double z) const;
    [[nodiscard]] double second(double z) const;
    /// Inverse of the derivative, I(y) with value'(I(y)) = y.
    [[nodiscard]] double inverse_deriv(double y) const;
    /// sup_z { value(z) - z y } = (1 - p) coef^(1/(1-p)) (y/p)^(p/(p-1)).
    [[nodiscard]] double conjugate(double y) const;
};

/// z -> coef * log(z + 1).
struct LogUtility {
    double coef = 0.5;

    [[nodiscard]] double value(double z) const;
    [[nodiscard]] double deriv(double z) const;
};

/// The pair (U1, U2) defining U(z) = U1(z) for z >= 0 and -U2(-z) for z < 0.
struct UtilitySpec {
    PowerUtility u1{};
    std::variant<PowerUtility, LogUtility> u2 = PowerUtility{0.5, 0.5};

    [[nodiscard]] double u2_value(double z) const;
    [[nodiscard]] double u2_deriv(double z) const;
    /// True when U2 is a power with U1's exponent, so U(x - r) = r^p U(x/r - 1).
    [[nodiscard]] bool scalable() const;
    /// Loss-aversion scale K (U2 coefficient); only meaningful when scalable().
    [[nodiscard]] double loss_scale() const;
    void validate() const;

    static UtilitySpec power_pair(double p, double K, double coef = 1.0);
    static UtilitySpec log_pair(double p, double log_coef, double coef = 1.0);
};

/// Signed-excess utility U(z).
double s_utility(double z, const UtilitySpec& spec);

/// Residual U1(eta - r) + U2(r) - eta U1'(eta - r) of the tangency equation.
double tangency_residual(double eta, double r, const UtilitySpec& spec);

/// Tangency point eta(r) >= r; eta(0) = 0. Throws std::runtime_error if no bracket is found.
double solve_eta(double r, const UtilitySpec& spec);

/// Concave envelope of x -> U(x - r), with a memoised tangency point.
class ConcaveEnvelope {
public:
    explicit ConcaveEnvelope(UtilitySpec spec);

    [[nodiscard]] const UtilitySpec& spec() const { return spec_; }
    [[nodiscard]] double eta(double r) const;
    /// Slope of the straight segment, U1'(eta(r) - r); +inf at r = 0.
    [[nodiscard]] double slope(double r) const;
    [[nodiscard]] double u_bar(double x, double r) const;
    [[nodiscard]] double u_bar_x(double x, double r) const;
    [[nodiscard]] double u_bar_xx(double x, double r) const;

private:
    struct EtaCache;
    UtilitySpec spec_;
    double scaled_gap_ = -1.0;  // (eta(r) - r) / r for the scalable pair
    std::shared_ptr<EtaCache> cache_;
};

double u_bar(double x, double r, const ConcaveEnvelope& envelope);

/// Fenchel-Legendre transform of the envelope in wealth.
class DualUtility {
public:
    explicit DualUtility(ConcaveEnvelope envelope) : envelope_(std::move(envelope)) {}

    [[nodiscard]] const ConcaveEnvelope& envelope() const { return envelope_; }
    /// y*(r) = U1'(eta(r) - r); the dual is flat above it.
    [[nodiscard]] double threshold(double r) const { return envelope_.slope(r); }
    [[nodiscard]] double value(double y, double r) const;
    /// Left-continuous at y*(r); zero above it.
    [[nodiscard]] double dy(double y, double r) const;

private:
    ConcaveEnvelope envelope_;
};

double dual_utility(double y, double r, const DualUtility& dual);
double dual_utility_dy(double y, double r, const DualUtility& dual);

}  // namespace sshape
