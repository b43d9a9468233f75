#include "sshape/model.hpp"

#include <cmath>

namespace sshape {

void MarketParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("market: ") + what);
    };
    require(std::isfinite(alpha) && std::isfinite(theta), "alpha and theta must be finite");
    require(sigma > 0.0, "sigma must be > 0");
    require(b >= 0.0, "b must be >= 0");
    require(a >= 0.0, "a must be >= 0");
    require(std::abs(rho) <= 1.0, "|rho| must be <= 1");
    require(T > 0.0, "T must be > 0");
    require(x0 > 0.0, "x0 must be > 0");
    require(r0 > 0.0, "r0 must be > 0");
}

DerivedParams derive(const MarketParams& params, double p, double K) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("derive: p must lie in (0,1)");
    if (!(params.sigma > 0.0)) throw std::invalid_argument("derive: sigma must be > 0");
    if (K < 0.0) throw std::invalid_argument("derive: K must be >= 0");
    DerivedParams d;
    d.alpha0 = params.alpha - params.a - params.b * params.b * (p - 1.0);
    d.theta_bar = params.theta + params.rho * params.b * (p - 1.0);
    d.alpha_bar = params.alpha - params.a + params.rho * params.b * params.theta;
    d.p = p;
    d.K = K;
    return d;
}

double h_factor(const MarketParams& params, double p, double s) {
    return std::exp(p * (params.a + 0.5 * params.b * params.b * (p - 1.0)) * s);
}

double merton_growth(double alpha, double theta, double p, double tau) {
    return std::exp(p * (alpha + theta * theta / (2.0 * (1.0 - p))) * tau);
}

}  // namespace sshape
