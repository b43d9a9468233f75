#include "sshape/analytic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sshape {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Bisection on a decreasing function of log y; returns y with f(y) = target.
template <typename F>
double bisect_log_decreasing(F f, double target, const char* who) {
    double lo = -1.0, hi = 1.0;  // log y
    int expansions = 0;
    while (f(std::exp(lo)) < target) {
        lo -= 2.0;
        if (++expansions > 400) throw std::runtime_error(std::string(who) + ": bracket expansion failed");
    }
    while (f(std::exp(hi)) > target) {
        hi += 2.0;
        if (++expansions > 400) throw std::runtime_error(std::string(who) + ": bracket expansion failed");
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (f(std::exp(mid)) > target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

ClosedFormDual::ClosedFormDual(const MarketParams& params, const UtilitySpec& utility, double r_bar)
    : params_(params),
      derived_(derive(params, utility.u1.p, utility.loss_scale())),
      dual_(ConcaveEnvelope(utility)),
      r_bar_(r_bar) {
    if (!utility.scalable() || utility.u1.coef != 1.0)
        throw std::invalid_argument("ClosedFormDual: requires U1 = z^p and U2 = K z^p");
    if (std::abs(std::abs(params.rho) - 1.0) > 1e-12)
        throw std::invalid_argument("ClosedFormDual: requires a complete market, |rho| = 1");
    if (r_bar < 0.0) throw std::invalid_argument("ClosedFormDual: r_bar must be >= 0");
    if (!(derived_.theta_bar > 0.0)) throw std::invalid_argument("ClosedFormDual: theta_bar must be > 0");
    z_hat_ = dual_.envelope().eta(r_bar);
    u_hat_ = r_bar > 0.0 ? derived_.p * std::pow(z_hat_ - r_bar, derived_.p - 1.0) : kInf;
    u0_ = -derived_.K * std::pow(r_bar, derived_.p);
}

double ClosedFormDual::k(double tau, double y) const {
    if (r_bar_ == 0.0) return -kInf;
    const double tb = derived_.theta_bar;
    return (std::log(y) - std::log(u_hat_) - (derived_.alpha_bar + 0.5 * tb * tb) * tau) / (tb * std::sqrt(tau));
}

DualValue ClosedFormDual::evaluate(double t, double y) const {
    if (!(y > 0.0)) throw std::invalid_argument("gtilde: y must be > 0");
    const double tau = params_.T - t;
    if (tau < 0.0) throw std::invalid_argument("gtilde: t must be <= T");
    const double p = derived_.p;
    if (tau == 0.0) {
        DualValue out;
        out.value = dual_.value(y, r_bar_);
        out.dy = dual_.dy(y, r_bar_);
        // -I'(y) = -1 / U1''(I(y)) below the threshold; flat above.
        const auto& u1 = dual_.envelope().spec().u1;
        out.dyy = y <= u_hat_ ? -1.0 / u1.second(u1.inverse_deriv(y)) : 0.0;
        return out;
    }
    const double ab = derived_.alpha_bar, tb = derived_.theta_bar;
    const double q = p / (p - 1.0);
    const double sq = std::sqrt(tau);
    const double kk = k(tau, y);
    const double growth = std::exp(-q * (ab - tb * tb / (2.0 * (p - 1.0))) * tau);
    const double phi_power = normal_cdf(-kk - q * tb * sq);
    const double phi_ref = normal_cdf(-kk - tb * sq);
    const double disc = std::exp(-ab * tau);

    DualValue out;
    out.value = std::pow(y, q) * std::pow(p, p / (1.0 - p)) * (1.0 - p) * growth * phi_power -
                r_bar_ * y * disc * phi_ref + (r_bar_ > 0.0 ? u0_ * normal_cdf(kk) : 0.0);
    out.dy = -std::pow(y, 1.0 / (p - 1.0)) * std::pow(p, 1.0 / (1.0 - p)) * growth * phi_power - r_bar_ * disc * phi_ref;
    out.dyy = std::pow(y, (2.0 - p) / (p - 1.0)) * std::pow(p, 1.0 / (1.0 - p)) / (1.0 - p) * growth * phi_power;
    if (r_bar_ > 0.0) out.dyy += normal_pdf(kk) * z_hat_ * u_hat_ / (tb * sq * y * y);
    return out;
}

DualValue gtilde(double t, double y, const ClosedFormDual& cf) { return cf.evaluate(t, y); }

PrimalPoint primal_from_dual(double t, double y, const ClosedFormDual& cf) {
    const DualValue g = cf.evaluate(t, y);
    const auto& m = cf.params();
    PrimalPoint out;
    out.z = -g.dy;
    out.value = g.value + y * out.z;
    out.control = -y * cf.derived().theta_bar * g.dyy / (g.dy * m.sigma) + m.rho * m.b / m.sigma;
    return out;
}

double find_y0(double z, const ClosedFormDual& cf, double t) {
    if (!(z > 0.0)) throw std::invalid_argument("find_y0: z must be > 0");
    return bisect_log_decreasing([&](double y) { return -cf.evaluate(t, y).dy; }, z, "find_y0");
}

double conjugate_value(double z, const ClosedFormDual& cf, double t) {
    const double y = find_y0(z, cf, t);
    return cf.evaluate(t, y).value + z * y;
}

double solve_value(double x, double r, const ClosedFormDual& cf) {
    if (cf.r_bar() != 1.0) throw std::invalid_argument("solve_value: closed form must use r_bar = 1");
    if (!(r > 0.0) || x < 0.0) throw std::invalid_argument("solve_value: need x >= 0, r > 0");
    const double p = cf.derived().p;
    const double scale = std::pow(r, p) * h_factor(cf.params(), p, cf.params().T);
    if (x == 0.0) return scale * cf.u0();
    return scale * conjugate_value(x / r, cf);
}

Eigen::VectorXd simulate_dual_states(double y0, double t, int n, std::uint64_t seed, const ClosedFormDual& cf) {
    mc::Rng rng(seed, 17);
    Eigen::VectorXd w(n);
    rng.fill_normal(w);
    w *= std::sqrt(t);
    // dY = -alpha_bar Y dt - theta_bar Y dW~
    return mc::draw_terminal_lognormal(y0, -cf.derived().alpha_bar, cf.derived().theta_bar, t, -w);
}

Lemma31Report lemma31_check(const Eigen::Ref<const Eigen::VectorXd>& y_samples, double t,
                            const ClosedFormDual& cf, double delta) {
    Lemma31Report report;
    report.n = static_cast<std::size_t>(y_samples.size());
    std::size_t violations = 0, above = 0;
    for (Eigen::Index i = 0; i < y_samples.size(); ++i) {
        const double y = y_samples[i];
        const double z = -cf.evaluate(t, y).dy;
        const double dist = z >= cf.z_hat() ? 0.0 : std::min(std::abs(z), cf.z_hat() - z);
        if (dist > delta) ++violations;
        if (y >= cf.u_hat()) ++above;
    }
    if (report.n > 0) {
        report.violation_fraction = static_cast<double>(violations) / static_cast<double>(report.n);
        report.split_probability = static_cast<double>(above) / static_cast<double>(report.n);
    }
    return report;
}

namespace {

struct CompleteMarketDraws {
    Eigen::VectorXd zeta;
    Eigen::VectorXd r_terminal;
};

CompleteMarketDraws complete_market_draws(const MarketParams& params, int n, std::uint64_t seed) {
    if (std::abs(std::abs(params.rho) - 1.0) > 1e-12)
        throw std::invalid_argument("estimate_psi: requires a complete market, |rho| = 1");
    mc::Rng rng(seed, 23);
    Eigen::VectorXd w(n);
    rng.fill_normal(w);
    w *= std::sqrt(params.T);
    CompleteMarketDraws d;
    d.zeta = mc::state_price_density(params, w);
    d.r_terminal = mc::draw_terminal_lognormal(params.r0, params.a, params.b, params.T, params.rho * w);
    return d;
}

}  // namespace

mc::Estimate estimate_psi(double lambda, const MarketParams& params, const DualUtility& dual, int n_paths,
                          std::uint64_t seed) {
    if (!(lambda > 0.0)) throw std::invalid_argument("estimate_psi: lambda must be > 0");
    const CompleteMarketDraws d = complete_market_draws(params, n_paths, seed);
    Eigen::VectorXd samples(n_paths);
    for (int i = 0; i < n_paths; ++i) samples[i] = -d.zeta[i] * dual.dy(lambda * d.zeta[i], d.r_terminal[i]);
    return mc::estimate(samples);
}

double solve_lambda_star(double x0, const MarketParams& params, const DualUtility& dual, int n_paths,
                         std::uint64_t seed) {
    if (!(x0 > 0.0)) throw std::invalid_argument("solve_lambda_star: x0 must be > 0");
    const CompleteMarketDraws d = complete_market_draws(params, n_paths, seed);
    auto psi = [&](double lambda) {
        Eigen::VectorXd samples(n_paths);
        for (int i = 0; i < n_paths; ++i) samples[i] = -d.zeta[i] * dual.dy(lambda * d.zeta[i], d.r_terminal[i]);
        return mc::pairwise_sum(samples.data(), samples.size()) / n_paths;
    };
    return bisect_log_decreasing(psi, x0, "solve_lambda_star");
}

double complete_market_value(double x0, double r0, const MarketParams& params, const DualUtility& dual, int nodes) {
    if (std::abs(std::abs(params.rho) - 1.0) > 1e-12)
        throw std::invalid_argument("complete_market_value: requires |rho| = 1");
    if (nodes < 3) throw std::invalid_argument("complete_market_value: need at least 3 nodes");
    const double width = 10.0;
    const double h = 2.0 * width / (nodes - 1);
    const double sqrt_t = std::sqrt(params.T);
    auto zeta_at = [&](double s) {
        return std::exp(-(params.alpha + 0.5 * params.theta * params.theta) * params.T - params.theta * s * sqrt_t);
    };
    auto r_at = [&](double s) {
        return r0 * std::exp((params.a - 0.5 * params.b * params.b) * params.T + params.b * params.rho * s * sqrt_t);
    };
    // Terminal wealth jumps to 0 where lambda zeta crosses the dual threshold, so cells
    // containing a crossing are refined instead of trusting the trapezoid rule there.
    auto integrate = [&](double lambda, auto&& f) {
        auto flat = [&](double s) { return r_at(s) > 0.0 && lambda * zeta_at(s) > dual.threshold(r_at(s)); };
        constexpr int kSub = 4000;
        double total = 0.0;
        double prev_s = -width, prev_f = normal_pdf(prev_s) * f(prev_s);
        bool prev_flat = flat(prev_s);
        for (int i = 1; i < nodes; ++i) {
            const double s = -width + h * i;
            const double fs = normal_pdf(s) * f(s);
            const bool fl = flat(s);
            if (fl != prev_flat) {
                const double hs = h / kSub;
                double a = normal_pdf(prev_s) * f(prev_s);
                for (int k = 1; k <= kSub; ++k) {
                    const double b = normal_pdf(prev_s + hs * k) * f(prev_s + hs * k);
                    total += 0.5 * hs * (a + b);
                    a = b;
                }
            } else {
                total += 0.5 * h * (prev_f + fs);
            }
            prev_s = s;
            prev_f = fs;
            prev_flat = fl;
        }
        return total;
    };
    auto wealth = [&](double lambda, double s) { return -dual.dy(lambda * zeta_at(s), r_at(s)); };
    auto budget = [&](double lambda) {
        return integrate(lambda, [&](double s) { return zeta_at(s) * wealth(lambda, s); });
    };
    const double lambda = bisect_log_decreasing(budget, x0, "complete_market_value");
    return integrate(lambda, [&](double s) { return dual.envelope().u_bar(wealth(lambda, s), r_at(s)); });
}

}  // namespace sshape
