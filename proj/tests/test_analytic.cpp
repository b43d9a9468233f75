#include "doctest.h"

#include <cmath>

#include "sshape/analytic.hpp"

using namespace sshape;

namespace {

MarketParams table_market() {
    MarketParams m;
    m.theta = 0.25;
    return m;
}

ClosedFormDual table_cf(double r_bar = 1.0) {
    return ClosedFormDual(table_market(), UtilitySpec::power_pair(0.5, 0.5), r_bar);
}

// theta = 0.5 keeps y = 2 within reach of the threshold over the horizon
ClosedFormDual paper_cf(double r_bar = 1.0) { return ClosedFormDual(MarketParams{}, UtilitySpec::power_pair(0.5, 0.5), r_bar); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-13));
    for (double x : {-6.0, -1.3, 0.2, 2.7, 8.0}) CHECK(std::abs(normal_cdf(x) + normal_cdf(-x) - 1.0) < 1e-15);
    CHECK(normal_cdf(-40.0) >= 0.0);
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327));
}

TEST_CASE("closed form rejects unsupported settings") {
    MarketParams m = table_market();
    CHECK_THROWS_AS(ClosedFormDual(m, UtilitySpec::log_pair(0.5, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(ClosedFormDual(m, UtilitySpec::power_pair(0.5, 0.5, 2.0)), std::invalid_argument);
    CHECK_THROWS_AS(ClosedFormDual(m, UtilitySpec::power_pair(0.5, 0.5), -1.0), std::invalid_argument);
    m.rho = 0.0;
    CHECK_THROWS_AS(ClosedFormDual(m, UtilitySpec::power_pair(0.5, 0.5)), std::invalid_argument);
    const ClosedFormDual cf = table_cf();
    CHECK_THROWS_AS((void)cf.evaluate(0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cf.evaluate(0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cf.evaluate(0.6, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(find_y0(0.0, cf), std::invalid_argument);
}

TEST_CASE("derivatives match finite differences") {
    for (double rb : {1.0, 0.0}) {
        const ClosedFormDual cf = paper_cf(rb);
        for (double t : {0.0, 0.25})
            for (double y : {0.3, 0.8, 2.0}) {
                const double h = 1e-5 * y;
                const DualValue c = cf.evaluate(t, y), up = cf.evaluate(t, y + h), dn = cf.evaluate(t, y - h);
                const double fd1 = (up.value - dn.value) / (2 * h);
                const double fd2 = (up.dy - dn.dy) / (2 * h);
                CHECK(std::abs(fd1 - c.dy) / std::abs(c.dy) < 1e-6);
                CHECK(std::abs(fd2 - c.dyy) / std::abs(c.dyy) < 1e-6);
            }
    }
}

TEST_CASE("value matches a Monte Carlo expectation of the dual utility") {
    const ClosedFormDual cf = paper_cf();
    const double T = cf.params().T;
    for (double y : {0.3, 0.8, 2.0}) {
        const Eigen::VectorXd yt = simulate_dual_states(y, T, 1000000, 4, cf);
        Eigen::VectorXd u(yt.size());
        for (Eigen::Index i = 0; i < yt.size(); ++i) u[i] = cf.dual_utility().value(yt[i], 1.0);
        const mc::Estimate e = mc::estimate(u);
        CHECK(std::abs(e.mean - cf.evaluate(0.0, y).value) < 3.0 * e.se);
    }
}

TEST_CASE("terminal limits") {
    const ClosedFormDual cf = table_cf();
    const double T = cf.params().T;
    const double uh = cf.u_hat();
    CHECK(uh == doctest::Approx(cf.dual_utility().threshold(1.0)));
    // below u_hat: U1~(y) - y, above: u0
    for (double y : {0.2 * uh, 0.6 * uh})
        CHECK(cf.evaluate(T - 1e-6, y).value == doctest::Approx(1.0 / (4.0 * y) - y).epsilon(1e-6));
    for (double y : {1.5 * uh, 4.0 * uh}) CHECK(cf.evaluate(T - 1e-6, y).value == doctest::Approx(cf.u0()).epsilon(1e-6));
    CHECK(cf.u0() == -0.5);
    // tau = 0 is routed to the dual utility
    for (double y : {0.3, 0.8, 2.0}) CHECK(cf.evaluate(T, y).value == cf.dual_utility().value(y, 1.0));
    CHECK(cf.evaluate(T, 2.0).dy == 0.0);
}

TEST_CASE("closed form is convex and decreasing with the stated limits") {
    const ClosedFormDual cf = paper_cf();
    for (double t : {0.0, 0.2, 0.45}) {
        double prev_value = INFINITY, prev_dy = -INFINITY;
        // far above the threshold the value is -0.5 to machine precision
        for (double ly = -6.0; ly <= 0.5; ly += 0.25) {
            const DualValue g = cf.evaluate(t, std::exp(ly));
            CHECK(g.dyy > 0.0);
            CHECK(g.dy < 0.0);
            CHECK(g.value < prev_value);
            CHECK(g.dy > prev_dy);
            prev_value = g.value;
            prev_dy = g.dy;
        }
        CHECK(cf.evaluate(t, 1e-8).dy < -1e3);
        CHECK(cf.evaluate(t, 1e8).dy > -1e-6);
    }
}

TEST_CASE("dual to primal map") {
    const ClosedFormDual cf = table_cf();
    double prev = INFINITY;
    for (double y : {0.1, 0.3, 0.7, 1.0, 2.0}) {
        const PrimalPoint pp = primal_from_dual(0.1, y, cf);
        CHECK(pp.z < prev);
        prev = pp.z;
        CHECK(std::isfinite(pp.control));
        // Fenchel-Young: the conjugate is an infimum over y
        for (double f : {0.8, 0.95, 1.05, 1.3}) CHECK(pp.value <= cf.evaluate(0.1, f * y).value + pp.z * f * y + 1e-12);
    }
}

TEST_CASE("Merton limit") {
    MarketParams m;  // theta = 0.5
    m.a = 0.0;
    m.b = 0.0;
    const ClosedFormDual cf(m, UtilitySpec::power_pair(0.5, 0.5), 0.0);
    const double expected = std::exp(0.15 * 0.5);
    CHECK(conjugate_value(1.0, cf) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(1.0779).epsilon(1e-4));
    // Merton proportion theta / (sigma (1 - p)) = 5
    const PrimalPoint pp = primal_from_dual(0.0, find_y0(1.0, cf), cf);
    CHECK(pp.control == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("find_y0 round trip") {
    const ClosedFormDual cf = table_cf();
    CHECK(find_y0(-cf.evaluate(0.0, 0.7).dy, cf) == doctest::Approx(0.7).epsilon(1e-9));
    for (double ly = -3.0; ly <= 3.0; ly += 0.5) {
        const double y = std::exp(ly);
        const double back = find_y0(primal_from_dual(0.0, y, cf).z, cf);
        CHECK(std::abs(back - y) / y < 1e-8);
    }
    for (double z : {0.05, 1.0, 5.0, 30.0}) CHECK(std::abs(-cf.evaluate(0.0, find_y0(z, cf)).dy - z) < 1e-10 * std::max(1.0, z));
}

TEST_CASE("table values") {
    const ClosedFormDual cf = table_cf();
    CHECK(std::abs(solve_value(1.0, 1.0, cf) - 0.3872) < 1e-3);
    CHECK(std::abs(solve_value(1.0, 0.5, cf) - 0.7353) < 1e-3);
    CHECK(std::abs(solve_value(1.0, 5.0, cf) - (-0.6635)) < 1e-3);
    CHECK(solve_value(0.0, 1.0, cf) == doctest::Approx(h_factor(cf.params(), 0.5, 0.5) * -0.5));
    CHECK_THROWS_AS(solve_value(1.0, 0.0, cf), std::invalid_argument);
    CHECK_THROWS_AS(solve_value(1.0, 1.0, table_cf(2.0)), std::invalid_argument);
}

TEST_CASE("closed form agrees with the budget-equation quadrature") {
    const ClosedFormDual cf = table_cf();
    const DualUtility dual{ConcaveEnvelope(UtilitySpec::power_pair(0.5, 0.5))};
    for (auto [x, r] : {std::pair{0.5, 1.0}, {1.0, 1.0}, {5.0, 1.0}, {1.0, 0.5}, {1.0, 5.0}})
        CHECK(std::abs(solve_value(x, r, cf) - complete_market_value(x, r, cf.params(), dual)) < 1e-4);
}

TEST_CASE("mapped terminal states reproduce the conjugate value") {
    const ClosedFormDual cf = table_cf();
    const double T = cf.params().T;
    for (double z0 : {0.5, 1.0, 3.0}) {
        const double y0 = find_y0(z0, cf);
        const Eigen::VectorXd yt = simulate_dual_states(y0, T, 1000000, 8, cf);
        Eigen::VectorXd u(yt.size());
        for (Eigen::Index i = 0; i < yt.size(); ++i)
            u[i] = cf.dual_utility().envelope().u_bar(-cf.dual_utility().dy(yt[i], 1.0), 1.0);
        const mc::Estimate e = mc::estimate(u);
        CHECK(std::abs(e.mean - conjugate_value(z0, cf)) < 3.0 * e.se);
    }
}

TEST_CASE("terminal states concentrate on zero or beyond the tangency point") {
    const ClosedFormDual cf = table_cf();
    const double T = cf.params().T;
    const double delta = 0.05;
    const double y0 = find_y0(1.0, cf);
    const double tb = cf.derived().theta_bar;

    const double t6 = T - 1e-6;
    const Lemma31Report rep = lemma31_check(simulate_dual_states(y0, t6, 100000, 3, cf), t6, cf, delta);
    CHECK(rep.n == 100000);
    CHECK(rep.violation_fraction < 0.01);
    CHECK(rep.split_probability > 0.0);
    CHECK(rep.split_probability < 1.0);

    // Before T the mapped states still fill a transition band of width ~ tb sqrt(tau) in log y.
    // Compare the share inside it with the lognormal density at u_hat.
    for (double tau : {1e-4, 1e-5}) {
        const double t = T - tau;
        const Lemma31Report r = lemma31_check(simulate_dual_states(y0, t, 100000, 4, cf), t, cf, delta);
        const double mean = std::log(y0) - (cf.derived().alpha_bar + 0.5 * tb * tb) * t;
        const double d = (std::log(cf.u_hat()) + (cf.derived().alpha_bar + 0.5 * tb * tb) * tau - mean) / (tb * std::sqrt(t));
        const double kband = 1.7968;  // Phi^{-1}(1 - delta / z_hat)
        const double predicted = 2.0 * kband * std::sqrt(tau / t) * normal_pdf(d);
        CHECK(r.violation_fraction == doctest::Approx(predicted).epsilon(0.2));
    }

    // samples well away from u_hat
    Eigen::VectorXd hi(3), lo(3);
    hi << 1.2 * cf.u_hat(), 2.0 * cf.u_hat(), 10.0 * cf.u_hat();
    lo << 0.8 * cf.u_hat(), 0.3 * cf.u_hat(), 0.01 * cf.u_hat();
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(-cf.evaluate(t6, hi[i]).dy < delta);
        CHECK(-cf.evaluate(t6, lo[i]).dy >= cf.z_hat() - delta);
    }
    CHECK(lemma31_check(hi, t6, cf, delta).violation_fraction == 0.0);
    CHECK(lemma31_check(hi, t6, cf, delta).split_probability == 1.0);
    CHECK(lemma31_check(lo, t6, cf, delta).split_probability == 0.0);
}

TEST_CASE("budget function psi") {
    const MarketParams m = table_market();
    const DualUtility dual{ConcaveEnvelope(UtilitySpec::power_pair(0.5, 0.5))};
    double prev = INFINITY;
    for (double lambda : {0.05, 0.1, 0.3, 1.0, 3.0, 10.0}) {
        const double v = estimate_psi(lambda, m, dual, 20000, 5).mean;
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(estimate_psi(1e8, m, dual, 20000, 5).mean == 0.0);
    CHECK_THROWS_AS(estimate_psi(0.0, m, dual, 10, 5), std::invalid_argument);
    MarketParams inc = m;
    inc.rho = 0.3;
    CHECK_THROWS_AS(estimate_psi(1.0, inc, dual, 10, 5), std::invalid_argument);
}

TEST_CASE("lambda star reproduces the Merton budget") {
    MarketParams m;
    m.r0 = 0.0;  // R vanishes, plain power utility
    const double p = 0.5, x0 = 1.0, T = m.T;
    const DualUtility dual{ConcaveEnvelope(UtilitySpec::power_pair(p, 0.5))};
    const double mexp = p / (p - 1.0);
    const double zeta_moment =
        std::exp(-mexp * (m.alpha + 0.5 * m.theta * m.theta) * T + 0.5 * mexp * mexp * m.theta * m.theta * T);
    const double lambda = p * std::pow(x0 / zeta_moment, p - 1.0);
    const mc::Estimate psi = estimate_psi(lambda, m, dual, 1000000, 6);
    CHECK(std::abs(psi.mean - x0) < 3.0 * psi.se);
    const double found = solve_lambda_star(x0, m, dual, 200000, 7);
    CHECK(rel(found, lambda) < 0.02);
    // quadrature route gives the Merton value exactly
    CHECK(complete_market_value(x0, 0.0, m, dual) == doctest::Approx(std::exp(0.075)).epsilon(1e-6));
}
