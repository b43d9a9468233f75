#include "doctest.h"

#include <cmath>

#include "sshape/analytic.hpp"
#include "sshape/pinn.hpp"

using namespace sshape;
using namespace sshape::pinn;

namespace {

const UtilitySpec kPower = UtilitySpec::power_pair(0.5, 0.5);

// Merton value x^p exp(c (T - t)) with c = p (alpha + theta^2 / (2 (1 - p))) and its jet.
PdeJet<double> merton_jet(double x, double tau, double alpha, double theta, double p) {
    const double c = p * (alpha + theta * theta / (2.0 * (1.0 - p)));
    const double e = std::exp(c * tau);
    PdeJet<double> j;
    j.u = std::pow(x, p) * e;
    j.ut = -c * j.u;
    j.ux[0] = p * std::pow(x, p - 1.0) * e;
    j.uxx[0] = p * (p - 1.0) * std::pow(x, p - 2.0) * e;
    return j;
}

// Finite-difference jet of a function of (t, x0, x1).
template <typename F>
PdeJet<double> fd_jet(F f, double t, double x, double r, double h) {
    PdeJet<double> j;
    const double hx = h * x, hr = h * r;
    j.u = f(t, x, r);
    j.ut = (f(t + h, x, r) - f(t - h, x, r)) / (2 * h);
    j.ux[0] = (f(t, x + hx, r) - f(t, x - hx, r)) / (2 * hx);
    j.ux[1] = (f(t, x, r + hr) - f(t, x, r - hr)) / (2 * hr);
    j.uxx[0] = (f(t, x + hx, r) - 2 * j.u + f(t, x - hx, r)) / (hx * hx);
    j.uxx[2] = (f(t, x, r + hr) - 2 * j.u + f(t, x, r - hr)) / (hr * hr);
    j.uxx[1] = (f(t, x + hx, r + hr) - f(t, x + hx, r - hr) - f(t, x - hx, r + hr) + f(t, x - hx, r - hr)) / (4 * hx * hr);
    return j;
}

TrainConfig small_config(int iterations) {
    TrainConfig c;
    c.collocation = 200;
    c.terminal = 50;
    c.boundary = 50;
    c.iterations = iterations;
    c.hidden = {16, 16};
    return c;
}

}  // namespace

TEST_CASE("problem names") {
    for (ProblemKind k : {ProblemKind::ScaledPrimal, ProblemKind::ScaledPrimalNonConcave, ProblemKind::ScaledDual,
                          ProblemKind::GeneralPrimal, ProblemKind::GeneralPrimalNonConcave, ProblemKind::GeneralDual})
        CHECK(problem_kind_from_string(to_string(k)) == k);
    CHECK(to_string(ProblemKind::ScaledDual) == "pinn-scaled-dual");
    CHECK_THROWS_AS(problem_kind_from_string("pinn-nope"), std::invalid_argument);
    CHECK(is_scaled(ProblemKind::ScaledDual));
    CHECK_FALSE(is_scaled(ProblemKind::GeneralDual));
    CHECK(is_dual(ProblemKind::GeneralDual));
    CHECK_FALSE(is_dual(ProblemKind::ScaledPrimal));
    CHECK_THROWS_AS(make_problem(ProblemKind::ScaledPrimal, MarketParams{}, UtilitySpec::log_pair(0.5, 1.0)),
                    std::invalid_argument);
    CHECK_NOTHROW(make_problem(ProblemKind::GeneralPrimal, MarketParams{}, UtilitySpec::log_pair(0.5, 1.0)));
}

TEST_CASE("constant candidates have zero residual") {
    const MarketParams m;
    const DerivedParams d = derive(m, 0.5, 0.5);
    PdeJet<double> c;
    c.u = 3.0;
    bool clamped = false;
    CHECK(residual_scaled_primal(1.0, c, m, d, 1e-6, clamped) == 0.0);
    CHECK(clamped);  // zero curvature hits the clamp
    clamped = false;
    CHECK(residual_scaled_dual(0.5, c, m, d, 1e-6, clamped) == 0.0);
    CHECK(residual_general_primal(1.0, 1.0, c, m, 1e-6, clamped) == 0.0);
    CHECK(residual_general_dual(0.5, 1.0, c, m, 1e-6, clamped) == 0.0);
}

TEST_CASE("curvature of the wrong sign is clamped") {
    MarketParams m;
    m.rho = 0.0;
    const DerivedParams d = derive(m, 0.5, 0.5);
    PdeJet<double> j;
    j.ux[0] = 1.0;
    j.uxx[0] = 2.0;  // convex where the primal must be concave
    bool clamped = false;
    const double r = residual_scaled_primal(1.0, j, m, d, 1e-3, clamped);
    CHECK(clamped);
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);  // -num^2 / (2 * -delta) is positive
    j.ux[0] = -1.0;
    j.uxx[0] = -2.0;  // concave where the dual must be convex
    clamped = false;
    CHECK(std::isfinite(residual_scaled_dual(1.0, j, m, d, 1e-3, clamped)));
    CHECK(clamped);
    j.uxx[0] = 2.0;
    clamped = false;
    (void)residual_scaled_dual(1.0, j, m, d, 1e-3, clamped);
    CHECK_FALSE(clamped);
}

TEST_CASE("Merton solves the reduced primal equation without a benchmark") {
    MarketParams m;
    m.b = 0.0;
    m.rho = 0.0;
    const DerivedParams d = derive(m, 0.5, 0.5);
    mc::Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const double z = rng.uniform(0.05, 5.0), tau = rng.uniform(0.0, m.T);
        // alpha0 = alpha - a plays the riskless rate in the scaled problem
        const PdeJet<double> j = merton_jet(z, tau, d.alpha0, d.theta_bar, 0.5);
        bool c = false;
        CHECK(std::abs(residual_scaled_primal(z, j, m, d, 1e-6, c)) < 1e-8);
        CHECK_FALSE(c);
    }
}

TEST_CASE("Merton solves the general primal equation at r -> 0") {
    const MarketParams m;
    mc::Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double x = rng.uniform(0.05, 5.0), tau = rng.uniform(0.0, m.T);
        const PdeJet<double> j = merton_jet(x, tau, m.alpha, m.theta, 0.5);
        bool c = false;
        CHECK(std::abs(residual_general_primal(x, 1e-9, j, m, 1e-6, c)) < 1e-8);
    }
}

TEST_CASE("closed-form dual solves the scaled dual equation") {
    const MarketParams m;
    const ClosedFormDual cf(m, kPower);
    const DerivedParams& d = cf.derived();
    for (double t : {0.0, 0.2, 0.4})
        for (double y : {0.3, 0.6, 0.9, 1.5}) {
            PdeJet<double> j;
            const DualValue g = cf.evaluate(t, y);
            const double h = 1e-5;
            j.u = g.value;
            j.ut = (cf.evaluate(t + h, y).value - cf.evaluate(t - h, y).value) / (2 * h);
            j.ux[0] = g.dy;
            j.uxx[0] = g.dyy;
            bool c = false;
            CHECK(std::abs(residual_scaled_dual(y, j, m, d, 1e-6, c)) < 1e-6);
        }
}

TEST_CASE("general dual agrees with the scaled closed form after the change of variables") {
    const MarketParams m;
    const double p = 0.5;
    const ClosedFormDual cf(m, kPower);
    // v~(t, y, r) = r^p H(tau) g~(t, y r^{1-p} / H(tau))
    auto vt = [&](double t, double y, double r) {
        const double H = h_factor(m, p, m.T - t);
        return std::pow(r, p) * H * cf.evaluate(t, y * std::pow(r, 1.0 - p) / H).value;
    };
    mc::Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(0.0, 0.4), y = rng.uniform(0.3, 1.0), r = rng.uniform(0.5, 3.0);
        const PdeJet<double> j = fd_jet(vt, t, y, r, 1e-4);
        bool c = false;
        const double res = residual_general_dual(y, r, j, m, 1e-6, c);
        const double scale = std::abs(j.ut) + std::abs(m.alpha * y * j.ux[0]) + std::abs(m.a * r * j.ux[1]) + 1e-3;
        CHECK(std::abs(res) / scale < 1e-5);
    }
}

TEST_CASE("batch sampling") {
    const MarketParams m;
    const PinnProblem pb = make_problem(ProblemKind::GeneralPrimal, m, kPower);
    TrainConfig cfg = small_config(1);
    cfg.collocation = 20000;
    cfg.boundary = 400;
    mc::Rng rng(5);
    const Batches b = sample_batches(pb, cfg, rng);
    CHECK(b.collocation.rows() == 3);
    CHECK(b.collocation.cols() == 20000);
    CHECK(b.terminal.cols() == cfg.terminal);
    CHECK(b.boundary.cols() == 400);
    CHECK(b.collocation.row(0).minCoeff() >= 0.0);
    CHECK(b.collocation.row(0).maxCoeff() < m.T);
    CHECK((b.terminal.row(0).array() == m.T).all());
    for (int k = 0; k < 2; ++k) {
        CHECK(b.collocation.row(1 + k).minCoeff() >= pb.box[k].lo);
        CHECK(b.collocation.row(1 + k).maxCoeff() <= pb.box[k].hi);
        const double mid = 0.5 * (pb.box[k].lo + pb.box[k].hi);
        const double sd = (pb.box[k].hi - pb.box[k].lo) / std::sqrt(12.0 * 20000.0);
        CHECK(std::abs(b.collocation.row(1 + k).mean() - mid) < 3 * sd);
    }
    int on_x = 0, on_r = 0;
    for (Eigen::Index j = 0; j < b.boundary.cols(); ++j) {
        const bool fx = b.boundary(1, j) == pb.face_at[0], fr = b.boundary(2, j) == pb.face_at[1];
        CHECK((fx || fr));
        on_x += fx;
        on_r += fr;
    }
    CHECK(on_x > 100);
    CHECK(on_r > 100);

    mc::Rng again(5);
    CHECK(sample_batches(pb, cfg, again).collocation == b.collocation);

    // the dual problem has no boundary term
    const PinnProblem dual = make_problem(ProblemKind::ScaledDual, m, kPower);
    CHECK(sample_batches(dual, cfg, rng).boundary.cols() == 0);
    const PinnProblem sp = make_problem(ProblemKind::ScaledPrimal, m, kPower);
    const Batches sb = sample_batches(sp, cfg, rng);
    CHECK((sb.boundary.row(1).array() == sp.face_at[0]).all());
    CHECK(sp.boundary(0.1, sb.boundary.col(0).data() + 1) == -0.5);
}

TEST_CASE("boundary values") {
    MarketParams m;
    const PinnProblem gp = make_problem(ProblemKind::GeneralPrimal, m, kPower);
    const double x0[2] = {0.0, 2.0};
    // E[-K R_T^p] for lognormal R
    CHECK(gp.boundary(0.1, x0) == doctest::Approx(-0.5 * std::sqrt(2.0) * std::exp(0.5 * (0.03 - 0.25 * 0.01) * 0.4)));
    const double r0[2] = {1.5, 0.0};
    CHECK(gp.boundary(0.1, r0) == doctest::Approx(std::sqrt(1.5) * std::exp(0.5 * (0.05 + 0.25) * 0.4)));
    const PinnProblem gl = make_problem(ProblemKind::GeneralPrimal, m, UtilitySpec::log_pair(0.5, 0.5));
    // log U2 goes through quadrature; compare with a fine trapezoid
    double ref = 0.0;
    const int n = 200001;
    for (int i = 0; i < n; ++i) {
        const double s = -10.0 + 20.0 * i / (n - 1);
        const double rt = 2.0 * std::exp((m.a - 0.5 * m.b * m.b) * 0.4 + m.b * std::sqrt(0.4) * s);
        ref += normal_pdf(s) * 0.5 * std::log(rt + 1.0) * (20.0 / (n - 1)) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
    }
    CHECK(gl.boundary(0.1, x0) == doctest::Approx(-ref).epsilon(1e-10));
}

TEST_CASE("benchmark expectation") {
    const double r = 1.7, a = 0.03, b = 0.1, tau = 0.5;
    CHECK(benchmark_expectation([](double x) { return std::sqrt(x); }, r, a, b, tau) ==
          doctest::Approx(std::sqrt(r) * std::exp(0.5 * (a - 0.25 * b * b) * tau)).epsilon(1e-13));
    CHECK(benchmark_expectation([](double x) { return std::log(x); }, r, a, b, tau) ==
          doctest::Approx(std::log(r) + (a - 0.5 * b * b) * tau).epsilon(1e-13));
    CHECK(benchmark_expectation([](double x) { return x; }, r, a, b, 0.0) == doctest::Approx(r));
}

TEST_CASE("zero iterations leave the network untouched") {
    const PinnProblem pb = make_problem(ProblemKind::ScaledDual, MarketParams{}, kPower);
    const TrainConfig cfg = small_config(0);
    const nn::Mlp net = make_network(pb, cfg);
    const TrainResult res = pinn_train(pb, net, cfg);
    CHECK(res.net.flatten() == net.flatten());
    CHECK(res.report.iterations_run == 0);
    CHECK(res.report.loss_history.empty());
    CHECK(net.dims() == std::vector<int>{2, 16, 16, 1});
    CHECK_THROWS_AS(pinn_train(pb, nn::init_network({3, 4, 1}, 1), cfg), std::invalid_argument);
}

TEST_CASE("heat equation toy") {
    // u_t + u_xx / 2 = 0 with u(T, x) = x^2 is solved by x^2 + T - t
    PinnProblem pb;
    pb.name = "heat";
    pb.dim = 1;
    pb.horizon = 1.0;
    pb.box[0] = {-1.0, 1.0};
    pb.residual = [](double, const double*, const PdeJet<Jet>& j, bool&) { return Jet(j.ut + 0.5 * j.uxx[0]); };
    pb.terminal = [](const double* X) { return X[0] * X[0]; };
    TrainConfig cfg = small_config(5000);
    cfg.hidden = {32, 32};
    cfg.learning_rate = 2e-3;
    cfg.early_stop = 1e-5;
    const TrainResult res = pinn_train(pb, make_network(pb, cfg), cfg);
    CHECK(res.report.final_terms.residual + res.report.final_terms.terminal < 1e-4);
    // Without lateral conditions the solution is only pinned down close to T.
    Eigen::MatrixXd pts(2, 3);
    pts << 0.95, 0.95, 0.95, -0.5, 0.2, 0.8;
    const nn::NetOutput o = evaluate_field(pb, res.net, pts);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(o.value(j) - (pts(1, j) * pts(1, j) + 1.0 - pts(0, j))) < 0.02);
}

TEST_CASE("non-finite losses surface as divergence") {
    PinnProblem pb = make_problem(ProblemKind::ScaledDual, MarketParams{}, kPower);
    pb.terminal = [](const double*) { return NAN; };
    const TrainConfig cfg = small_config(3);
    CHECK_THROWS_AS(pinn_train(pb, make_network(pb, cfg), cfg), DivergenceError);
}

TEST_CASE("training reduces the loss and is reproducible") {
    MarketParams m;
    m.theta = 0.25;
    const PinnProblem pb = make_problem(ProblemKind::ScaledDual, m, kPower);
    const TrainConfig cfg = small_config(400);
    const TrainResult a = pinn_train(pb, make_network(pb, cfg), cfg);
    const TrainResult b = pinn_train(pb, make_network(pb, cfg), cfg);
    CHECK(a.report.loss_history == b.report.loss_history);
    const auto& h = a.report.loss_history;
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 50; ++i) {
        head += h[static_cast<std::size_t>(i)];
        tail += h[h.size() - 1 - static_cast<std::size_t>(i)];
    }
    CHECK(tail < 0.5 * head);
}

TEST_CASE("output maps") {
    MarketParams m;
    m.theta = 0.25;
    const double p = 0.5, H = h_factor(m, p, m.T);
    const PinnProblem sp = make_problem(ProblemKind::ScaledPrimal, m, kPower);
    const nn::Mlp net = make_network(sp, small_config(0));
    const ValueGrid g = outputs_primal(sp, net, m, p, 2.0, 7);
    CHECK(g.size() == 7);
    CHECK(g.x.front() == doctest::Approx(0.1));
    CHECK(g.x.back() == doctest::Approx(10.0));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.r[i] == 2.0);

    // v = r^p H g(0, x / r)
    const PointValue pv = value_at(sp, net, m, p, 1.0, 4.0);
    Eigen::MatrixXd pt(2, 1);
    pt << 0.0, 0.25;
    CHECK(pv.v == doctest::Approx(2.0 * H * evaluate_field(sp, net, pt).value(0)).epsilon(1e-12));
    CHECK(pv.state == 0.25);
    const ValueGrid at = outputs_at(sp, net, m, p, {{1.0, 4.0}, {2.0, 1.0}});
    CHECK(at.v[0] == doctest::Approx(pv.v));
    CHECK(at.r[1] == 1.0);

    // the general primal evaluates the network at (0, x, r) directly
    const PinnProblem gp = make_problem(ProblemKind::GeneralPrimal, m, kPower);
    const nn::Mlp gnet = make_network(gp, small_config(0));
    Eigen::MatrixXd gpt(3, 1);
    gpt << 0.0, 1.5, 0.7;
    CHECK(value_at(gp, gnet, m, p, 1.5, 0.7).v == doctest::Approx(evaluate_field(gp, gnet, gpt).value(0)).epsilon(1e-12));
}
