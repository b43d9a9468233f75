#include "sshape/smp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace sshape::smp {

namespace {

std::vector<int> with_io(int in, const std::vector<int>& hidden) {
    std::vector<int> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return dims;
}

}  // namespace

void SmpConfig::validate() const {
    if (batch <= 0 || steps <= 0 || iterations < 0 || eval_paths <= 0)
        throw std::invalid_argument("SmpConfig: sizes must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("SmpConfig: learning rate must be > 0");
    if (!(r0 >= 0.0)) throw std::invalid_argument("SmpConfig: r0 must be >= 0");
    if (!(x_lo > 0.0 && x_hi > x_lo)) throw std::invalid_argument("SmpConfig: bad wealth range");
    if (hidden.empty()) throw std::invalid_argument("SmpConfig: need a hidden layer");
}

SmpBatch sample_batch(const SmpConfig& config, const MarketParams& m, mc::Rng& rng, int paths) {
    const int M = paths > 0 ? paths : config.batch;
    const int N = config.steps;
    const double dt = m.T / N;
    SmpBatch b;
    b.x0.resize(M);
    for (int j = 0; j < M; ++j) b.x0(j) = rng.uniform(config.x_lo, config.x_hi);
    b.xi.resize(M, N);
    rng.fill_normal(b.xi);
    b.w_T = std::sqrt(dt) * b.xi.rowwise().sum();
    Eigen::VectorXd perp(M);
    rng.fill_normal(perp);
    const Eigen::VectorXd wR = m.rho * b.w_T + std::sqrt(std::max(0.0, 1.0 - m.rho * m.rho) * m.T) * perp;
    b.r_T = mc::draw_terminal_lognormal(config.r0, m.a, m.b, m.T, wR);
    return b;
}

Nets init_nets(const SmpConfig& config) {
    return {nn::Mlp::init(with_io(2, config.hidden), config.seed),
            nn::Mlp::init(with_io(1, config.hidden), config.seed + 0x51)};
}

ForwardResult simulate_forward(const nn::Mlp& control, const Eigen::VectorXd& x0, const Eigen::MatrixXd& xi,
                               const MarketParams& m, bool record) {
    const Eigen::Index M = x0.size(), N = xi.cols();
    if (xi.rows() != M) throw std::invalid_argument("simulate_forward: shock rows must match paths");
    const double dt = m.T / static_cast<double>(N), sdt = std::sqrt(dt);
    ForwardResult out;
    out.absorbed.assign(static_cast<std::size_t>(M), 0);
    if (record) {
        out.wealth.resize(M, N + 1);
        out.control.resize(M, N);
        out.control_dx.resize(M, N);
    }
    Eigen::VectorXd x = x0;
    if (record) out.wealth.col(0) = x;
    Eigen::MatrixXd in(2, M);
    nn::DerivRequest req;
    if (record) req.first = {1};
    for (Eigen::Index i = 0; i < N; ++i) {
        in.row(0).setConstant(static_cast<double>(i) / static_cast<double>(N));
        in.row(1) = x.transpose();
        const nn::NetOutput o = control.forward(in, req);
        for (Eigen::Index j = 0; j < M; ++j) {
            double Pi = x(j) * o.value(j);
            if (out.absorbed[j]) Pi = 0.0;
            if (record) {
                out.control(j, i) = Pi;
                out.control_dx(j, i) = out.absorbed[j] ? 0.0 : o.value(j) + x(j) * o.first(0, j);
            }
            if (out.absorbed[j]) continue;
            double nx = x(j) + (m.alpha * x(j) + Pi * m.theta * m.sigma) * dt + Pi * m.sigma * sdt * xi(j, i);
            if (!(nx > 0.0)) {
                nx = 0.0;
                out.absorbed[j] = 1;
            }
            x(j) = nx;
        }
        if (!x.allFinite()) throw DivergenceError("simulate_forward: non-finite wealth");
        if (record) out.wealth.col(i + 1) = x;
    }
    out.terminal = x;
    return out;
}

SmpLoss smp_loss(const Nets& nets, const SmpBatch& batch, const MarketParams& m, const ConcaveEnvelope& env,
                 nn::Gradient* grad_control, nn::Gradient* grad_adjoint) {
    const Eigen::Index M = batch.x0.size(), N = batch.xi.cols();
    const double dt = m.T / static_cast<double>(N), sdt = std::sqrt(dt);
    const ForwardResult fwd = simulate_forward(nets.control, batch.x0, batch.xi, m, true);

    nn::ForwardTape ptape;
    const nn::NetOutput p0 = nets.adjoint.forward(batch.x0.transpose(), nn::DerivRequest::value_only(), &ptape);

    SmpLoss L;
    Eigen::VectorXd xbar(M);   // d loss / d X_N
    nn::NetOutput pbar = nn::NetOutput::zeros_like(p0);
    const double inv = 1.0 / static_cast<double>(M);
    for (Eigen::Index j = 0; j < M; ++j) {
        const double xN = fwd.terminal(j), rT = batch.r_T(j);
        const double disc = std::exp(-(m.alpha + 0.5 * m.theta * m.theta) * m.T - m.theta * batch.w_T(j));
        const double ux = env.u_bar_x(xN, rT);
        double e = 0.0, uxx = 0.0;
        if (std::isfinite(ux)) {
            e = disc * p0.value(j) + ux;
            uxx = env.u_bar_xx(xN, rT);
        }
        const double u = env.u_bar(xN, rT);
        L.adjoint_term += e * e;
        L.gains_term += u;
        L.absorbed += fwd.absorbed[j];
        xbar(j) = fwd.absorbed[j] ? 0.0 : inv * (2.0 * e * uxx - ux);
        pbar.value(j) = inv * 2.0 * e * disc;
    }
    L.adjoint_term *= inv;
    L.gains_term *= inv;
    L.total = L.adjoint_term - L.gains_term;
    if (!std::isfinite(L.total)) throw DivergenceError("smp_loss: non-finite loss");

    if (grad_adjoint) nets.adjoint.backward(ptape, pbar, *grad_adjoint);
    if (grad_control) {
        // Reverse sweep through the Euler steps; absorbed steps carry no sensitivity.
        Eigen::MatrixXd pts(2, M * N);
        nn::NetOutput adj;
        adj.value.resize(M * N);
        adj.first.resize(0, M * N);
        adj.second.resize(0, M * N);
        Eigen::VectorXd xb = xbar;
        for (Eigen::Index i = N - 1; i >= 0; --i) {
            for (Eigen::Index j = 0; j < M; ++j) {
                const Eigen::Index c = i * M + j;
                pts(0, c) = static_cast<double>(i) / static_cast<double>(N);
                pts(1, c) = fwd.wealth(j, i);
                // zero sensitivity if the path was dead at i or got absorbed by this step
                const bool live = fwd.wealth(j, i) > 0.0 && fwd.wealth(j, i + 1) > 0.0;
                if (!live) {
                    adj.value(c) = 0.0;
                    xb(j) = 0.0;
                    continue;
                }
                const double pib = xb(j) * (m.theta * m.sigma * dt + m.sigma * sdt * batch.xi(j, i));
                adj.value(c) = pib * fwd.wealth(j, i);
                xb(j) = xb(j) * (1.0 + m.alpha * dt) + pib * fwd.control_dx(j, i);
            }
        }
        nn::ForwardTape tape;
        nets.control.forward(pts, nn::DerivRequest::value_only(), &tape);
        nets.control.backward(tape, adj, *grad_control);
    }
    return L;
}

SmpResult smp_train(const SmpConfig& config, const MarketParams& market, const UtilitySpec& utility) {
    config.validate();
    market.validate();
    const auto start = std::chrono::steady_clock::now();
    const ConcaveEnvelope env(utility);
    SmpResult res{init_nets(config), {}};
    mc::Rng rng(config.seed, 0x5a1);
    nn::OptimState oc = nn::make_optimizer(res.nets.control, nn::OptimizerKind::Adam, config.learning_rate);
    nn::OptimState oa = nn::make_optimizer(res.nets.adjoint, nn::OptimizerKind::Adam, config.learning_rate);
    nn::Gradient gc = res.nets.control.zero_gradient(), ga = res.nets.adjoint.zero_gradient();
    for (int it = 0; it < config.iterations; ++it) {
        const SmpBatch batch = sample_batch(config, market, rng);
        gc.set_zero();
        ga.set_zero();
        const SmpLoss L = smp_loss(res.nets, batch, market, env, &gc, &ga);
        nn::opt_step(oc, res.nets.control, gc);
        nn::opt_step(oa, res.nets.adjoint, ga);
        res.report.loss_history.push_back(L.total);
        res.report.adjoint_history.push_back(L.adjoint_term);
        res.report.gains_history.push_back(L.gains_term);
        res.report.iterations_run = it + 1;
        if (config.log_every > 0 && it % config.log_every == 0)
            std::cerr << "smp it " << it << " loss " << L.total << " (adjoint " << L.adjoint_term << ", gains "
                      << L.gains_term << ")\n";
        if (L.total < config.early_stop) break;
    }
    res.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

ValueGrid smp_evaluate(const nn::Mlp& control, const MarketParams& m, const UtilitySpec& utility, double r0,
                       const std::vector<double>& xs, int paths, int steps, std::uint64_t seed) {
    if (paths < 2 || steps <= 0) throw std::invalid_argument("smp_evaluate: need paths >= 2 and steps > 0");
    const ConcaveEnvelope env(utility);
    const int chunk = std::min(paths, 20000);
    ValueGrid grid;
    grid.method = "smp";
    grid.seed = seed;
    grid.se.emplace();
    SmpConfig cfg;
    cfg.steps = steps;
    cfg.r0 = r0;
    for (double x : xs) {
        // same seed for every x: common random numbers
        mc::Rng rng(seed, 0xe7a1);
        Eigen::VectorXd payoff(paths);
        for (int done = 0; done < paths; done += chunk) {
            const int n = std::min(chunk, paths - done);
            SmpBatch b = sample_batch(cfg, m, rng, n);
            b.x0.setConstant(x);
            const ForwardResult f = simulate_forward(control, b.x0, b.xi, m, false);
            for (int j = 0; j < n; ++j) payoff(done + j) = env.u_bar(f.terminal(j), b.r_T(j));
        }
        const mc::Estimate est = mc::estimate(payoff);
        Eigen::MatrixXd in(2, 1);
        in << 0.0, x;
        grid.push(x, r0, est.mean, control.evaluate(in)(0));
        grid.se->push_back(est.se);
    }
    return grid;
}

AdjointCheck adjoint_euler_check(const MarketParams& m, int steps, int paths, std::uint64_t seed) {
    mc::Rng rng(seed, 0xad7);
    const double dt = m.T / steps, sdt = std::sqrt(dt);
    AdjointCheck c;
    for (int j = 0; j < paths; ++j) {
        double p = 1.0, w = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double z = rng.normal();
            p *= 1.0 - m.alpha * dt - m.theta * sdt * z;
            w += sdt * z;
        }
        const double exact = std::exp(-(m.alpha + 0.5 * m.theta * m.theta) * m.T - m.theta * w);
        const double rel = std::abs(p - exact) / exact;
        c.max_rel_error = std::max(c.max_rel_error, rel);
        c.mean_rel_error += rel / paths;
    }
    return c;
}

}  // namespace sshape::smp
