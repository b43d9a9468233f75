// Deep stochastic-maximum-principle solver: a control network, an initial-adjoint
// network, Euler wealth paths and a Monte Carlo policy evaluation.
//
// The control network returns the proportion q(t, x) and the amount invested is
// Pi = x q. Pi then vanishes at zero wealth, so a path that barely survives a step
// behaves like one that was absorbed and terminal wealth stays continuous in the
// parameters. With Pi as the raw output, near-ruined paths kept their full position,
// and the pathwise gradient never saw the ruin probability it was raising.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sshape/mc.hpp"
#include "sshape/model.hpp"
#include "sshape/nn.hpp"
#include "sshape/utility.hpp"
#include "sshape/value_grid.hpp"

namespace sshape::smp {

struct SmpConfig {
    int batch = 500;
    int steps = 100;
    int iterations = 1000;
    double learning_rate = 0.01;
    double r0 = 1.0;  // fixed benchmark start; 0 gives the plain Merton problem
    double x_lo = 0.05;
    double x_hi = 5.0;
    int eval_paths = 200000;
    double early_stop = -std::numeric_limits<double>::infinity();  // the loss can be negative; off by default
    std::uint64_t seed = 1;
    std::vector<int> hidden{50, 50};
    int log_every = 0;

    void validate() const;
};

/// One training batch: start wealth, standard-normal step shocks, W_T and R_T.
struct SmpBatch {
    Eigen::VectorXd x0;     // M
    Eigen::MatrixXd xi;     // M x N
    Eigen::VectorXd w_T;    // M, sqrt(dt) * row sums of xi
    Eigen::VectorXd r_T;    // M
};

SmpBatch sample_batch(const SmpConfig& config, const MarketParams& market, mc::Rng& rng, int paths = -1);

struct Nets {
    nn::Mlp control;  // (t / T, x) -> proportion q; Pi = x q
    nn::Mlp adjoint;  // x0 -> initial adjoint p_0
};

Nets init_nets(const SmpConfig& config);

struct ForwardResult {
    Eigen::VectorXd terminal;           // X_N
    Eigen::MatrixXd wealth;             // M x (N + 1), when recorded
    Eigen::MatrixXd control;            // M x N
    Eigen::MatrixXd control_dx;         // M x N
    std::vector<std::uint8_t> absorbed;  // per path
};

/// X_{i+1} = X_i + (alpha X_i + Pi theta sigma) dt + Pi sigma sqrt(dt) xi, absorbed at 0.
ForwardResult simulate_forward(const nn::Mlp& control, const Eigen::VectorXd& x0, const Eigen::MatrixXd& xi,
                               const MarketParams& market, bool record = true);

struct SmpLoss {
    double total = 0.0;
    double adjoint_term = 0.0;  // mean |e^{-(alpha + theta^2/2) T - theta W_T} p(X_0) + U_bar_x|^2
    double gains_term = 0.0;    // mean U_bar(X_N, R_T)
    long absorbed = 0;
};

/// Loss on a batch; when gradients are given they receive d loss / d parameters.
SmpLoss smp_loss(const Nets& nets, const SmpBatch& batch, const MarketParams& market, const ConcaveEnvelope& envelope,
                 nn::Gradient* grad_control = nullptr, nn::Gradient* grad_adjoint = nullptr);

struct SmpReport {
    std::vector<double> loss_history;
    std::vector<double> adjoint_history;
    std::vector<double> gains_history;
    int iterations_run = 0;
    double seconds = 0.0;
};

struct SmpResult {
    Nets nets;
    SmpReport report;
};

SmpResult smp_train(const SmpConfig& config, const MarketParams& market, const UtilitySpec& utility);

/// v(x) = mean U_bar(X_T, R_T) over fresh paths with common random numbers across x;
/// reports standard errors. Pi column is the control at t = 0.
ValueGrid smp_evaluate(const nn::Mlp& control, const MarketParams& market, const UtilitySpec& utility, double r0,
                       const std::vector<double>& xs, int paths, int steps, std::uint64_t seed);

struct AdjointCheck {
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
};

/// Euler p_{i+1} = p_i (1 - alpha dt - theta sqrt(dt) xi) against p_0 e^{-(alpha + theta^2/2) T - theta W_T}.
AdjointCheck adjoint_euler_check(const MarketParams& market, int steps, int paths, std::uint64_t seed);

}  // namespace sshape::smp
