// Physics-informed training of the primal, concavified and dual HJB equations.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include "sshape/mc.hpp"
#include "sshape/model.hpp"
#include "sshape/nn.hpp"
#include "sshape/utility.hpp"
#include "sshape/value_grid.hpp"

namespace sshape::pinn {

/// Value and derivatives of a candidate solution at one point, in physical coordinates.
/// Second derivatives are ordered (0,0), (0,1), (1,1).
template <typename Scalar>
struct PdeJet {
    Scalar u{};
    Scalar ut{};
    std::array<Scalar, 2> ux{};
    std::array<Scalar, 3> uxx{};
};

/// Forward-mode scalar over the seven jet channels u, ut, ux0, ux1, uxx00, uxx01, uxx11.
using Jet = Eigen::AutoDiffScalar<Eigen::Matrix<double, 7, 1>>;

template <typename Scalar>
Scalar clamp_at_most(const Scalar& v, double bound, bool& clamped) {
    if (v > bound) {
        clamped = true;
        return Scalar(bound);
    }
    return v;
}

template <typename Scalar>
Scalar clamp_at_least(const Scalar& v, double bound, bool& clamped) {
    if (v < bound) {
        clamped = true;
        return Scalar(bound);
    }
    return v;
}

/// Reduced primal HJB with the optimal proportion substituted:
/// g_t + alpha0 z g_z + b^2 z^2 g_zz / 2 - (g_z theta_bar - rho b z g_zz)^2 / (2 g_zz).
/// The denominator is clamped to <= -delta.
template <typename Scalar>
Scalar residual_scaled_primal(double z, const PdeJet<Scalar>& j, const MarketParams& m, const DerivedParams& d,
                              double delta, bool& clamped) {
    const Scalar& gz = j.ux[0];
    const Scalar& gzz = j.uxx[0];
    const Scalar den = clamp_at_most(gzz, -delta, clamped);
    const Scalar num = gz * d.theta_bar - m.rho * m.b * z * gzz;
    return j.ut + d.alpha0 * z * gz + 0.5 * m.b * m.b * z * z * gzz - num * num / (2.0 * den);
}

/// Reduced dual HJB with the optimal dual control substituted:
/// g_t - alpha_bar y g_y + theta_bar^2 y^2 g_yy / 2 - (1 - rho^2) b^2 g_y^2 / (2 g_yy),
/// with g_yy clamped to >= delta in the denominator.
template <typename Scalar>
Scalar residual_scaled_dual(double y, const PdeJet<Scalar>& j, const MarketParams& m, const DerivedParams& d,
                            double delta, bool& clamped) {
    const Scalar& gy = j.ux[0];
    const Scalar& gyy = j.uxx[0];
    Scalar res = j.ut - d.alpha_bar * y * gy + 0.5 * d.theta_bar * d.theta_bar * y * y * gyy;
    const double incomplete = 1.0 - m.rho * m.rho;
    if (incomplete > 0.0) {
        const Scalar den = clamp_at_least(gyy, delta, clamped);
        res -= 0.5 * incomplete * m.b * m.b * gy * gy / den;
    }
    return res;
}

/// Two-factor primal HJB in (x, r):
/// v_t + alpha x v_x + a r v_r + b^2 r^2 v_rr / 2 - (theta v_x + rho b r v_xr)^2 / (2 v_xx).
template <typename Scalar>
Scalar residual_general_primal(double x, double r, const PdeJet<Scalar>& j, const MarketParams& m, double delta,
                               bool& clamped) {
    const Scalar& vx = j.ux[0];
    const Scalar& vr = j.ux[1];
    const Scalar& vxx = j.uxx[0];
    const Scalar& vxr = j.uxx[1];
    const Scalar& vrr = j.uxx[2];
    const Scalar den = clamp_at_most(vxx, -delta, clamped);
    const Scalar num = m.theta * vx + m.rho * m.b * r * vxr;
    return j.ut + m.alpha * x * vx + m.a * r * vr + 0.5 * m.b * m.b * r * r * vrr - num * num / (2.0 * den);
}

/// Two-factor dual HJB in (y, r):
/// v_t - alpha y v_y + theta^2 y^2 v_yy / 2 + a r v_r + b^2 r^2 v_rr / 2 - rho theta b r y v_yr
///     - (1 - rho^2) (b r v_yr)^2 / (2 v_yy).
template <typename Scalar>
Scalar residual_general_dual(double y, double r, const PdeJet<Scalar>& j, const MarketParams& m, double delta,
                             bool& clamped) {
    const Scalar& vy = j.ux[0];
    const Scalar& vr = j.ux[1];
    const Scalar& vyy = j.uxx[0];
    const Scalar& vyr = j.uxx[1];
    const Scalar& vrr = j.uxx[2];
    Scalar res = j.ut - m.alpha * y * vy + 0.5 * m.theta * m.theta * y * y * vyy + m.a * r * vr +
                 0.5 * m.b * m.b * r * r * vrr - m.rho * m.theta * m.b * r * y * vyr;
    const double incomplete = 1.0 - m.rho * m.rho;
    if (incomplete > 0.0) {
        const Scalar den = clamp_at_least(vyy, delta, clamped);
        const Scalar cross = m.b * r * vyr;
        res -= 0.5 * incomplete * cross * cross / den;
    }
    return res;
}

enum class ProblemKind {
    ScaledPrimal,             // concavified terminal U_bar(z, 1)
    ScaledPrimalNonConcave,   // terminal U(z - 1)
    ScaledDual,
    GeneralPrimal,            // concavified terminal U_bar(x, r)
    GeneralPrimalNonConcave,  // terminal U(x - r)
    GeneralDual,
};

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);
bool is_scaled(ProblemKind kind);
bool is_dual(ProblemKind kind);

struct Interval {
    double lo = 0.05;
    double hi = 5.0;
};

struct PinnProblem {
    using Residual = std::function<Jet(double t, const double* X, const PdeJet<Jet>& jet, bool& clamped)>;
    using Terminal = std::function<double(const double* X)>;
    using Boundary = std::function<double(double t, const double* X)>;

    std::string name;
    ProblemKind kind = ProblemKind::ScaledPrimal;
    int dim = 1;
    double horizon = 1.0;
    std::array<Interval, 2> box{};
    Residual residual;
    Terminal terminal;
    Boundary boundary;
    std::array<bool, 2> boundary_faces{false, false};  // coordinates whose lower face carries H
    // Where each lower face sits. Primal faces are pinned at 0, where H is exact, rather than at box.lo.
    std::array<double, 2> face_at{0.0, 0.0};
    std::array<double, 3> weights{1.0, 1.0, 1.0};      // residual, terminal, boundary

    [[nodiscard]] bool has_boundary() const { return static_cast<bool>(boundary) && (boundary_faces[0] || boundary_faces[1]); }
};

/// Sampling boxes: scaled state, dual state and benchmark.
struct Domains {
    Interval state{0.05, 5.0};
    Interval dual{0.25, 1.0};
    Interval benchmark{0.05, 5.0};
};

/// Builds one of the six problems. Scaled problems require a scalable utility pair.
PinnProblem make_problem(ProblemKind kind, const MarketParams& market, const UtilitySpec& utility,
                         const Domains& domains = {}, double clamp_delta = 1e-6);

struct TrainConfig {
    int collocation = 1000;
    int terminal = 100;
    int boundary = 100;
    int iterations = 20000;
    double learning_rate = 1e-3;
    double early_stop = 5e-5;
    std::uint64_t seed = 1;
    nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
    bool resample = true;  // fresh batches every step
    std::vector<int> hidden{50, 50};
    int log_every = 0;  // progress line to stderr every n steps; 0 = silent

    void validate() const;
};

struct Batches {
    Eigen::MatrixXd collocation;  // (1 + d) x Mc, rows (t, X)
    Eigen::MatrixXd terminal;     // (1 + d) x Mb, t = T
    Eigen::MatrixXd boundary;     // (1 + d) x Ms, one coordinate on its lower face
};

Batches sample_batches(const PinnProblem& problem, const TrainConfig& config, mc::Rng& rng);

struct LossTerms {
    double residual = 0.0;
    double terminal = 0.0;
    double boundary = 0.0;
    long clamps = 0;
    double worst_residual = 0.0;
    std::vector<double> worst_point;

    [[nodiscard]] double total(const std::array<double, 3>& w) const {
        return w[0] * residual + w[1] * terminal + w[2] * boundary;
    }
};

/// Loss on one set of batches; accumulates the parameter gradient when grad is given.
LossTerms evaluate_loss(const PinnProblem& problem, const nn::Mlp& net, const Batches& batches,
                        nn::Gradient* grad = nullptr);

struct TrainReport {
    std::string problem;
    std::vector<double> loss_history;
    LossTerms final_terms;
    int iterations_run = 0;
    bool early_stopped = false;
    long clamp_activations = 0;
    double seconds = 0.0;
};

struct TrainResult {
    nn::Mlp net;
    TrainReport report;
};

/// Network input layout (t / T, X...) with one hidden stack from the config.
nn::Mlp make_network(const PinnProblem& problem, const TrainConfig& config);

TrainResult pinn_train(const PinnProblem& problem, nn::Mlp net, const TrainConfig& config);

/// Solution candidate and derivatives at physical points; columns of points are (t, X).
nn::NetOutput evaluate_field(const PinnProblem& problem, const nn::Mlp& net, const Eigen::MatrixXd& points);
PdeJet<double> jet_at(const PinnProblem& problem, const nn::Mlp& net, double t, double x0, double x1 = 0.0);

struct PointValue {
    double v = 0.0;
    double pi = 0.0;
    double state = 0.0;  // scaled z or dual y used for the evaluation
};

/// Time-zero value and proportion at unscaled (x, r) for any of the six problems.
PointValue value_at(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& market, double p, double x,
                    double r);

/// Native output grids: B points over the sampling range (scaled z or y), mapped to (x, v, pi) at r0.
ValueGrid outputs_primal(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& market, double p,
                         double r0, int points);
ValueGrid outputs_dual(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& market, double p,
                       double r0, int points);

/// Value grid at explicit (x, r) abscissae.
ValueGrid outputs_at(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& market, double p,
                     const std::vector<std::pair<double, double>>& points);

/// E[g(R_T) | R_t = r] for geometric R by Gauss-Hermite quadrature.
double benchmark_expectation(const std::function<double(double)>& g, double r, double a, double b, double tau,
                             int nodes = 48);

}  // namespace sshape::pinn
