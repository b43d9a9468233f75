// Monte Carlo machinery: seeded streams, correlated Brownian draws, exact lognormal
// terminal values and mean/standard-error estimation.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "sshape/model.hpp"

namespace sshape::mc {

/// SplitMix64 finaliser; (seed, stream) pairs map to decorrelated engine seeds.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(stream_seed(seed, stream)) {}

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
    void fill_normal(Eigen::Ref<Eigen::MatrixXd> out);
    void fill_uniform(Eigen::Ref<Eigen::MatrixXd> out, double lo, double hi);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

enum class Measure { P, Q };

struct PathBatch {
    std::string process;
    Eigen::VectorXd terminal;
    Measure measure = Measure::P;
    std::uint64_t seed = 0;
    int steps = 1;
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Standard-normal increments (unit variance per step); dWR = rho dW + sqrt(1 - rho^2) dW_perp.
struct Increments {
    Eigen::MatrixXd dW;   // n x steps
    Eigen::MatrixXd dWR;  // n x steps
};

Increments correlated_increments(int n, int steps, double rho, std::uint64_t seed);

/// start * exp((drift - vol^2 / 2) T + vol W_T), elementwise in W_T.
Eigen::VectorXd draw_terminal_lognormal(double start, double drift, double vol, double T,
                                        const Eigen::Ref<const Eigen::VectorXd>& w_terminal);

/// Deterministic pairwise summation.
double pairwise_sum(const double* data, std::size_t n);

Estimate estimate(const Eigen::Ref<const Eigen::VectorXd>& samples);
Estimate estimate_value(const std::function<double(double)>& payoff, const PathBatch& batch);

/// Terminal state-price density zeta_T = exp(-(alpha + theta^2/2) T - theta W_T).
Eigen::VectorXd state_price_density(const MarketParams& params,
                                    const Eigen::Ref<const Eigen::VectorXd>& w_terminal);

struct GirsanovReport {
    Estimate density;          // E[F_T], should be 1
    Estimate q_mean;           // E^Q[W~_T], should be 0
    Estimate q_second_moment;  // E^Q[W~_T^2], should be T
    Estimate discounted_zeta;  // E[zeta_T e^{alpha T}], should be 1
};

/// Checks the measure change F_T = exp(p b W^R_T - p^2 b^2 T / 2) and the density zeta.
GirsanovReport girsanov_check(const MarketParams& params, double p, int n, std::uint64_t seed);

}  // namespace sshape::mc
