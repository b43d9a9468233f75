#include "sshape/mc.hpp"

#include <cmath>

namespace sshape::mc {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

void Rng::fill_normal(Eigen::Ref<Eigen::MatrixXd> out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal_(engine_);
}

void Rng::fill_uniform(Eigen::Ref<Eigen::MatrixXd> out, double lo, double hi) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = lo + (hi - lo) * uniform_(engine_);
}

Increments correlated_increments(int n, int steps, double rho, std::uint64_t seed) {
    if (std::abs(rho) > 1.0) throw std::invalid_argument("correlated_increments: |rho| must be <= 1");
    Increments inc;
    inc.dW.resize(n, steps);
    Rng main(seed, 0);
    main.fill_normal(inc.dW);
    if (std::abs(rho) == 1.0) {
        inc.dWR = rho * inc.dW;
        return inc;
    }
    Eigen::MatrixXd perp(n, steps);
    Rng other(seed, 1);
    other.fill_normal(perp);
    inc.dWR = rho * inc.dW + std::sqrt(1.0 - rho * rho) * perp;
    return inc;
}

Eigen::VectorXd draw_terminal_lognormal(double start, double drift, double vol, double T,
                                        const Eigen::Ref<const Eigen::VectorXd>& w_terminal) {
    if (vol < 0.0) throw std::invalid_argument("draw_terminal_lognormal: vol must be >= 0");
    return (start * ((drift - 0.5 * vol * vol) * T + vol * w_terminal.array()).exp()).matrix();
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

Estimate estimate(const Eigen::Ref<const Eigen::VectorXd>& samples) {
    Estimate e;
    e.n = static_cast<std::size_t>(samples.size());
    if (e.n == 0) return e;
    const Eigen::VectorXd copy = samples;
    e.mean = pairwise_sum(copy.data(), e.n) / static_cast<double>(e.n);
    if (e.n > 1) {
        const Eigen::VectorXd dev2 = (copy.array() - e.mean).square().matrix();
        const double var = pairwise_sum(dev2.data(), e.n) / static_cast<double>(e.n - 1);
        e.se = std::sqrt(var / static_cast<double>(e.n));
    }
    return e;
}

Estimate estimate_value(const std::function<double(double)>& payoff, const PathBatch& batch) {
    Eigen::VectorXd values(batch.terminal.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = payoff(batch.terminal[i]);
    return estimate(values);
}

Eigen::VectorXd state_price_density(const MarketParams& params,
                                    const Eigen::Ref<const Eigen::VectorXd>& w_terminal) {
    const double th = params.theta;
    return (-(params.alpha + 0.5 * th * th) * params.T - th * w_terminal.array()).exp().matrix();
}

GirsanovReport girsanov_check(const MarketParams& params, double p, int n, std::uint64_t seed) {
    const double T = params.T, b = params.b, rho = params.rho;
    Increments inc = correlated_increments(n, 1, rho, seed);
    const Eigen::VectorXd w = std::sqrt(T) * inc.dW.col(0);
    const Eigen::VectorXd wr = std::sqrt(T) * inc.dWR.col(0);

    const Eigen::ArrayXd density = (p * b * wr.array() - 0.5 * p * p * b * b * T).exp();
    const Eigen::ArrayXd w_tilde = w.array() - rho * p * b * T;

    GirsanovReport report;
    report.density = estimate(density.matrix());
    report.q_mean = estimate((density * w_tilde).matrix());
    report.q_second_moment = estimate((density * w_tilde.square()).matrix());
    const Eigen::VectorXd zeta = state_price_density(params, w);
    report.discounted_zeta = estimate((zeta.array() * std::exp(params.alpha * T)).matrix());
    return report;
}

}  // namespace sshape::mc
