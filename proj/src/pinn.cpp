#include "sshape/pinn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace sshape::pinn {

namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;

Jet seeded(double v, int channel) { return Jet(v, Vec7::Unit(channel)); }

// Gauss-Hermite nodes/weights for weight exp(-x^2), via the Jacobi matrix eigenproblem.
const std::pair<Eigen::VectorXd, Eigen::VectorXd>& hermite_rule(int n) {
    static std::mutex mu;
    static std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(0.5 * i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Eigen::VectorXd w = std::sqrt(M_PI) * es.eigenvectors().row(0).transpose().array().square();
    return cache.emplace(n, std::make_pair(es.eigenvalues(), w)).first->second;
}

nn::DerivRequest field_request(int dim) {
    nn::DerivRequest req;
    if (dim == 1) {
        req.first = {0, 1};
        req.second = {{1, 1}};
    } else {
        req.first = {0, 1, 2};
        req.second = {{1, 1}, {1, 2}, {2, 2}};
    }
    return req;
}

Eigen::MatrixXd network_inputs(const PinnProblem& problem, const Eigen::MatrixXd& points) {
    Eigen::MatrixXd in = points;
    in.row(0) /= problem.horizon;
    return in;
}

PdeJet<Jet> make_jet(const nn::NetOutput& out, Eigen::Index j, int dim, double horizon) {
    PdeJet<Jet> jet;
    jet.u = seeded(out.value(j), 0);
    jet.ut = seeded(out.first(0, j) / horizon, 1);
    jet.ux[0] = seeded(out.first(1, j), 2);
    jet.uxx[0] = seeded(out.second(0, j), 4);
    if (dim == 2) {
        jet.ux[1] = seeded(out.first(2, j), 3);
        jet.uxx[1] = seeded(out.second(1, j), 5);
        jet.uxx[2] = seeded(out.second(2, j), 6);
    } else {
        jet.ux[1] = Jet(0.0);
        jet.uxx[1] = Jet(0.0);
        jet.uxx[2] = Jet(0.0);
    }
    return jet;
}

double expected_neg_u2(const UtilitySpec& u, const MarketParams& m, double r, double tau) {
    if (const auto* pw = std::get_if<PowerUtility>(&u.u2))
        return -pw->coef * std::pow(r, pw->p) * std::exp(pw->p * (m.a + 0.5 * m.b * m.b * (pw->p - 1.0)) * tau);
    return -benchmark_expectation([&u](double rt) { return u.u2_value(rt); }, r, m.a, m.b, tau);
}

}  // namespace

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::ScaledPrimal: return "pinn-scaled-primal";
        case ProblemKind::ScaledPrimalNonConcave: return "pinn-scaled-primal-nonconcave";
        case ProblemKind::ScaledDual: return "pinn-scaled-dual";
        case ProblemKind::GeneralPrimal: return "pinn-general-primal";
        case ProblemKind::GeneralPrimalNonConcave: return "pinn-general-primal-nonconcave";
        case ProblemKind::GeneralDual: return "pinn-general-dual";
    }
    return "unknown";
}

ProblemKind problem_kind_from_string(const std::string& name) {
    for (auto k : {ProblemKind::ScaledPrimal, ProblemKind::ScaledPrimalNonConcave, ProblemKind::ScaledDual,
                   ProblemKind::GeneralPrimal, ProblemKind::GeneralPrimalNonConcave, ProblemKind::GeneralDual})
        if (name == to_string(k) || "pinn-" + name == to_string(k)) return k;
    throw std::invalid_argument("unknown solver '" + name + "'");
}

bool is_scaled(ProblemKind kind) {
    return kind == ProblemKind::ScaledPrimal || kind == ProblemKind::ScaledPrimalNonConcave ||
           kind == ProblemKind::ScaledDual;
}

bool is_dual(ProblemKind kind) { return kind == ProblemKind::ScaledDual || kind == ProblemKind::GeneralDual; }

double benchmark_expectation(const std::function<double(double)>& g, double r, double a, double b, double tau,
                             int nodes) {
    if (tau <= 0.0 || b == 0.0) return g(r * std::exp(a * std::max(tau, 0.0)));
    const auto& [x, w] = hermite_rule(nodes);
    const double drift = (a - 0.5 * b * b) * tau, scale = b * std::sqrt(2.0 * tau);
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i) acc += w(i) * g(r * std::exp(drift + scale * x(i)));
    return acc / std::sqrt(M_PI);
}

PinnProblem make_problem(ProblemKind kind, const MarketParams& market, const UtilitySpec& utility,
                         const Domains& domains, double clamp_delta) {
    market.validate();
    utility.validate();
    if (!(clamp_delta > 0.0)) throw std::invalid_argument("make_problem: clamp delta must be > 0");
    for (const Interval& iv : {domains.state, domains.dual, domains.benchmark})
        if (!(iv.lo > 0.0 && iv.hi > iv.lo)) throw std::invalid_argument("make_problem: bad sampling range");
    if (is_scaled(kind) && !utility.scalable())
        throw std::invalid_argument("make_problem: scaled problems need U2 a power with U1's exponent");

    PinnProblem pb;
    pb.kind = kind;
    pb.name = to_string(kind);
    pb.horizon = market.T;
    const MarketParams m = market;
    const double p = utility.u1.p;
    const double delta = clamp_delta;
    const ConcaveEnvelope env(utility);
    const double T = market.T;

    switch (kind) {
        case ProblemKind::ScaledPrimal:
        case ProblemKind::ScaledPrimalNonConcave: {
            const DerivedParams d = derive(m, p, utility.loss_scale());
            pb.dim = 1;
            pb.box[0] = domains.state;
            pb.residual = [m, d, delta](double, const double* X, const PdeJet<Jet>& j, bool& c) {
                return residual_scaled_primal(X[0], j, m, d, delta, c);
            };
            if (kind == ProblemKind::ScaledPrimal)
                pb.terminal = [env](const double* X) { return env.u_bar(X[0], 1.0); };
            else
                pb.terminal = [utility](const double* X) { return s_utility(X[0] - 1.0, utility); };
            const double h = -utility.u2_value(1.0);
            pb.boundary = [h](double, const double*) { return h; };
            pb.boundary_faces = {true, false};
            break;
        }
        case ProblemKind::ScaledDual: {
            const DerivedParams d = derive(m, p, utility.loss_scale());
            pb.dim = 1;
            pb.box[0] = domains.dual;
            pb.residual = [m, d, delta](double, const double* X, const PdeJet<Jet>& j, bool& c) {
                return residual_scaled_dual(X[0], j, m, d, delta, c);
            };
            const DualUtility dual(env);
            pb.terminal = [dual](const double* X) { return dual.value(X[0], 1.0); };
            pb.weights[2] = 0.0;
            break;
        }
        case ProblemKind::GeneralPrimal:
        case ProblemKind::GeneralPrimalNonConcave: {
            pb.dim = 2;
            pb.box = {domains.state, domains.benchmark};
            pb.residual = [m, delta](double, const double* X, const PdeJet<Jet>& j, bool& c) {
                return residual_general_primal(X[0], X[1], j, m, delta, c);
            };
            if (kind == ProblemKind::GeneralPrimal)
                pb.terminal = [env](const double* X) { return env.u_bar(X[0], X[1]); };
            else
                pb.terminal = [utility](const double* X) { return s_utility(X[0] - X[1], utility); };
            pb.boundary = [m, utility, p, T](double t, const double* X) {
                const double tau = T - t;
                if (X[0] == 0.0) return expected_neg_u2(utility, m, X[1], tau);
                return utility.u1.coef * merton_growth(m.alpha, m.theta, p, tau) * std::pow(X[0], p);
            };
            pb.boundary_faces = {true, true};
            break;
        }
        case ProblemKind::GeneralDual: {
            pb.dim = 2;
            pb.box = {domains.dual, domains.benchmark};
            pb.residual = [m, delta](double, const double* X, const PdeJet<Jet>& j, bool& c) {
                return residual_general_dual(X[0], X[1], j, m, delta, c);
            };
            const DualUtility dual(env);
            pb.terminal = [dual](const double* X) { return dual.value(X[0], X[1]); };
            // r face: dual Merton value minus the benchmark's share, E[U1~(Y_T) - R_T Y_T].
            const double q = p / (p - 1.0);
            const double c1 = utility.u1.conjugate(1.0);
            pb.boundary = [m, q, c1, T](double t, const double* X) {
                const double tau = T - t, y = X[0], r = X[1];
                const double merton =
                    c1 * std::pow(y, q) * std::exp(q * (-m.alpha - 0.5 * m.theta * m.theta) * tau +
                                                   0.5 * q * q * m.theta * m.theta * tau);
                return merton - r * y * std::exp((m.a - m.alpha - m.rho * m.theta * m.b) * tau);
            };
            pb.boundary_faces = {false, true};
            pb.face_at = {domains.dual.lo, domains.benchmark.lo};  // the r-face formula stays close to exact here
            break;
        }
    }
    return pb;
}

void TrainConfig::validate() const {
    if (collocation <= 0 || terminal <= 0 || boundary < 0) throw std::invalid_argument("TrainConfig: batch sizes must be positive");
    if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (!(early_stop > 0.0)) throw std::invalid_argument("TrainConfig: early-stop threshold must be > 0");
    if (hidden.empty()) throw std::invalid_argument("TrainConfig: need at least one hidden layer");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("TrainConfig: hidden widths must be positive");
}

Batches sample_batches(const PinnProblem& problem, const TrainConfig& config, mc::Rng& rng) {
    config.validate();
    const int d = problem.dim;
    const double T = problem.horizon;
    Batches b;
    auto fill_space = [&](Eigen::MatrixXd& M) {
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            for (int k = 0; k < d; ++k) M(1 + k, j) = rng.uniform(problem.box[k].lo, problem.box[k].hi);
    };
    b.collocation.resize(1 + d, config.collocation);
    fill_space(b.collocation);
    for (Eigen::Index j = 0; j < b.collocation.cols(); ++j) {
        double t = rng.uniform(0.0, T);
        if (t >= T) t = std::nextafter(T, 0.0);
        b.collocation(0, j) = t;
    }
    b.terminal.resize(1 + d, config.terminal);
    fill_space(b.terminal);
    b.terminal.row(0).setConstant(T);

    std::vector<int> faces;
    for (int k = 0; k < d; ++k)
        if (problem.boundary_faces[k]) faces.push_back(k);
    if (!problem.has_boundary() || faces.empty() || config.boundary == 0) {
        b.boundary.resize(1 + d, 0);
        return b;
    }
    b.boundary.resize(1 + d, config.boundary);
    fill_space(b.boundary);
    for (Eigen::Index j = 0; j < b.boundary.cols(); ++j) {
        b.boundary(0, j) = rng.uniform(0.0, T);
        int face = faces[0];
        if (faces.size() > 1) face = faces[std::min<std::size_t>(faces.size() - 1, static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(faces.size()))))];
        b.boundary(1 + face, j) = problem.face_at[face];
    }
    return b;
}

LossTerms evaluate_loss(const PinnProblem& problem, const nn::Mlp& net, const Batches& batches, nn::Gradient* grad) {
    LossTerms terms;
    const int d = problem.dim;
    const double T = problem.horizon;
    nn::Gradient scratch;
    nn::Gradient* g = grad;
    if (!g) {
        scratch = net.zero_gradient();
        g = &scratch;
    }

    // PDE residual
    {
        const Eigen::MatrixXd in = network_inputs(problem, batches.collocation);
        const Eigen::Index n = in.cols();
        const double wres = problem.weights[0];
        auto loss = [&](const nn::NetOutput& out, nn::NetOutput& adj) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const PdeJet<Jet> jet = make_jet(out, j, d, T);
                bool clamped = false;
                const double* X = batches.collocation.col(j).data() + 1;
                const Jet R = problem.residual(batches.collocation(0, j), X, jet, clamped);
                if (clamped) ++terms.clamps;
                const double r = R.value();
                if (!std::isfinite(r)) {
                    terms.worst_residual = r;
                    terms.worst_point.assign(batches.collocation.col(j).data(), batches.collocation.col(j).data() + 1 + d);
                    throw DivergenceError("non-finite residual");
                }
                if (std::abs(r) > std::abs(terms.worst_residual)) {
                    terms.worst_residual = r;
                    terms.worst_point.assign(batches.collocation.col(j).data(), batches.collocation.col(j).data() + 1 + d);
                }
                acc += r * r;
                const double s = wres * 2.0 * r / static_cast<double>(n);
                const Vec7& dr = R.derivatives();
                adj.value(j) = s * dr(0);
                adj.first(0, j) = s * dr(1) / T;
                adj.first(1, j) = s * dr(2);
                adj.second(0, j) = s * dr(4);
                if (d == 2) {
                    adj.first(2, j) = s * dr(3);
                    adj.second(1, j) = s * dr(5);
                    adj.second(2, j) = s * dr(6);
                }
            }
            terms.residual = acc / static_cast<double>(n);
            return wres * terms.residual;
        };
        nn::param_grad(net, in, field_request(d), loss, *g);
    }

    // value-matching terms
    auto fit = [&](const Eigen::MatrixXd& pts, double weight, auto&& target, double& slot) {
        if (pts.cols() == 0) return;
        const Eigen::MatrixXd in = network_inputs(problem, pts);
        const Eigen::Index n = in.cols();
        auto loss = [&](const nn::NetOutput& out, nn::NetOutput& adj) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double e = out.value(j) - target(j);
                acc += e * e;
                adj.value(j) = weight * 2.0 * e / static_cast<double>(n);
            }
            slot = acc / static_cast<double>(n);
            return weight * slot;
        };
        nn::param_grad(net, in, nn::DerivRequest::value_only(), loss, *g);
    };
    fit(batches.terminal, problem.weights[1],
        [&](Eigen::Index j) { return problem.terminal(batches.terminal.col(j).data() + 1); }, terms.terminal);
    if (problem.has_boundary() && problem.weights[2] != 0.0)
        fit(batches.boundary, problem.weights[2],
            [&](Eigen::Index j) {
                return problem.boundary(batches.boundary(0, j), batches.boundary.col(j).data() + 1);
            },
            terms.boundary);
    return terms;
}

nn::Mlp make_network(const PinnProblem& problem, const TrainConfig& config) {
    std::vector<int> dims{1 + problem.dim};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(1);
    return nn::Mlp::init(dims, config.seed);
}

TrainResult pinn_train(const PinnProblem& problem, nn::Mlp net, const TrainConfig& config) {
    config.validate();
    if (net.input_dim() != 1 + problem.dim) throw std::invalid_argument("pinn_train: network input width mismatch");
    const auto start = std::chrono::steady_clock::now();
    TrainResult result{std::move(net), {}};
    TrainReport& rep = result.report;
    rep.problem = problem.name;
    rep.loss_history.reserve(static_cast<std::size_t>(config.iterations));

    mc::Rng rng(config.seed, 0x9171);
    nn::OptimState opt = nn::make_optimizer(result.net, config.optimizer, config.learning_rate);
    nn::Gradient grad = result.net.zero_gradient();
    Batches batches;
    if (!config.resample) batches = sample_batches(problem, config, rng);

    for (int it = 0; it < config.iterations; ++it) {
        if (config.resample) batches = sample_batches(problem, config, rng);
        grad.set_zero();
        LossTerms terms;
        try {
            terms = evaluate_loss(problem, result.net, batches, &grad);
            nn::opt_step(opt, result.net, grad);
        } catch (const DivergenceError& e) {
            std::ostringstream msg;
            msg << problem.name << " diverged at iteration " << it << ": " << e.what()
                << " (clamps so far " << rep.clamp_activations << ", worst residual " << terms.worst_residual << ")";
            throw DivergenceError(msg.str());
        }
        const double total = terms.total(problem.weights);
        rep.loss_history.push_back(total);
        rep.clamp_activations += terms.clamps;
        rep.final_terms = terms;
        rep.iterations_run = it + 1;
        if (config.log_every > 0 && (it % config.log_every == 0))
            std::cerr << problem.name << " it " << it << " loss " << total << " (res " << terms.residual << ", term "
                      << terms.terminal << ", bdry " << terms.boundary << ")\n";
        if (total < config.early_stop) {
            rep.early_stopped = true;
            break;
        }
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

nn::NetOutput evaluate_field(const PinnProblem& problem, const nn::Mlp& net, const Eigen::MatrixXd& points) {
    nn::NetOutput out = net.forward(network_inputs(problem, points), field_request(problem.dim));
    out.first.row(0) /= problem.horizon;
    return out;
}

PdeJet<double> jet_at(const PinnProblem& problem, const nn::Mlp& net, double t, double x0, double x1) {
    Eigen::MatrixXd pt(1 + problem.dim, 1);
    pt(0, 0) = t;
    pt(1, 0) = x0;
    if (problem.dim == 2) pt(2, 0) = x1;
    const nn::NetOutput out = evaluate_field(problem, net, pt);
    PdeJet<double> j;
    j.u = out.value(0);
    j.ut = out.first(0, 0);
    j.ux[0] = out.first(1, 0);
    j.uxx[0] = out.second(0, 0);
    if (problem.dim == 2) {
        j.ux[1] = out.first(2, 0);
        j.uxx[1] = out.second(1, 0);
        j.uxx[2] = out.second(2, 0);
    }
    return j;
}

namespace {

// argmin over the dual box of u(0, y[, r]) + x y: coarse grid, then golden section.
double dual_argmin(const PinnProblem& problem, const nn::Mlp& net, double x, double r) {
    const Interval box = problem.box[0];
    const int n = 401;
    Eigen::MatrixXd pts(1 + problem.dim, n);
    for (int i = 0; i < n; ++i) {
        pts(0, i) = 0.0;
        pts(1, i) = box.lo + (box.hi - box.lo) * i / (n - 1);
        if (problem.dim == 2) pts(2, i) = r;
    }
    const Eigen::RowVectorXd vals = net.evaluate(network_inputs(problem, pts));
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (vals(i) + x * pts(1, i) < vals(best) + x * pts(1, best)) best = i;
    double lo = pts(1, std::max(best - 1, 0)), hi = pts(1, std::min(best + 1, n - 1));
    auto f = [&](double y) {
        Eigen::MatrixXd pt(1 + problem.dim, 1);
        pt(0, 0) = 0.0;
        pt(1, 0) = y;
        if (problem.dim == 2) pt(2, 0) = r;
        return net.evaluate(network_inputs(problem, pt))(0) + x * y;
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int k = 0; k < 60; ++k) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = f(d);
        }
    }
    return 0.5 * (lo + hi);
}

void guard(double den, const char* what) {
    if (!std::isfinite(den) || den == 0.0) throw DivergenceError(std::string("output map: degenerate ") + what);
}

}  // namespace

PointValue value_at(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& m, double p, double x,
                    double r) {
    if (!(x > 0.0 && r > 0.0)) throw std::invalid_argument("value_at: x and r must be positive");
    const double H = h_factor(m, p, m.T);
    PointValue pv;
    switch (problem.kind) {
        case ProblemKind::ScaledPrimal:
        case ProblemKind::ScaledPrimalNonConcave: {
            const double z = x / r;
            const auto j = jet_at(problem, net, 0.0, z);
            const DerivedParams d = derive(m, p, 0.0);
            guard(j.uxx[0], "g_zz");
            pv.state = z;
            pv.v = std::pow(r, p) * H * j.u;
            pv.pi = -(j.ux[0] * d.theta_bar - m.rho * m.b * z * j.uxx[0]) / (m.sigma * z * j.uxx[0]);
            break;
        }
        case ProblemKind::ScaledDual: {
            const double z = x / r;
            const double y = dual_argmin(problem, net, z, 0.0);
            const auto j = jet_at(problem, net, 0.0, y);
            const DerivedParams d = derive(m, p, 0.0);
            guard(j.ux[0], "g~_y");
            pv.state = y;
            pv.v = std::pow(r, p) * H * (j.u + z * y);
            pv.pi = -y * d.theta_bar * j.uxx[0] / (j.ux[0] * m.sigma) + m.rho * m.b / m.sigma;
            break;
        }
        case ProblemKind::GeneralPrimal:
        case ProblemKind::GeneralPrimalNonConcave: {
            const auto j = jet_at(problem, net, 0.0, x, r);
            guard(j.uxx[0], "v_xx");
            pv.state = x;
            pv.v = j.u;
            pv.pi = -(m.theta * j.ux[0] + m.rho * m.b * r * j.uxx[1]) / (m.sigma * x * j.uxx[0]);
            break;
        }
        case ProblemKind::GeneralDual: {
            const double y = dual_argmin(problem, net, x, r);
            const auto j = jet_at(problem, net, 0.0, y, r);
            pv.state = y;
            pv.v = j.u + x * y;
            pv.pi = (m.theta * y * j.uxx[0] - m.rho * m.b * r * j.uxx[1]) / (m.sigma * x);
            break;
        }
    }
    return pv;
}

ValueGrid outputs_primal(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& m, double p, double r0,
                         int points) {
    if (is_dual(problem.kind)) throw std::invalid_argument("outputs_primal: dual problem given");
    if (points < 2) throw std::invalid_argument("outputs_primal: need at least two points");
    ValueGrid grid;
    grid.method = problem.name;
    const Interval box = problem.box[0];
    for (int i = 0; i < points; ++i) {
        const double s = box.lo + (box.hi - box.lo) * i / (points - 1);
        const double x = is_scaled(problem.kind) ? r0 * s : s;
        const PointValue pv = value_at(problem, net, m, p, x, r0);
        grid.push(x, r0, pv.v, pv.pi);
    }
    return grid;
}

ValueGrid outputs_dual(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& m, double p, double r0,
                       int points) {
    if (!is_dual(problem.kind)) throw std::invalid_argument("outputs_dual: primal problem given");
    if (points < 2) throw std::invalid_argument("outputs_dual: need at least two points");
    ValueGrid grid;
    grid.method = problem.name;
    const Interval box = problem.box[0];
    const double H = h_factor(m, p, m.T);
    const DerivedParams d = derive(m, p, 0.0);
    for (int i = 0; i < points; ++i) {
        const double y = box.lo + (box.hi - box.lo) * i / (points - 1);
        if (problem.kind == ProblemKind::ScaledDual) {
            const auto j = jet_at(problem, net, 0.0, y);
            guard(j.ux[0], "g~_y");
            const double x = -r0 * j.ux[0];
            const double v = std::pow(r0, p) * H * (j.u - y * j.ux[0]);
            const double pi = -y * d.theta_bar * j.uxx[0] / (j.ux[0] * m.sigma) + m.rho * m.b / m.sigma;
            grid.push(x, r0, v, pi);
        } else {
            const auto j = jet_at(problem, net, 0.0, y, r0);
            const double x = -j.ux[0];
            guard(x, "x");
            const double pi = (m.theta * y * j.uxx[0] - m.rho * m.b * r0 * j.uxx[1]) / (m.sigma * x);
            grid.push(x, r0, j.u - y * j.ux[0], pi);
        }
    }
    return grid;
}

ValueGrid outputs_at(const PinnProblem& problem, const nn::Mlp& net, const MarketParams& m, double p,
                     const std::vector<std::pair<double, double>>& points) {
    ValueGrid grid;
    grid.method = problem.name;
    for (const auto& [x, r] : points) {
        const PointValue pv = value_at(problem, net, m, p, x, r);
        grid.push(x, r, pv.v, pv.pi);
    }
    return grid;
}

}  // namespace sshape::pinn
