#include "sshape/nn.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sshape/mc.hpp"
#include "sshape/model.hpp"

namespace sshape::nn {

namespace {

using Array = Eigen::ArrayXXd;

auto block(Matrix& m, Eigen::Index c, Eigen::Index n) { return m.middleCols(c * n, n); }
auto block(const Matrix& m, Eigen::Index c, Eigen::Index n) { return m.middleCols(c * n, n); }

// tanh through the vectorised exp; std::tanh is scalar for doubles and dominates a step otherwise.
// Saturates cleanly: exp overflow gives 1, underflow gives -1.
template <typename Derived>
Array fast_tanh(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

void check_request(const DerivRequest& request, int input_dim) {
    for (int idx : request.first)
        if (idx < 0 || idx >= input_dim) throw std::invalid_argument("DerivRequest: input index out of range");
    const int k = static_cast<int>(request.first.size());
    for (auto [i, j] : request.second)
        if (i < 0 || j < 0 || i >= k || j >= k) throw std::invalid_argument("DerivRequest: pair refers to unknown tangent");
}

}  // namespace

NetOutput NetOutput::zeros_like(const NetOutput& other) {
    NetOutput out;
    out.value = RowVector::Zero(other.value.size());
    out.first = Matrix::Zero(other.first.rows(), other.first.cols());
    out.second = Matrix::Zero(other.second.rows(), other.second.cols());
    return out;
}

void Gradient::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

bool Gradient::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : biases)
        if (!b.allFinite()) return false;
    return true;
}

double Gradient::squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
}

Gradient& Gradient::operator+=(const Gradient& other) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] += other.weights[i];
        biases[i] += other.biases[i];
    }
    return *this;
}

Gradient& Gradient::operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (int d : dims_)
        if (d <= 0) throw std::invalid_argument("Mlp: zero-width layer");
    if (dims_.back() != 1) throw std::invalid_argument("Mlp: output width must be 1");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
        biases_.push_back(Vector::Zero(dims_[l + 1]));
    }
}

Mlp Mlp::init(std::vector<int> dims, std::uint64_t seed) {
    Mlp net(std::move(dims));
    mc::Rng rng(seed, 0x6e6e);
    for (auto& w : net.weights_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        rng.fill_uniform(w, -limit, limit);
    }
    return net;
}

Mlp init_network(std::vector<int> dims, std::uint64_t seed) { return Mlp::init(std::move(dims), seed); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

NetOutput Mlp::forward(const Eigen::Ref<const Matrix>& inputs, const DerivRequest& request, ForwardTape* tape) const {
    if (inputs.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    check_request(request, input_dim());
    const Eigen::Index n = inputs.cols();
    const Eigen::Index nk = static_cast<Eigen::Index>(request.first.size());
    const Eigen::Index np = static_cast<Eigen::Index>(request.second.size());
    const Eigen::Index channels = request.channels();

    Matrix stacked = Matrix::Zero(input_dim(), channels * n);
    block(stacked, 0, n) = inputs;
    for (Eigen::Index k = 0; k < nk; ++k) block(stacked, 1 + k, n).row(request.first[k]).setOnes();

    if (tape) {
        tape->request = request;
        tape->samples = n;
        tape->layer_inputs.clear();
        tape->pre.clear();
    }

    const std::size_t layers = weights_.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = weights_[l] * stacked;
        block(z, 0, n).colwise() += biases_[l];
        if (tape) tape->layer_inputs.push_back(std::move(stacked));
        if (l + 1 == layers) {
            NetOutput out;
            out.value = block(z, 0, n);
            out.first.resize(nk, n);
            out.second.resize(np, n);
            for (Eigen::Index k = 0; k < nk; ++k) out.first.row(k) = block(z, 1 + k, n);
            for (Eigen::Index q = 0; q < np; ++q) out.second.row(q) = block(z, 1 + nk + q, n);
            return out;
        }
        const Eigen::Index h = z.rows();
        stacked.resize(h, channels * n);
        const Array a = fast_tanh(block(z, 0, n).array());
        const Array s1 = 1.0 - a.square();
        const Array s2 = -2.0 * a * s1;
        block(stacked, 0, n) = a.matrix();
        for (Eigen::Index k = 0; k < nk; ++k) block(stacked, 1 + k, n) = (s1 * block(z, 1 + k, n).array()).matrix();
        for (Eigen::Index q = 0; q < np; ++q) {
            const auto [i, j] = request.second[q];
            block(stacked, 1 + nk + q, n) = (s2 * block(z, 1 + i, n).array() * block(z, 1 + j, n).array() +
                                             s1 * block(z, 1 + nk + q, n).array())
                                                .matrix();
        }
        if (tape) tape->pre.push_back(std::move(z));
    }
    return {};  // unreachable: the last layer returns
}

RowVector Mlp::evaluate(const Eigen::Ref<const Matrix>& inputs) const {
    if (inputs.rows() != input_dim()) throw std::invalid_argument("Mlp::evaluate: input dimension mismatch");
    Matrix act = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Matrix z = weights_[l] * act;
        z.colwise() += biases_[l];
        if (l + 1 == weights_.size()) return z.row(0);
        act = fast_tanh(z.array()).matrix();
    }
    return {};
}

void Mlp::backward(const ForwardTape& tape, const NetOutput& adjoint, Gradient& grad, Matrix* input_adjoint) const {
    const Eigen::Index n = tape.samples;
    const auto& request = tape.request;
    const Eigen::Index nk = static_cast<Eigen::Index>(request.first.size());
    const Eigen::Index np = static_cast<Eigen::Index>(request.second.size());
    const Eigen::Index channels = request.channels();
    if (adjoint.value.size() != n || adjoint.first.rows() != nk || adjoint.second.rows() != np)
        throw std::invalid_argument("Mlp::backward: adjoint shape mismatch");
    if (tape.layer_inputs.size() != weights_.size()) throw std::invalid_argument("Mlp::backward: tape is empty");

    Matrix zbar(1, channels * n);
    block(zbar, 0, n) = adjoint.value;
    for (Eigen::Index k = 0; k < nk; ++k) block(zbar, 1 + k, n) = adjoint.first.row(k);
    for (Eigen::Index q = 0; q < np; ++q) block(zbar, 1 + nk + q, n) = adjoint.second.row(q);

    for (std::size_t l = weights_.size(); l-- > 0;) {
        const Matrix& in = tape.layer_inputs[l];
        grad.weights[l].noalias() += zbar * in.transpose();
        grad.biases[l] += block(zbar, 0, n).rowwise().sum();
        if (l == 0) {
            if (input_adjoint) *input_adjoint = weights_[0].transpose() * block(zbar, 0, n);
            break;
        }
        const Matrix sbar = weights_[l].transpose() * zbar;
        const Matrix& z = tape.pre[l - 1];
        const Array a = block(in, 0, n).array();
        const Array s1 = 1.0 - a.square();
        const Array s2 = -2.0 * a * s1;

        Matrix next(sbar.rows(), channels * n);
        Array value_bar = s1 * block(sbar, 0, n).array();
        for (Eigen::Index k = 0; k < nk; ++k) {
            value_bar += s2 * block(z, 1 + k, n).array() * block(sbar, 1 + k, n).array();
            block(next, 1 + k, n) = (s1 * block(sbar, 1 + k, n).array()).matrix();
        }
        if (np > 0) {
            const Array s3 = -2.0 * s1.square() + 4.0 * a.square() * s1;
            for (Eigen::Index q = 0; q < np; ++q) {
                const auto [i, j] = request.second[q];
                const Array sb = block(sbar, 1 + nk + q, n).array();
                const Array zi = block(z, 1 + i, n).array();
                const Array zj = block(z, 1 + j, n).array();
                value_bar += (s3 * zi * zj + s2 * block(z, 1 + nk + q, n).array()) * sb;
                block(next, 1 + i, n).array() += s2 * zj * sb;
                block(next, 1 + j, n).array() += s2 * zi * sb;
                block(next, 1 + nk + q, n) = (s1 * sb).matrix();
            }
        }
        block(next, 0, n) = value_bar.matrix();
        zbar = std::move(next);
    }
}

Gradient Mlp::zero_gradient() const {
    Gradient g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        g.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
        g.biases.push_back(Vector::Zero(biases_[l].size()));
    }
    return g;
}

Vector Mlp::flatten() const {
    Vector out(parameter_count());
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.segment(pos, weights_[l].size()) = weights_[l].reshaped();
        pos += weights_[l].size();
        out.segment(pos, biases_[l].size()) = biases_[l];
        pos += biases_[l].size();
    }
    return out;
}

void Mlp::unflatten(const Eigen::Ref<const Vector>& params) {
    if (static_cast<std::size_t>(params.size()) != parameter_count())
        throw std::invalid_argument("Mlp::unflatten: parameter count mismatch");
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights_[l].reshaped() = params.segment(pos, weights_[l].size());
        pos += weights_[l].size();
        biases_[l] = params.segment(pos, biases_[l].size());
        pos += biases_[l].size();
    }
}

NetOutput forward_with_input_derivs(const Mlp& net, const Eigen::Ref<const Matrix>& inputs,
                                    const DerivRequest& request) {
    return net.forward(inputs, request);
}

double param_grad(const Mlp& net, const Eigen::Ref<const Matrix>& inputs, const DerivRequest& request,
                  const LossFn& loss, Gradient& grad) {
    ForwardTape tape;
    const NetOutput out = net.forward(inputs, request, &tape);
    NetOutput adjoint = NetOutput::zeros_like(out);
    const double value = loss(out, adjoint);
    if (!std::isfinite(value)) throw DivergenceError("param_grad: non-finite loss");
    if (!adjoint.value.allFinite() || !adjoint.first.allFinite() || !adjoint.second.allFinite())
        throw DivergenceError("param_grad: non-finite loss sensitivity");
    net.backward(tape, adjoint, grad);
    return value;
}

OptimState make_optimizer(const Mlp& net, OptimizerKind kind, double learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("make_optimizer: learning rate must be > 0");
    OptimState state;
    state.kind = kind;
    state.learning_rate = learning_rate;
    state.m = net.zero_gradient();
    state.v = net.zero_gradient();
    return state;
}

void opt_step(OptimState& state, Mlp& net, const Gradient& grad) {
    if (grad.weights.size() != net.weights().size()) throw std::invalid_argument("opt_step: gradient shape mismatch");
    if (!grad.all_finite()) throw DivergenceError("opt_step: non-finite gradient");
    ++state.step;
    const double lr = state.learning_rate;
    if (state.kind == OptimizerKind::Sgd) {
        for (std::size_t l = 0; l < grad.weights.size(); ++l) {
            net.weights()[l] -= lr * grad.weights[l];
            net.biases()[l] -= lr * grad.biases[l];
        }
        return;
    }
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
        update(net.weights()[l], state.m.weights[l], state.v.weights[l], grad.weights[l]);
        update(net.biases()[l], state.m.biases[l], state.v.biases[l], grad.biases[l]);
    }
}

void save_checkpoint(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write("SSMLP001", 8);
    const auto count = static_cast<std::uint32_t>(net.dims().size());
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (int d : net.dims()) {
        const auto w = static_cast<std::uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&w), sizeof w);
    }
    const Vector params = net.flatten();
    const auto n = static_cast<std::uint64_t>(params.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "SSMLP001", 8) != 0) throw std::runtime_error("load_checkpoint: bad header");
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    std::vector<int> dims(count);
    for (auto& d : dims) {
        std::uint32_t w = 0;
        in.read(reinterpret_cast<char*>(&w), sizeof w);
        d = static_cast<int>(w);
    }
    Mlp net(dims);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n != net.parameter_count()) throw std::runtime_error("load_checkpoint: parameter count mismatch");
    Vector params(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated file");
    net.unflatten(params);
    return net;
}

void keep_large_buffers() {
#if defined(__GLIBC__)
    // Batch matrices exceed the default mmap threshold; without this every step pays
    // for fresh page mappings.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace sshape::nn
