// Small tanh multilayer perceptron with exact input derivatives up to second order
// and reverse-mode parameter gradients of losses built from those derivatives.
//
// Samples are stored column-wise. A forward pass propagates a stack of channels per
// layer: the value, one tangent per requested input direction, and one second-order
// tangent per requested pair. Block c of a stacked matrix occupies columns
// [c N, (c + 1) N) for a batch of N samples.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sshape::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Which input derivatives to propagate. `second` holds pairs of positions into `first`.
struct DerivRequest {
    std::vector<int> first;
    std::vector<std::pair<int, int>> second;

    [[nodiscard]] int channels() const { return 1 + static_cast<int>(first.size() + second.size()); }
    static DerivRequest value_only() { return {}; }
};

/// Network outputs (or their adjoints) for a batch; column j belongs to sample j.
struct NetOutput {
    RowVector value;
    Matrix first;   // first.size() x N
    Matrix second;  // second.size() x N

    static NetOutput zeros_like(const NetOutput& other);
};

/// Intermediate state kept by forward() for backward().
struct ForwardTape {
    DerivRequest request;
    Eigen::Index samples = 0;
    std::vector<Matrix> layer_inputs;  // stacked channels entering each affine layer
    std::vector<Matrix> pre;           // stacked pre-activation channels of hidden layers
};

/// Parameter-shaped container, used for gradients and optimizer moments.
struct Gradient {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    void set_zero();
    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] double squared_norm() const;
    Gradient& operator+=(const Gradient& other);
    Gradient& operator*=(double s);
};

class Mlp {
public:
    Mlp() = default;
    /// Zero-initialised network with layer widths dims = [d_in, h_1, ..., 1].
    explicit Mlp(std::vector<int> dims);

    /// Glorot-uniform weights and zero biases; the same seed gives identical parameters.
    static Mlp init(std::vector<int> dims, std::uint64_t seed);

    [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
    [[nodiscard]] int input_dim() const { return dims_.front(); }
    [[nodiscard]] std::size_t layer_count() const { return weights_.size(); }
    [[nodiscard]] std::size_t parameter_count() const;

    [[nodiscard]] std::vector<Matrix>& weights() { return weights_; }
    [[nodiscard]] const std::vector<Matrix>& weights() const { return weights_; }
    [[nodiscard]] std::vector<Vector>& biases() { return biases_; }
    [[nodiscard]] const std::vector<Vector>& biases() const { return biases_; }

    NetOutput forward(const Eigen::Ref<const Matrix>& inputs, const DerivRequest& request,
                      ForwardTape* tape = nullptr) const;

    /// Value-only evaluation for a batch.
    [[nodiscard]] RowVector evaluate(const Eigen::Ref<const Matrix>& inputs) const;

    /// Accumulates dL/dparams into grad given dL/d(outputs). If input_adjoint is given it
    /// receives dL/d(inputs) through the value channel (d_in x N).
    void backward(const ForwardTape& tape, const NetOutput& adjoint, Gradient& grad,
                  Matrix* input_adjoint = nullptr) const;

    [[nodiscard]] Gradient zero_gradient() const;

    [[nodiscard]] Vector flatten() const;
    void unflatten(const Eigen::Ref<const Vector>& params);

private:
    std::vector<int> dims_;
    std::vector<Matrix> weights_;
    std::vector<Vector> biases_;
};

Mlp init_network(std::vector<int> dims, std::uint64_t seed);

NetOutput forward_with_input_derivs(const Mlp& net, const Eigen::Ref<const Matrix>& inputs,
                                    const DerivRequest& request);

/// Computes a scalar loss from network outputs and writes dL/d(outputs) into adjoint,
/// which arrives zero-initialised with matching shapes.
using LossFn = std::function<double(const NetOutput& outputs, NetOutput& adjoint)>;

/// Evaluates the loss on one batch and accumulates its parameter gradient into grad.
/// Throws DivergenceError on non-finite loss or sensitivities.
double param_grad(const Mlp& net, const Eigen::Ref<const Matrix>& inputs, const DerivRequest& request,
                  const LossFn& loss, Gradient& grad);

enum class OptimizerKind { Adam, Sgd };

struct OptimState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    Gradient m;
    Gradient v;
};

OptimState make_optimizer(const Mlp& net, OptimizerKind kind, double learning_rate);

/// One update; plain mode applies params -= lr * grad exactly. Rejects non-finite gradients.
void opt_step(OptimState& state, Mlp& net, const Gradient& grad);

/// Binary checkpoint: "SSMLP001", u32 layer-width count, u32 widths, u64 parameter
/// count, then little-endian float64 parameters (per layer: weights column-major, biases).
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path);

/// Process-wide allocator tuning for training loops (glibc only; no-op elsewhere).
void keep_large_buffers();

}  // namespace sshape::nn
