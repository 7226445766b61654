#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace adareg {

enum class Activation { ReLU, Identity };
enum class LossKind { SoftmaxCrossEntropy, SquaredError };

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::Identity;

    Eigen::Index in_dim() const noexcept { return weight.cols(); }
    Eigen::Index out_dim() const noexcept { return weight.rows(); }
};

/// A stack of dense layers; layer k maps (batch x in_k) to (batch x out_k)
/// with H_{k+1} = act(H_k W_k^T + 1 b_k^T).
class Network {
public:
    Network(std::vector<DenseLayer> layers, LossKind loss);

    /// Hidden layers use `hidden_activation`, the output layer is Identity.
    /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    static Network mlp(std::span<const Eigen::Index> sizes, Activation hidden_activation,
                       LossKind loss, std::uint64_t seed);

    std::size_t num_layers() const noexcept { return layers_.size(); }
    const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    LossKind loss() const noexcept { return loss_; }
    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }
    std::size_t num_parameters() const;

    bool all_finite() const;

private:
    std::vector<DenseLayer> layers_;
    LossKind loss_;
};

/// Inputs are row-per-example. For SoftmaxCrossEntropy `labels` holds class
/// indices; for SquaredError `targets` is batch x out.
struct Batch {
    Eigen::MatrixXd inputs;
    std::vector<int> labels;
    Eigen::MatrixXd targets;

    Eigen::Index size() const noexcept { return inputs.rows(); }
};

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;       // input to layer k (after dropout, if any)
    std::vector<Eigen::MatrixXd> pre;          // pre-activation of layer k
    std::vector<Eigen::MatrixXd> dropout_mask; // scale mask applied to the output of layer k, or empty
    Eigen::MatrixXd output;
};

struct DropoutConfig {
    double rate = 0.0;
    std::uint64_t seed = 0;
};

struct LayerGradient {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};
using Gradients = std::vector<LayerGradient>;

/// Deterministic forward pass (no dropout).
ForwardCache forward(const Network& net, const Eigen::MatrixXd& inputs);

/// Training-mode forward pass; inverted dropout on every hidden layer output.
ForwardCache forward(const Network& net, const Eigen::MatrixXd& inputs, const DropoutConfig& dropout);

Eigen::MatrixXd predict(const Network& net, const Eigen::MatrixXd& inputs);

/// Mean loss over the batch. Squared error is (1/2n) sum ||yhat - y||^2.
double loss_value(const Network& net, const Batch& batch);
double loss_from_output(LossKind kind, const Eigen::MatrixXd& output, const Batch& batch);

/// Exact gradients of loss_value with respect to every weight and bias.
Gradients backward(const Network& net, const Batch& batch);
Gradients backward(const Network& net, const Batch& batch, const ForwardCache& cache);

struct ExtraGradient {
    std::size_t layer;
    Eigen::MatrixXd weight;
};

struct SgdOptions {
    double learning_rate = 0.1;
    double weight_decay = 0.0;
    /// Layers receiving weight decay; empty means every layer. Biases never decay.
    std::vector<std::size_t> decay_layers;
};

/// W <- W - lr * (grad + weight_decay * W + extra), b <- b - lr * grad_b.
void sgd_step(Network& net, const Gradients& grads, const SgdOptions& options,
              std::span<const ExtraGradient> extra = {});

/// Inverted dropout: zero with probability `rate`, survivors scaled by
/// 1 / (1 - rate). rate == 0 returns the input unchanged.
Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& activations, double rate, std::uint64_t seed);

/// The scale mask apply_dropout would multiply by for this shape and seed.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed);

}  // namespace adareg
