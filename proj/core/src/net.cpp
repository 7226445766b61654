#include "adareg/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "adareg/errors.hpp"
#include "adareg/rng.hpp"

namespace adareg {

namespace {

std::string shape(const Eigen::MatrixXd& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z)
{
    if (act == Activation::ReLU) return z.cwiseMax(0.0);
    return z;
}

void check_inputs(const Network& net, const Eigen::MatrixXd& inputs)
{
    if (inputs.cols() != net.input_dim()) {
        fail(ErrorCode::DimensionMismatch, "network expects " + std::to_string(net.input_dim()) +
                                               " inputs, got batch " + shape(inputs));
    }
}

void check_targets(const Network& net, const Batch& batch)
{
    const Eigen::Index n = batch.size();
    if (n < 1) fail(ErrorCode::DimensionMismatch, "empty batch");
    if (net.loss() == LossKind::SoftmaxCrossEntropy) {
        if (static_cast<Eigen::Index>(batch.labels.size()) != n) {
            fail(ErrorCode::DimensionMismatch, "label count does not match batch size");
        }
        for (int y : batch.labels) {
            if (y < 0 || y >= net.output_dim()) {
                fail(ErrorCode::DimensionMismatch, "label " + std::to_string(y) + " out of range");
            }
        }
    } else if (batch.targets.rows() != n || batch.targets.cols() != net.output_dim()) {
        fail(ErrorCode::DimensionMismatch, "targets " + shape(batch.targets) + " do not match output");
    }
}

// Row-wise log-sum-exp of logits.
Eigen::VectorXd log_normalizers(const Eigen::MatrixXd& logits)
{
    const Eigen::VectorXd peak = logits.rowwise().maxCoeff();
    const Eigen::MatrixXd shifted = logits.colwise() - peak;
    return peak.array() + shifted.array().exp().rowwise().sum().log();
}

}  // namespace

Network::Network(std::vector<DenseLayer> layers, LossKind loss) : layers_(std::move(layers)), loss_(loss)
{
    if (layers_.empty()) fail(ErrorCode::InvalidArgument, "network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& l = layers_[k];
        if (l.bias.size() != l.out_dim()) {
            fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(k) + " bias length mismatch");
        }
        if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
            fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(k) + " expects " +
                                                   std::to_string(l.in_dim()) + " inputs but previous layer has " +
                                                   std::to_string(layers_[k - 1].out_dim()));
        }
    }
}

Network Network::mlp(std::span<const Eigen::Index> sizes, Activation hidden_activation, LossKind loss,
                     std::uint64_t seed)
{
    if (sizes.size() < 2) fail(ErrorCode::InvalidArgument, "mlp needs at least input and output sizes");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const Eigen::Index in = sizes[k];
        const Eigen::Index out = sizes[k + 1];
        if (in < 1 || out < 1) fail(ErrorCode::InvalidArgument, "layer sizes must be positive");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        DenseLayer layer;
        layer.weight.resize(out, in);
        for (Eigen::Index i = 0; i < out; ++i) {
            for (Eigen::Index j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
        }
        layer.bias = Eigen::VectorXd::Zero(out);
        layer.activation = (k + 2 == sizes.size()) ? Activation::Identity : hidden_activation;
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers), loss);
}

std::size_t Network::num_parameters() const
{
    std::size_t total = 0;
    for (const auto& l : layers_) total += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return total;
}

bool Network::all_finite() const
{
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed)
{
    if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorCode::InvalidArgument, "dropout rate must be in [0, 1)");
    const double keep_scale = 1.0 / (1.0 - rate);
    Rng rng(seed);
    Eigen::MatrixXd mask(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.bernoulli(rate) ? 0.0 : keep_scale;
    }
    return mask;
}

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& activations, double rate, std::uint64_t seed)
{
    if (rate == 0.0) return activations;
    return activations.cwiseProduct(dropout_mask(activations.rows(), activations.cols(), rate, seed));
}

ForwardCache forward(const Network& net, const Eigen::MatrixXd& inputs)
{
    return forward(net, inputs, DropoutConfig{});
}

ForwardCache forward(const Network& net, const Eigen::MatrixXd& inputs, const DropoutConfig& dropout)
{
    check_inputs(net, inputs);
    const std::size_t count = net.num_layers();
    ForwardCache cache;
    cache.inputs.reserve(count);
    cache.pre.reserve(count);
    cache.dropout_mask.resize(count);

    Eigen::MatrixXd h = inputs;
    for (std::size_t k = 0; k < count; ++k) {
        const DenseLayer& layer = net.layer(k);
        Eigen::MatrixXd z = h * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        Eigen::MatrixXd a = activate(layer.activation, z);
        if (dropout.rate > 0.0 && k + 1 < count) {
            cache.dropout_mask[k] = dropout_mask(a.rows(), a.cols(), dropout.rate, derive_seed(dropout.seed, k));
            a = a.cwiseProduct(cache.dropout_mask[k]);
        }
        cache.inputs.push_back(std::move(h));
        cache.pre.push_back(std::move(z));
        h = std::move(a);
    }
    cache.output = std::move(h);
    return cache;
}

Eigen::MatrixXd predict(const Network& net, const Eigen::MatrixXd& inputs)
{
    check_inputs(net, inputs);
    Eigen::MatrixXd h = inputs;
    for (const auto& layer : net.layers()) {
        Eigen::MatrixXd z = h * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        h = activate(layer.activation, z);
    }
    return h;
}

double loss_from_output(LossKind kind, const Eigen::MatrixXd& output, const Batch& batch)
{
    const double n = static_cast<double>(output.rows());
    if (kind == LossKind::SoftmaxCrossEntropy) {
        const Eigen::VectorXd lse = log_normalizers(output);
        double total = 0.0;
        for (Eigen::Index i = 0; i < output.rows(); ++i) {
            total += lse[i] - output(i, batch.labels[static_cast<std::size_t>(i)]);
        }
        return total / n;
    }
    return 0.5 * (output - batch.targets).squaredNorm() / n;
}

double loss_value(const Network& net, const Batch& batch)
{
    check_inputs(net, batch.inputs);
    check_targets(net, batch);
    return loss_from_output(net.loss(), predict(net, batch.inputs), batch);
}

Gradients backward(const Network& net, const Batch& batch)
{
    return backward(net, batch, forward(net, batch.inputs));
}

Gradients backward(const Network& net, const Batch& batch, const ForwardCache& cache)
{
    check_inputs(net, batch.inputs);
    check_targets(net, batch);
    const std::size_t count = net.num_layers();
    if (cache.pre.size() != count || cache.output.rows() != batch.size()) {
        fail(ErrorCode::DimensionMismatch, "forward cache does not belong to this network and batch");
    }
    const double n = static_cast<double>(batch.size());

    // dL/d(output of last layer)
    Eigen::MatrixXd upstream;
    if (net.loss() == LossKind::SoftmaxCrossEntropy) {
        const Eigen::VectorXd lse = log_normalizers(cache.output);
        upstream = (cache.output.colwise() - lse).array().exp();
        for (Eigen::Index i = 0; i < upstream.rows(); ++i) upstream(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
        upstream /= n;
    } else {
        upstream = (cache.output - batch.targets) / n;
    }

    Gradients grads(count);
    for (std::size_t k = count; k-- > 0;) {
        const DenseLayer& layer = net.layer(k);
        if (layer.activation == Activation::ReLU) {
            upstream = upstream.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
        }
        grads[k].weight = upstream.transpose() * cache.inputs[k];
        grads[k].bias = upstream.colwise().sum().transpose();
        if (k > 0) {
            upstream = upstream * layer.weight;
            if (cache.dropout_mask[k - 1].size() > 0) upstream = upstream.cwiseProduct(cache.dropout_mask[k - 1]);
        }
    }
    return grads;
}

void sgd_step(Network& net, const Gradients& grads, const SgdOptions& options, std::span<const ExtraGradient> extra)
{
    if (grads.size() != net.num_layers()) fail(ErrorCode::DimensionMismatch, "gradient count mismatch");
    if (!(options.learning_rate >= 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be non-negative");
    if (!(options.weight_decay >= 0.0)) fail(ErrorCode::InvalidArgument, "weight decay must be non-negative");

    for (std::size_t k = 0; k < net.num_layers(); ++k) {
        DenseLayer& layer = net.layer(k);
        if (grads[k].weight.rows() != layer.weight.rows() || grads[k].weight.cols() != layer.weight.cols() ||
            grads[k].bias.size() != layer.bias.size()) {
            fail(ErrorCode::DimensionMismatch, "gradient shape mismatch at layer " + std::to_string(k));
        }
        Eigen::MatrixXd step = grads[k].weight;
        const bool decays = options.decay_layers.empty() ||
                            std::find(options.decay_layers.begin(), options.decay_layers.end(), k) !=
                                options.decay_layers.end();
        if (options.weight_decay > 0.0 && decays) step += options.weight_decay * layer.weight;
        for (const auto& e : extra) {
            if (e.layer != k) continue;
            if (e.weight.rows() != step.rows() || e.weight.cols() != step.cols()) {
                fail(ErrorCode::DimensionMismatch, "extra gradient shape mismatch at layer " + std::to_string(k));
            }
            step += e.weight;
        }
        layer.weight -= options.learning_rate * step;
        layer.bias -= options.learning_rate * grads[k].bias;
    }
    for (const auto& e : extra) {
        if (e.layer >= net.num_layers()) fail(ErrorCode::DimensionMismatch, "extra gradient layer out of range");
    }
}

}  // namespace adareg
