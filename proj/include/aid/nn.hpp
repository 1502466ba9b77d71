// Multilayer perceptron built from linear layers and activation pipelines,
// with explicit per-layer caches for the backward pass.
#ifndef AID_NN_HPP
#define AID_NN_HPP

#include "aid/activations.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace aid {

struct LinearLayer {
    Matrix weight;  // out x in
    Matrix bias;    // 1 x out
    Matrix initial_weight;
    Matrix initial_bias;

    Eigen::Index fan_in() const { return weight.cols(); }
    Eigen::Index fan_out() const { return weight.rows(); }
    std::size_t parameter_count() const
    {
        return static_cast<std::size_t>(weight.size() + bias.size());
    }
};

/// He (Kaiming) normal init: W ~ N(0, 2 / fan_in), b = 0. Snapshots the initial values.
LinearLayer he_init(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

/// Activation stages applied, in order, after every hidden linear layer.
using ActivationPipeline = std::vector<ActivationSpec>;

struct NetworkConfig {
    Eigen::Index inputs = 0;
    std::vector<Eigen::Index> hidden; // widths before any width-matching adjustment
    Eigen::Index outputs = 0;
    ActivationPipeline activation{act::ReLU{}};
    /// For width-doubling activations, shrink hidden widths so the parameter
    /// count stays close to the plain-width network.
    bool match_parameters = true;
};

class Network {
public:
    std::vector<LinearLayer> layers; // hidden layers followed by the logits layer
    ActivationPipeline activation;

    std::size_t hidden_count() const { return layers.size() - 1; }
    std::size_t parameter_count() const;
    Eigen::Index inputs() const { return layers.front().fan_in(); }
    Eigen::Index outputs() const { return layers.back().fan_out(); }

    /// Bumped by anything that mutates parameters; traces from earlier generations are stale.
    std::uint64_t generation() const { return generation_; }
    void touch() { ++generation_; }

private:
    std::uint64_t generation_ = 0;
};

/// Hidden widths actually used by make_network for `cfg`.
std::vector<Eigen::Index> effective_hidden_widths(const NetworkConfig& cfg);

Network make_network(const NetworkConfig& cfg, Rng& rng);

struct HiddenTrace {
    Matrix input;          // input to the linear layer
    Matrix preactivation;  // input * W^T + b
    Matrix postactivation; // output of the activation pipeline
    std::vector<MaskCache> caches;
};

struct ForwardTrace {
    Mode mode = Mode::Eval;
    std::uint64_t generation = 0;
    std::vector<HiddenTrace> hidden;
    Matrix logits_input;
    Matrix logits;
};

/// Full forward pass; train mode draws masks from `rng`, eval mode never does.
ForwardTrace forward(const Network& net, const Matrix& x, Mode mode, Rng& rng);

/// Forward pass that reuses the masks recorded in `reference` (same batch shape).
ForwardTrace forward_frozen(const Network& net, const Matrix& x, const ForwardTrace& reference);

struct LayerGrad {
    Matrix weight;
    Matrix bias;
};
using Gradients = std::vector<LayerGrad>;

/// Exact gradients of the (mask-frozen) computation recorded in `trace`.
Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& grad_logits);

struct LossResult {
    double loss = 0.0;
    Matrix grad; // d loss / d input, same shape as the input
};

/// Mean softmax cross-entropy over the batch.
LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Mean over the batch of the per-sample squared error ||pred - target||^2.
LossResult mse(const Matrix& pred, const Matrix& target);

/// Text checkpoint: dims, activation pipeline, W, b, W0, b0 at 17 significant digits.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

} // namespace aid

#endif // AID_NN_HPP
