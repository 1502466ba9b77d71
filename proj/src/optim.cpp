#include "aid/optim.hpp"

#include "aid/metrics.hpp"

#include <cmath>

namespace aid {

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg)
{
    if (!(cfg_.lr > 0.0))
        throw std::invalid_argument("optimizer: learning rate must be positive");
}

void Optimizer::reset()
{
    steps_ = 0;
    first_moment_.clear();
    second_moment_.clear();
}

void Optimizer::step(std::span<ParamView> params, const RegularizerSpec& reg)
{
    if (!(reg.lambda >= 0.0))
        throw std::invalid_argument("regularizer: lambda must be non-negative");
    if (cfg_.kind == OptimizerKind::Adam && first_moment_.size() != params.size()) {
        first_moment_.clear();
        second_moment_.clear();
        for (const auto& p : params) {
            first_moment_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
            second_moment_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        }
    }
    ++steps_;
    const double bias1 = 1.0 - std::pow(cfg_.beta1, double(steps_));
    const double bias2 = 1.0 - std::pow(cfg_.beta2, double(steps_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamView& p = params[i];
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
            p.initial.rows() != p.value.rows() || p.initial.cols() != p.value.cols())
            throw std::invalid_argument("optimizer: parameter/gradient shape mismatch");

        Matrix g = p.grad;
        switch (reg.kind) {
        case RegularizerKind::None:
            break;
        case RegularizerKind::L2:
            g += reg.lambda * p.value;
            break;
        case RegularizerKind::L2Init:
            g += reg.lambda * (p.value - p.initial);
            break;
        }

        if (cfg_.kind == OptimizerKind::SGD) {
            p.value -= cfg_.lr * g;
            continue;
        }
        Matrix& m = first_moment_[i];
        Matrix& v = second_moment_[i];
        if (m.rows() != g.rows() || m.cols() != g.cols())
            throw std::invalid_argument("optimizer: moment buffer shape mismatch");
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        p.value.array() -= cfg_.lr * (m.array() / bias1) /
                           ((v.array() / bias2).sqrt() + cfg_.eps);
    }
}

void Optimizer::step(Network& net, const Gradients& grads, const RegularizerSpec& reg)
{
    if (grads.size() != net.layers.size())
        throw std::invalid_argument("optimizer: gradient count does not match network");
    std::vector<ParamView> views;
    views.reserve(2 * net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        LinearLayer& layer = net.layers[l];
        views.push_back({layer.weight, grads[l].weight, layer.initial_weight});
        views.push_back({layer.bias, grads[l].bias, layer.initial_bias});
    }
    step(views, reg);
    net.touch();
}

void shrink_perturb(Network& net, double lambda)
{
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("shrink_perturb: lambda must lie in [0, 1]");
    for (auto& layer : net.layers) {
        layer.weight = (1.0 - lambda) * layer.weight + lambda * layer.initial_weight;
        layer.bias = (1.0 - lambda) * layer.bias + lambda * layer.initial_bias;
    }
    net.touch();
}

std::size_t RedoReport::total() const
{
    std::size_t sum = 0;
    for (auto n : reset_per_layer)
        sum += n;
    return sum;
}

RedoReport redo_reset(Network& net, const Matrix& batch, double tau, Rng& rng)
{
    if (!(tau >= 0.0))
        throw std::invalid_argument("redo_reset: tau must be non-negative");

    Rng unused(0);
    const ForwardTrace trace = forward(net, batch, Mode::Eval, unused);

    RedoReport report;
    for (std::size_t l = 0; l < net.hidden_count(); ++l) {
        LinearLayer& layer = net.layers[l];
        LinearLayer& next = net.layers[l + 1];
        const Eigen::Index units = layer.fan_out();
        const Matrix& post = trace.hidden[l].postactivation;
        const Eigen::Index copies = post.cols() / units;

        Matrix per_unit = Matrix::Zero(post.rows(), units);
        for (Eigen::Index c = 0; c < copies; ++c)
            per_unit += post.middleCols(c * units, units).cwiseAbs();
        const Vector scores = normalized_activation_scores(per_unit);

        std::size_t count = 0;
        const double stddev = std::sqrt(2.0 / double(layer.fan_in()));
        for (Eigen::Index i = 0; i < units; ++i) {
            if (scores(i) > tau)
                continue;
            ++count;
            for (Eigen::Index j = 0; j < layer.fan_in(); ++j)
                layer.weight(i, j) = stddev * rng.normal();
            layer.bias(0, i) = 0.0;
            for (Eigen::Index c = 0; c < copies; ++c)
                next.weight.col(c * units + i).setZero();
        }
        report.reset_per_layer.push_back(count);
    }
    net.touch();
    return report;
}

} // namespace aid
