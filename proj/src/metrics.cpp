#include "aid/metrics.hpp"

#include <cmath>

namespace aid {

Vector normalized_activation_scores(const Matrix& post)
{
    if (post.rows() == 0 || post.cols() == 0)
        throw std::invalid_argument("normalized_activation_scores: empty layer");
    const Vector mean_abs = post.cwiseAbs().colwise().mean().transpose();
    const double layer_mean = mean_abs.mean();
    if (!(layer_mean > 0.0))
        return Vector::Zero(mean_abs.size());
    return mean_abs / layer_mean;
}

double dormant_ratio(std::span<const Matrix> postactivations, double tau)
{
    if (postactivations.empty())
        throw std::invalid_argument("dormant_ratio: need at least one hidden layer");
    if (!(tau >= 0.0))
        throw std::invalid_argument("dormant_ratio: tau must be non-negative");
    std::size_t dormant = 0, total = 0;
    for (const Matrix& layer : postactivations) {
        const Vector scores = normalized_activation_scores(layer);
        dormant += static_cast<std::size_t>((scores.array() <= tau).count());
        total += static_cast<std::size_t>(scores.size());
    }
    return double(dormant) / double(total);
}

double avg_sign_entropy(std::span<const Matrix> preactivations)
{
    double sum = 0.0;
    std::size_t units = 0;
    for (const Matrix& layer : preactivations) {
        if (layer.rows() == 0)
            throw std::invalid_argument("avg_sign_entropy: empty batch");
        const auto signs = layer.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
        sum += signs.colwise().mean().sum();
        units += static_cast<std::size_t>(layer.cols());
    }
    if (units == 0)
        throw std::invalid_argument("avg_sign_entropy: no units");
    return sum / double(units);
}

double sign_shannon_entropy(std::span<const Matrix> preactivations)
{
    double sum = 0.0;
    std::size_t units = 0;
    for (const Matrix& layer : preactivations) {
        if (layer.rows() == 0)
            throw std::invalid_argument("sign_shannon_entropy: empty batch");
        for (Eigen::Index j = 0; j < layer.cols(); ++j) {
            const double q = double((layer.col(j).array() > 0.0).count()) / double(layer.rows());
            if (q > 0.0 && q < 1.0)
                sum += -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q);
        }
        units += static_cast<std::size_t>(layer.cols());
    }
    if (units == 0)
        throw std::invalid_argument("sign_shannon_entropy: no units");
    return sum / double(units);
}

EffectiveRank effective_rank(const Matrix& features, double delta)
{
    if (features.size() == 0)
        throw std::invalid_argument("effective_rank: empty feature matrix");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("effective_rank: delta must lie in (0, 1)");
    const std::vector<double> sigma = singular_values(features);
    double total = 0.0;
    for (double s : sigma)
        total += s;
    if (!(total > 0.0))
        return {0, true};
    double running = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        running += sigma[k];
        if (running / total >= 1.0 - delta)
            return {k + 1, false};
    }
    return {sigma.size(), false};
}

double accuracy(const Matrix& logits, std::span<const int> labels)
{
    if (static_cast<std::size_t>(logits.rows()) != labels.size())
        throw std::invalid_argument("accuracy: label count does not match batch");
    if (labels.empty())
        throw std::invalid_argument("accuracy: empty batch");
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        if (!logits.row(i).allFinite())
            continue;
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        correct += best == labels[static_cast<std::size_t>(i)];
    }
    return double(correct) / double(labels.size());
}

} // namespace aid
