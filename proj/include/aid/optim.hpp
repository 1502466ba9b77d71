// Optimisers, weight regularisers, and the between-task interventions.
#ifndef AID_OPTIM_HPP
#define AID_OPTIM_HPP

#include "aid/nn.hpp"

#include <vector>

namespace aid {

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

enum class RegularizerKind { None, L2, L2Init };

/// Regularisers contribute lambda * theta (L2) or lambda * (theta - theta0)
/// (L2 Init) to the gradient; they never enter the reported loss.
struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::None;
    double lambda = 0.0;
};

/// One parameter tensor as the optimiser sees it.
struct ParamView {
    Eigen::Ref<Matrix> value;
    Eigen::Ref<const Matrix> grad;
    Eigen::Ref<const Matrix> initial;
};

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg = {});

    const OptimizerConfig& config() const { return cfg_; }
    long step_count() const { return steps_; }

    /// Applies one update to every parameter in `params` (moment buffers are
    /// allocated on the first call and keyed by position).
    void step(std::span<ParamView> params, const RegularizerSpec& reg);

    /// Convenience overload for a whole network; marks the network as mutated.
    void step(Network& net, const Gradients& grads, const RegularizerSpec& reg);

    /// Drops moment buffers and the step counter.
    void reset();

private:
    OptimizerConfig cfg_;
    long steps_ = 0;
    std::vector<Matrix> first_moment_;
    std::vector<Matrix> second_moment_;
};

/// theta <- (1 - lambda) theta + lambda theta0 for every weight and bias.
void shrink_perturb(Network& net, double lambda);

struct RedoReport {
    std::vector<std::size_t> reset_per_layer;
    std::size_t total() const;
};

/**
 * Recycles tau-dormant hidden units, scored on an eval-mode pass over `batch`.
 * A recycled unit gets fresh He-initialised incoming weights, a zero bias, and
 * zeroed outgoing weights. For width-doubling activations a unit's score is
 * taken over both of its output columns.
 */
RedoReport redo_reset(Network& net, const Matrix& batch, double tau, Rng& rng);

} // namespace aid

#endif // AID_OPTIM_HPP
