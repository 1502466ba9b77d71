// Activation and stochastic masking layers.
//
// Every elementwise kind is realised as y = x * mask, where the mask holds the
// multiplier actually applied (0/1 for the dropout family, a sampled slope for
// RReLU, a deterministic slope in eval mode). The backward pass of an
// elementwise kind is therefore grad * mask. CReLU and Fourier double the
// feature width and keep their input for the exact Jacobian product instead.
#ifndef AID_ACTIVATIONS_HPP
#define AID_ACTIVATIONS_HPP

#include "aid/numkit.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace aid {

enum class Mode { Train, Eval };

/**
 * Half-open intervals [b_{j-1}, b_j) covering the real line, built from k-1
 * strictly increasing boundaries, with one drop probability per interval.
 */
class IntervalScheme {
public:
    IntervalScheme(std::vector<double> boundaries, std::vector<double> drop_probs);

    /// Two intervals split at zero: drop rate `drop_neg` below, `drop_pos` at/above.
    static IntervalScheme split_at_zero(double drop_neg, double drop_pos);

    std::size_t interval_of(double x) const;
    double drop_prob_of(double x) const { return drop_probs_[interval_of(x)]; }

    std::span<const double> boundaries() const { return boundaries_; }
    std::span<const double> drop_probs() const { return drop_probs_; }
    std::size_t size() const { return drop_probs_.size(); }

private:
    std::vector<double> boundaries_;
    std::vector<double> drop_probs_;
};

namespace act {
struct Identity {};
struct ReLU {};
struct NegReLU {};
struct ModLeakyReLU { double alpha; };
/// Simplified AID: positives kept with probability p, negatives with 1-p.
struct AID { double p; };
struct AIDGeneral { IntervalScheme scheme; };
/// Drop rate p_pos on [0, inf) and q_neg on (-inf, 0).
struct AIDpq { double p_pos; double q_neg; };
struct Dropout { double p; };
struct DropReLU { double p; };
struct RReLU { double lower; double upper; };
struct CReLU {};
struct Fourier {};
} // namespace act

using ActivationSpec = std::variant<act::Identity, act::ReLU, act::NegReLU, act::ModLeakyReLU,
                                    act::AID, act::AIDGeneral, act::AIDpq, act::Dropout,
                                    act::DropReLU, act::RReLU, act::CReLU, act::Fourier>;

/// Throws std::invalid_argument for out-of-range probabilities or bounds.
void validate(const ActivationSpec& spec);

/// Canonical text form, e.g. "aid 0.9" or "rrelu 0.125 0.333"; lossless for doubles.
std::string to_string(const ActivationSpec& spec);
/// Inverse of to_string. Throws std::invalid_argument on malformed text.
ActivationSpec parse_activation(const std::string& text);

/// True for CReLU and Fourier, whose output is twice as wide as the input.
bool doubles_width(const ActivationSpec& spec);

/// True when train-mode forward draws from the generator.
bool is_stochastic(const ActivationSpec& spec);

enum class CacheKind { Elementwise, CReLU, Fourier };

struct MaskCache {
    Mode mode = Mode::Eval;
    CacheKind kind = CacheKind::Elementwise;
    Matrix mask;  // Elementwise: multiplier applied per entry
    Matrix input; // CReLU / Fourier: the forward input
};

struct ActivationOutput {
    Matrix y;
    MaskCache cache;
};

// Deterministic rectifiers. neg_relu is -relu(-x).
Matrix relu(const Matrix& x);
Matrix neg_relu(const Matrix& x);
/// r_alpha: positive side times alpha, negative side times (1 - alpha).
Matrix mod_leaky_relu(const Matrix& x, double alpha);
double mod_leaky_relu(double x, double alpha);

ActivationOutput aid_general_forward(const Matrix& x, const IntervalScheme& scheme, Mode mode,
                                     Rng& rng);
ActivationOutput aid_forward(const Matrix& x, double p, Mode mode, Rng& rng);
ActivationOutput aid_pq_forward(const Matrix& x, double p_pos, double q_neg, Mode mode, Rng& rng);
ActivationOutput dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng);
ActivationOutput droprelu_forward(const Matrix& x, double p, Mode mode, Rng& rng);
ActivationOutput rrelu_forward(const Matrix& x, double lower, double upper, Mode mode, Rng& rng);
ActivationOutput crelu_forward(const Matrix& x);
ActivationOutput fourier_forward(const Matrix& x);

/// Dispatches on the spec. Eval mode never touches `rng`.
ActivationOutput activation_forward(const Matrix& x, const ActivationSpec& spec, Mode mode,
                                    Rng& rng);

/// Replays a train-mode forward with the masks held in `frozen`.
ActivationOutput activation_replay(const Matrix& x, const MaskCache& frozen);

Matrix activation_backward(const Matrix& grad_y, const MaskCache& cache);

// Per-element multipliers. A stochastic elementwise kind draws one Bernoulli
// bit per entry and applies the multiplier returned here; the forward kernels
// call these, and the theory checks enumerate both bit values through them.
namespace element {
double aid_mask(double x, bool relu_branch);            // simplified AID, bit ~ Ber(p)
double interval_mask(bool kept);                        // general AID, bit ~ Ber(1 - p_j)
double dropout_mask(bool kept, double p);               // bit ~ Ber(1 - p), inverted scaling
double droprelu_mask(double x, bool relu_branch);       // bit ~ Ber(p)
/// 1 / (1 - p): the inverted-dropout scale.
double inverted_scale(double p);
} // namespace element

} // namespace aid

#endif // AID_ACTIVATIONS_HPP
