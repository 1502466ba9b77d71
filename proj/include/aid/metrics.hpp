// Plasticity diagnostics computed from forward-trace snapshots.
#ifndef AID_METRICS_HPP
#define AID_METRICS_HPP

#include "aid/numkit.hpp"

#include <span>
#include <string>
#include <vector>

namespace aid {

struct MetricsRecord {
    std::size_t task = 0;
    std::size_t epoch = 0;
    std::string split = "train";
    double accuracy = 0.0;
    double dormant_ratio = 0.0;
    std::size_t srank = 0;
    double sign_entropy = 0.0;
    bool diverged = false; // not serialised

    bool operator==(const MetricsRecord&) const = default;
};

/**
 * Per-unit score E|h_i| / mean_k E|h_k| over the rows of `post`. A layer whose
 * mean activation is zero scores every unit 0, so all count as dormant.
 */
Vector normalized_activation_scores(const Matrix& post);

/// Fraction of hidden units, across all given layers, whose score is <= tau.
double dormant_ratio(std::span<const Matrix> postactivations, double tau = 0.0);

/// Mean over units of the batch-mean sign of the preactivation, sign(0) = 0.
double avg_sign_entropy(std::span<const Matrix> preactivations);

/// Companion diagnostic: mean over units of the binary entropy (bits) of P(h > 0).
double sign_shannon_entropy(std::span<const Matrix> preactivations);

struct EffectiveRank {
    std::size_t rank = 0;
    bool zero_mass = false; // all singular values zero; rank reported as 0
};

/// Smallest k whose leading singular values hold at least 1 - delta of the total mass.
EffectiveRank effective_rank(const Matrix& features, double delta = 0.01);

/// Fraction of rows whose arg-max logit equals the label; NaN rows count as wrong.
double accuracy(const Matrix& logits, std::span<const int> labels);

} // namespace aid

#endif // AID_METRICS_HPP
