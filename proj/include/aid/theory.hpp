// Numerical certificates for the linear-regularisation bound of simplified
// AID on bias-free two-layer networks, the exact identity behind it, the
// ReLU + Dropout counterpart, the per-element equivalences between AID and
// ReLU / Dropout / DropReLU, and the He-initialisation moments.
//
// Expectations over masks are computed by summing all 2^n mask outcomes, so
// every check except the He-init one is deterministic.
#ifndef AID_THEORY_HPP
#define AID_THEORY_HPP

#include "aid/numkit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aid::theory {

inline constexpr int kMaxEnumerationWidth = 16;

/// Bias-free n x n two-layer instance: loss ||W2 act(W1 x) - y||^2.
struct TwoLayerInstance {
    Matrix w1;
    Matrix w2;
    Vector x;
    Vector y;
    double p = 0.5;

    int width() const { return static_cast<int>(x.size()); }
    /// Throws std::invalid_argument when shapes, width or p are out of range.
    void validate() const;
};

/**
 * Entries of W1, W2, x, y ~ N(0, 1); x is redrawn until every |(W1 x)_i| >= 1e-6
 * so the sign pattern of the hidden preactivation is unambiguous.
 */
TwoLayerInstance random_instance(int n, double p, Rng& rng);

/// E ||W2 AID_p(W1 x) - y||^2 over all 2^n branch patterns (r w.p. p, r-bar w.p. 1-p).
double exact_expected_aid_loss(const TwoLayerInstance& inst);

/// Same expectation via the interval form: unit kept w.p. p if v_i >= 0, else 1-p.
double exact_expected_aid_loss_interval_form(const TwoLayerInstance& inst);

/// Monte Carlo estimate of exact_expected_aid_loss with its standard error.
struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};
MonteCarloEstimate sampled_expected_aid_loss(const TwoLayerInstance& inst, std::size_t samples,
                                             Rng& rng);

struct BoundComponents {
    double leaky_loss = 0.0;     // ||W2 r_p(W1 x) - y||^2
    double linearity_gap = 0.0;  // ||W2 (W1 x / 2) - W2 r_p(W1 x)||^2
    double coefficient = 0.0;    // 4 p (1 - p) / (n (2p - 1)^2)

    double rhs() const { return leaky_loss + coefficient * linearity_gap; }
};

/// Right-hand-side pieces of the bound. Throws std::domain_error at p = 0.5.
BoundComponents rhs_components(const TwoLayerInstance& inst);

/// |E loss - ||W2 S_p v - y||^2 - p(1-p) ||W2 (I - 2D) diag(v)||_F^2| / max(1, |E loss|).
double verify_exact_identity(const TwoLayerInstance& inst);

/// E ||W2 (1/(1-p)) (I - P) r(W1 x) - y||^2 with P the Bernoulli(p) drop mask.
double exact_expected_dropout_relu_loss(const TwoLayerInstance& inst);

/// ||W2 r(W1 x) - y||^2 + p / (n (1 - p)) ||W2 r(W1 x)||^2.
double dropout_relu_lower_bound(const TwoLayerInstance& inst);

struct SuiteReport {
    std::string name;
    std::size_t trials = 0;
    std::string statistic; // what `value` holds, e.g. "min_slack"
    double value = 0.0;
    std::size_t violations = 0;
    bool passed = false;

    /// One machine-readable line: name, trials, statistic=value, violations, PASS/FAIL.
    std::string line() const;
};

struct TheoremOptions {
    std::size_t trials = 1000;
    int n_min = 2;
    int n_max = 6;
    std::vector<double> p_values{0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9};
    double tolerance = 1e-9;
    std::uint64_t seed = 0;
};

/// Exact LHS >= RHS - tol * max(1, |LHS|) on random instances; reports the
/// minimum relative slack (LHS - RHS) / max(1, |LHS|).
SuiteReport verify_theorem1(const TheoremOptions& opts);

/// Max identity residual over random instances; p drawn from {0, 0.5, 1} and U(0, 1).
SuiteReport verify_identity_suite(std::size_t trials, std::uint64_t seed, double tolerance = 1e-9);

/// ReLU + Dropout bound on random instances, n in {2..5}, p ~ U(0.05, 0.95).
SuiteReport verify_corollary1(std::size_t trials, std::uint64_t seed, double tolerance = 1e-9);

/**
 * Branch form versus interval form of simplified AID: exact per-element
 * outcome distributions (zero tolerance) and expected two-layer losses (1e-12).
 */
SuiteReport verify_property2(std::size_t trials, std::uint64_t seed);

/**
 * AID_{0,1} = ReLU, AID_{p,p}/(1-p) = Dropout_p, AID_{p,1}/(1-p) = Dropout_p o ReLU,
 * AID_{0,p} = DropReLU_p, as exact per-element outcome distributions.
 */
SuiteReport verify_relations(std::size_t trials, std::uint64_t seed);

struct HeInitOptions {
    std::vector<double> p_values{0.1, 0.5, 0.9};
    std::size_t samples = 1000000;
    double moment_tolerance = 0.02;     // relative, on E[AID_p(y)^2] = 1/2
    double derivative_tolerance = 0.01; // relative, on P(AID_p'(y) = 1) = 1/2
    std::uint64_t seed = 0;
};

struct HeInitRow {
    double p = 0.0;
    double second_moment = 0.0;
    double derivative_one = 0.0;
};

/// Monte Carlo of E[AID_p(y)^2] and P(AID_p'(y) = 1) for y ~ N(0, 1).
SuiteReport verify_he_init(const HeInitOptions& opts, std::vector<HeInitRow>* rows = nullptr);

/// Probability of an outcome as an affine polynomial a + b p with integer
/// coefficients, so merged distributions compare exactly.
struct SymbolicProb {
    long constant = 0;
    long slope = 0;
    bool operator==(const SymbolicProb&) const = default;
};

struct Outcome {
    double value = 0.0;
    SymbolicProb prob;
};

/// Merges equal values, drops zero-probability outcomes, sorts by value.
std::vector<Outcome> normalize(std::vector<Outcome> outcomes);
bool same_distribution(const std::vector<Outcome>& a, const std::vector<Outcome>& b);

} // namespace aid::theory

#endif // AID_THEORY_HPP
