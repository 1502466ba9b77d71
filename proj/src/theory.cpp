#include "aid/theory.hpp"

#include "aid/activations.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace aid::theory {

namespace {

constexpr double kBoundaryGap = 1e-6;

double relative(double diff, double scale) { return diff / std::max(1.0, std::abs(scale)); }

// Sum over all 2^n binary patterns of weight(pattern) * ||W2 (out(pattern)) - y||^2, where
// unit i contributes `value(i, bit)` with probability `prob(i, bit)`.
template <typename ValueFn, typename ProbFn>
double enumerate_expected_loss(const TwoLayerInstance& inst, ValueFn&& value, ProbFn&& prob)
{
    const int n = inst.width();
    const std::uint32_t patterns = 1u << n;
    Vector hidden(n);
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < patterns; ++mask) {
        double weight = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool bit = (mask >> i) & 1u;
            weight *= prob(i, bit);
            hidden(i) = value(i, bit);
        }
        if (weight == 0.0)
            continue;
        total += weight * (inst.w2 * hidden - inst.y).squaredNorm();
    }
    return total;
}

Vector preactivation(const TwoLayerInstance& inst) { return inst.w1 * inst.x; }

Vector leaky(const Vector& v, double p)
{
    return v.unaryExpr([p](double u) { return mod_leaky_relu(u, p); });
}

double scalar_relu(double u) { return relu(Matrix::Constant(1, 1, u))(0, 0); }
double scalar_neg_relu(double u) { return neg_relu(Matrix::Constant(1, 1, u))(0, 0); }

SymbolicProb sym_const(long c) { return {c, 0}; }
SymbolicProb sym_p() { return {0, 1}; }
SymbolicProb one_minus(SymbolicProb a) { return {1 - a.constant, -a.slope}; }

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

// Per-element distributions, built from the activation kernels' multipliers.
// `drop_pos` / `drop_neg` are symbolic in p; `p` is its numeric value.
std::vector<Outcome> aid_pq_outcomes(double u, SymbolicProb drop_pos, SymbolicProb drop_neg,
                                     double p, bool rescale)
{
    const SymbolicProb drop = u >= 0.0 ? drop_pos : drop_neg;
    const double scale = rescale ? element::inverted_scale(p) : 1.0;
    return {{u * element::interval_mask(true) * scale, one_minus(drop)},
            {u * element::interval_mask(false) * scale, drop}};
}

std::vector<Outcome> dropout_outcomes(double u, double p)
{
    return {{u * element::dropout_mask(true, p), one_minus(sym_p())},
            {u * element::dropout_mask(false, p), sym_p()}};
}

std::vector<Outcome> droprelu_outcomes(double u)
{
    return {{u * element::droprelu_mask(u, true), sym_p()},
            {u * element::droprelu_mask(u, false), one_minus(sym_p())}};
}

std::vector<Outcome> aid_branch_outcomes(double u)
{
    return {{scalar_relu(u), sym_p()}, {scalar_neg_relu(u), one_minus(sym_p())}};
}

std::vector<Outcome> aid_kernel_outcomes(double u)
{
    return {{u * element::aid_mask(u, true), sym_p()},
            {u * element::aid_mask(u, false), one_minus(sym_p())}};
}

// Scalars that exercise both signs, zero, and extreme magnitudes.
double draw_scalar(std::size_t trial, Rng& rng)
{
    static constexpr double specials[] = {0.0, -0.0, 1e-300, -1e-300, 1e300, -1e300, 1.0, -1.0};
    if (trial < std::size(specials))
        return specials[trial];
    return rng.normal() * std::exp(4.0 * rng.normal());
}

double draw_probability(std::size_t trial, Rng& rng)
{
    static constexpr double specials[] = {0.0, 1.0, 0.5, 0.1, 0.9};
    if (trial < std::size(specials))
        return specials[trial];
    return rng.uniform();
}

} // namespace

void TwoLayerInstance::validate() const
{
    const auto n = x.size();
    if (n < 1 || n > kMaxEnumerationWidth)
        throw std::invalid_argument("two-layer instance: width " + std::to_string(n) +
                                    " outside [1, " + std::to_string(kMaxEnumerationWidth) + "]");
    if (y.size() != n || w1.rows() != n || w1.cols() != n || w2.rows() != n || w2.cols() != n)
        throw std::invalid_argument("two-layer instance: W1, W2 must be n x n and x, y length n");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("two-layer instance: p outside [0, 1]");
}

TwoLayerInstance random_instance(int n, double p, Rng& rng)
{
    if (n < 1 || n > kMaxEnumerationWidth)
        throw std::invalid_argument("random_instance: width out of range");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("random_instance: p outside [0, 1]");
    const auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = rng.normal();
        return m;
    };
    TwoLayerInstance inst;
    inst.p = p;
    inst.w1 = draw(n, n);
    inst.w2 = draw(n, n);
    inst.y = draw(n, 1);
    do {
        inst.x = draw(n, 1);
    } while ((inst.w1 * inst.x).cwiseAbs().minCoeff() < kBoundaryGap);
    return inst;
}

double exact_expected_aid_loss(const TwoLayerInstance& inst)
{
    inst.validate();
    const Vector v = preactivation(inst);
    const double p = inst.p;
    // bit set: r branch (prob p), clear: r-bar branch (prob 1 - p)
    return enumerate_expected_loss(
        inst,
        [&](int i, bool bit) { return bit ? scalar_relu(v(i)) : scalar_neg_relu(v(i)); },
        [&](int, bool bit) { return bit ? p : 1.0 - p; });
}

double exact_expected_aid_loss_interval_form(const TwoLayerInstance& inst)
{
    inst.validate();
    const Vector v = preactivation(inst);
    const IntervalScheme scheme = IntervalScheme::split_at_zero(inst.p, 1.0 - inst.p);
    // bit set: unit kept, with probability 1 - (drop rate of its interval)
    return enumerate_expected_loss(
        inst, [&](int i, bool bit) { return v(i) * element::interval_mask(bit); },
        [&](int i, bool bit) {
            const double keep = 1.0 - scheme.drop_prob_of(v(i));
            return bit ? keep : 1.0 - keep;
        });
}

MonteCarloEstimate sampled_expected_aid_loss(const TwoLayerInstance& inst, std::size_t samples,
                                             Rng& rng)
{
    inst.validate();
    if (samples < 2)
        throw std::invalid_argument("sampled_expected_aid_loss: need at least two samples");
    const Matrix v = preactivation(inst).transpose(); // 1 x n
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const ActivationOutput out = aid_forward(v, inst.p, Mode::Train, rng);
        const double loss = (inst.w2 * out.y.transpose() - inst.y).squaredNorm();
        sum += loss;
        sum_sq += loss * loss;
    }
    const double n = double(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

BoundComponents rhs_components(const TwoLayerInstance& inst)
{
    inst.validate();
    if (inst.p == 0.5)
        throw std::domain_error(
            "rhs_components: coefficient is singular at p = 0.5; use verify_exact_identity");
    const Vector v = preactivation(inst);
    const Vector leaky_hidden = leaky(v, inst.p);
    const double p = inst.p;
    const double n = double(inst.width());
    BoundComponents c;
    c.leaky_loss = (inst.w2 * leaky_hidden - inst.y).squaredNorm();
    c.linearity_gap = (inst.w2 * (0.5 * v) - inst.w2 * leaky_hidden).squaredNorm();
    c.coefficient = 4.0 * p * (1.0 - p) / (n * (2.0 * p - 1.0) * (2.0 * p - 1.0));
    return c;
}

double verify_exact_identity(const TwoLayerInstance& inst)
{
    const double expected = exact_expected_aid_loss(inst);
    const Vector v = preactivation(inst);
    const double p = inst.p;
    const double leaky_loss = (inst.w2 * leaky(v, p) - inst.y).squaredNorm();
    // I - 2D has +1 where v <= 0 and -1 where v > 0.
    const Vector signs = v.unaryExpr([](double u) { return u > 0.0 ? -1.0 : 1.0; });
    const Matrix scaled = inst.w2 * signs.cwiseProduct(v).asDiagonal();
    const double variance_term = p * (1.0 - p) * scaled.squaredNorm();
    return relative(std::abs(expected - leaky_loss - variance_term), expected);
}

double exact_expected_dropout_relu_loss(const TwoLayerInstance& inst)
{
    inst.validate();
    if (!(inst.p < 1.0))
        throw std::invalid_argument("dropout after ReLU: p must be < 1");
    const Vector v = preactivation(inst);
    const double p = inst.p;
    // bit set: unit kept (prob 1 - p), rescaled by 1 / (1 - p)
    return enumerate_expected_loss(
        inst, [&](int i, bool bit) { return scalar_relu(v(i)) * element::dropout_mask(bit, p); },
        [&](int, bool bit) { return bit ? 1.0 - p : p; });
}

double dropout_relu_lower_bound(const TwoLayerInstance& inst)
{
    inst.validate();
    const Vector r = preactivation(inst).cwiseMax(0.0);
    const double p = inst.p;
    const double n = double(inst.width());
    return (inst.w2 * r - inst.y).squaredNorm() + p / (n * (1.0 - p)) * (inst.w2 * r).squaredNorm();
}

std::string SuiteReport::line() const
{
    return name + " trials=" + std::to_string(trials) + " " + statistic + "=" + fmt(value) +
           " violations=" + std::to_string(violations) + " " + (passed ? "PASS" : "FAIL");
}

SuiteReport verify_theorem1(const TheoremOptions& opts)
{
    if (opts.n_min < 1 || opts.n_max < opts.n_min || opts.n_max > kMaxEnumerationWidth)
        throw std::invalid_argument("verify_theorem1: bad width range");
    if (opts.p_values.empty())
        throw std::invalid_argument("verify_theorem1: no p values");
    for (double p : opts.p_values)
        if (std::abs(p - 0.5) <= 0.05 || p < 0.0 || p > 1.0)
            throw std::invalid_argument("verify_theorem1: p values must avoid 0.5 +/- 0.05");

    SuiteReport report{"theorem1", opts.trials, "min_slack", INFINITY, 0, false};
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        Rng rng(opts.seed + trial);
        const int n = opts.n_min + static_cast<int>(rng.below(std::uint64_t(opts.n_max - opts.n_min + 1)));
        const double p = opts.p_values[rng.below(opts.p_values.size())];
        const TwoLayerInstance inst = random_instance(n, p, rng);
        const double lhs = exact_expected_aid_loss(inst);
        const double slack = relative(lhs - rhs_components(inst).rhs(), lhs);
        report.value = std::min(report.value, slack);
        report.violations += slack < -opts.tolerance;
    }
    report.passed = report.violations == 0;
    return report;
}

SuiteReport verify_identity_suite(std::size_t trials, std::uint64_t seed, double tolerance)
{
    SuiteReport report{"identity", trials, "max_residual", 0.0, 0, false};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(seed + trial);
        const int n = 2 + static_cast<int>(rng.below(5));
        const double p = draw_probability(trial % 3 == 0 ? trial / 3 % 3 : 99, rng);
        const double residual = verify_exact_identity(random_instance(n, p, rng));
        report.value = std::max(report.value, residual);
        report.violations += !(residual <= tolerance);
    }
    report.passed = report.violations == 0;
    return report;
}

SuiteReport verify_corollary1(std::size_t trials, std::uint64_t seed, double tolerance)
{
    SuiteReport report{"corollary1", trials, "min_slack", INFINITY, 0, false};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(seed + trial);
        const int n = 2 + static_cast<int>(rng.below(4));
        const double p = rng.uniform(0.05, 0.95);
        const TwoLayerInstance inst = random_instance(n, p, rng);
        const double lhs = exact_expected_dropout_relu_loss(inst);
        const double slack = relative(lhs - dropout_relu_lower_bound(inst), lhs);
        report.value = std::min(report.value, slack);
        report.violations += slack < -tolerance;
    }
    report.passed = report.violations == 0;
    return report;
}

std::vector<Outcome> normalize(std::vector<Outcome> outcomes)
{
    std::sort(outcomes.begin(), outcomes.end(),
              [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
    std::vector<Outcome> merged;
    for (const Outcome& o : outcomes) {
        if (!merged.empty() && merged.back().value == o.value) {
            merged.back().prob.constant += o.prob.constant;
            merged.back().prob.slope += o.prob.slope;
        } else {
            merged.push_back(o);
        }
    }
    std::erase_if(merged, [](const Outcome& o) { return o.prob == SymbolicProb{}; });
    return merged;
}

bool same_distribution(const std::vector<Outcome>& a, const std::vector<Outcome>& b)
{
    const auto na = normalize(a);
    const auto nb = normalize(b);
    if (na.size() != nb.size())
        return false;
    for (std::size_t i = 0; i < na.size(); ++i)
        if (!(na[i].value == nb[i].value) || !(na[i].prob == nb[i].prob))
            return false;
    return true;
}

SuiteReport verify_property2(std::size_t trials, std::uint64_t seed)
{
    SuiteReport report{"property2", trials, "max_loss_gap", 0.0, 0, false};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(seed + trial);
        const double u = draw_scalar(trial, rng);

        // Interval form of AID_p: drop 1 - p at/above zero, p below.
        const auto interval = aid_pq_outcomes(u, one_minus(sym_p()), sym_p(), 0.0, false);
        const bool per_element = same_distribution(aid_branch_outcomes(u), interval) &&
                                 same_distribution(aid_kernel_outcomes(u), interval);

        const int n = 2 + static_cast<int>(rng.below(5));
        const TwoLayerInstance inst = random_instance(n, draw_probability(trial, rng), rng);
        const double branch = exact_expected_aid_loss(inst);
        const double gap =
            relative(std::abs(branch - exact_expected_aid_loss_interval_form(inst)), branch);
        report.value = std::max(report.value, gap);
        report.violations += !per_element || !(gap <= 1e-12);
    }
    report.passed = report.violations == 0;
    return report;
}

SuiteReport verify_relations(std::size_t trials, std::uint64_t seed)
{
    SuiteReport report{"relations", trials, "mismatches", 0.0, 0, false};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(seed + trial);
        const double u = draw_scalar(trial, rng);
        double p = draw_probability(trial, rng);
        if (p >= 1.0)
            p = 0.75; // Dropout needs p < 1

        const bool relu_ok = same_distribution(
            aid_pq_outcomes(u, sym_const(0), sym_const(1), p, false), {{scalar_relu(u), sym_const(1)}});
        const bool dropout_ok = same_distribution(aid_pq_outcomes(u, sym_p(), sym_p(), p, true),
                                                  dropout_outcomes(u, p));
        const bool dropout_relu_ok =
            same_distribution(aid_pq_outcomes(u, sym_p(), sym_const(1), p, true),
                              dropout_outcomes(scalar_relu(u), p));
        const bool droprelu_ok = same_distribution(
            aid_pq_outcomes(u, sym_const(0), sym_p(), p, false), droprelu_outcomes(u));

        const int failed = !relu_ok + !dropout_ok + !dropout_relu_ok + !droprelu_ok;
        report.violations += failed != 0;
        report.value += failed;
    }
    report.passed = report.violations == 0;
    return report;
}

SuiteReport verify_he_init(const HeInitOptions& opts, std::vector<HeInitRow>* rows)
{
    if (opts.samples < 100000)
        throw std::invalid_argument("verify_he_init: need at least 1e5 samples");
    SuiteReport report{"heinit", opts.samples, "max_rel_dev", 0.0, 0, false};
    constexpr Eigen::Index kChunk = 8192;
    for (std::size_t k = 0; k < opts.p_values.size(); ++k) {
        const double p = opts.p_values[k];
        Rng rng(opts.seed + k);
        double sum_sq = 0.0;
        std::size_t ones = 0;
        std::size_t done = 0;
        while (done < opts.samples) {
            const auto m = static_cast<Eigen::Index>(std::min<std::size_t>(kChunk, opts.samples - done));
            Matrix y(1, m);
            for (Eigen::Index i = 0; i < m; ++i)
                y(0, i) = rng.normal();
            const ActivationOutput out = aid_forward(y, p, Mode::Train, rng);
            sum_sq += out.y.squaredNorm();
            ones += static_cast<std::size_t>((out.cache.mask.array() == 1.0).count());
            done += static_cast<std::size_t>(m);
        }
        HeInitRow row{p, sum_sq / double(opts.samples), double(ones) / double(opts.samples)};
        const double moment_dev = std::abs(row.second_moment / 0.5 - 1.0);
        const double deriv_dev = std::abs(row.derivative_one / 0.5 - 1.0);
        report.value = std::max({report.value, moment_dev, deriv_dev});
        report.violations += (moment_dev > opts.moment_tolerance) +
                             (deriv_dev > opts.derivative_tolerance);
        if (rows)
            rows->push_back(row);
    }
    report.passed = report.violations == 0;
    return report;
}

} // namespace aid::theory
