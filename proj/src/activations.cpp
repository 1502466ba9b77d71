#include "aid/activations.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace aid {

namespace {

void require_probability(double p, const char* what)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(std::string(what) + ": probability " + std::to_string(p) +
                                    " outside [0, 1]");
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// y = x * mask with the mask computed entrywise.
template <typename MaskFn>
ActivationOutput elementwise(const Matrix& x, Mode mode, MaskFn&& mask_of)
{
    ActivationOutput out;
    out.cache.mode = mode;
    out.cache.kind = CacheKind::Elementwise;
    out.cache.mask.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out.cache.mask.data()[i] = mask_of(x.data()[i]);
    out.y = x.cwiseProduct(out.cache.mask);
    return out;
}

} // namespace

IntervalScheme::IntervalScheme(std::vector<double> boundaries, std::vector<double> drop_probs)
    : boundaries_(std::move(boundaries)), drop_probs_(std::move(drop_probs))
{
    if (drop_probs_.size() != boundaries_.size() + 1)
        throw std::invalid_argument("IntervalScheme: need exactly one more probability than boundaries");
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
        if (!std::isfinite(boundaries_[i]))
            throw std::invalid_argument("IntervalScheme: boundaries must be finite");
        if (i > 0 && !(boundaries_[i - 1] < boundaries_[i]))
            throw std::invalid_argument("IntervalScheme: boundaries must be strictly increasing");
    }
    for (double p : drop_probs_)
        require_probability(p, "IntervalScheme");
}

IntervalScheme IntervalScheme::split_at_zero(double drop_neg, double drop_pos)
{
    return IntervalScheme({0.0}, {drop_neg, drop_pos});
}

std::size_t IntervalScheme::interval_of(double x) const
{
    // Number of boundaries <= x: [l, u) puts a value equal to a boundary in the upper interval.
    return static_cast<std::size_t>(
        std::upper_bound(boundaries_.begin(), boundaries_.end(), x) - boundaries_.begin());
}

void validate(const ActivationSpec& spec)
{
    std::visit(overloaded{
                   [](const act::AID& a) { require_probability(a.p, "aid"); },
                   [](const act::AIDpq& a) {
                       require_probability(a.p_pos, "aid_pq");
                       require_probability(a.q_neg, "aid_pq");
                   },
                   [](const act::Dropout& a) {
                       require_probability(a.p, "dropout");
                       if (a.p >= 1.0)
                           throw std::invalid_argument("dropout: p == 1 drops everything");
                   },
                   [](const act::DropReLU& a) { require_probability(a.p, "droprelu"); },
                   [](const act::RReLU& a) {
                       if (!(0.0 <= a.lower && a.lower <= a.upper && a.upper <= 1.0))
                           throw std::invalid_argument("rrelu: need 0 <= lower <= upper <= 1");
                   },
                   [](const act::ModLeakyReLU& a) {
                       if (!std::isfinite(a.alpha))
                           throw std::invalid_argument("leaky: alpha must be finite");
                   },
                   [](const auto&) {},
               },
               spec);
}

std::string to_string(const ActivationSpec& spec)
{
    return std::visit(
        overloaded{
            [](const act::Identity&) -> std::string { return "identity"; },
            [](const act::ReLU&) -> std::string { return "relu"; },
            [](const act::NegReLU&) -> std::string { return "negrelu"; },
            [](const act::ModLeakyReLU& a) { return "leaky " + fmt(a.alpha); },
            [](const act::AID& a) { return "aid " + fmt(a.p); },
            [](const act::AIDGeneral& a) {
                std::string s = "aid_general";
                s += " " + std::to_string(a.scheme.boundaries().size());
                for (double b : a.scheme.boundaries())
                    s += " " + fmt(b);
                for (double p : a.scheme.drop_probs())
                    s += " " + fmt(p);
                return s;
            },
            [](const act::AIDpq& a) { return "aid_pq " + fmt(a.p_pos) + " " + fmt(a.q_neg); },
            [](const act::Dropout& a) { return "dropout " + fmt(a.p); },
            [](const act::DropReLU& a) { return "droprelu " + fmt(a.p); },
            [](const act::RReLU& a) { return "rrelu " + fmt(a.lower) + " " + fmt(a.upper); },
            [](const act::CReLU&) -> std::string { return "crelu"; },
            [](const act::Fourier&) -> std::string { return "fourier"; },
        },
        spec);
}

ActivationSpec parse_activation(const std::string& text)
{
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    auto number = [&]() {
        std::string tok;
        if (!(in >> tok))
            throw std::invalid_argument("activation '" + text + "': missing parameter");
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size())
            throw std::invalid_argument("activation '" + text + "': bad number '" + tok + "'");
        return v;
    };

    ActivationSpec spec;
    if (kind == "identity")
        spec = act::Identity{};
    else if (kind == "relu")
        spec = act::ReLU{};
    else if (kind == "negrelu")
        spec = act::NegReLU{};
    else if (kind == "leaky")
        spec = act::ModLeakyReLU{number()};
    else if (kind == "aid")
        spec = act::AID{number()};
    else if (kind == "aid_general") {
        const auto nb = static_cast<std::size_t>(number());
        std::vector<double> bounds(nb), probs(nb + 1);
        for (auto& b : bounds)
            b = number();
        for (auto& p : probs)
            p = number();
        spec = act::AIDGeneral{IntervalScheme(std::move(bounds), std::move(probs))};
    } else if (kind == "aid_pq") {
        const double p = number();
        spec = act::AIDpq{p, number()};
    } else if (kind == "dropout")
        spec = act::Dropout{number()};
    else if (kind == "droprelu")
        spec = act::DropReLU{number()};
    else if (kind == "rrelu") {
        const double lo = number();
        spec = act::RReLU{lo, number()};
    } else if (kind == "crelu")
        spec = act::CReLU{};
    else if (kind == "fourier")
        spec = act::Fourier{};
    else
        throw std::invalid_argument("unknown activation '" + kind + "'");

    std::string rest;
    if (in >> rest)
        throw std::invalid_argument("activation '" + text + "': trailing text");
    validate(spec);
    return spec;
}

bool doubles_width(const ActivationSpec& spec)
{
    return std::holds_alternative<act::CReLU>(spec) || std::holds_alternative<act::Fourier>(spec);
}

bool is_stochastic(const ActivationSpec& spec)
{
    return std::holds_alternative<act::AID>(spec) || std::holds_alternative<act::AIDGeneral>(spec) ||
           std::holds_alternative<act::AIDpq>(spec) || std::holds_alternative<act::Dropout>(spec) ||
           std::holds_alternative<act::DropReLU>(spec) || std::holds_alternative<act::RReLU>(spec);
}

namespace element {

double aid_mask(double x, bool relu_branch)
{
    // r keeps [0, inf), r-bar keeps (-inf, 0).
    return (x >= 0.0) == relu_branch ? 1.0 : 0.0;
}

double interval_mask(bool kept) { return kept ? 1.0 : 0.0; }

double inverted_scale(double p) { return 1.0 / (1.0 - p); }

double dropout_mask(bool kept, double p) { return kept ? inverted_scale(p) : 0.0; }

double droprelu_mask(double x, bool relu_branch)
{
    if (!relu_branch)
        return 1.0;
    return x >= 0.0 ? 1.0 : 0.0;
}

} // namespace element

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix neg_relu(const Matrix& x) { return -relu(-x); }

double mod_leaky_relu(double x, double alpha) { return x * (x >= 0.0 ? alpha : 1.0 - alpha); }

Matrix mod_leaky_relu(const Matrix& x, double alpha)
{
    return x.unaryExpr([alpha](double v) { return mod_leaky_relu(v, alpha); });
}

ActivationOutput aid_general_forward(const Matrix& x, const IntervalScheme& scheme, Mode mode,
                                     Rng& rng)
{
    if (mode == Mode::Eval)
        return elementwise(x, mode, [&](double v) { return 1.0 - scheme.drop_prob_of(v); });
    return elementwise(x, mode, [&](double v) {
        return element::interval_mask(rng.bernoulli(1.0 - scheme.drop_prob_of(v)));
    });
}

ActivationOutput aid_forward(const Matrix& x, double p, Mode mode, Rng& rng)
{
    require_probability(p, "aid");
    if (mode == Mode::Eval)
        return elementwise(x, mode, [p](double v) { return v >= 0.0 ? p : 1.0 - p; });
    return elementwise(x, mode, [&](double v) { return element::aid_mask(v, rng.bernoulli(p)); });
}

ActivationOutput aid_pq_forward(const Matrix& x, double p_pos, double q_neg, Mode mode, Rng& rng)
{
    return aid_general_forward(x, IntervalScheme::split_at_zero(q_neg, p_pos), mode, rng);
}

ActivationOutput dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng)
{
    validate(act::Dropout{p});
    if (mode == Mode::Eval)
        return elementwise(x, mode, [](double) { return 1.0; });
    return elementwise(x, mode,
                       [&](double) { return element::dropout_mask(rng.bernoulli(1.0 - p), p); });
}

ActivationOutput droprelu_forward(const Matrix& x, double p, Mode mode, Rng& rng)
{
    require_probability(p, "droprelu");
    if (mode == Mode::Eval)
        return elementwise(x, mode, [p](double v) { return v >= 0.0 ? 1.0 : 1.0 - p; });
    return elementwise(x, mode,
                       [&](double v) { return element::droprelu_mask(v, rng.bernoulli(p)); });
}

ActivationOutput rrelu_forward(const Matrix& x, double lower, double upper, Mode mode, Rng& rng)
{
    validate(act::RReLU{lower, upper});
    if (mode == Mode::Eval) {
        const double slope = 0.5 * (lower + upper);
        return elementwise(x, mode, [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
    }
    return elementwise(x, mode, [&](double v) {
        const double slope = rng.uniform(lower, upper);
        return v >= 0.0 ? 1.0 : slope;
    });
}

ActivationOutput crelu_forward(const Matrix& x)
{
    ActivationOutput out;
    out.cache.kind = CacheKind::CReLU;
    out.cache.input = x;
    out.y.resize(x.rows(), 2 * x.cols());
    out.y.leftCols(x.cols()) = relu(x);
    out.y.rightCols(x.cols()) = relu(-x);
    return out;
}

ActivationOutput fourier_forward(const Matrix& x)
{
    ActivationOutput out;
    out.cache.kind = CacheKind::Fourier;
    out.cache.input = x;
    out.y.resize(x.rows(), 2 * x.cols());
    out.y.leftCols(x.cols()) = x.array().sin().matrix();
    out.y.rightCols(x.cols()) = x.array().cos().matrix();
    return out;
}

ActivationOutput activation_forward(const Matrix& x, const ActivationSpec& spec, Mode mode,
                                    Rng& rng)
{
    ActivationOutput out = std::visit(
        overloaded{
            [&](const act::Identity&) {
                return elementwise(x, mode, [](double) { return 1.0; });
            },
            [&](const act::ReLU&) {
                return elementwise(x, mode, [](double v) { return v >= 0.0 ? 1.0 : 0.0; });
            },
            [&](const act::NegReLU&) {
                return elementwise(x, mode, [](double v) { return v >= 0.0 ? 0.0 : 1.0; });
            },
            [&](const act::ModLeakyReLU& a) {
                return elementwise(x, mode, [alpha = a.alpha](double v) {
                    return v >= 0.0 ? alpha : 1.0 - alpha;
                });
            },
            [&](const act::AID& a) { return aid_forward(x, a.p, mode, rng); },
            [&](const act::AIDGeneral& a) { return aid_general_forward(x, a.scheme, mode, rng); },
            [&](const act::AIDpq& a) { return aid_pq_forward(x, a.p_pos, a.q_neg, mode, rng); },
            [&](const act::Dropout& a) { return dropout_forward(x, a.p, mode, rng); },
            [&](const act::DropReLU& a) { return droprelu_forward(x, a.p, mode, rng); },
            [&](const act::RReLU& a) { return rrelu_forward(x, a.lower, a.upper, mode, rng); },
            [&](const act::CReLU&) { return crelu_forward(x); },
            [&](const act::Fourier&) { return fourier_forward(x); },
        },
        spec);
    out.cache.mode = mode;
    return out;
}

ActivationOutput activation_replay(const Matrix& x, const MaskCache& frozen)
{
    switch (frozen.kind) {
    case CacheKind::CReLU:
        return crelu_forward(x);
    case CacheKind::Fourier:
        return fourier_forward(x);
    case CacheKind::Elementwise:
        break;
    }
    if (frozen.mask.rows() != x.rows() || frozen.mask.cols() != x.cols())
        throw std::invalid_argument("activation_replay: mask shape does not match input");
    ActivationOutput out;
    out.cache = frozen;
    out.y = x.cwiseProduct(frozen.mask);
    return out;
}

Matrix activation_backward(const Matrix& grad_y, const MaskCache& cache)
{
    switch (cache.kind) {
    case CacheKind::Elementwise:
        if (grad_y.rows() != cache.mask.rows() || grad_y.cols() != cache.mask.cols())
            throw std::invalid_argument("activation_backward: gradient shape does not match cache");
        return grad_y.cwiseProduct(cache.mask);
    case CacheKind::CReLU:
    case CacheKind::Fourier:
        break;
    }
    const Matrix& x = cache.input;
    const Eigen::Index n = x.cols();
    if (grad_y.rows() != x.rows() || grad_y.cols() != 2 * n)
        throw std::invalid_argument("activation_backward: gradient shape does not match cache");
    const auto g_first = grad_y.leftCols(n).array();
    const auto g_second = grad_y.rightCols(n).array();
    if (cache.kind == CacheKind::CReLU) {
        const auto pos = (x.array() > 0.0).cast<double>();
        const auto neg = (x.array() < 0.0).cast<double>();
        return (g_first * pos - g_second * neg).matrix();
    }
    return (g_first * x.array().cos() - g_second * x.array().sin()).matrix();
}

} // namespace aid
