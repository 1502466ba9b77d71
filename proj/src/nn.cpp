#include "aid/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace aid {

namespace {

int width_multiplier(const ActivationPipeline& pipeline)
{
    int m = 1;
    for (const auto& stage : pipeline)
        if (doubles_width(stage))
            m *= 2;
    return m;
}

std::size_t count_parameters(Eigen::Index inputs, std::span<const Eigen::Index> hidden,
                             Eigen::Index outputs, int multiplier)
{
    std::size_t total = 0;
    Eigen::Index fan_in = inputs;
    for (Eigen::Index h : hidden) {
        total += static_cast<std::size_t>((fan_in + 1) * h);
        fan_in = h * multiplier;
    }
    return total + static_cast<std::size_t>((fan_in + 1) * outputs);
}

Matrix affine(const Matrix& x, const LinearLayer& layer)
{
    Matrix z = x * layer.weight.transpose();
    z.rowwise() += layer.bias.row(0);
    return z;
}

void write_matrix(std::ostream& out, const Matrix& m)
{
    out << m.rows() << ' ' << m.cols() << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in)
{
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0)
        throw std::runtime_error("checkpoint: bad matrix header");
    Matrix m(rows, cols);
    std::string tok;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!(in >> tok))
            throw std::runtime_error("checkpoint: truncated matrix");
        m.data()[i] = std::stod(tok);
    }
    return m;
}

} // namespace

LinearLayer he_init(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng)
{
    if (fan_in <= 0 || fan_out <= 0)
        throw std::invalid_argument("he_init: dimensions must be positive");
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    LinearLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = stddev * rng.normal();
    layer.bias = Matrix::Zero(1, fan_out);
    layer.initial_weight = layer.weight;
    layer.initial_bias = layer.bias;
    return layer;
}

std::size_t Network::parameter_count() const
{
    std::size_t total = 0;
    for (const auto& layer : layers)
        total += layer.parameter_count();
    return total;
}

std::vector<Eigen::Index> effective_hidden_widths(const NetworkConfig& cfg)
{
    const int multiplier = width_multiplier(cfg.activation);
    if (multiplier == 1 || !cfg.match_parameters || cfg.hidden.empty())
        return cfg.hidden;

    const std::size_t target = count_parameters(cfg.inputs, cfg.hidden, cfg.outputs, 1);
    const Eigen::Index lead = cfg.hidden.front();
    std::vector<Eigen::Index> best = cfg.hidden;
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    // Scale every hidden width by the same factor k / lead and keep the closest count.
    for (Eigen::Index k = 1; k <= lead; ++k) {
        std::vector<Eigen::Index> trial;
        for (Eigen::Index h : cfg.hidden)
            trial.push_back(std::max<Eigen::Index>(
                1, static_cast<Eigen::Index>(std::llround(double(h) * double(k) / double(lead)))));
        const std::size_t count = count_parameters(cfg.inputs, trial, cfg.outputs, multiplier);
        const std::size_t gap = count > target ? count - target : target - count;
        if (gap < best_gap) {
            best_gap = gap;
            best = std::move(trial);
        }
    }
    return best;
}

Network make_network(const NetworkConfig& cfg, Rng& rng)
{
    if (cfg.inputs <= 0 || cfg.outputs <= 0)
        throw std::invalid_argument("make_network: input and output widths must be positive");
    if (cfg.hidden.empty())
        throw std::invalid_argument("make_network: need at least one hidden layer");
    for (Eigen::Index h : cfg.hidden)
        if (h <= 0)
            throw std::invalid_argument("make_network: hidden widths must be positive");
    for (const auto& stage : cfg.activation)
        validate(stage);

    const int multiplier = width_multiplier(cfg.activation);
    Network net;
    net.activation = cfg.activation;
    Eigen::Index fan_in = cfg.inputs;
    for (Eigen::Index h : effective_hidden_widths(cfg)) {
        net.layers.push_back(he_init(fan_in, h, rng));
        fan_in = h * multiplier;
    }
    net.layers.push_back(he_init(fan_in, cfg.outputs, rng));
    return net;
}

ForwardTrace forward(const Network& net, const Matrix& x, Mode mode, Rng& rng)
{
    if (x.cols() != net.inputs())
        throw std::invalid_argument("forward: batch has " + std::to_string(x.cols()) +
                                    " features, network expects " +
                                    std::to_string(net.inputs()));
    ForwardTrace trace;
    trace.mode = mode;
    trace.generation = net.generation();
    trace.hidden.resize(net.hidden_count());
    const Matrix* current = &x;
    for (std::size_t l = 0; l < net.hidden_count(); ++l) {
        HiddenTrace& h = trace.hidden[l];
        h.input = *current;
        h.preactivation = affine(h.input, net.layers[l]);
        Matrix act = h.preactivation;
        for (const auto& stage : net.activation) {
            ActivationOutput out = activation_forward(act, stage, mode, rng);
            act = std::move(out.y);
            h.caches.push_back(std::move(out.cache));
        }
        h.postactivation = std::move(act);
        current = &h.postactivation;
    }
    trace.logits_input = *current;
    trace.logits = affine(trace.logits_input, net.layers.back());
    return trace;
}

ForwardTrace forward_frozen(const Network& net, const Matrix& x, const ForwardTrace& reference)
{
    if (x.cols() != net.inputs())
        throw std::invalid_argument("forward_frozen: feature count mismatch");
    if (reference.hidden.size() != net.hidden_count())
        throw std::invalid_argument("forward_frozen: reference trace has wrong depth");
    ForwardTrace trace;
    trace.mode = reference.mode;
    trace.generation = net.generation();
    trace.hidden.resize(net.hidden_count());
    const Matrix* current = &x;
    for (std::size_t l = 0; l < net.hidden_count(); ++l) {
        HiddenTrace& h = trace.hidden[l];
        const HiddenTrace& ref = reference.hidden[l];
        if (ref.caches.size() != net.activation.size())
            throw std::invalid_argument("forward_frozen: reference trace has wrong pipeline");
        h.input = *current;
        h.preactivation = affine(h.input, net.layers[l]);
        Matrix act = h.preactivation;
        for (const auto& cache : ref.caches) {
            ActivationOutput out = activation_replay(act, cache);
            act = std::move(out.y);
            h.caches.push_back(std::move(out.cache));
        }
        h.postactivation = std::move(act);
        current = &h.postactivation;
    }
    trace.logits_input = *current;
    trace.logits = affine(trace.logits_input, net.layers.back());
    return trace;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& grad_logits)
{
    if (trace.generation != net.generation())
        throw std::logic_error("backward: trace is stale (parameters changed since forward)");
    if (trace.hidden.size() != net.hidden_count())
        throw std::invalid_argument("backward: trace depth does not match network");
    if (grad_logits.rows() != trace.logits.rows() || grad_logits.cols() != trace.logits.cols())
        throw std::invalid_argument("backward: upstream gradient shape mismatch");

    Gradients grads(net.layers.size());
    Matrix g = grad_logits;
    const auto fill = [&](std::size_t l, const Matrix& input) {
        grads[l].weight = g.transpose() * input;
        grads[l].bias = g.colwise().sum();
    };

    fill(net.layers.size() - 1, trace.logits_input);
    g = g * net.layers.back().weight;
    for (std::size_t l = net.hidden_count(); l-- > 0;) {
        const HiddenTrace& h = trace.hidden[l];
        for (std::size_t s = h.caches.size(); s-- > 0;)
            g = activation_backward(g, h.caches[s]);
        fill(l, h.input);
        if (l > 0)
            g = g * net.layers[l].weight;
    }
    return grads;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels)
{
    const Eigen::Index batch = logits.rows();
    if (static_cast<std::size_t>(batch) != labels.size())
        throw std::invalid_argument("softmax_cross_entropy: label count does not match batch");
    if (batch == 0)
        throw std::invalid_argument("softmax_cross_entropy: empty batch");

    LossResult out;
    out.grad.resize(logits.rows(), logits.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= logits.cols())
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(logits.cols()) + ")");
        const double top = logits.row(i).maxCoeff();
        auto e = (logits.row(i).array() - top).exp();
        const double sum = e.sum();
        total += std::log(sum) - (logits(i, label) - top);
        out.grad.row(i) = (e / sum).matrix();
        out.grad(i, label) -= 1.0;
    }
    out.loss = total / double(batch);
    out.grad /= double(batch);
    return out;
}

LossResult mse(const Matrix& pred, const Matrix& target)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("mse: shape mismatch");
    if (pred.rows() == 0)
        throw std::invalid_argument("mse: empty batch");
    const Matrix diff = pred - target;
    const double batch = double(pred.rows());
    return {diff.squaredNorm() / batch, 2.0 * diff / batch};
}

void save_checkpoint(const Network& net, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("checkpoint: cannot write " + path.string());
    out << "aid-checkpoint 1\n";
    out << "activation " << net.activation.size() << '\n';
    for (const auto& stage : net.activation)
        out << to_string(stage) << '\n';
    out << "layers " << net.layers.size() << '\n';
    for (const auto& layer : net.layers) {
        write_matrix(out, layer.weight);
        write_matrix(out, layer.bias);
        write_matrix(out, layer.initial_weight);
        write_matrix(out, layer.initial_bias);
    }
    if (!out)
        throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::string magic, word;
    int version = 0;
    if (!(in >> magic >> version) || magic != "aid-checkpoint" || version != 1)
        throw std::runtime_error("checkpoint: unrecognised header in " + path.string());

    Network net;
    std::size_t stages = 0;
    if (!(in >> word >> stages) || word != "activation")
        throw std::runtime_error("checkpoint: missing activation block");
    std::string line;
    std::getline(in, line);
    for (std::size_t s = 0; s < stages; ++s) {
        if (!std::getline(in, line))
            throw std::runtime_error("checkpoint: truncated activation block");
        net.activation.push_back(parse_activation(line));
    }
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "layers" || count < 2)
        throw std::runtime_error("checkpoint: missing layer block");
    for (std::size_t l = 0; l < count; ++l) {
        LinearLayer layer;
        layer.weight = read_matrix(in);
        layer.bias = read_matrix(in);
        layer.initial_weight = read_matrix(in);
        layer.initial_bias = read_matrix(in);
        if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.rows() ||
            layer.initial_weight.rows() != layer.weight.rows() ||
            layer.initial_weight.cols() != layer.weight.cols() ||
            layer.initial_bias.cols() != layer.bias.cols())
            throw std::runtime_error("checkpoint: inconsistent shapes in layer " +
                                     std::to_string(l));
        net.layers.push_back(std::move(layer));
    }
    return net;
}

} // namespace aid
