#include "aid/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace aid {

namespace {

// Seed-derivation tags; each names an independent random stream of a run.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kTaskStream = 2;
constexpr std::uint64_t kModelStream = 3;
constexpr std::uint64_t kBatchStream = 4;
constexpr std::uint64_t kProbeStream = 5;

constexpr double kSynthSeparation = 4.0;

std::string trim(std::string s)
{
    const auto issp = [](unsigned char c) { return std::isspace(c); };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep))
        parts.push_back(trim(part));
    return parts;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + value + "'");
}

std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool is_chunked(const std::string& stream)
{
    return stream.rfind("chunked_full", 0) == 0 || stream.rfind("chunked_limited", 0) == 0;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows)
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

MetricsRecord measure(const Network& net, const Dataset& task, const Matrix& probe,
                      std::size_t t, std::size_t epochs, bool diverged)
{
    MetricsRecord rec;
    rec.task = t;
    rec.epoch = epochs;
    rec.diverged = diverged;
    Rng unused(0);
    const ForwardTrace full = forward(net, task.features, Mode::Eval, unused);
    rec.accuracy = accuracy(full.logits, task.labels);

    const ForwardTrace trace = forward(net, probe, Mode::Eval, unused);
    bool finite = trace.logits.allFinite();
    std::vector<Matrix> pre, post;
    for (const auto& h : trace.hidden) {
        finite = finite && h.preactivation.allFinite() && h.postactivation.allFinite();
        pre.push_back(h.preactivation);
        post.push_back(h.postactivation);
    }
    if (!finite) {
        rec.diverged = true;
        rec.dormant_ratio = 1.0;
        rec.srank = 0;
        rec.sign_entropy = 0.0;
        return rec;
    }
    rec.dormant_ratio = dormant_ratio(post, 0.0);
    rec.sign_entropy = avg_sign_entropy(pre);
    rec.srank = effective_rank(trace.logits_input, 0.01).rank;
    return rec;
}

} // namespace

double ExperimentConfig::learning_rate() const
{
    if (lr)
        return *lr;
    return optimizer == OptimizerKind::Adam ? 1e-3 : 3e-2;
}

bool ExperimentConfig::resets_optimizer() const
{
    return reset_optimizer.value_or(is_chunked(stream));
}

StreamKind ExperimentConfig::stream_kind() const
{
    if (stream == "random_label")
        return stream::RandomLabel{exclude_previous_label};
    if (stream == "permuted")
        return stream::PermutedInput{};
    if (is_chunked(stream)) {
        stream::Chunked c;
        c.retain_past = stream.rfind("chunked_full", 0) == 0;
        const auto colon = stream.find(':');
        const std::string head = stream.substr(0, colon);
        if (head != "chunked_full" && head != "chunked_limited")
            throw ConfigError("config: unknown stream '" + stream + "'");
        if (colon != std::string::npos)
            c.n_chunks = parse_number<std::size_t>("stream", stream.substr(colon + 1));
        return c;
    }
    throw ConfigError("config: unknown stream '" + stream + "'");
}

ActivationPipeline ExperimentConfig::activation_pipeline() const
{
    const double p = activation_p;
    if (activation == "relu")
        return {act::ReLU{}};
    if (activation == "identity")
        return {act::Identity{}};
    if (activation == "negrelu")
        return {act::NegReLU{}};
    if (activation == "leaky")
        return {act::ModLeakyReLU{p}};
    if (activation == "aid")
        return {act::AID{p}};
    if (activation == "dropout")
        return {act::ReLU{}, act::Dropout{p}};
    if (activation == "droprelu")
        return {act::DropReLU{p}};
    if (activation == "rrelu")
        return {act::RReLU{rrelu_lower, rrelu_upper}};
    if (activation == "crelu")
        return {act::CReLU{}};
    if (activation == "fourier")
        return {act::Fourier{}};
    throw ConfigError("config: unknown activation '" + activation + "'");
}

void ExperimentConfig::validate() const
{
    const auto kind = stream_kind();
    if (tasks == 0)
        throw ConfigError("config: tasks must be positive");
    if (const auto* c = std::get_if<stream::Chunked>(&kind)) {
        if (c->n_chunks == 0)
            throw ConfigError("config: chunk count must be positive");
        if (tasks > c->n_chunks)
            throw ConfigError("config: " + std::to_string(tasks) + " tasks exceed " +
                              std::to_string(c->n_chunks) + " chunks");
    }
    if (widths.empty())
        throw ConfigError("config: widths must list at least one hidden layer");
    for (auto w : widths)
        if (w <= 0)
            throw ConfigError("config: widths must be positive");
    try {
        for (const auto& stage : activation_pipeline())
            aid::validate(stage);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(learning_rate() > 0.0))
        throw ConfigError("config: lr must be positive");
    if (!(lambda >= 0.0))
        throw ConfigError("config: lambda must be non-negative");
    if (!(sp_lambda >= 0.0 && sp_lambda <= 1.0))
        throw ConfigError("config: sp_lambda must lie in [0, 1]");
    if (!(redo_tau >= 0.0))
        throw ConfigError("config: redo_tau must be non-negative");
    if (batch == 0)
        throw ConfigError("config: batch must be positive");
    if (probe_batch == 0)
        throw ConfigError("config: probe_batch must be positive");
    if (dataset.rfind("synth:", 0) != 0 && dataset.rfind("idx:", 0) != 0)
        throw ConfigError("config: dataset must be synth:KxNxD or idx:<images>,<labels>");
}

ExperimentConfig parse_config(const std::string& text)
{
    ExperimentConfig cfg;
    std::map<std::string, std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (seen.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        seen[key] = value;

        if (key == "dataset")
            cfg.dataset = value;
        else if (key == "stream")
            cfg.stream = value;
        else if (key == "tasks")
            cfg.tasks = parse_number<std::size_t>(key, value);
        else if (key == "samples")
            cfg.samples = parse_number<std::size_t>(key, value);
        else if (key == "widths") {
            cfg.widths.clear();
            for (const auto& w : split(value, ','))
                cfg.widths.push_back(parse_number<Eigen::Index>(key, w));
        } else if (key == "activation")
            cfg.activation = value;
        else if (key == "activation_p")
            cfg.activation_p = parse_number<double>(key, value);
        else if (key == "rrelu_lower")
            cfg.rrelu_lower = parse_number<double>(key, value);
        else if (key == "rrelu_upper")
            cfg.rrelu_upper = parse_number<double>(key, value);
        else if (key == "optimizer") {
            if (value == "adam")
                cfg.optimizer = OptimizerKind::Adam;
            else if (value == "sgd")
                cfg.optimizer = OptimizerKind::SGD;
            else
                throw ConfigError("config: optimizer must be adam or sgd, got '" + value + "'");
        } else if (key == "lr")
            cfg.lr = parse_number<double>(key, value);
        else if (key == "regularizer") {
            if (value == "none")
                cfg.regularizer = RegularizerKind::None;
            else if (value == "l2")
                cfg.regularizer = RegularizerKind::L2;
            else if (value == "l2init")
                cfg.regularizer = RegularizerKind::L2Init;
            else
                throw ConfigError("config: regularizer must be none, l2 or l2init, got '" + value + "'");
        } else if (key == "lambda")
            cfg.lambda = parse_number<double>(key, value);
        else if (key == "intervention") {
            if (value == "none")
                cfg.intervention = Intervention::None;
            else if (value == "shrink_perturb")
                cfg.intervention = Intervention::ShrinkPerturb;
            else if (value == "redo")
                cfg.intervention = Intervention::Redo;
            else
                throw ConfigError("config: intervention must be none, shrink_perturb or redo, got '" +
                                  value + "'");
        } else if (key == "sp_lambda")
            cfg.sp_lambda = parse_number<double>(key, value);
        else if (key == "redo_tau")
            cfg.redo_tau = parse_number<double>(key, value);
        else if (key == "epochs")
            cfg.epochs = parse_number<std::size_t>(key, value);
        else if (key == "batch")
            cfg.batch = parse_number<std::size_t>(key, value);
        else if (key == "seed")
            cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "probe_batch")
            cfg.probe_batch = parse_number<std::size_t>(key, value);
        else if (key == "reset_optimizer")
            cfg.reset_optimizer = parse_bool(key, value);
        else if (key == "exclude_previous_label")
            cfg.exclude_previous_label = parse_bool(key, value);
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

Dataset load_dataset(const std::string& spec, Rng& rng)
{
    if (spec.rfind("synth:", 0) == 0) {
        const auto dims = split(spec.substr(6), 'x');
        if (dims.size() != 3)
            throw ConfigError("dataset: expected synth:<classes>x<per_class>x<features>");
        const int classes = parse_number<int>("dataset", dims[0]);
        const auto per_class = parse_number<std::size_t>("dataset", dims[1]);
        const auto features = parse_number<std::size_t>("dataset", dims[2]);
        if (classes <= 0 || per_class == 0 || features == 0)
            throw ConfigError("dataset: synthetic dimensions must be positive");
        return synth_dataset(per_class, classes, features, kSynthSeparation, rng);
    }
    if (spec.rfind("idx:", 0) == 0) {
        const auto paths = split(spec.substr(4), ',');
        if (paths.size() != 2)
            throw ConfigError("dataset: expected idx:<images>,<labels>");
        return load_idx(paths[0], paths[1]);
    }
    throw ConfigError("dataset: unknown spec '" + spec + "'");
}

RunResult run_experiment(const ExperimentConfig& cfg, const TaskCallback& on_task)
{
    cfg.validate();
    const StreamKind kind = cfg.stream_kind();

    Rng data_rng(mix_seed(cfg.seed, kDataStream));
    Dataset base = load_dataset(cfg.dataset, data_rng);
    std::size_t keep = cfg.samples;
    if (keep == 0) {
        if (std::holds_alternative<stream::RandomLabel>(kind))
            keep = 1600;
        else if (std::holds_alternative<stream::PermutedInput>(kind))
            keep = 10000;
    }
    if (keep > 0 && keep < base.size()) {
        auto rows = data_rng.permutation(base.size());
        rows.resize(keep);
        std::sort(rows.begin(), rows.end());
        base = base.subset(rows);
    }

    const TaskStream tasks(std::move(base), kind, mix_seed(cfg.seed, kTaskStream));
    Rng model_rng(mix_seed(cfg.seed, kModelStream));
    Rng batch_rng(mix_seed(cfg.seed, kBatchStream));

    NetworkConfig net_cfg;
    net_cfg.inputs = tasks.base().features.cols();
    net_cfg.hidden = cfg.widths;
    net_cfg.outputs = tasks.base().num_classes;
    net_cfg.activation = cfg.activation_pipeline();
    RunResult result;
    result.network = make_network(net_cfg, model_rng);
    Network& net = result.network;

    Optimizer opt({cfg.optimizer, cfg.learning_rate()});
    const RegularizerSpec reg{cfg.regularizer, cfg.lambda};

    for (std::size_t t = 0; t < cfg.tasks; ++t) {
        const Dataset task = tasks.next_task(t);
        const std::size_t n = task.size();
        if (cfg.resets_optimizer())
            opt.reset();

        bool diverged = false;
        std::vector<int> batch_labels;
        for (std::size_t epoch = 0; epoch < cfg.epochs && !diverged; ++epoch) {
            const auto order = batch_rng.permutation(n);
            for (std::size_t start = 0; start < n; start += cfg.batch) {
                const std::size_t stop = std::min(n, start + cfg.batch);
                const std::span<const std::size_t> rows(order.data() + start, stop - start);
                const Matrix x = gather_rows(task.features, rows);
                batch_labels.clear();
                for (auto r : rows)
                    batch_labels.push_back(task.labels[r]);

                const ForwardTrace trace = forward(net, x, Mode::Train, model_rng);
                const LossResult loss = softmax_cross_entropy(trace.logits, batch_labels);
                if (!std::isfinite(loss.loss)) {
                    diverged = true;
                    break;
                }
                opt.step(net, backward(net, trace, loss.grad), reg);
            }
        }

        Rng probe_rng(mix_seed(mix_seed(cfg.seed, kProbeStream), t));
        auto probe_rows = probe_rng.permutation(n);
        probe_rows.resize(std::min(n, cfg.probe_batch));
        const Matrix probe = gather_rows(task.features, probe_rows);

        MetricsRecord rec = measure(net, task, probe, t, cfg.epochs, diverged);
        result.records.push_back(rec);
        if (on_task)
            on_task(rec);

        switch (cfg.intervention) {
        case Intervention::None:
            break;
        case Intervention::ShrinkPerturb:
            shrink_perturb(net, cfg.sp_lambda);
            break;
        case Intervention::Redo:
            redo_reset(net, probe, cfg.redo_tau, model_rng);
            break;
        }
    }
    return result;
}

void emit_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path)
{
    if (records.empty())
        throw std::invalid_argument("emit_csv: no records to write");
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : records)
        out << r.task << ',' << r.epoch << ',' << r.split << ',' << fmt17(r.accuracy) << ','
            << fmt17(r.dormant_ratio) << ',' << r.srank << ',' << fmt17(r.sign_entropy) << '\n';
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw std::runtime_error("emit_csv: cannot write " + path.string());
    file << out.str();
    if (!file)
        throw std::runtime_error("emit_csv: write failed for " + path.string());
}

std::vector<MetricsRecord> read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::runtime_error("read_csv: unexpected header in " + path.string());
    std::vector<MetricsRecord> records;
    while (std::getline(in, line)) {
        const auto f = split(line, ',');
        if (f.size() != 7)
            throw std::runtime_error("read_csv: expected 7 fields, got " + std::to_string(f.size()));
        MetricsRecord r;
        r.task = parse_number<std::size_t>("task", f[0]);
        r.epoch = parse_number<std::size_t>("epoch", f[1]);
        r.split = f[2];
        r.accuracy = parse_number<double>("accuracy", f[3]);
        r.dormant_ratio = parse_number<double>("dormant_ratio", f[4]);
        r.srank = parse_number<std::size_t>("srank", f[5]);
        r.sign_entropy = parse_number<double>("sign_entropy", f[6]);
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace aid
