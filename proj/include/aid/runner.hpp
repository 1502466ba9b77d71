// Experiment configuration, the continual-training loop, and CSV output.
#ifndef AID_RUNNER_HPP
#define AID_RUNNER_HPP

#include "aid/metrics.hpp"
#include "aid/nn.hpp"
#include "aid/optim.hpp"
#include "aid/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aid {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Intervention { None, ShrinkPerturb, Redo };

/**
 * Flat key = value experiment description. Keys (all optional):
 *
 *   dataset        synth:<classes>x<per_class>x<features> | idx:<images>,<labels>
 *   stream         random_label | permuted | chunked_full[:n] | chunked_limited[:n]
 *   tasks          number of tasks (chunked streams: at most n chunks)
 *   samples        base-set size drawn before streaming (0 = stream default)
 *   widths         hidden widths, comma separated
 *   activation     relu | identity | negrelu | leaky | aid | dropout | droprelu |
 *                  rrelu | crelu | fourier
 *   activation_p   p for aid / dropout / droprelu, alpha for leaky
 *   rrelu_lower, rrelu_upper
 *   optimizer      adam | sgd;  lr
 *   regularizer    none | l2 | l2init;  lambda
 *   intervention   none | shrink_perturb | redo;  sp_lambda;  redo_tau
 *   epochs, batch, seed, probe_batch
 *   reset_optimizer          true | false (default: true only for chunked streams)
 *   exclude_previous_label   true | false
 */
struct ExperimentConfig {
    std::string dataset = "synth:10x160x64";
    std::string stream = "random_label";
    std::size_t tasks = 20;
    std::size_t samples = 0;
    std::vector<Eigen::Index> widths{100, 100, 100};
    std::string activation = "relu";
    double activation_p = 0.9;
    double rrelu_lower = 0.0625;
    double rrelu_upper = 0.125;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::optional<double> lr; // default 1e-3 for Adam, 3e-2 for SGD
    RegularizerKind regularizer = RegularizerKind::None;
    double lambda = 0.0;
    Intervention intervention = Intervention::None;
    double sp_lambda = 0.0;
    double redo_tau = 0.0;
    std::size_t epochs = 100;
    std::size_t batch = 64;
    std::uint64_t seed = 0;
    std::size_t probe_batch = 512;
    std::optional<bool> reset_optimizer;
    bool exclude_previous_label = false;

    double learning_rate() const;
    bool resets_optimizer() const;
    StreamKind stream_kind() const;
    ActivationPipeline activation_pipeline() const;
    /// Throws ConfigError describing the first invalid field.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads or synthesises the base dataset named by `spec`.
Dataset load_dataset(const std::string& spec, Rng& rng);

struct RunResult {
    std::vector<MetricsRecord> records;
    Network network;
};

using TaskCallback = std::function<void(const MetricsRecord&)>;

/**
 * Trains through the task stream. Data, minibatch order, and model/mask
 * randomness come from separate streams derived from cfg.seed, so changing
 * only the method leaves every task and batch identical.
 */
RunResult run_experiment(const ExperimentConfig& cfg, const TaskCallback& on_task = {});

inline constexpr const char* kCsvHeader = "task,epoch,split,accuracy,dormant_ratio,srank,sign_entropy";

void emit_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path);
std::vector<MetricsRecord> read_csv(const std::filesystem::path& path);

} // namespace aid

#endif // AID_RUNNER_HPP
