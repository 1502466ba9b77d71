// aid: run plasticity experiments, certify the theory checks, write datasets.
//
// Exit codes: 0 success, 1 usage/validation/IO failure, 2 verification failure.

#include "aid/runner.hpp"
#include "aid/theory.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kVerifyFailed = 2;

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed)
{
    aid::ExperimentConfig cfg = aid::load_config(config_path);
    if (seed)
        cfg.seed = *seed; // --seed wins over the config file
    std::filesystem::create_directories(out_dir);
    const auto csv = std::filesystem::path(out_dir) / "metrics.csv";

    const auto result = aid::run_experiment(cfg, [](const aid::MetricsRecord& r) {
        std::fprintf(stderr, "task %zu acc=%.4f dormant=%.4f srank=%zu sign=%.4f%s\n", r.task,
                     r.accuracy, r.dormant_ratio, r.srank, r.sign_entropy,
                     r.diverged ? " DIVERGED" : "");
    });
    aid::emit_csv(result.records, csv);
    std::cout << "wrote " << csv.string() << '\n';
    return kOk;
}

int verify_command(const std::string& suite, std::size_t trials, std::uint64_t seed)
{
    namespace th = aid::theory;
    std::vector<th::SuiteReport> reports;
    const bool all = suite == "all";
    if (all || suite == "theorem1") {
        th::TheoremOptions opts;
        opts.trials = trials;
        opts.seed = seed;
        reports.push_back(th::verify_theorem1(opts));
    }
    if (all || suite == "identity")
        reports.push_back(th::verify_identity_suite(trials, seed));
    if (all || suite == "corollary1")
        reports.push_back(th::verify_corollary1(trials, seed));
    if (all || suite == "property2")
        reports.push_back(th::verify_property2(trials, seed));
    if (all || suite == "relations")
        reports.push_back(th::verify_relations(trials, seed));
    if (all || suite == "heinit") {
        th::HeInitOptions opts;
        opts.seed = seed;
        reports.push_back(th::verify_he_init(opts));
    }

    bool ok = true;
    for (const auto& r : reports) {
        std::cout << r.line() << '\n';
        ok = ok && r.passed;
    }
    return ok ? kOk : kVerifyFailed;
}

int synth_command(int classes, std::size_t per_class, std::size_t features, double separation,
                  std::uint64_t seed, const std::string& out)
{
    aid::Rng rng(seed);
    const aid::Dataset data = aid::synth_dataset(per_class, classes, features, separation, rng);
    const std::string images = out + "-images-idx3-ubyte";
    const std::string labels = out + "-labels-idx1-ubyte";
    aid::write_idx(data, images, labels);
    std::cout << "wrote " << images << " and " << labels << " (" << data.size() << " samples)\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Interval-wise dropout activations: experiments and numerical certificates"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> run_seed;
    auto* run = app.add_subcommand("run", "Train through a task stream and write metrics.csv");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", run_seed, "Master seed; overrides the config's seed");

    std::string suite = "all";
    std::size_t trials = 1000;
    std::uint64_t verify_seed = 0;
    auto* verify = app.add_subcommand("verify", "Run the numerical certificates");
    verify->add_option("--suite", suite, "Suite to run")
        ->check(CLI::IsMember({"theorem1", "identity", "corollary1", "property2", "relations",
                               "heinit", "all"}));
    verify->add_option("--trials", trials, "Random instances per suite")->check(CLI::PositiveNumber);
    verify->add_option("--seed", verify_seed, "Master seed");

    auto* data = app.add_subcommand("data", "Dataset utilities");
    data->require_subcommand(1);
    int classes = 10;
    std::size_t per_class = 160, features = 64;
    double separation = 4.0;
    std::uint64_t data_seed = 0;
    std::string data_out;
    auto* synth = data->add_subcommand("synth", "Write a synthetic dataset as an IDX pair");
    synth->add_option("--classes", classes, "Number of classes")->required()->check(CLI::Range(1, 256));
    synth->add_option("--per-class", per_class, "Samples per class")->required()->check(CLI::PositiveNumber);
    synth->add_option("--features", features, "Feature count")->required()->check(CLI::PositiveNumber);
    synth->add_option("--separation", separation, "Inverse noise scale")->check(CLI::PositiveNumber);
    synth->add_option("--seed", data_seed, "Generator seed");
    synth->add_option("--out", data_out, "Output path prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kInvalid;
    }

    try {
        if (*run)
            return run_command(config_path, out_dir, run_seed);
        if (*verify)
            return verify_command(suite, trials, verify_seed);
        if (*synth)
            return synth_command(classes, per_class, features, separation, data_seed, data_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kInvalid;
}
