// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
// Criteria 7 and 8 train six desk-scale networks and take several minutes.

#include "aid/metrics.hpp"
#include "aid/runner.hpp"
#include "aid/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace th = aid::theory;
using aid::Matrix;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail)
{
    std::printf("criterion %2d %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void theorem1()
{
    th::TheoremOptions opts;
    opts.trials = 1000;
    const auto start = Clock::now();
    const auto r = th::verify_theorem1(opts);
    const double secs = seconds_since(start);
    report(1, r.passed && secs < 60.0,
           r.line() + fmt(" (%.1f s)", secs));
}

void identity()
{
    const auto r = th::verify_identity_suite(1000, 0, 1e-9);
    aid::Rng rng(1);
    double half = 0.0;
    for (int i = 0; i < 50; ++i)
        half = std::max(half, th::verify_exact_identity(th::random_instance(2 + i % 5, 0.5, rng)));
    report(2, r.passed && half <= 1e-9, r.line() + fmt(" p=0.5 max_residual=%.3e", half));
}

void corollary1()
{
    const auto r = th::verify_corollary1(1000, 0, 1e-9);
    report(3, r.passed, r.line());
}

void relations()
{
    const auto a = th::verify_relations(1000, 0);
    const auto b = th::verify_property2(1000, 0);
    report(4, a.passed && b.passed, a.line() + "; " + b.line());
}

void he_init()
{
    th::HeInitOptions opts;
    std::vector<th::HeInitRow> rows;
    const auto r = th::verify_he_init(opts, &rows);
    std::string detail = r.line();
    for (const auto& row : rows)
        detail += fmt(" [p=%.1f E=%.4f P=%.4f]", row.p, row.second_moment, row.derivative_one);
    report(5, r.passed, detail);
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, aid::Rng& rng)
{
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = rng.normal();
    return m;
}

// Norm-wise relative error between backprop and central differences, masks frozen.
double gradient_error(const aid::ActivationPipeline& pipe, aid::Rng& rng)
{
    aid::NetworkConfig cfg;
    cfg.inputs = 6;
    cfg.hidden = {8, 8, 8};
    cfg.outputs = 4;
    cfg.activation = pipe;
    aid::Network net = aid::make_network(cfg, rng);
    for (auto& layer : net.layers)
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
            layer.bias.data()[i] = 0.1 * rng.normal();
    const Matrix x = random_matrix(5, 6, rng);
    std::vector<int> labels(5);
    for (int& l : labels)
        l = static_cast<int>(rng.below(4));

    const auto trace = aid::forward(net, x, aid::Mode::Train, rng);
    const auto loss = aid::softmax_cross_entropy(trace.logits, labels);
    const auto grads = aid::backward(net, trace, loss.grad);
    const auto loss_at = [&] {
        return aid::softmax_cross_entropy(aid::forward_frozen(net, x, trace).logits, labels).loss;
    };

    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix* params[2] = {&net.layers[l].weight, &net.layers[l].bias};
        const Matrix* analytic[2] = {&grads[l].weight, &grads[l].bias};
        for (int k = 0; k < 2; ++k) {
            for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
                double& theta = params[k]->data()[i];
                const double orig = theta;
                theta = orig + h;
                const double up = loss_at();
                theta = orig - h;
                const double down = loss_at();
                theta = orig;
                const double fd = (up - down) / (2 * h);
                const double diff = analytic[k]->data()[i] - fd;
                num += diff * diff;
                den += fd * fd;
            }
        }
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

void gradients()
{
    using namespace aid::act;
    const std::vector<aid::ActivationPipeline> kinds{
        {Identity{}},
        {ReLU{}},
        {NegReLU{}},
        {ModLeakyReLU{0.3}},
        {AID{0.9}},
        {AIDGeneral{aid::IntervalScheme({-0.5, 0.0, 0.5}, {0.3, 0.6, 0.2, 0.1})}},
        {AIDpq{0.1, 0.7}},
        {Dropout{0.3}},
        {ReLU{}, Dropout{0.3}},
        {DropReLU{0.4}},
        {RReLU{0.125, 0.333}},
        {CReLU{}},
        {Fourier{}},
    };
    aid::Rng rng(2024);
    double worst = 0.0;
    std::string worst_kind;
    for (const auto& pipe : kinds) {
        for (int net = 0; net < 20; ++net) {
            const double err = gradient_error(pipe, rng);
            if (!(err <= worst)) {
                worst = err;
                worst_kind = aid::to_string(pipe.back());
            }
        }
    }
    report(6, worst < 1e-5,
           fmt("kinds=%.0f nets_per_kind=20 max_rel_error=%.3e", double(kinds.size()), worst) +
               " (" + worst_kind + ")");
}

struct RunSummary {
    double first_acc = 0.0;
    double last_acc = 0.0;
    double last_dormant = 0.0;
    double last_srank = 0.0;
};

RunSummary train(const std::string& activation, std::uint64_t seed)
{
    const auto cfg = aid::parse_config("dataset = synth:10x160x64\n"
                                       "stream = random_label\n"
                                       "samples = 1600\n"
                                       "tasks = 20\n"
                                       "widths = 100, 100, 100\n"
                                       "activation = " + activation + "\n"
                                       "activation_p = 0.9\n"
                                       "optimizer = adam\n"
                                       "lr = 0.001\n"
                                       "epochs = 100\n"
                                       "batch = 64\n"
                                       "seed = " + std::to_string(seed) + "\n");
    const auto result = aid::run_experiment(cfg);
    const auto& first = result.records.front();
    const auto& last = result.records.back();
    return {first.accuracy, last.accuracy, last.dormant_ratio, double(last.srank)};
}

void trainability()
{
    const auto start = Clock::now();
    std::vector<double> relu_drop, aid_drop, relu_dormant, aid_dormant, relu_srank, aid_srank;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (const char* act : {"relu", "aid"}) {
            const RunSummary s = train(act, seed);
            std::printf("  seed %llu %-4s task1_acc=%.4f final_acc=%.4f dormant=%.4f srank=%.0f\n",
                        static_cast<unsigned long long>(seed), act, s.first_acc, s.last_acc,
                        s.last_dormant, s.last_srank);
            std::fflush(stdout);
            const bool is_relu = std::string(act) == "relu";
            (is_relu ? relu_drop : aid_drop).push_back(100.0 * (s.first_acc - s.last_acc));
            (is_relu ? relu_dormant : aid_dormant).push_back(s.last_dormant);
            (is_relu ? relu_srank : aid_srank).push_back(s.last_srank);
        }
    }
    const double secs = seconds_since(start);
    const double rd = median(relu_drop), ad = median(aid_drop);
    const bool ok = rd >= 10.0 && std::abs(ad) <= 5.0 && ad < rd && secs < 1200.0;
    report(7, ok, fmt("median drop relu=%.2f pts aid=%.2f pts (%.0f s)", rd, ad, secs));

    const double rdorm = median(relu_dormant), adorm = median(aid_dormant);
    const double rsr = median(relu_srank), asr = median(aid_srank);
    report(8, rdorm > adorm && asr > rsr,
           fmt("median final dormant relu=%.4f aid=%.4f, srank relu=%.0f aid=%.0f", rdorm, adorm,
               rsr, asr));
}

void metric_oracles()
{
    bool ok = true;
    std::string detail;

    const double a = 0.37;
    Matrix post(3, 4);
    post << 0, a, a, -a, 0, -a, a, a, 0, a, -a, a;
    const std::vector<Matrix> layer{post};
    const auto scores = aid::normalized_activation_scores(post);
    ok = ok && scores(0) == 0.0;
    for (int i = 1; i < 4; ++i)
        ok = ok && std::abs(scores(i) - 4.0 / 3.0) <= 1e-12;
    const double dormant = aid::dormant_ratio(layer, 0.0);
    ok = ok && std::abs(dormant - 0.25) <= 1e-12;
    const std::vector<Matrix> uniform{Matrix::Constant(4, 6, 1.5)};
    ok = ok && aid::dormant_ratio(uniform, 0.0) == 0.0;
    ok = ok && aid::dormant_ratio(layer, scores.maxCoeff()) == 1.0;
    detail += fmt("dormant=%.3f", dormant);

    const std::vector<Matrix> positive{Matrix::Constant(5, 3, 2.0)};
    Matrix balanced(4, 3);
    balanced << 1, -1, 2, -1, 1, -2, 2, -2, 1, -2, 2, -1;
    Matrix unit(5, 1);
    unit << 1, 1, -1, -1, 1;
    const std::vector<Matrix> bal{balanced}, one{unit};
    const double s_pos = aid::avg_sign_entropy(positive);
    const double s_bal = aid::avg_sign_entropy(bal);
    const double s_one = aid::avg_sign_entropy(one);
    ok = ok && std::abs(s_pos - 1.0) <= 1e-12 && std::abs(s_bal) <= 1e-12 &&
         std::abs(s_one - 0.2) <= 1e-12;
    detail += fmt(" sign=(%.3f,%.3f,%.3f)", s_pos, s_bal, s_one);

    Matrix rank1(4, 3);
    rank1 << 1, 2, 3, 2, 4, 6, -1, -2, -3, 0.5, 1, 1.5;
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 100;
    d(1, 1) = 1;
    const auto r_eye = aid::effective_rank(Matrix(Matrix::Identity(3, 3)), 0.01).rank;
    const auto r_one = aid::effective_rank(rank1, 0.01).rank;
    const auto r_diag = aid::effective_rank(d, 0.01).rank;
    const auto r_zero = aid::effective_rank(Matrix(Matrix::Zero(3, 3)), 0.01);
    ok = ok && r_eye == 3 && r_one == 1 && r_diag == 1 && r_zero.rank == 0 && r_zero.zero_mass;
    detail += fmt(" srank=(%.0f,%.0f,%.0f,%.0f)", double(r_eye), double(r_one), double(r_diag),
                  double(r_zero.rank));
    report(9, ok, detail);
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism()
{
    const auto dir = std::filesystem::temp_directory_path() / "aid_acceptance";
    std::filesystem::create_directories(dir);
    bool ok = true;
    std::size_t configs = 0;
    for (const char* extra : {"activation = aid\nstream = random_label\n",
                              "activation = dropout\nactivation_p = 0.2\nstream = permuted\n",
                              "activation = rrelu\nstream = chunked_limited:4\nintervention = redo\n"
                              "redo_tau = 0.1\n"}) {
        const auto cfg = aid::parse_config(std::string("dataset = synth:5x40x16\ntasks = 4\n"
                                                       "widths = 24, 24\nepochs = 3\nbatch = 16\n"
                                                       "seed = 11\n") + extra);
        aid::emit_csv(aid::run_experiment(cfg).records, dir / "first.csv");
        aid::emit_csv(aid::run_experiment(cfg).records, dir / "second.csv");
        ok = ok && slurp(dir / "first.csv") == slurp(dir / "second.csv");
        ++configs;
    }
    std::filesystem::remove_all(dir);
    report(10, ok, fmt("configs=%.0f byte-identical CSV", double(configs)));
}

} // namespace

int main()
{
    try {
        theorem1();
        identity();
        corollary1();
        relations();
        he_init();
        gradients();
        metric_oracles();
        determinism();
        trainability();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
