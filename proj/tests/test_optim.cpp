#include "aid/optim.hpp"

#include <doctest.h>

#include <cmath>

using aid::Matrix;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

aid::Network relu_net(aid::Rng& rng)
{
    aid::NetworkConfig cfg;
    cfg.inputs = 3;
    cfg.hidden = {4, 4};
    cfg.outputs = 2;
    return aid::make_network(cfg, rng);
}

} // namespace

TEST_CASE("SGD: one step on a scalar")
{
    aid::Optimizer opt({aid::OptimizerKind::SGD, 0.1});
    Matrix theta = scalar(1.0), grad = scalar(2.0), init = scalar(0.0);
    std::vector<aid::ParamView> views{{theta, grad, init}};
    opt.step(views, {});
    CHECK(theta(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("Adam: first step moves each coordinate by about lr against the gradient sign")
{
    aid::Optimizer opt({aid::OptimizerKind::Adam, 1e-3});
    Matrix theta(1, 3), grad(1, 3), init = Matrix::Zero(1, 3);
    theta << 1.0, -2.0, 0.5;
    grad << 4.0, -0.01, 1e3;
    const Matrix before = theta;
    std::vector<aid::ParamView> views{{theta, grad, init}};
    opt.step(views, {});
    const Matrix delta = theta - before;
    for (Eigen::Index i = 0; i < 3; ++i)
        CHECK(delta(0, i) == doctest::Approx(-1e-3 * (grad(0, i) > 0 ? 1 : -1)).epsilon(1e-4));
    CHECK(opt.step_count() == 1);
    opt.reset();
    CHECK(opt.step_count() == 0);
}

TEST_CASE("Adam: converges on a quadratic")
{
    aid::Optimizer opt({aid::OptimizerKind::Adam, 0.05});
    Matrix theta = scalar(3.0), init = scalar(0.0), grad(1, 1);
    for (int i = 0; i < 2000; ++i) {
        grad(0, 0) = 2.0 * (theta(0, 0) - 1.0);
        std::vector<aid::ParamView> views{{theta, grad, init}};
        opt.step(views, {});
    }
    CHECK(theta(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("regularisers add lambda theta or lambda (theta - theta0) to the gradient")
{
    Matrix theta = scalar(2.0), grad = scalar(0.0), init = scalar(0.5);
    aid::Optimizer sgd({aid::OptimizerKind::SGD, 0.1});
    {
        std::vector<aid::ParamView> views{{theta, grad, init}};
        sgd.step(views, {aid::RegularizerKind::L2, 0.5});
    }
    CHECK(theta(0, 0) == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
    theta(0, 0) = 2.0;
    {
        std::vector<aid::ParamView> views{{theta, grad, init}};
        sgd.step(views, {aid::RegularizerKind::L2Init, 0.5});
    }
    CHECK(theta(0, 0) == doctest::Approx(2.0 - 0.1 * 0.5 * 1.5));
    CHECK_THROWS_AS(aid::Optimizer({aid::OptimizerKind::SGD, 0.0}), std::invalid_argument);
}

TEST_CASE("network step touches the generation")
{
    aid::Rng rng(1);
    aid::Network net = relu_net(rng);
    aid::Gradients grads;
    for (const auto& layer : net.layers)
        grads.push_back({Matrix::Ones(layer.weight.rows(), layer.weight.cols()),
                         Matrix::Ones(1, layer.bias.cols())});
    const auto gen = net.generation();
    aid::Optimizer opt({aid::OptimizerKind::SGD, 0.5});
    const Matrix w0 = net.layers[0].weight;
    opt.step(net, grads, {});
    CHECK(net.generation() > gen);
    CHECK((net.layers[0].weight - (w0.array() - 0.5).matrix()).cwiseAbs().maxCoeff() < 1e-15);
    grads.pop_back();
    CHECK_THROWS_AS(opt.step(net, grads, {}), std::invalid_argument);
}

TEST_CASE("shrink and perturb")
{
    aid::Rng rng(2);
    aid::Network net = relu_net(rng);
    for (auto& layer : net.layers) {
        layer.weight.array() += 1.0;
        layer.bias.array() += 2.0;
    }
    const aid::Network trained = net;

    aid::shrink_perturb(net, 0.0);
    CHECK(net.layers[1].weight == trained.layers[1].weight);

    aid::shrink_perturb(net, 1.0);
    for (const auto& layer : net.layers) {
        CHECK(layer.weight == layer.initial_weight);
        CHECK(layer.bias == layer.initial_bias);
    }

    aid::Network single = relu_net(rng);
    single.layers[0].weight(0, 0) = 5.0;
    single.layers[0].initial_weight(0, 0) = 0.0;
    aid::shrink_perturb(single, 0.2);
    CHECK(single.layers[0].weight(0, 0) == doctest::Approx(4.0).epsilon(1e-15));

    // Two applications compose to one with lambda' = 1 - (1-a)(1-b).
    aid::Network a = trained, b = trained;
    aid::shrink_perturb(a, 0.3);
    aid::shrink_perturb(a, 0.5);
    aid::shrink_perturb(b, 1.0 - 0.7 * 0.5);
    CHECK((a.layers[2].weight - b.layers[2].weight).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(aid::shrink_perturb(net, 1.5), std::invalid_argument);
}

TEST_CASE("ReDo: nothing dormant means nothing changes")
{
    aid::Rng rng(3);
    aid::NetworkConfig cfg;
    cfg.inputs = 3;
    cfg.hidden = {4};
    cfg.outputs = 2;
    cfg.activation = {aid::act::Identity{}};
    aid::Network net = aid::make_network(cfg, rng);
    const aid::Network before = net;
    Matrix batch(8, 3);
    for (Eigen::Index i = 0; i < batch.size(); ++i)
        batch.data()[i] = rng.normal();
    const auto report = aid::redo_reset(net, batch, 0.0, rng);
    CHECK(report.total() == 0);
    CHECK(net.layers[0].weight == before.layers[0].weight);
    CHECK(net.layers[1].weight == before.layers[1].weight);
}

TEST_CASE("ReDo: exactly the silent unit is recycled")
{
    aid::Rng rng(4);
    aid::NetworkConfig cfg;
    cfg.inputs = 2;
    cfg.hidden = {3};
    cfg.outputs = 2;
    aid::Network net = aid::make_network(cfg, rng);
    // Positive inputs; unit 1 has negative weights and bias, so its ReLU output is 0.
    net.layers[0].weight << 1.0, 0.5, -1.0, -1.0, 0.3, 0.7;
    net.layers[0].bias << 0.1, -1.0, 0.0;
    net.layers[1].weight.setOnes();
    const Matrix batch = Matrix::Constant(5, 2, 0.5) + Matrix::Identity(5, 2);

    const aid::Network before = net;
    const auto report = aid::redo_reset(net, batch, 0.0, rng);
    REQUIRE(report.reset_per_layer.size() == 1);
    CHECK(report.reset_per_layer[0] == 1);
    CHECK(net.layers[0].weight.row(0) == before.layers[0].weight.row(0));
    CHECK(net.layers[0].weight.row(2) == before.layers[0].weight.row(2));
    CHECK(net.layers[0].weight.row(1) != before.layers[0].weight.row(1));
    CHECK(net.layers[0].bias(0, 1) == 0.0);
    CHECK(net.layers[1].weight.col(1).isZero(0.0));
    CHECK(net.layers[1].weight.col(0) == before.layers[1].weight.col(0));
    CHECK(net.layers[1].weight.col(2) == before.layers[1].weight.col(2));

    // A layer that is silent everywhere is entirely recycled.
    net.layers[0].weight.setConstant(-1.0);
    net.layers[0].bias.setConstant(-1.0);
    CHECK(aid::redo_reset(net, batch, 0.0, rng).total() == 3);
}

TEST_CASE("ReDo: doubled-width activations score both output columns")
{
    aid::Rng rng(5);
    aid::NetworkConfig cfg;
    cfg.inputs = 2;
    cfg.hidden = {3};
    cfg.outputs = 2;
    cfg.activation = {aid::act::CReLU{}};
    cfg.match_parameters = false;
    aid::Network net = aid::make_network(cfg, rng);
    net.layers[0].weight.setZero();
    net.layers[0].weight(0, 0) = -1.0; // unit 0 only fires on the negative copy
    net.layers[0].weight(2, 1) = 1.0;
    Matrix batch = Matrix::Constant(4, 2, 1.0);
    const auto report = aid::redo_reset(net, batch, 0.0, rng);
    CHECK(report.total() == 1);
    CHECK(net.layers[1].weight.col(1).isZero(0.0));
    CHECK(net.layers[1].weight.col(4).isZero(0.0));
}
