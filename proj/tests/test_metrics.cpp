#include "aid/metrics.hpp"

#include <doctest.h>

#include <cmath>

using aid::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, aid::Rng& rng)
{
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = rng.normal();
    return m;
}

} // namespace

TEST_CASE("dormant ratio: hand examples")
{
    const double a = 0.7;
    Matrix post(2, 4);
    post << 0, a, -a, a, 0, a, a, -a;
    const auto scores = aid::normalized_activation_scores(post);
    CHECK(scores(0) == 0.0);
    for (int i = 1; i < 4; ++i)
        CHECK(std::abs(scores(i) - 4.0 / 3.0) <= 1e-12);
    const std::vector<Matrix> layers{post};
    CHECK(std::abs(aid::dormant_ratio(layers, 0.0) - 0.25) <= 1e-12);

    const std::vector<Matrix> same{Matrix::Constant(3, 5, 2.0)};
    CHECK(aid::dormant_ratio(same, 0.0) == 0.0);
    CHECK(aid::dormant_ratio(layers, scores.maxCoeff()) == 1.0);

    const std::vector<Matrix> dead{Matrix::Zero(3, 5), Matrix::Constant(3, 5, 1.0)};
    CHECK(aid::dormant_ratio(dead, 0.0) == 0.5);
    CHECK_THROWS_AS(aid::dormant_ratio(layers, -1.0), std::invalid_argument);
}

TEST_CASE("dormant ratio: invariant under positive scaling and unit permutation")
{
    aid::Rng rng(1);
    Matrix post = random_matrix(16, 10, rng).cwiseMax(0.0);
    post.col(3).setZero();
    post.col(7) *= 1e-3;
    const std::vector<Matrix> base{post};
    const std::vector<Matrix> scaled{Matrix(post * 37.5)};
    Matrix swapped = post;
    swapped.col(0).swap(swapped.col(9));
    const std::vector<Matrix> perm{swapped};
    for (double tau : {0.0, 0.01, 0.5}) {
        CHECK(aid::dormant_ratio(base, tau) == aid::dormant_ratio(scaled, tau));
        CHECK(aid::dormant_ratio(base, tau) == aid::dormant_ratio(perm, tau));
    }
}

TEST_CASE("sign entropy: hand examples")
{
    const std::vector<Matrix> positive{Matrix::Constant(4, 3, 0.5)};
    CHECK(aid::avg_sign_entropy(positive) == 1.0);

    Matrix half(4, 2);
    half << 1, -2, -1, 2, 3, -3, -3, 3;
    const std::vector<Matrix> balanced{half};
    CHECK(std::abs(aid::avg_sign_entropy(balanced)) <= 1e-12);
    CHECK(std::abs(aid::sign_shannon_entropy(balanced) - 1.0) <= 1e-12);

    Matrix unit(5, 1);
    unit << 1, 2, -1, -2, 3;
    const std::vector<Matrix> single{unit};
    CHECK(std::abs(aid::avg_sign_entropy(single) - 0.2) <= 1e-12);

    Matrix zeros = Matrix::Zero(4, 1);
    const std::vector<Matrix> z{zeros};
    CHECK(aid::avg_sign_entropy(z) == 0.0);
    CHECK(aid::sign_shannon_entropy(positive) == 0.0);
}

TEST_CASE("effective rank: hand examples")
{
    CHECK(aid::effective_rank(Matrix(Matrix::Identity(3, 3)), 0.01).rank == 3);

    aid::Rng rng(2);
    const Matrix u = random_matrix(6, 1, rng), v = random_matrix(1, 4, rng);
    CHECK(aid::effective_rank(Matrix(u * v), 0.01).rank == 1);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 100;
    d(1, 1) = 1;
    CHECK(aid::effective_rank(d, 0.01).rank == 1);
    CHECK(aid::effective_rank(d, 0.001).rank == 2);

    const auto zero = aid::effective_rank(Matrix(Matrix::Zero(4, 3)), 0.01);
    CHECK(zero.rank == 0);
    CHECK(zero.zero_mass);
}

TEST_CASE("effective rank: bounded, scale invariant, monotone in delta")
{
    aid::Rng rng(3);
    const Matrix phi = random_matrix(40, 12, rng);
    const auto r = aid::effective_rank(phi, 0.01).rank;
    CHECK(r >= 1);
    CHECK(r <= 12);
    CHECK(aid::effective_rank(Matrix(phi * 1e3), 0.01).rank == r);
    CHECK(aid::effective_rank(phi, 0.2).rank <= r);
}

TEST_CASE("accuracy counts NaN rows as wrong")
{
    Matrix logits(3, 2);
    logits << 1, 0, 0, 1, std::nan(""), 0;
    const std::vector<int> labels{0, 1, 0};
    CHECK(aid::accuracy(logits, labels) == doctest::Approx(2.0 / 3.0));
}
