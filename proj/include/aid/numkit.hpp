// Dense numeric kernel shared by every other module: the matrix type, a few
// checked products, singular values via Jacobi on the Gram matrix, and the
// seeded generator used for masks, initialisation and task streams.
#ifndef AID_NUMKIT_HPP
#define AID_NUMKIT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aid {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Raised when a kernel would hand back NaN/Inf entries.
class NonFiniteError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised by iterative kernels that exhaust their sweep budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& what)
{
    if (!m.allFinite())
        throw NonFiniteError(what + ": non-finite entry");
}

template <typename Scalar>
MatrixX<Scalar> matmul(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b)
{
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " times " +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    MatrixX<Scalar> c = a * b;
    require_finite(c, "matmul");
    return c;
}

template <typename Derived>
typename Derived::Scalar frobenius_norm_sq(const Eigen::MatrixBase<Derived>& a)
{
    return a.squaredNorm();
}

/**
 * Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending
 * order not guaranteed. Stops once the off-diagonal Frobenius mass drops to
 * `tol` relative to the full matrix; throws ConvergenceError past `max_sweeps`.
 */
template <typename Scalar>
std::vector<Scalar> jacobi_eigenvalues(MatrixX<Scalar> a, Scalar tol = Scalar(1e-12),
                                       int max_sweeps = 100)
{
    const Eigen::Index n = a.rows();
    if (n != a.cols())
        throw std::invalid_argument("jacobi_eigenvalues: matrix not square");

    auto off_norm = [&] {
        Scalar s = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j)
                    s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };
    const Scalar scale = std::max(a.norm(), std::numeric_limits<Scalar>::min());

    int sweep = 0;
    while (off_norm() > tol * scale) {
        if (sweep++ >= max_sweeps)
            throw ConvergenceError("jacobi_eigenvalues: no convergence after " +
                                   std::to_string(max_sweeps) + " sweeps");
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const Scalar apq = a(p, q);
                if (apq == Scalar(0))
                    continue;
                // Rotation angle that annihilates a(p,q).
                const Scalar theta = (a(q, q) - a(p, p)) / (2 * apq);
                const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const Scalar c = 1 / std::sqrt(t * t + 1);
                const Scalar s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Scalar akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Scalar apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<Scalar> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = a(i, i);
    return out;
}

/// Singular values in descending order, min(rows, cols) of them.
template <typename Scalar>
std::vector<Scalar> singular_values(const MatrixX<Scalar>& a, int max_sweeps = 100)
{
    if (a.rows() < 1 || a.cols() < 1)
        throw std::invalid_argument("singular_values: empty matrix");
    require_finite(a, "singular_values");
    MatrixX<Scalar> gram = a.cols() <= a.rows() ? MatrixX<Scalar>(a.transpose() * a)
                                                : MatrixX<Scalar>(a * a.transpose());
    std::vector<Scalar> ev = jacobi_eigenvalues<Scalar>(std::move(gram), Scalar(1e-12), max_sweeps);
    for (auto& v : ev)
        v = std::sqrt(std::max(v, Scalar(0)));
    std::sort(ev.begin(), ev.end(), std::greater<Scalar>());
    return ev;
}

/**
 * Seeded generator. The engine is std::mt19937_64, whose constants are fixed
 * by the standard, and every distribution below is written out by hand so
 * that streams are identical across standard-library implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, caching the second variate.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform integer in [0, n), rejection-sampled so there is no modulo bias.
    std::uint64_t below(std::uint64_t n)
    {
        if (n == 0)
            throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n)
    {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(perm[i - 1], perm[j]);
        }
        return perm;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finaliser; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace aid

#endif // AID_NUMKIT_HPP
