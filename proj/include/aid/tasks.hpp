// Datasets and non-stationary task streams.
#ifndef AID_TASKS_HPP
#define AID_TASKS_HPP

#include "aid/numkit.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aid {

struct Dataset {
    Matrix features; // samples x features, values in [0, 1]
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    /// Throws std::invalid_argument if shapes or labels are inconsistent.
    void validate() const;
    Dataset subset(std::span<const std::size_t> rows) const;
};

enum class IdxErrorKind { Io, BadMagic, Truncated, CountMismatch };

class IdxError : public std::runtime_error {
public:
    IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    IdxErrorKind kind() const { return kind_; }

private:
    IdxErrorKind kind_;
};

/// Big-endian IDX pair: images (magic 2051) scaled by 1/255, labels (magic 2049).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes features (rounded to bytes) and labels as an IDX pair; images are one row of
/// `features` wide unless `image_dims` (rows, cols) is supplied.
void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels,
               std::pair<std::uint32_t, std::uint32_t> image_dims = {0, 0});

/**
 * Gaussian class blobs: class means uniform in [0,1]^d, isotropic noise with
 * standard deviation 1 / separation, clipped to [0, 1]. Samples are grouped by
 * class, `per_class` of each.
 */
Dataset synth_dataset(std::size_t per_class, int classes, std::size_t features,
                      double separation, Rng& rng);

namespace stream {
struct PermutedInput {};
struct RandomLabel { bool exclude_previous = false; };
struct Chunked { std::size_t n_chunks = 10; bool retain_past = true; };
} // namespace stream

using StreamKind = std::variant<stream::PermutedInput, stream::RandomLabel, stream::Chunked>;

/// Task t is a pure function of (base data, kind, seed, t).
class TaskStream {
public:
    TaskStream(Dataset base, StreamKind kind, std::uint64_t seed);

    Dataset next_task(std::size_t t) const;

    /// Feature permutation applied at task t (PermutedInput only).
    std::vector<std::size_t> permutation(std::size_t t) const;
    /// Labels assigned at task t (RandomLabel only).
    std::vector<int> task_labels(std::size_t t) const;
    /// Row indices of chunk c (Chunked only).
    std::vector<std::size_t> chunk(std::size_t c) const;

    const Dataset& base() const { return base_; }
    const StreamKind& kind() const { return kind_; }

private:
    Dataset base_;
    StreamKind kind_;
    std::uint64_t seed_;
    std::vector<std::size_t> chunk_order_;
};

} // namespace aid

#endif // AID_TASKS_HPP
