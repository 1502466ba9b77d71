#include "aid/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace aid {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

// Stream tags for seed derivation.
constexpr std::uint64_t kPermutationTag = 1;
constexpr std::uint64_t kLabelTag = 2;
constexpr std::uint64_t kChunkTag = 3;

std::vector<unsigned char> slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IdxError(IdxErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                   const std::filesystem::path& path)
{
    if (bytes.size() < offset + 4)
        throw IdxError(IdxErrorKind::Truncated, path.string() + ": truncated header");
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void put_be32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    out.write(b, 4);
}

std::uint64_t task_seed(std::uint64_t seed, std::uint64_t tag, std::size_t t)
{
    return mix_seed(mix_seed(seed, tag), t);
}

} // namespace

void Dataset::validate() const
{
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw std::invalid_argument("dataset: feature rows do not match label count");
    if (num_classes <= 0)
        throw std::invalid_argument("dataset: need at least one class");
    for (int label : labels)
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument("dataset: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(num_classes) + ")");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Dataset out;
    out.num_classes = num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels)
{
    const auto img = slurp(images);
    const auto lbl = slurp(labels);

    const std::uint32_t img_magic = be32(img, 0, images);
    if (img_magic != kImageMagic)
        throw IdxError(IdxErrorKind::BadMagic, images.string() + ": image magic " +
                                                   std::to_string(img_magic) + ", expected 2051");
    const std::uint32_t lbl_magic = be32(lbl, 0, labels);
    if (lbl_magic != kLabelMagic)
        throw IdxError(IdxErrorKind::BadMagic, labels.string() + ": label magic " +
                                                   std::to_string(lbl_magic) + ", expected 2049");

    const std::size_t count = be32(img, 4, images);
    const std::size_t rows = be32(img, 8, images);
    const std::size_t cols = be32(img, 12, images);
    const std::size_t label_count = be32(lbl, 4, labels);
    const std::size_t pixels = rows * cols;

    if (img.size() < 16 + count * pixels)
        throw IdxError(IdxErrorKind::Truncated, images.string() + ": expected " +
                                                    std::to_string(count * pixels) +
                                                    " pixel bytes");
    if (lbl.size() < 8 + label_count)
        throw IdxError(IdxErrorKind::Truncated, labels.string() + ": expected " +
                                                    std::to_string(label_count) + " label bytes");
    if (count != label_count)
        throw IdxError(IdxErrorKind::CountMismatch,
                       std::to_string(count) + " images but " + std::to_string(label_count) +
                           " labels");

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < count * pixels; ++i)
        data.features.data()[i] = double(img[16 + i]) / 255.0;
    data.labels.resize(count);
    int top = 0;
    for (std::size_t i = 0; i < count; ++i) {
        data.labels[i] = lbl[8 + i];
        top = std::max(top, data.labels[i]);
    }
    data.num_classes = count ? top + 1 : 1;
    return data;
}

void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels,
               std::pair<std::uint32_t, std::uint32_t> image_dims)
{
    data.validate();
    if (data.num_classes > 256)
        throw std::invalid_argument("write_idx: labels must fit in one byte");
    auto [rows, cols] = image_dims;
    if (rows == 0 || cols == 0) {
        rows = 1;
        cols = static_cast<std::uint32_t>(data.features.cols());
    }
    if (std::size_t(rows) * cols != static_cast<std::size_t>(data.features.cols()))
        throw std::invalid_argument("write_idx: image dims do not match feature count");

    std::ofstream img(images, std::ios::binary);
    std::ofstream lbl(labels, std::ios::binary);
    if (!img || !lbl)
        throw IdxError(IdxErrorKind::Io, "cannot write IDX output");
    put_be32(img, kImageMagic);
    put_be32(img, static_cast<std::uint32_t>(data.size()));
    put_be32(img, rows);
    put_be32(img, cols);
    for (Eigen::Index i = 0; i < data.features.size(); ++i) {
        const double v = std::clamp(data.features.data()[i], 0.0, 1.0);
        img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    put_be32(lbl, kLabelMagic);
    put_be32(lbl, static_cast<std::uint32_t>(data.size()));
    for (int label : data.labels)
        lbl.put(static_cast<char>(static_cast<unsigned char>(label)));
    if (!img || !lbl)
        throw IdxError(IdxErrorKind::Io, "IDX write failed");
}

Dataset synth_dataset(std::size_t per_class, int classes, std::size_t features,
                      double separation, Rng& rng)
{
    if (per_class == 0 || classes <= 0 || features == 0)
        throw std::invalid_argument("synth_dataset: counts must be positive");
    if (!(separation > 0.0))
        throw std::invalid_argument("synth_dataset: separation must be positive");
    const auto d = static_cast<Eigen::Index>(features);
    Matrix means(classes, d);
    for (Eigen::Index i = 0; i < means.size(); ++i)
        means.data()[i] = rng.uniform();

    const double sigma = 1.0 / separation;
    Dataset data;
    data.num_classes = classes;
    data.features.resize(static_cast<Eigen::Index>(per_class) * classes, d);
    data.labels.reserve(per_class * static_cast<std::size_t>(classes));
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            for (Eigen::Index j = 0; j < d; ++j)
                data.features(row, j) = std::clamp(means(c, j) + sigma * rng.normal(), 0.0, 1.0);
            data.labels.push_back(c);
        }
    }
    return data;
}

TaskStream::TaskStream(Dataset base, StreamKind kind, std::uint64_t seed)
    : base_(std::move(base)), kind_(kind), seed_(seed)
{
    base_.validate();
    if (const auto* c = std::get_if<stream::Chunked>(&kind_)) {
        if (c->n_chunks == 0 || c->n_chunks > base_.size())
            throw std::invalid_argument("chunked stream: need 1 <= n_chunks <= samples");
        Rng rng(mix_seed(seed_, kChunkTag));
        chunk_order_ = rng.permutation(base_.size());
    }
}

std::vector<std::size_t> TaskStream::permutation(std::size_t t) const
{
    if (!std::holds_alternative<stream::PermutedInput>(kind_))
        throw std::logic_error("permutation: stream is not permuted-input");
    Rng rng(task_seed(seed_, kPermutationTag, t));
    return rng.permutation(static_cast<std::size_t>(base_.features.cols()));
}

std::vector<int> TaskStream::task_labels(std::size_t t) const
{
    const auto* kind = std::get_if<stream::RandomLabel>(&kind_);
    if (!kind)
        throw std::logic_error("task_labels: stream is not random-label");
    const auto k = static_cast<std::uint64_t>(base_.num_classes);
    if (kind->exclude_previous && k < 2)
        throw std::invalid_argument("random-label stream: exclude_previous needs >= 2 classes");

    std::vector<int> labels = base_.labels;
    // With exclude_previous each task's labels depend on the previous task's, so replay from 0.
    const std::size_t first = kind->exclude_previous ? 0 : t;
    for (std::size_t task = first; task <= t; ++task) {
        Rng rng(task_seed(seed_, kLabelTag, task));
        for (int& label : labels) {
            if (kind->exclude_previous) {
                auto draw = static_cast<int>(rng.below(k - 1));
                label = draw >= label ? draw + 1 : draw;
            } else {
                label = static_cast<int>(rng.below(k));
            }
        }
    }
    return labels;
}

std::vector<std::size_t> TaskStream::chunk(std::size_t c) const
{
    const auto* kind = std::get_if<stream::Chunked>(&kind_);
    if (!kind)
        throw std::logic_error("chunk: stream is not chunked");
    if (c >= kind->n_chunks)
        throw std::out_of_range("chunk " + std::to_string(c) + " of " +
                                std::to_string(kind->n_chunks));
    const std::size_t n = base_.size();
    const std::size_t begin = c * n / kind->n_chunks;
    const std::size_t end = (c + 1) * n / kind->n_chunks;
    return {chunk_order_.begin() + static_cast<std::ptrdiff_t>(begin),
            chunk_order_.begin() + static_cast<std::ptrdiff_t>(end)};
}

Dataset TaskStream::next_task(std::size_t t) const
{
    if (std::holds_alternative<stream::PermutedInput>(kind_)) {
        const auto perm = permutation(t);
        Dataset out = base_;
        for (std::size_t j = 0; j < perm.size(); ++j)
            out.features.col(static_cast<Eigen::Index>(j)) =
                base_.features.col(static_cast<Eigen::Index>(perm[j]));
        return out;
    }
    if (std::holds_alternative<stream::RandomLabel>(kind_)) {
        Dataset out = base_;
        out.labels = task_labels(t);
        return out;
    }
    const auto& kind = std::get<stream::Chunked>(kind_);
    if (t >= kind.n_chunks)
        throw std::out_of_range("chunked stream: task " + std::to_string(t) + " but only " +
                                std::to_string(kind.n_chunks) + " chunks");
    std::vector<std::size_t> rows;
    for (std::size_t c = kind.retain_past ? 0 : t; c <= t; ++c) {
        const auto part = chunk(c);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return base_.subset(rows);
}

} // namespace aid
