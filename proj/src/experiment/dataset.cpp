#include "fstl/experiment/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fstl/error.hpp"
#include "fstl/nn/rng.hpp"
#include "fstl/nn/weights.hpp"

namespace fstl {

Shape Dataset::sample_shape() const { return Shape(features.shape().begin() + 1, features.shape().end()); }

Shard Dataset::subset(std::span<const std::size_t> indices) const {
    Shard s;
    s.features = features.gather_rows(indices);
    s.labels.reserve(indices.size());
    for (auto i : indices) s.labels.push_back(labels.at(i));
    return s;
}

Shard Dataset::all() const { return Shard{features, labels}; }

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at, const std::filesystem::path& path) {
    if (bytes.size() < at + 4) throw FormatError("truncated IDX header in " + path.string());
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, DataSplit split) {
    const auto img = read_file_bytes(images);
    const auto lab = read_file_bytes(labels);

    const auto img_magic = read_be32(img, 0, images);
    if (img_magic != kIdxImageMagic)
        throw FormatError("bad IDX image magic " + std::to_string(img_magic) + " in " + images.string() +
                          " (expected 2051)");
    const auto lab_magic = read_be32(lab, 0, labels);
    if (lab_magic != kIdxLabelMagic)
        throw FormatError("bad IDX label magic " + std::to_string(lab_magic) + " in " + labels.string() +
                          " (expected 2049)");

    const std::size_t n = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t n_labels = read_be32(lab, 4, labels);
    if (n != n_labels)
        throw FormatError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
    if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX file declares an empty dataset");
    if (img.size() < 16 + n * rows * cols) throw FormatError("truncated IDX image data in " + images.string());
    if (lab.size() < 8 + n) throw FormatError("truncated IDX label data in " + labels.string());

    Dataset d;
    d.split = split;
    std::vector<float> pixels(n * rows * cols);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(img[16 + i]) / 255.0f;
    d.features = Tensor({n, 1, rows, cols}, std::move(pixels));
    d.labels.resize(n);
    std::uint32_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d.labels[i] = lab[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.classes = max_label + 1;
    return d;
}

Dataset take_subset(const Dataset& data, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n >= data.size()) return data;
    auto idx = shuffled_indices(data.size(), seed);
    idx.resize(n);
    Dataset out;
    auto shard = data.subset(idx);
    out.features = std::move(shard.features);
    out.labels = std::move(shard.labels);
    out.classes = data.classes;
    out.split = data.split;
    return out;
}

Dataset synth_dataset(const SyntheticSpec& spec, DataSplit split) {
    if (spec.per_class == 0) throw ConfigError("empty class");
    if (spec.classes < 2) throw ConfigError("synthetic data needs at least two classes");
    if (spec.input_shape.empty()) throw ConfigError("synthetic data needs an input shape");
    const std::size_t dims = shape_elements(spec.input_shape);

    Rng mean_rng(derive_seed({spec.seed, 0x6d65616eULL}));
    std::vector<std::vector<double>> means(spec.classes, std::vector<double>(dims));
    for (auto& m : means) {
        double norm = 0.0;
        for (auto& v : m) {
            v = mean_rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : m) v = v / norm * spec.separation;
    }

    const std::uint64_t split_tag = split == DataSplit::train ? 1 : 2;
    Rng rng(derive_seed({spec.seed, split_tag}));
    const std::size_t n = spec.per_class * spec.classes;
    const auto order = shuffled_indices(n, derive_seed({spec.seed, split_tag, 0x6f72646572ULL}));

    Shape shape{n};
    shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
    std::vector<float> data(n * dims);
    Dataset d;
    d.labels.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t c = s % spec.classes;
        const std::size_t row = order[s];
        d.labels[row] = static_cast<std::uint32_t>(c);
        for (std::size_t j = 0; j < dims; ++j)
            data[row * dims + j] = static_cast<float>(means[c][j] + spec.noise * rng.normal());
    }
    d.features = Tensor(std::move(shape), std::move(data));
    d.classes = spec.classes;
    d.split = split;
    return d;
}

PartitionPlan partition(std::span<const std::size_t> pool, std::size_t n_vus, std::uint64_t seed) {
    if (n_vus == 0) throw ConfigError("partition needs at least one VU");
    if (n_vus > pool.size())
        throw ConfigError("cannot split " + std::to_string(pool.size()) + " samples across " + std::to_string(n_vus) +
                          " VUs");
    std::vector<std::size_t> shuffled(pool.begin(), pool.end());
    Rng rng(derive_seed({seed, 0x70617274ULL}));
    rng.shuffle(std::span<std::size_t>(shuffled));

    PartitionPlan plan;
    plan.n_vus = n_vus;
    const std::size_t base = shuffled.size() / n_vus, extra = shuffled.size() % n_vus;
    std::size_t at = 0;
    for (std::size_t i = 0; i < n_vus; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        plan.shards.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(at),
                                 shuffled.begin() + static_cast<std::ptrdiff_t>(at + len));
        at += len;
    }
    return plan;
}

PartitionPlan partition(const Dataset& data, std::size_t n_vus, std::uint64_t seed) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return partition(all, n_vus, seed);
}

std::vector<Shard> materialize(const Dataset& data, const PartitionPlan& plan) {
    std::vector<Shard> out;
    out.reserve(plan.shards.size());
    for (const auto& idx : plan.shards) out.push_back(data.subset(idx));
    return out;
}

}  // namespace fstl
