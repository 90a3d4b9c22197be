#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fstl/nn/tensor.hpp"
#include "fstl/protocols.hpp"

namespace fstl {

enum class DataSplit { train, test };

struct Dataset {
    Tensor features;  // [samples, ...per-sample shape]
    Labels labels;
    std::size_t classes = 0;
    DataSplit split = DataSplit::train;

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const;
    /// Samples at `indices`, in that order.
    Shard subset(std::span<const std::size_t> indices) const;
    Shard all() const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Big-endian IDX image/label pair. Pixels are scaled to [0, 1] and held as
/// [n, 1, rows, cols]. Throws FormatError with distinct messages for a wrong
/// magic, an image/label count mismatch and truncated files.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 DataSplit split = DataSplit::train);

/// Seeded random subset of `n` samples (all of them when n == 0 or n >= size).
Dataset take_subset(const Dataset& data, std::size_t n, std::uint64_t seed);

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t per_class = 128;
    std::size_t classes = 4;
    Shape input_shape{1, 8, 8};
    /// Distance of each class mean from the origin.
    double separation = 3.0;
    double noise = 1.0;
};

/// Gaussian class blobs. Class means are random unit directions scaled by
/// `separation`, fixed by the seed, so the train and test splits of one spec
/// share them. Throws ConfigError("empty class") when per_class == 0.
Dataset synth_dataset(const SyntheticSpec& spec, DataSplit split = DataSplit::train);

struct PartitionPlan {
    std::size_t n_vus = 0;
    /// Dataset row indices per VU.
    std::vector<std::vector<std::size_t>> shards;
};

/// Seeded shuffle of the row indices in `pool`, then contiguous chunks; the
/// first size % n_vus shards receive one extra sample.
PartitionPlan partition(std::span<const std::size_t> pool, std::size_t n_vus, std::uint64_t seed);
PartitionPlan partition(const Dataset& data, std::size_t n_vus, std::uint64_t seed);

std::vector<Shard> materialize(const Dataset& data, const PartitionPlan& plan);

}  // namespace fstl
