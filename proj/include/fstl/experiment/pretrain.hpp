#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fstl/experiment/dataset.hpp"
#include "fstl/nn/network.hpp"

namespace fstl {

enum class SourceScheme { disjoint_sample_split, disjoint_class_subset };

const char* scheme_name(SourceScheme s);
SourceScheme parse_scheme(const std::string& text);

/// Source task p' for transfer learning.
struct PretrainSpec {
    SourceScheme scheme = SourceScheme::disjoint_sample_split;
    /// Share of the training set reserved for the source task.
    double fraction = 0.5;
    /// Source classes under disjoint_class_subset.
    std::vector<std::uint32_t> classes{0, 1, 2, 3, 4};
    std::size_t epochs = 3;
    double eta = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    /// Share of the source samples held out to score the source task.
    double holdout = 0.1;
};

void validate_pretrain_spec(const PretrainSpec& spec);

struct SourceTargetSplit {
    std::vector<std::size_t> source;  // dataset rows for the source task
    std::vector<std::size_t> target;  // dataset rows left for the VU shards
};

/// Seeded split of `train`: the first `fraction` of a shuffle feeds the source
/// task (filtered to `classes` under the class-subset scheme), the rest is the
/// target pool.
SourceTargetSplit source_target_split(const Dataset& train, const PretrainSpec& spec);

struct PretrainResult {
    Network network;
    double source_accuracy = 0.0;
    double source_loss = 0.0;
    std::size_t source_train_samples = 0;
    std::size_t source_holdout_samples = 0;
};

/// Trains the full architecture on `source` rows of `train`. Throws ConfigError
/// when a source row also appears in `target`.
PretrainResult pretrain(const PretrainSpec& spec, const NetworkSpec& architecture, const Dataset& train,
                        std::span<const std::size_t> source, std::span<const std::size_t> target);

/// One epoch of minibatch SGD over `data` in a seeded order; returns the mean loss.
double sgd_epoch(Network& net, const Shard& data, std::size_t batch_size, double eta, std::uint64_t seed,
                 std::size_t epoch);

/// Writes the weights to `path` and metadata to `path` + ".json".
void save_pretrained(const PretrainResult& result, const PretrainSpec& spec, const std::filesystem::path& path);
Network load_pretrained(const std::filesystem::path& path, const NetworkSpec& architecture);

std::filesystem::path sidecar_path(const std::filesystem::path& weights);

}  // namespace fstl
