#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fstl/experiment/dataset.hpp"
#include "fstl/experiment/pretrain.hpp"
#include "fstl/protocols.hpp"

namespace fstl {

struct DatasetConfig {
    enum class Source { idx, synthetic };
    Source source = Source::idx;
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    /// Seeded subsets; 0 keeps every sample.
    std::size_t train_subset = 0;
    std::size_t test_subset = 0;
    SyntheticSpec synthetic;
    /// False when the synthetic seed follows the experiment seed.
    bool synthetic_seed_explicit = false;
    std::size_t synthetic_test_per_class = 64;
};

struct ModelConfig {
    std::size_t conv_channels = 8;
    std::size_t hidden = 64;
};

/// Values replacing measured latency symbols in the latency curve.
struct LatencyOverrides {
    std::optional<double> T, T_prime, T_fedavg, T_merge, p, d, h, r, R;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    ModelConfig model;
    std::vector<ProtocolKind> protocols{ProtocolKind::FL, ProtocolKind::SL, ProtocolKind::FSL, ProtocolKind::FSTL};
    std::vector<std::size_t> n_vus{2, 5, 10, 20};
    /// RoundConfig fields; protocol, cut and seed are filled per cell.
    RoundConfig round;
    std::size_t cut = 3;
    PretrainSpec pretrain;
    /// Existing pre-trained weights; pretraining runs when absent.
    std::optional<std::filesystem::path> pretrained_weights;
    LatencyOverrides latency;
    std::filesystem::path output_dir = "fstl-out";
};

/// Sets the experiment seed; a synthetic dataset without its own seed follows it.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Throws ConfigError naming the offending key.
void validate_config(const ExperimentConfig& cfg);

/// Parses TOML text. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config_toml(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Round-trippable JSON echo used by the run manifest.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace fstl
