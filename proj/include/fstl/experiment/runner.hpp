#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fstl/experiment/config.hpp"
#include "fstl/experiment/dataset.hpp"
#include "fstl/latency.hpp"
#include "fstl/protocols.hpp"

namespace fstl {

inline constexpr const char* kAccuracyCsvHeader =
    "round,protocol,n_vus,train_loss,test_accuracy,latency_s,uplink_params,downlink_params";

std::string accuracy_csv(ProtocolKind protocol, std::size_t n_vus, const std::vector<RoundRecord>& records);
std::string accuracy_csv_name(ProtocolKind protocol, std::size_t n_vus);

struct LoadedData {
    Dataset train;
    Dataset test;
};

LoadedData load_data(const ExperimentConfig& cfg);
NetworkSpec architecture_for(const ExperimentConfig& cfg, const Dataset& train);
/// cfg.pretrain with its seed derived from the experiment seed.
PretrainSpec resolved_pretrain_spec(const ExperimentConfig& cfg);

struct CellResult {
    ProtocolKind protocol = ProtocolKind::FL;
    std::size_t n_vus = 0;
    bool ok = false;
    std::string error;
    std::string csv_file;  // relative to the output directory
    std::vector<RoundRecord> records;
    double wall_clock_s = 0.0;
};

struct ExperimentReport {
    std::vector<CellResult> cells;
    std::optional<LatencyParams> latency_params;
    std::vector<std::string> latency_notes;
    std::optional<std::string> latency_error;
    std::optional<double> source_accuracy;
    std::filesystem::path manifest;
    bool all_ok() const;
    const CellResult* cell(ProtocolKind protocol, std::size_t n_vus) const;
};

struct RunOptions {
    /// Skip the latency curve (single-cell `train` runs keep it).
    bool latency_curve = true;
    /// Print one progress line per cell to stderr.
    bool verbose = false;
};

/// Runs every (protocol, N) cell, writes one accuracy CSV per cell, the
/// latency curve and manifest.json into cfg.output_dir. A failing cell is
/// recorded and the sweep continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Re-runs the experiment recorded in `manifest`, writing into `output_dir`.
ExperimentReport replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& output_dir,
                                 const RunOptions& options = {});

/// Seconds of counted compute for one FSL round per VU of `shard_size`
/// samples, without training. Used when no split cell ran.
double counted_split_round_seconds(const NetworkSpec& arch, SplitSpec cut, std::size_t shard_size,
                                   const RoundConfig& round);

inline constexpr const char* kArtifactVersion = "1.0.0";

}  // namespace fstl
