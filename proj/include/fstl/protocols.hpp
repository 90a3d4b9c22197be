#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fstl/latency.hpp"
#include "fstl/nn/network.hpp"
#include "fstl/protocol_kind.hpp"
#include "fstl/split.hpp"

namespace fstl {

/// One VU's private data (or an evaluation set).
struct Shard {
    Tensor features;  // [samples, ...input shape]
    Labels labels;

    std::size_t size() const { return labels.size(); }
};

struct StopCriterion {
    enum class Kind { max_rounds, loss_threshold };
    Kind kind = Kind::max_rounds;
    /// Training stops after the first round whose mean training loss is at or below this.
    double loss_threshold = 0.0;
};

/// Deterministic cost model: compute time is counted multiply-accumulates
/// divided by a device rate, so modelled latencies are reproducible.
struct CostModel {
    double vu_macs_per_s = 1e9;
    double hap_macs_per_s = 1e9;
    /// Link rate R in parameters per second.
    double link_params_per_s = 1e6;
};

struct RoundConfig {
    ProtocolKind protocol = ProtocolKind::FSL;
    std::size_t rounds = 10;
    std::size_t local_epochs = 1;
    std::size_t batch_size = 32;
    double eta = 0.05;
    double alpha = 1.0;
    /// Accepted for completeness of the algorithm inputs; unused.
    double sigma = 0.0;
    std::optional<SplitSpec> cut;
    std::uint64_t seed = 0;
    StopCriterion stop;
    CostModel cost;
};

/// Throws ConfigError on invalid combinations (cut present iff split protocol, ...).
void validate_round_config(const RoundConfig& cfg);

struct RoundRecord {
    std::size_t round = 0;  // 1-based
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    /// Round compute time: max over VUs for FL/FSL/FSTL, sum for SL.
    double compute_s = 0.0;
    /// T_fedavg for FL, T_merge for FSL/FSTL, 0 for SL.
    double aggregation_s = 0.0;
    double comm_s = 0.0;
    double latency_s = 0.0;
    std::vector<std::uint64_t> uplink_per_vu;    // parameters
    std::vector<std::uint64_t> downlink_per_vu;  // parameters
    std::uint64_t uplink_total = 0;
    std::uint64_t downlink_total = 0;
    /// Per-VU modelled training time this round.
    std::vector<double> vu_compute_s;
    /// The latency symbols this round was evaluated with.
    LatencyParams symbols;
};

/// theta_i / W_i per VU, plus theta_s (split protocols) or the global model W (FL).
struct FleetState {
    ProtocolKind kind = ProtocolKind::FL;
    std::vector<Network> vu_models;
    Network hub;
    /// FedAvg of the client submodels (FSL/FSTL) or the relay output (SL);
    /// unused for FL.
    Network consensus_client;
    std::size_t round = 0;
    bool from_pretrained = false;
};

/// FSTL requires `pretrained`; the other protocols reject it.
FleetState init_fleet(const RoundConfig& cfg, const NetworkSpec& spec, std::size_t n_vus,
                      const Network* pretrained = nullptr);

/// Model used for evaluation: the global FL model, or consensus client + server.
Network evaluation_model(const FleetState& state);

LossAccuracy evaluate(const Network& net, const Shard& data, std::size_t batch_size = 256);

/// Sample order for one VU epoch, seeded by (seed, vu_id, round, epoch).
std::vector<std::size_t> batch_order(std::uint64_t seed, std::uint32_t vu_id, std::size_t round, std::size_t epoch,
                                     std::size_t n);

// Each round function advances `state` by one round. `eval` is the held-out
// set used for test metrics; when null, metrics come from the union of shards.
RoundRecord run_fl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                         const Shard* eval = nullptr);
RoundRecord run_sl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                         const Shard* eval = nullptr);
RoundRecord run_fsl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                          const Shard* eval = nullptr);
RoundRecord run_fstl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                           const Shard* eval = nullptr);
RoundRecord run_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                      const Shard* eval = nullptr);

struct TrainResult {
    std::vector<RoundRecord> records;
    FleetState state;
};

TrainResult train(const RoundConfig& cfg, const NetworkSpec& spec, std::span<const Shard> shards, const Shard& test,
                  const Network* pretrained = nullptr);

}  // namespace fstl
