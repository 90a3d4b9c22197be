#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fstl/protocol_kind.hpp"

namespace fstl {

/// Symbols of the per-round latency table. Times in seconds, counts in
/// parameters (32-bit values), R in parameters per second.
struct LatencyParams {
    double T = 0.0;         // per-round training time, model trained from scratch
    double T_prime = 0.0;   // per-round training time from pre-trained weights
    double T_fedavg = 0.0;  // full-model aggregation time
    double T_merge = 0.0;   // client-submodel aggregation time
    double p = 0.0;         // full-model parameter count
    double d = 0.0;         // total samples across all VUs
    double h = 0.0;         // smashed values per sample
    double r = 0.0;         // client-submodel share of p, in (0, 1)
    double R = 0.0;         // link rate
    double N = 0.0;         // VU count
};

/// Parameters per second for a link of `bits_per_second`, 32 bits per parameter.
double params_per_second_from_bits(double bits_per_second);

/// Throws std::invalid_argument unless every symbol is strictly positive and r < 1.
void validate(const LatencyParams& params);
/// Broken ordering preconditions (T' > T, T_merge > T_fedavg); empty when both hold.
std::vector<std::string> precondition_warnings(const LatencyParams& params);

/// One row of the table.
struct LatencyBreakdown {
    double train_agg_time = 0.0;
    double comms_per_vu = 0.0;
    double total_comms = 0.0;
    double total_comm_time = 0.0;
    double total_latency = 0.0;
};

// Each row validates only the symbols it uses.
LatencyBreakdown fl_latency(const LatencyParams& params);
LatencyBreakdown sl_latency(const LatencyParams& params);
LatencyBreakdown fsl_latency(const LatencyParams& params);
LatencyBreakdown fstl_latency(const LatencyParams& params);
LatencyBreakdown latency_for(ProtocolKind kind, const LatencyParams& params);
/// The row formulas without validation, for bookkeeping on runs whose cut
/// leaves r outside (0, 1).
LatencyBreakdown table_row(ProtocolKind kind, const LatencyParams& params);

struct MethodTotal {
    ProtocolKind method;
    double total;
};

struct OrderingReport {
    /// Ascending by total latency (ties keep FL, SL, FSL, FSTL order).
    std::vector<MethodTotal> ascending;
    bool fstl_below_fsl = false;
    bool fsl_below_fl = false;
    bool fl_below_sl = false;
    /// FSTL < FSL < FL < SL.
    bool paper_ordering_holds = false;
    /// e.g. "FSL<FL violated"
    std::vector<std::string> violations;
};

OrderingReport ordering_report(const LatencyParams& params);

/// Raw measurements from a run. measure_params turns them into symbols.
struct LatencyMeasurements {
    std::optional<double> full_params;
    std::optional<double> client_params;
    std::optional<double> smashed_width;
    std::optional<std::vector<std::size_t>> shard_sizes;
    std::optional<double> T;
    std::optional<double> T_prime;
    std::optional<double> T_fedavg;
    std::optional<double> T_merge;
    std::optional<double> R;
};

/// Throws std::invalid_argument listing every absent symbol.
/// r = client_params / full_params, d = sum of shard sizes, N = shard count.
LatencyParams measure_params(const LatencyMeasurements& m);

struct CurveRow {
    std::size_t n = 0;
    ProtocolKind method = ProtocolKind::FL;
    LatencyBreakdown breakdown;
};

/// All four methods at every N (ascending), every other symbol held fixed.
std::vector<CurveRow> latency_vs_n_curve(const LatencyParams& base, std::span<const std::size_t> n_values);

inline constexpr const char* kLatencyCsvHeader = "n,method,train_agg_s,comm_s,total_s,total_comm_params";
std::string latency_curve_csv(std::span<const CurveRow> rows);

}  // namespace fstl
