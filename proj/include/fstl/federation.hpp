#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fstl/nn/network.hpp"

namespace fstl {

struct ClientWeight {
    std::uint32_t vu_id = 0;
    double w = 1.0;
};

enum class AggregationRule { fedavg_params, grad_average, alpha_blend };

const char* aggregation_rule_name(AggregationRule r);

struct AggregationReport {
    std::vector<std::uint32_t> participants;
    std::uint64_t bytes_aggregated = 0;
    AggregationRule rule = AggregationRule::fedavg_params;
};

/// Weights proportional to the given sample counts, vu ids 0..n-1.
std::vector<ClientWeight> weights_from_sizes(std::span<const std::size_t> sizes);

/// Divides by the sum; throws on an empty list, a negative weight or a zero sum.
std::vector<double> normalized_weights(std::span<const ClientWeight> weights);

// The averaging operations reduce participants in the order given, and the
// protocols always pass them in ascending vu_id order. Each element is
// accumulated as sum_i (w_i * x_i) in double and rounded to float once.

ParameterSet fedavg_params(std::span<const ParameterSet> sets, std::span<const ClientWeight> weights,
                           AggregationReport* report = nullptr);

GradientSet average_gradients(std::span<const GradientSet> grads, std::span<const ClientWeight> weights,
                              AggregationReport* report = nullptr);

/// theta_s <- theta_s - eta * G_avg; identical to sgd_step.
void apply_server_update(Network& server, const GradientSet& g_avg, double eta);

/// theta_i <- alpha * theta_global + (1 - alpha) * theta_i, elementwise.
ParameterSet blend_client_update(const ParameterSet& theta_i, const ParameterSet& theta_global, double alpha);

}  // namespace fstl
