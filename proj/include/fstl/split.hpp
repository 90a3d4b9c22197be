#pragma once

#include <cstdint>

#include "fstl/nn/network.hpp"

namespace fstl {

/// Cut after layer `k` (1-based): the client keeps layers 1..k, the server
/// the rest. Legal cuts satisfy 1 < k < L.
struct SplitSpec {
    std::size_t k = 0;
};

struct SplitPair {
    Network client;
    Network server;
};

/// Activations emitted at the cut plus the labels they travel with.
struct SmashedBatch {
    Tensor activations;
    Labels labels;
    std::uint32_t vu_id = 0;
    /// 4 bytes per activation element; labels are not counted.
    std::uint64_t byte_size = 0;

    /// Smashed values per sample (the latency model's h).
    std::size_t per_sample_width() const { return activations.row_size(); }
};

struct CutGradient {
    Tensor grad;
    std::uint32_t vu_id = 0;
};

void validate_cut(std::size_t layer_count, SplitSpec spec);

/// Moves layers 1..k into the client and k+1..L into the server.
SplitPair split_network(Network net, SplitSpec spec);

/// Inverse of split_network (client layers followed by server layers).
Network join_networks(const Network& client, const Network& server);

struct ClientPass {
    SmashedBatch smashed;
    ActivationTrace trace;
};

ClientPass client_forward(const Network& client, const Tensor& batch, const Labels& labels, std::uint32_t vu_id);

struct ServerPass {
    LossAccuracy metrics;
    GradientSet grads;
    CutGradient cut_grad;
};

ServerPass server_forward_backward(const Network& server, const SmashedBatch& smashed);

GradientSet client_backward(const Network& client, const ActivationTrace& trace, const CutGradient& cut_grad);

}  // namespace fstl
