#pragma once

#include <cstdint>
#include <vector>

#include "fstl/nn/network.hpp"
#include "fstl/protocols.hpp"

namespace fstl::oracle {

// Plain double-precision reimplementation of the layer math, written
// independently of the library kernels. Only layer kinds and shapes are read
// from the Network.

using Params = std::vector<std::vector<double>>;  // one flat vector per layer

Params to_double(const Network& net);

struct RefOutput {
    std::vector<double> out;  // [batch * output width]
    double loss = 0.0;        // mean cross-entropy when the net has a head
    /// Sign of every relu input, concatenated; used to detect kink crossings.
    std::vector<std::uint8_t> relu_mask;
};

RefOutput ref_forward(const Network& net, const Params& params, const std::vector<double>& input, std::size_t batch,
                      const Labels* labels = nullptr);

struct FdReport {
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
    double max_rel_error = 0.0;
    std::size_t worst_layer = 0;
};

/// Central differences of the mean loss w.r.t. every parameter, compared
/// with `analytic`. Relative error uses max(|a|, |n|, floor) as denominator.
FdReport finite_difference_check(const Network& net, const Tensor& batch, const Labels& labels,
                                 const GradientSet& analytic, double step = 1e-3, double floor = 1e-4);

/// Random float tensor with entries uniform in [lo, hi).
Tensor random_tensor(const Shape& shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f);
Labels random_labels(std::size_t n, std::size_t classes, std::uint64_t seed);

/// Centralized minibatch SGD on the unsplit network with the protocols'
/// batch order for VU 0. The oracle for single-VU equivalences.
std::vector<Network> centralized_trajectory(Network net, const Shard& data, const RoundConfig& cfg);

/// Largest ULP distance between corresponding floats.
std::uint64_t max_ulp_distance(std::span<const float> a, std::span<const float> b);

}  // namespace fstl::oracle
