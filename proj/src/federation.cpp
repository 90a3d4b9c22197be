#include "fstl/federation.hpp"

#include <cmath>
#include <stdexcept>

#include "fstl/error.hpp"

namespace fstl {

const char* aggregation_rule_name(AggregationRule r) {
    switch (r) {
        case AggregationRule::fedavg_params: return "fedavg-params";
        case AggregationRule::grad_average: return "grad-average";
        case AggregationRule::alpha_blend: return "alpha-blend";
    }
    return "unknown";
}

std::vector<ClientWeight> weights_from_sizes(std::span<const std::size_t> sizes) {
    std::vector<ClientWeight> out;
    out.reserve(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i)
        out.push_back({static_cast<std::uint32_t>(i), static_cast<double>(sizes[i])});
    return out;
}

std::vector<double> normalized_weights(std::span<const ClientWeight> weights) {
    if (weights.empty()) throw std::invalid_argument("aggregation needs at least one participant");
    double total = 0.0;
    for (const auto& cw : weights) {
        if (!(cw.w >= 0.0) || !std::isfinite(cw.w))
            throw std::invalid_argument("client weight for vu " + std::to_string(cw.vu_id) + " must be nonnegative");
        total += cw.w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("client weights sum to zero");
    std::vector<double> out;
    out.reserve(weights.size());
    for (const auto& cw : weights) out.push_back(cw.w / total);
    return out;
}

namespace {

void check_congruent(const TensorGroups& a, const TensorGroups& b, std::size_t which) {
    auto fail = [&](const std::string& why) {
        throw ShapeError("participant " + std::to_string(which) + ": " + why);
    };
    if (a.size() != b.size()) fail("layer count mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) fail("tensor count mismatch at layer " + std::to_string(i));
        for (std::size_t j = 0; j < a[i].size(); ++j)
            if (a[i][j].shape() != b[i][j].shape())
                fail("shape mismatch at layer " + std::to_string(i) + ": " + shape_to_string(b[i][j].shape()) +
                     " vs " + shape_to_string(a[i][j].shape()));
    }
}

template <typename Set>
Set weighted_mean(std::span<const Set> sets, std::span<const ClientWeight> weights, AggregationRule rule,
                  AggregationReport* report) {
    if (sets.empty()) throw std::invalid_argument("aggregation needs at least one participant");
    if (sets.size() != weights.size())
        throw std::invalid_argument(std::to_string(sets.size()) + " participants but " +
                                    std::to_string(weights.size()) + " weights");
    for (std::size_t n = 1; n < sets.size(); ++n) check_congruent(sets[0].layers, sets[n].layers, n);
    const auto w = normalized_weights(weights);

    Set out = sets[0];
    std::uint64_t elements = 0;
    std::vector<double> acc;
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        for (std::size_t j = 0; j < out.layers[i].size(); ++j) {
            auto dst = out.layers[i][j].values();
            acc.assign(dst.size(), 0.0);
            for (std::size_t n = 0; n < sets.size(); ++n) {
                const auto src = sets[n].layers[i][j].values();
                for (std::size_t e = 0; e < dst.size(); ++e) acc[e] += w[n] * static_cast<double>(src[e]);
            }
            for (std::size_t e = 0; e < dst.size(); ++e) dst[e] = static_cast<float>(acc[e]);
            elements += dst.size();
        }
    }
    if (report) {
        report->participants.clear();
        for (const auto& cw : weights) report->participants.push_back(cw.vu_id);
        report->bytes_aggregated = elements * sets.size() * sizeof(float);
        report->rule = rule;
    }
    return out;
}

}  // namespace

ParameterSet fedavg_params(std::span<const ParameterSet> sets, std::span<const ClientWeight> weights,
                           AggregationReport* report) {
    return weighted_mean(sets, weights, AggregationRule::fedavg_params, report);
}

GradientSet average_gradients(std::span<const GradientSet> grads, std::span<const ClientWeight> weights,
                              AggregationReport* report) {
    return weighted_mean(grads, weights, AggregationRule::grad_average, report);
}

void apply_server_update(Network& server, const GradientSet& g_avg, double eta) { sgd_step(server, g_avg, eta); }

ParameterSet blend_client_update(const ParameterSet& theta_i, const ParameterSet& theta_global, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    check_congruent(theta_i.layers, theta_global.layers, 1);
    if (alpha == 1.0) return theta_global;
    if (alpha == 0.0) return theta_i;
    ParameterSet out = theta_i;
    for (std::size_t i = 0; i < out.layers.size(); ++i)
        for (std::size_t j = 0; j < out.layers[i].size(); ++j) {
            auto dst = out.layers[i][j].values();
            const auto own = theta_i.layers[i][j].values();
            const auto global = theta_global.layers[i][j].values();
            for (std::size_t e = 0; e < dst.size(); ++e)
                dst[e] = static_cast<float>(alpha * static_cast<double>(global[e]) +
                                            (1.0 - alpha) * static_cast<double>(own[e]));
        }
    return out;
}

}  // namespace fstl
