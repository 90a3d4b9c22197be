#include "fstl/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fstl/error.hpp"
#include "fstl/federation.hpp"
#include "fstl/nn/rng.hpp"

namespace fstl {

void validate_round_config(const RoundConfig& cfg) {
    if (cfg.rounds == 0) throw ConfigError("rounds must be positive");
    if (cfg.local_epochs == 0) throw ConfigError("local_epochs must be positive");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("eta must be positive");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (is_split_protocol(cfg.protocol) && !cfg.cut)
        throw ConfigError(std::string(protocol_name(cfg.protocol)) + " needs a cut layer");
    if (!is_split_protocol(cfg.protocol) && cfg.cut) throw ConfigError("FL does not take a cut layer");
    if (cfg.stop.kind == StopCriterion::Kind::loss_threshold && !(cfg.stop.loss_threshold >= 0.0))
        throw ConfigError("loss threshold must be nonnegative");
    if (!(cfg.cost.vu_macs_per_s > 0.0) || !(cfg.cost.hap_macs_per_s > 0.0) || !(cfg.cost.link_params_per_s > 0.0))
        throw ConfigError("cost model rates must be positive");
}

FleetState init_fleet(const RoundConfig& cfg, const NetworkSpec& spec, std::size_t n_vus, const Network* pretrained) {
    validate_round_config(cfg);
    if (n_vus == 0) throw ConfigError("need at least one VU");
    if (cfg.protocol == ProtocolKind::FSTL && !pretrained)
        throw ConfigError("FSTL needs a pre-trained weight source");
    if (cfg.protocol != ProtocolKind::FSTL && pretrained)
        throw ConfigError(std::string(protocol_name(cfg.protocol)) + " does not take pre-trained weights");

    Network full = pretrained ? *pretrained : init_network(spec, cfg.seed);
    if (pretrained && full.spec().layers != spec.layers)
        throw ConfigError("pre-trained weights do not match the configured architecture");

    FleetState state;
    state.kind = cfg.protocol;
    state.from_pretrained = pretrained != nullptr;
    if (cfg.protocol == ProtocolKind::FL) {
        state.vu_models.assign(n_vus, full);
        state.hub = std::move(full);
    } else {
        auto pair = split_network(std::move(full), *cfg.cut);
        state.vu_models.assign(n_vus, pair.client);
        state.consensus_client = std::move(pair.client);
        state.hub = std::move(pair.server);
    }
    return state;
}

Network evaluation_model(const FleetState& state) {
    if (state.kind == ProtocolKind::FL) return state.hub;
    return join_networks(state.consensus_client, state.hub);
}

LossAccuracy evaluate(const Network& net, const Shard& data, std::size_t batch_size) {
    if (data.size() == 0) throw std::invalid_argument("cannot evaluate on an empty set");
    double loss = 0.0, correct = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const auto trace = forward(net, data.features.gather_rows(idx));
        const Labels labels(data.labels.begin() + static_cast<std::ptrdiff_t>(start),
                            data.labels.begin() + static_cast<std::ptrdiff_t>(end));
        const auto m = loss_and_accuracy(trace.output(), labels);
        loss += m.loss * static_cast<double>(idx.size());
        correct += m.accuracy * static_cast<double>(idx.size());
    }
    const auto n = static_cast<double>(data.size());
    return {loss / n, correct / n};
}

std::vector<std::size_t> batch_order(std::uint64_t seed, std::uint32_t vu_id, std::size_t round, std::size_t epoch,
                                     std::size_t n) {
    return shuffled_indices(n, derive_seed({seed, vu_id, round, epoch}));
}

namespace {

struct Batch {
    Tensor features;
    Labels labels;
};

std::vector<Batch> epoch_batches(const Shard& shard, const RoundConfig& cfg, std::uint32_t vu_id, std::size_t round,
                                 std::size_t epoch) {
    const auto order = batch_order(cfg.seed, vu_id, round, epoch, shard.size());
    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const std::span<const std::size_t> rows(order.data() + start, end - start);
        Batch b{shard.features.gather_rows(rows), {}};
        b.labels.reserve(rows.size());
        for (auto r : rows) b.labels.push_back(shard.labels[r]);
        out.push_back(std::move(b));
    }
    return out;
}

void check_shards(const FleetState& state, std::span<const Shard> shards, ProtocolKind expected) {
    if (state.kind != expected && !(expected == ProtocolKind::FSL && state.kind == ProtocolKind::FSTL))
        throw ConfigError(std::string("fleet was initialised for ") + protocol_name(state.kind) + ", not " +
                          protocol_name(expected));
    if (shards.size() != state.vu_models.size())
        throw std::invalid_argument(std::to_string(shards.size()) + " shards for " +
                                    std::to_string(state.vu_models.size()) + " VUs");
    for (std::size_t i = 0; i < shards.size(); ++i) {
        if (shards[i].size() == 0) throw std::invalid_argument("shard " + std::to_string(i) + " is empty");
        if (shards[i].features.rows() != shards[i].size())
            throw std::invalid_argument("shard " + std::to_string(i) + " has mismatched features and labels");
    }
}

Shard union_of(std::span<const Shard> shards) {
    Shard all;
    std::vector<float> data;
    Shape shape = shards[0].features.shape();
    shape[0] = 0;
    for (const auto& s : shards) {
        data.insert(data.end(), s.features.values().begin(), s.features.values().end());
        all.labels.insert(all.labels.end(), s.labels.begin(), s.labels.end());
        shape[0] += s.size();
    }
    all.features = Tensor(shape, std::move(data));
    return all;
}

std::vector<std::size_t> shard_sizes(std::span<const Shard> shards) {
    std::vector<std::size_t> sizes;
    for (const auto& s : shards) sizes.push_back(s.size());
    return sizes;
}

class LossMeter {
public:
    void add(double loss, std::size_t n) {
        sum_ += loss * static_cast<double>(n);
        count_ += n;
    }
    double mean() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }

private:
    double sum_ = 0.0;
    std::size_t count_ = 0;
};

void finish_record(RoundRecord& rec, const FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                   const Shard* eval, std::size_t full_params, std::size_t client_params, std::size_t smashed_width) {
    rec.uplink_total = std::accumulate(rec.uplink_per_vu.begin(), rec.uplink_per_vu.end(), std::uint64_t{0});
    rec.downlink_total = std::accumulate(rec.downlink_per_vu.begin(), rec.downlink_per_vu.end(), std::uint64_t{0});

    LatencyParams& q = rec.symbols;
    q.T = rec.compute_s;
    q.T_prime = rec.compute_s;
    q.T_fedavg = state.kind == ProtocolKind::FL ? rec.aggregation_s : 0.0;
    q.T_merge = (state.kind == ProtocolKind::FSL || state.kind == ProtocolKind::FSTL) ? rec.aggregation_s : 0.0;
    q.p = static_cast<double>(full_params);
    double d = 0.0;
    for (const auto& s : shards) d += static_cast<double>(s.size());
    q.d = d * static_cast<double>(cfg.local_epochs);
    q.h = static_cast<double>(smashed_width);
    q.r = full_params ? static_cast<double>(client_params) / static_cast<double>(full_params) : 0.0;
    q.R = cfg.cost.link_params_per_s;
    q.N = static_cast<double>(shards.size());
    const auto row = table_row(state.kind, q);
    rec.comm_s = row.total_comm_time;
    rec.latency_s = row.total_latency;

    const Network model = evaluation_model(state);
    if (eval) {
        const auto m = evaluate(model, *eval);
        rec.test_loss = m.loss;
        rec.test_accuracy = m.accuracy;
    } else {
        const auto m = evaluate(model, union_of(shards));
        rec.test_loss = m.loss;
        rec.test_accuracy = m.accuracy;
    }
    rec.round = state.round;
}

}  // namespace

RoundRecord run_fl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg, const Shard* eval) {
    check_shards(state, shards, ProtocolKind::FL);
    const std::size_t n = shards.size();
    const std::size_t round = state.round;
    RoundRecord rec;
    LossMeter loss;
    const auto p = param_count(state.hub);

    for (std::size_t i = 0; i < n; ++i) {
        const auto vu = static_cast<std::uint32_t>(i);
        Network model = state.hub;
        std::uint64_t macs = 0;
        for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
            for (const auto& b : epoch_batches(shards[i], cfg, vu, round, e)) {
                const auto trace = forward(model, b.features);
                loss.add(loss_and_accuracy(trace.output(), b.labels).loss, b.labels.size());
                const auto res = backward(model, trace, b.labels);
                sgd_step(model, res.grads, cfg.eta);
                macs += training_macs(model, b.labels.size());
            }
        }
        state.vu_models[i] = std::move(model);
        rec.vu_compute_s.push_back(static_cast<double>(macs) / cfg.cost.vu_macs_per_s);
        rec.downlink_per_vu.push_back(p);
        rec.uplink_per_vu.push_back(p);
    }

    std::vector<ParameterSet> sets;
    sets.reserve(n);
    for (const auto& m : state.vu_models) sets.push_back(m.parameters());
    const auto sizes = shard_sizes(shards);
    state.hub.set_parameters(fedavg_params(sets, weights_from_sizes(sizes)));
    ++state.round;

    rec.train_loss = loss.mean();
    rec.compute_s = *std::max_element(rec.vu_compute_s.begin(), rec.vu_compute_s.end());
    rec.aggregation_s = static_cast<double>(n * p) / cfg.cost.hap_macs_per_s;
    finish_record(rec, state, shards, cfg, eval, p, 0, 1);
    return rec;
}

RoundRecord run_sl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg, const Shard* eval) {
    check_shards(state, shards, ProtocolKind::SL);
    const std::size_t n = shards.size();
    const std::size_t round = state.round;
    RoundRecord rec;
    LossMeter loss;
    const auto client_params = param_count(state.vu_models[0]);
    std::size_t width = 0;

    Network relay = state.consensus_client;
    for (std::size_t i = 0; i < n; ++i) {
        const auto vu = static_cast<std::uint32_t>(i);
        double seconds = 0.0;
        std::uint64_t smashed = 0;
        for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
            for (const auto& b : epoch_batches(shards[i], cfg, vu, round, e)) {
                const auto pass = client_forward(relay, b.features, b.labels, vu);
                const auto server = server_forward_backward(state.hub, pass.smashed);
                loss.add(server.metrics.loss, b.labels.size());
                const auto client_grads = client_backward(relay, pass.trace, server.cut_grad);
                sgd_step(relay, client_grads, cfg.eta);
                sgd_step(state.hub, server.grads, cfg.eta);
                smashed += pass.smashed.activations.size();
                width = pass.smashed.per_sample_width();
                seconds += static_cast<double>(training_macs(relay, b.labels.size())) / cfg.cost.vu_macs_per_s +
                           static_cast<double>(training_macs(state.hub, b.labels.size())) / cfg.cost.hap_macs_per_s;
            }
        }
        state.vu_models[i] = relay;
        rec.vu_compute_s.push_back(seconds);
        rec.downlink_per_vu.push_back(client_params + smashed);
        rec.uplink_per_vu.push_back(client_params + smashed);
    }
    state.consensus_client = std::move(relay);
    ++state.round;

    rec.train_loss = loss.mean();
    rec.compute_s = std::accumulate(rec.vu_compute_s.begin(), rec.vu_compute_s.end(), 0.0);
    rec.aggregation_s = 0.0;
    finish_record(rec, state, shards, cfg, eval, client_params + param_count(state.hub), client_params, width);
    return rec;
}

namespace {

// Shared round body of FSL and FSTL.
RoundRecord federated_split_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                                  const Shard* eval) {
    check_shards(state, shards, ProtocolKind::FSL);
    const std::size_t n = shards.size();
    const std::size_t round = state.round;
    RoundRecord rec;
    LossMeter loss;
    const auto client_params = param_count(state.vu_models[0]);
    const auto server_params = param_count(state.hub);
    std::size_t width = 0;
    std::vector<double> seconds(n, 0.0);
    std::vector<std::uint64_t> smashed(n, 0);

    for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
        std::vector<std::vector<Batch>> batches;
        std::size_t steps = 0;
        for (std::size_t i = 0; i < n; ++i) {
            batches.push_back(epoch_batches(shards[i], cfg, static_cast<std::uint32_t>(i), round, e));
            steps = std::max(steps, batches.back().size());
        }
        for (std::size_t s = 0; s < steps; ++s) {
            std::vector<GradientSet> server_grads;
            std::vector<ClientWeight> weights;
            for (std::size_t i = 0; i < n; ++i) {
                if (s >= batches[i].size()) continue;
                const auto vu = static_cast<std::uint32_t>(i);
                const Batch& b = batches[i][s];
                Network& client = state.vu_models[i];
                const auto pass = client_forward(client, b.features, b.labels, vu);
                auto server = server_forward_backward(state.hub, pass.smashed);
                loss.add(server.metrics.loss, b.labels.size());
                const auto client_grads = client_backward(client, pass.trace, server.cut_grad);
                sgd_step(client, client_grads, cfg.eta);
                server_grads.push_back(std::move(server.grads));
                weights.push_back({vu, static_cast<double>(b.labels.size())});
                smashed[i] += pass.smashed.activations.size();
                width = pass.smashed.per_sample_width();
                seconds[i] += static_cast<double>(training_macs(client, b.labels.size())) / cfg.cost.vu_macs_per_s +
                              static_cast<double>(training_macs(state.hub, b.labels.size()) + server_params) /
                                  cfg.cost.hap_macs_per_s;
            }
            apply_server_update(state.hub, average_gradients(server_grads, weights), cfg.eta);
        }
    }

    std::vector<ParameterSet> sets;
    sets.reserve(n);
    for (const auto& m : state.vu_models) sets.push_back(m.parameters());
    const auto sizes = shard_sizes(shards);
    const ParameterSet global = fedavg_params(sets, weights_from_sizes(sizes));
    for (std::size_t i = 0; i < n; ++i)
        state.vu_models[i].set_parameters(blend_client_update(sets[i], global, cfg.alpha));
    state.consensus_client.set_parameters(global);
    ++state.round;

    for (std::size_t i = 0; i < n; ++i) {
        rec.vu_compute_s.push_back(seconds[i]);
        rec.downlink_per_vu.push_back(client_params + smashed[i]);
        rec.uplink_per_vu.push_back(client_params + smashed[i]);
    }
    rec.train_loss = loss.mean();
    rec.compute_s = *std::max_element(rec.vu_compute_s.begin(), rec.vu_compute_s.end());
    rec.aggregation_s = static_cast<double>(n * client_params) / cfg.cost.hap_macs_per_s;
    finish_record(rec, state, shards, cfg, eval, client_params + server_params, client_params, width);
    return rec;
}

}  // namespace

RoundRecord run_fsl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                          const Shard* eval) {
    return federated_split_round(state, shards, cfg, eval);
}

RoundRecord run_fstl_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg,
                           const Shard* eval) {
    if (!state.from_pretrained) throw ConfigError("FSTL round on a fleet that was not initialised from pre-trained weights");
    return federated_split_round(state, shards, cfg, eval);
}

RoundRecord run_round(FleetState& state, std::span<const Shard> shards, const RoundConfig& cfg, const Shard* eval) {
    switch (cfg.protocol) {
        case ProtocolKind::FL: return run_fl_round(state, shards, cfg, eval);
        case ProtocolKind::SL: return run_sl_round(state, shards, cfg, eval);
        case ProtocolKind::FSL: return run_fsl_round(state, shards, cfg, eval);
        case ProtocolKind::FSTL: return run_fstl_round(state, shards, cfg, eval);
    }
    throw ConfigError("unknown protocol");
}

TrainResult train(const RoundConfig& cfg, const NetworkSpec& spec, std::span<const Shard> shards, const Shard& test,
                  const Network* pretrained) {
    validate_round_config(cfg);
    if (shards.empty()) throw ConfigError("need at least one shard");
    for (const auto& s : shards)
        if (s.size() == 0) throw ConfigError("empty shard");
    TrainResult result{{}, init_fleet(cfg, spec, shards.size(), pretrained)};
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        result.records.push_back(run_round(result.state, shards, cfg, &test));
        if (cfg.stop.kind == StopCriterion::Kind::loss_threshold &&
            result.records.back().train_loss <= cfg.stop.loss_threshold)
            break;
    }
    return result;
}

}  // namespace fstl
