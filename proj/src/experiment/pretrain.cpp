#include "fstl/experiment/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "fstl/error.hpp"
#include "fstl/nn/rng.hpp"
#include "fstl/nn/weights.hpp"

namespace fstl {

const char* scheme_name(SourceScheme s) {
    return s == SourceScheme::disjoint_sample_split ? "disjoint-sample-split" : "disjoint-class-subset";
}

SourceScheme parse_scheme(const std::string& text) {
    if (text == "disjoint-sample-split") return SourceScheme::disjoint_sample_split;
    if (text == "disjoint-class-subset") return SourceScheme::disjoint_class_subset;
    throw ConfigError("unknown pretraining scheme '" + text +
                      "' (expected disjoint-sample-split or disjoint-class-subset)");
}

void validate_pretrain_spec(const PretrainSpec& spec) {
    if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw ConfigError("pretrain fraction must lie in (0, 1)");
    if (!(spec.holdout > 0.0 && spec.holdout < 1.0)) throw ConfigError("pretrain holdout must lie in (0, 1)");
    if (!(spec.eta > 0.0)) throw ConfigError("pretrain eta must be positive");
    if (spec.batch_size == 0) throw ConfigError("pretrain batch_size must be positive");
    if (spec.scheme == SourceScheme::disjoint_class_subset && spec.classes.empty())
        throw ConfigError("disjoint-class-subset needs at least one source class");
}

SourceTargetSplit source_target_split(const Dataset& train, const PretrainSpec& spec) {
    validate_pretrain_spec(spec);
    const auto order = shuffled_indices(train.size(), derive_seed({spec.seed, 0x736f75726365ULL}));
    const auto cut = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(train.size())));
    SourceTargetSplit out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto row = order[i];
        if (i >= cut) {
            out.target.push_back(row);
            continue;
        }
        if (spec.scheme == SourceScheme::disjoint_class_subset &&
            std::find(spec.classes.begin(), spec.classes.end(), train.labels[row]) == spec.classes.end())
            continue;
        out.source.push_back(row);
    }
    if (out.source.size() < 2) throw ConfigError("source task has fewer than two samples");
    if (out.target.empty()) throw ConfigError("no samples left for the target task");
    return out;
}

double sgd_epoch(Network& net, const Shard& data, std::size_t batch_size, double eta, std::uint64_t seed,
                 std::size_t epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed({seed, 0x6570ULL, epoch}));
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        const std::span<const std::size_t> rows(order.data() + start, end - start);
        Labels labels;
        for (auto r : rows) labels.push_back(data.labels[r]);
        const auto trace = forward(net, data.features.gather_rows(rows));
        loss += loss_and_accuracy(trace.output(), labels).loss * static_cast<double>(rows.size());
        sgd_step(net, backward(net, trace, labels).grads, eta);
    }
    return loss / static_cast<double>(data.size());
}

PretrainResult pretrain(const PretrainSpec& spec, const NetworkSpec& architecture, const Dataset& train,
                        std::span<const std::size_t> source, std::span<const std::size_t> target) {
    validate_pretrain_spec(spec);
    const std::unordered_set<std::size_t> target_rows(target.begin(), target.end());
    for (auto row : source)
        if (target_rows.count(row))
            throw ConfigError("source and target data overlap at sample " + std::to_string(row));
    if (source.size() < 2) throw ConfigError("source task has fewer than two samples");

    const auto held = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.holdout * static_cast<double>(source.size()))));
    const std::span<const std::size_t> fit_rows = source.subspan(0, source.size() - held);
    const std::span<const std::size_t> held_rows = source.subspan(source.size() - held);
    const Shard fit = train.subset(fit_rows);
    const Shard holdout = train.subset(held_rows);

    PretrainResult res{init_network(architecture, spec.seed)};
    for (std::size_t e = 0; e < spec.epochs; ++e) sgd_epoch(res.network, fit, spec.batch_size, spec.eta, spec.seed, e);

    const auto logits = forward(res.network, holdout.features);
    const auto m = loss_and_accuracy(logits.output(), holdout.labels);
    res.source_accuracy = m.accuracy;
    res.source_loss = m.loss;
    res.source_train_samples = fit_rows.size();
    res.source_holdout_samples = held_rows.size();
    return res;
}

std::filesystem::path sidecar_path(const std::filesystem::path& weights) {
    auto p = weights;
    p += ".json";
    return p;
}

void save_pretrained(const PretrainResult& result, const PretrainSpec& spec, const std::filesystem::path& path) {
    write_weights_file(path, result.network);
    nlohmann::ordered_json meta;
    meta["scheme"] = scheme_name(spec.scheme);
    meta["fraction"] = spec.fraction;
    if (spec.scheme == SourceScheme::disjoint_class_subset) meta["classes"] = spec.classes;
    meta["epochs"] = spec.epochs;
    meta["eta"] = spec.eta;
    meta["batch_size"] = spec.batch_size;
    meta["seed"] = spec.seed;
    meta["source_train_samples"] = result.source_train_samples;
    meta["source_holdout_samples"] = result.source_holdout_samples;
    meta["source_accuracy"] = result.source_accuracy;
    meta["source_loss"] = result.source_loss;
    const auto text = meta.dump(2) + "\n";
    write_file_atomic(sidecar_path(path), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Network load_pretrained(const std::filesystem::path& path, const NetworkSpec& architecture) {
    return read_weights_file(path, architecture);
}

}  // namespace fstl
