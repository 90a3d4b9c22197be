#include "fstl/experiment/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "fstl/csv.hpp"
#include "fstl/error.hpp"
#include "fstl/nn/rng.hpp"
#include "fstl/nn/weights.hpp"

namespace fstl {

namespace fs = std::filesystem;

namespace {

// Seed streams derived from the experiment seed.
enum : std::uint64_t { kSubsetStream = 1, kPartitionStream = 2, kRoundStream = 3, kPretrainStream = 4 };

void write_text(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

nlohmann::ordered_json params_json(const LatencyParams& q) {
    return {{"T", q.T}, {"T_prime", q.T_prime}, {"T_fedavg", q.T_fedavg}, {"T_merge", q.T_merge}, {"p", q.p},
            {"d", q.d}, {"h", q.h},           {"r", q.r},                 {"R", q.R},             {"N", q.N}};
}

double mean_of(const std::vector<RoundRecord>& records, double RoundRecord::*field) {
    double sum = 0.0;
    for (const auto& r : records) sum += r.*field;
    return sum / static_cast<double>(records.size());
}

}  // namespace

std::string accuracy_csv_name(ProtocolKind protocol, std::size_t n_vus) {
    return std::string("accuracy_") + protocol_name(protocol) + "_n" + std::to_string(n_vus) + ".csv";
}

std::string accuracy_csv(ProtocolKind protocol, std::size_t n_vus, const std::vector<RoundRecord>& records) {
    std::string out = std::string(kAccuracyCsvHeader) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.round) + "," + protocol_name(protocol) + "," + std::to_string(n_vus) + "," +
               format_number(r.train_loss) + "," + format_number(r.test_accuracy) + "," + format_number(r.latency_s) +
               "," + format_number(r.uplink_total) + "," + format_number(r.downlink_total) + "\n";
    }
    return out;
}

bool ExperimentReport::all_ok() const {
    if (latency_error) return false;
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

const CellResult* ExperimentReport::cell(ProtocolKind protocol, std::size_t n_vus) const {
    for (const auto& c : cells)
        if (c.protocol == protocol && c.n_vus == n_vus) return &c;
    return nullptr;
}

LoadedData load_data(const ExperimentConfig& cfg) {
    const auto& dc = cfg.dataset;
    if (dc.source == DatasetConfig::Source::synthetic) {
        SyntheticSpec test_spec = dc.synthetic;
        test_spec.per_class = dc.synthetic_test_per_class;
        return {synth_dataset(dc.synthetic, DataSplit::train), synth_dataset(test_spec, DataSplit::test)};
    }
    auto train = load_idx(dc.train_images, dc.train_labels, DataSplit::train);
    auto test = load_idx(dc.test_images, dc.test_labels, DataSplit::test);
    return {take_subset(train, dc.train_subset, derive_seed({cfg.seed, kSubsetStream, 0})),
            take_subset(test, dc.test_subset, derive_seed({cfg.seed, kSubsetStream, 1}))};
}

NetworkSpec architecture_for(const ExperimentConfig& cfg, const Dataset& train) {
    return default_architecture(train.sample_shape(), train.classes, cfg.model.conv_channels, cfg.model.hidden);
}

PretrainSpec resolved_pretrain_spec(const ExperimentConfig& cfg) {
    PretrainSpec spec = cfg.pretrain;
    spec.seed = derive_seed({cfg.seed, kPretrainStream});
    return spec;
}

double counted_split_round_seconds(const NetworkSpec& arch, SplitSpec cut, std::size_t shard_size,
                                   const RoundConfig& round) {
    const auto pair = split_network(init_network(arch, 0), cut);
    const auto server_params = param_count(pair.server);
    double seconds = 0.0;
    for (std::size_t e = 0; e < round.local_epochs; ++e) {
        for (std::size_t start = 0; start < shard_size; start += round.batch_size) {
            const std::size_t b = std::min(shard_size, start + round.batch_size) - start;
            seconds += static_cast<double>(training_macs(pair.client, b)) / round.cost.vu_macs_per_s +
                       static_cast<double>(training_macs(pair.server, b) + server_params) / round.cost.hap_macs_per_s;
        }
    }
    return seconds;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    validate_config(cfg);
    const auto start = std::chrono::steady_clock::now();
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);

    const auto data = load_data(cfg);
    const auto arch = architecture_for(cfg, data.train);
    const Shard test = data.test.all();
    const bool wants_fstl =
        std::find(cfg.protocols.begin(), cfg.protocols.end(), ProtocolKind::FSTL) != cfg.protocols.end();

    ExperimentReport report;
    nlohmann::ordered_json pretrain_json;

    // Target pool shared by every protocol; FSTL runs reserve the source task.
    std::vector<std::size_t> pool(data.train.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::optional<Network> pretrained;
    std::string pretrain_error;
    const PretrainSpec pspec = resolved_pretrain_spec(cfg);
    if (wants_fstl) {
        try {
            const auto split = source_target_split(data.train, pspec);
            pool = split.target;
            const auto pre_start = std::chrono::steady_clock::now();
            if (cfg.pretrained_weights) {
                pretrained = load_pretrained(*cfg.pretrained_weights, arch);
                pretrain_json["weights"] = cfg.pretrained_weights->string();
            } else {
                auto result = pretrain(pspec, arch, data.train, split.source, split.target);
                save_pretrained(result, pspec, out / "pretrained.fstlw");
                report.source_accuracy = result.source_accuracy;
                pretrain_json["weights"] = "pretrained.fstlw";
                pretrain_json["source_accuracy"] = result.source_accuracy;
                pretrained = std::move(result.network);
            }
            pretrain_json["seed"] = pspec.seed;
            pretrain_json["source_samples"] = split.source.size();
            pretrain_json["target_samples"] = split.target.size();
            pretrain_json["wall_clock_s"] = seconds_since(pre_start);
        } catch (const std::exception& e) {
            pretrain_error = e.what();
            pretrain_json["error"] = pretrain_error;
        }
    }

    const auto round_seed = derive_seed({cfg.seed, kRoundStream});
    for (auto n : cfg.n_vus) {
        for (auto protocol : cfg.protocols) {
            CellResult cell;
            cell.protocol = protocol;
            cell.n_vus = n;
            const auto cell_start = std::chrono::steady_clock::now();
            try {
                if (protocol == ProtocolKind::FSTL && !pretrained)
                    throw Error("pretraining failed: " + pretrain_error);
                const auto plan = partition(pool, n, derive_seed({cfg.seed, kPartitionStream, n}));
                const auto shards = materialize(data.train, plan);
                RoundConfig rc = cfg.round;
                rc.protocol = protocol;
                if (is_split_protocol(protocol)) rc.cut = SplitSpec{cfg.cut};
                rc.seed = round_seed;
                auto result = train(rc, arch, shards, test,
                                    protocol == ProtocolKind::FSTL ? &*pretrained : nullptr);
                cell.records = std::move(result.records);
                cell.csv_file = accuracy_csv_name(protocol, n);
                write_text(out / cell.csv_file, accuracy_csv(protocol, n, cell.records));
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cell.wall_clock_s = seconds_since(cell_start);
            if (options.verbose) {
                std::cerr << protocol_name(protocol) << " N=" << n << ": "
                          << (cell.ok ? "ok, final accuracy " + format_number(cell.records.back().test_accuracy)
                                      : "failed: " + cell.error)
                          << " (" << format_number(std::round(cell.wall_clock_s * 10) / 10) << " s)\n";
            }
            report.cells.push_back(std::move(cell));
        }
    }

    nlohmann::ordered_json latency_json;
    if (options.latency_curve) {
        try {
            std::vector<std::size_t> ns = cfg.n_vus;
            std::sort(ns.begin(), ns.end());
            ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
            const std::size_t ref_n = ns.front();
            const SplitSpec cut{cfg.cut};

            const auto pair = split_network(init_network(arch, 0), cut);
            const auto client_params = static_cast<double>(param_count(pair.client));
            const auto server_params = static_cast<double>(param_count(pair.server));
            const auto plan = partition(pool, ref_n, derive_seed({cfg.seed, kPartitionStream, ref_n}));
            std::vector<std::size_t> sizes;
            for (const auto& s : plan.shards) sizes.push_back(s.size());

            LatencyMeasurements m;
            m.full_params = client_params + server_params;
            m.client_params = client_params;
            m.smashed_width = static_cast<double>(shape_elements(pair.client.output_shape()));
            m.shard_sizes = sizes;
            m.R = cfg.round.cost.link_params_per_s;

            nlohmann::ordered_json sources;
            auto from_cell = [&](ProtocolKind k, double RoundRecord::*field) -> std::optional<double> {
                const auto* c = report.cell(k, ref_n);
                if (!c || !c->ok || c->records.empty()) return std::nullopt;
                return mean_of(c->records, field);
            };
            const double counted = counted_split_round_seconds(arch, cut, *std::max_element(sizes.begin(), sizes.end()),
                                                               cfg.round);
            auto pick = [&](const char* name, std::optional<double> measured, double fallback) {
                sources[name] = measured ? "measured" : "counted";
                return measured ? *measured : fallback;
            };
            const auto hap = cfg.round.cost.hap_macs_per_s;
            m.T = pick("T", from_cell(ProtocolKind::FSL, &RoundRecord::compute_s), counted);
            m.T_prime = pick("T_prime", from_cell(ProtocolKind::FSTL, &RoundRecord::compute_s), counted);
            m.T_fedavg = pick("T_fedavg", from_cell(ProtocolKind::FL, &RoundRecord::aggregation_s),
                              static_cast<double>(ref_n) * *m.full_params / hap);
            auto merge = from_cell(ProtocolKind::FSL, &RoundRecord::aggregation_s);
            if (!merge) merge = from_cell(ProtocolKind::FSTL, &RoundRecord::aggregation_s);
            m.T_merge = pick("T_merge", merge, static_cast<double>(ref_n) * client_params / hap);

            LatencyParams q = measure_params(m);
            const auto& o = cfg.latency;
            for (auto [name, field, value] :
                 {std::tuple{"T", &q.T, o.T}, std::tuple{"T_prime", &q.T_prime, o.T_prime},
                  std::tuple{"T_fedavg", &q.T_fedavg, o.T_fedavg}, std::tuple{"T_merge", &q.T_merge, o.T_merge},
                  std::tuple{"p", &q.p, o.p}, std::tuple{"d", &q.d, o.d}, std::tuple{"h", &q.h, o.h},
                  std::tuple{"r", &q.r, o.r}, std::tuple{"R", &q.R, o.R}}) {
                if (value) {
                    *field = *value;
                    sources[name] = "override";
                }
            }
            validate(q);
            report.latency_params = q;
            report.latency_notes = precondition_warnings(q);
            const auto ordering = ordering_report(q);
            for (const auto& v : ordering.violations) report.latency_notes.push_back(v + " at N=" + std::to_string(ref_n));

            const auto rows = latency_vs_n_curve(q, ns);
            write_text(out / "latency.csv", latency_curve_csv(rows));
            latency_json["csv"] = "latency.csv";
            latency_json["reference_n"] = ref_n;
            latency_json["params"] = params_json(q);
            latency_json["sources"] = sources;
            latency_json["notes"] = report.latency_notes;
        } catch (const std::exception& e) {
            report.latency_error = e.what();
            latency_json["error"] = e.what();
        }
    }

    nlohmann::ordered_json manifest;
    manifest["artifact"] = "fstl";
    manifest["version"] = kArtifactVersion;
    manifest["seed"] = cfg.seed;
    manifest["seeds"] = {{"round", round_seed},
                         {"pretrain", pspec.seed},
                         {"train_subset", derive_seed({cfg.seed, kSubsetStream, 0})},
                         {"test_subset", derive_seed({cfg.seed, kSubsetStream, 1})}};
    manifest["config"] = config_to_json(cfg);
    manifest["data"] = {{"train_samples", data.train.size()},
                        {"test_samples", data.test.size()},
                        {"classes", data.train.classes},
                        {"target_pool", pool.size()}};
    if (wants_fstl) manifest["pretrain"] = pretrain_json;
    auto& cells = manifest["cells"];
    cells = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
        nlohmann::ordered_json cj;
        cj["protocol"] = protocol_name(c.protocol);
        cj["n_vus"] = c.n_vus;
        cj["status"] = c.ok ? "ok" : "failed";
        if (c.ok) {
            cj["csv"] = c.csv_file;
            cj["rounds"] = c.records.size();
            cj["final_test_accuracy"] = c.records.back().test_accuracy;
        } else {
            cj["error"] = c.error;
        }
        cj["wall_clock_s"] = c.wall_clock_s;
        cells.push_back(cj);
    }
    if (options.latency_curve) manifest["latency"] = latency_json;
    manifest["status"] = report.all_ok() ? "ok" : "failed";
    manifest["wall_clock_s"] = seconds_since(start);
    report.manifest = out / "manifest.json";
    write_text(report.manifest, manifest.dump(2) + "\n");
    return report;
}

ExperimentReport replay_manifest(const fs::path& manifest, const fs::path& output_dir, const RunOptions& options) {
    const auto bytes = read_file_bytes(manifest);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse manifest " + manifest.string() + ": " + e.what());
    }
    if (!j.contains("config")) throw ConfigError("manifest has no config echo");
    auto cfg = config_from_json(j.at("config"));
    cfg.output_dir = output_dir;
    return run_experiment(cfg, options);
}

}  // namespace fstl
