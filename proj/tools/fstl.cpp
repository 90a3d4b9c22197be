#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fstl/csv.hpp"
#include "fstl/error.hpp"
#include "fstl/experiment/config.hpp"
#include "fstl/experiment/pretrain.hpp"
#include "fstl/experiment/runner.hpp"
#include "fstl/latency.hpp"
#include "fstl/nn/weights.hpp"

namespace {

using namespace fstl;

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2 };

// Optional overrides of ExperimentConfig training fields.
struct TrainingFlags {
    std::optional<std::size_t> rounds, local_epochs, batch_size, cut;
    std::optional<double> eta, alpha, loss_threshold;
    std::optional<std::string> out;

    void attach(CLI::App* app) {
        app->add_option("--rounds", rounds, "Global rounds");
        app->add_option("--local-epochs", local_epochs, "Local epochs per round");
        app->add_option("--batch-size", batch_size, "Minibatch size");
        app->add_option("--eta", eta, "Learning rate");
        app->add_option("--alpha", alpha, "Client blend factor in [0, 1]");
        app->add_option("--cut", cut, "Cut layer index for split protocols");
        app->add_option("--loss-threshold", loss_threshold, "Stop once the mean training loss reaches this");
        app->add_option("--out", out, "Output directory");
    }

    void apply(ExperimentConfig& cfg) const {
        if (rounds) cfg.round.rounds = *rounds;
        if (local_epochs) cfg.round.local_epochs = *local_epochs;
        if (batch_size) cfg.round.batch_size = *batch_size;
        if (eta) cfg.round.eta = *eta;
        if (alpha) cfg.round.alpha = *alpha;
        if (cut) cfg.cut = *cut;
        if (loss_threshold) {
            cfg.round.stop.kind = StopCriterion::Kind::loss_threshold;
            cfg.round.stop.loss_threshold = *loss_threshold;
        }
        if (out) cfg.output_dir = *out;
        validate_config(cfg);
    }
};

void print_cells(const ExperimentReport& report) {
    std::printf("%-6s %6s %8s %10s %12s  %s\n", "method", "n_vus", "rounds", "accuracy", "latency_s", "status");
    for (const auto& c : report.cells) {
        if (c.ok) {
            const auto& last = c.records.back();
            std::printf("%-6s %6zu %8zu %10.4f %12.6g  ok\n", protocol_name(c.protocol), c.n_vus, c.records.size(),
                        last.test_accuracy, last.latency_s);
        } else {
            std::printf("%-6s %6zu %8s %10s %12s  failed: %s\n", protocol_name(c.protocol), c.n_vus, "-", "-", "-",
                        c.error.c_str());
        }
    }
    if (report.source_accuracy) std::printf("pretrain source-task accuracy: %.4f\n", *report.source_accuracy);
    for (const auto& note : report.latency_notes) std::printf("latency note: %s\n", note.c_str());
    if (report.latency_error) std::printf("latency curve failed: %s\n", report.latency_error->c_str());
    std::printf("manifest: %s\n", report.manifest.string().c_str());
}

int run_pretrain(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
                 std::optional<std::size_t> epochs, std::optional<double> eta) {
    auto cfg = load_config_file(config_path);
    if (seed) apply_seed(cfg, *seed);
    if (epochs) cfg.pretrain.epochs = *epochs;
    if (eta) cfg.pretrain.eta = *eta;
    const auto data = load_data(cfg);
    const auto arch = architecture_for(cfg, data.train);
    const PretrainSpec spec = resolved_pretrain_spec(cfg);
    const auto split = source_target_split(data.train, spec);
    const auto result = pretrain(spec, arch, data.train, split.source, split.target);
    const std::filesystem::path path = out ? std::filesystem::path(*out) : cfg.output_dir / "pretrained.fstlw";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    save_pretrained(result, spec, path);
    std::printf("source samples: %zu train, %zu held out\n", result.source_train_samples,
                result.source_holdout_samples);
    std::printf("source-task accuracy: %.4f\n", result.source_accuracy);
    std::printf("weights: %s\nmetadata: %s\n", path.string().c_str(), sidecar_path(path).string().c_str());
    return kOk;
}

int run_report(const std::string& manifest_path) {
    const auto bytes = read_file_bytes(manifest_path);
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    std::printf("artifact %s %s, seed %s, status %s\n", j.value("artifact", "?").c_str(),
                j.value("version", "?").c_str(), j.contains("seed") ? j["seed"].dump().c_str() : "?",
                j.value("status", "?").c_str());
    std::printf("%-6s %6s %8s %10s  %s\n", "method", "n_vus", "rounds", "accuracy", "status");
    for (const auto& c : j.value("cells", nlohmann::json::array())) {
        const bool ok = c.value("status", "") == "ok";
        if (ok)
            std::printf("%-6s %6zu %8zu %10.4f  ok\n", c.value("protocol", "?").c_str(), c.value("n_vus", 0UL),
                        c.value("rounds", 0UL), c.value("final_test_accuracy", 0.0));
        else
            std::printf("%-6s %6zu %8s %10s  failed: %s\n", c.value("protocol", "?").c_str(), c.value("n_vus", 0UL),
                        "-", "-", c.value("error", "").c_str());
    }
    if (j.contains("latency") && j["latency"].contains("params")) {
        std::printf("latency symbols:");
        for (const auto& [k, v] : j["latency"]["params"].items()) std::printf(" %s=%s", k.c_str(), v.dump().c_str());
        std::printf("\n");
        for (const auto& note : j["latency"].value("notes", nlohmann::json::array()))
            std::printf("latency note: %s\n", note.get<std::string>().c_str());
    }
    return j.value("status", "") == "ok" ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic FL / SL / FSL / FSTL simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;

    auto* pre = app.add_subcommand("pretrain", "Train the source-task model and write weights plus metadata");
    std::optional<std::size_t> pre_epochs;
    std::optional<double> pre_eta;
    pre->add_option("--config", config_path, "TOML experiment config")->required()->check(CLI::ExistingFile);
    pre->add_option("--seed", seed, "Experiment seed (defaults to the config seed)");
    pre->add_option("--out", out_path, "Weights file");
    pre->add_option("--epochs", pre_epochs, "Pretraining epochs");
    pre->add_option("--eta", pre_eta, "Pretraining learning rate");

    auto* trn = app.add_subcommand("train", "Train one protocol at one VU count");
    std::string protocol;
    std::size_t n_vus = 0;
    std::optional<std::string> pretrained;
    TrainingFlags train_flags;
    trn->add_option("--config", config_path, "TOML experiment config")->required()->check(CLI::ExistingFile);
    trn->add_option("--seed", seed, "Experiment seed")->required();
    trn->add_option("--protocol", protocol, "FL, SL, FSL or FSTL")->required();
    trn->add_option("--n-vus", n_vus, "Number of VUs")->required();
    trn->add_option("--pretrained", pretrained, "Pre-trained weights for FSTL");
    train_flags.attach(trn);

    auto* swp = app.add_subcommand("sweep", "Run every protocol × VU-count cell of a config");
    std::optional<std::string> replay;
    std::vector<std::string> protocols;
    std::vector<std::size_t> n_list;
    TrainingFlags sweep_flags;
    swp->add_option("--config", config_path, "TOML experiment config")->check(CLI::ExistingFile);
    swp->add_option("--seed", seed, "Experiment seed (required unless --replay)");
    swp->add_option("--replay", replay, "Re-run the experiment recorded in a manifest")->check(CLI::ExistingFile);
    swp->add_option("--protocols", protocols, "Protocol set")->delimiter(',');
    swp->add_option("--n-vus", n_list, "VU counts")->delimiter(',');
    sweep_flags.attach(swp);

    auto* lat = app.add_subcommand("latency", "Evaluate the per-round latency table");
    LatencyParams q;
    std::optional<double> r_bits;
    std::vector<std::size_t> n_values;
    std::optional<std::string> csv_path;
    lat->add_option("--T", q.T, "Training time from scratch (s)")->required();
    lat->add_option("--T-prime", q.T_prime, "Training time from pre-trained weights (s)")->required();
    lat->add_option("--T-fedavg", q.T_fedavg, "Full-model aggregation time (s)")->required();
    lat->add_option("--T-merge", q.T_merge, "Client-submodel aggregation time (s)")->required();
    lat->add_option("--p", q.p, "Full-model parameter count")->required();
    lat->add_option("--d", q.d, "Total samples")->required();
    lat->add_option("--smashed", q.h, "Smashed values per sample (h)")->required();
    lat->add_option("--r", q.r, "Client share of the parameters")->required();
    auto* r_opt = lat->add_option("--R", q.R, "Link rate, parameters per second");
    lat->add_option("--R-bits", r_bits, "Link rate, bits per second")->excludes(r_opt);
    lat->add_option("--N", q.N, "VU count");
    lat->add_option("--n-values", n_values, "Ascending VU counts for a curve")->delimiter(',');
    lat->add_option("--csv", csv_path, "Write the curve CSV here");

    auto* rep = app.add_subcommand("report", "Summarise a run manifest");
    std::string manifest_path;
    rep->add_option("--manifest", manifest_path, "manifest.json of a run")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*pre) return run_pretrain(config_path, seed, out_path, pre_epochs, pre_eta);

        if (*trn) {
            auto cfg = load_config_file(config_path);
            apply_seed(cfg, *seed);
            cfg.protocols = {parse_protocol(protocol)};
            cfg.n_vus = {n_vus};
            if (pretrained) cfg.pretrained_weights = *pretrained;
            train_flags.apply(cfg);
            const auto report = run_experiment(cfg, {.latency_curve = false, .verbose = true});
            print_cells(report);
            return report.all_ok() ? kOk : kRuntime;
        }

        if (*swp) {
            ExperimentReport report;
            if (replay) {
                if (!config_path.empty() || seed) throw ConfigError("--replay takes its config and seed from the manifest");
                if (!sweep_flags.out) throw ConfigError("--replay needs --out");
                report = replay_manifest(*replay, *sweep_flags.out, {.latency_curve = true, .verbose = true});
            } else {
                if (config_path.empty()) throw ConfigError("sweep needs --config or --replay");
                if (!seed) throw ConfigError("sweep needs --seed");
                auto cfg = load_config_file(config_path);
                apply_seed(cfg, *seed);
                if (!protocols.empty()) {
                    cfg.protocols.clear();
                    for (const auto& p : protocols) cfg.protocols.push_back(parse_protocol(p));
                }
                if (!n_list.empty()) cfg.n_vus = n_list;
                sweep_flags.apply(cfg);
                report = run_experiment(cfg, {.latency_curve = true, .verbose = true});
            }
            print_cells(report);
            return report.all_ok() ? kOk : kRuntime;
        }

        if (*lat) {
            if (r_bits) q.R = params_per_second_from_bits(*r_bits);
            if (!(q.R > 0.0)) throw ConfigError("--R or --R-bits is required");
            try {
                if (!n_values.empty()) {
                    q.N = static_cast<double>(n_values.front());
                    validate(q);
                    const auto rows = latency_vs_n_curve(q, n_values);
                    const auto text = latency_curve_csv(rows);
                    if (csv_path)
                        write_file_atomic(*csv_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                               text.size()));
                    else
                        std::cout << text;
                    return kOk;
                }
                validate(q);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            std::printf("%-6s %14s %14s %14s %14s %14s\n", "method", "train_agg_s", "comms_per_vu", "total_comms",
                        "comm_s", "total_s");
            for (auto k : kAllProtocols) {
                const auto b = latency_for(k, q);
                std::printf("%-6s %14s %14s %14s %14s %14s\n", protocol_name(k),
                            format_number(b.train_agg_time).c_str(), format_number(b.comms_per_vu).c_str(),
                            format_number(b.total_comms).c_str(), format_number(b.total_comm_time).c_str(),
                            format_number(b.total_latency).c_str());
            }
            const auto ordering = ordering_report(q);
            std::printf("ascending:");
            for (const auto& m : ordering.ascending) std::printf(" %s", protocol_name(m.method));
            std::printf("\nFSTL<FSL<FL<SL %s\n", ordering.paper_ordering_holds ? "holds" : "does not hold");
            for (const auto& v : ordering.violations) std::printf("  %s\n", v.c_str());
            for (const auto& w : precondition_warnings(q)) std::printf("warning: %s\n", w.c_str());
            return kOk;
        }

        if (*rep) return run_report(manifest_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kRuntime;
}
