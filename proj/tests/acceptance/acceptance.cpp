#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fstl/csv.hpp"
#include "fstl/experiment/dataset.hpp"
#include "fstl/experiment/runner.hpp"
#include "fstl/latency.hpp"
#include "fstl/nn/rng.hpp"
#include "fstl/protocols.hpp"
#include "fstl/split.hpp"
#include "support/reference.hpp"

using namespace fstl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path data;
    fs::path work;
};

std::string num(double v) { return format_number(v); }

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

ExperimentConfig mnist_config(const Context& ctx, std::uint64_t seed, const std::string& name) {
    ExperimentConfig cfg;
    cfg.dataset.source = DatasetConfig::Source::idx;
    cfg.dataset.train_images = ctx.data / "train-images-idx3-ubyte";
    cfg.dataset.train_labels = ctx.data / "train-labels-idx1-ubyte";
    cfg.dataset.test_images = ctx.data / "t10k-images-idx3-ubyte";
    cfg.dataset.test_labels = ctx.data / "t10k-labels-idx1-ubyte";
    cfg.round.rounds = 10;
    cfg.round.batch_size = 32;
    cfg.round.eta = 0.05;
    cfg.round.cost = {1e9, 1e10, 1e6};
    cfg.cut = 3;
    apply_seed(cfg, seed);
    cfg.output_dir = ctx.work / name;
    return cfg;
}

const CellResult& require_cell(const ExperimentReport& rep, ProtocolKind k, std::size_t n) {
    const auto* c = rep.cell(k, n);
    if (!c || !c->ok)
        throw std::runtime_error(std::string(protocol_name(k)) + " N=" + std::to_string(n) +
                                 " failed: " + (c ? c->error : "missing"));
    return *c;
}

// 1. Composed client+server forward equals the unsplit forward at every legal cut.
Outcome split_consistency(const Context&) {
    const auto net = init_network(default_architecture({1, 28, 28}, 10), 1);
    std::size_t compared = 0, mismatched = 0;
    for (std::size_t k = 2; k < net.layer_count(); ++k) {
        const auto pair = split_network(net, {k});
        for (std::uint64_t i = 0; i < 100; ++i) {
            const auto x = oracle::random_tensor({1, 1, 28, 28}, derive_seed({0x5eed, i}), 0.0f, 1.0f);
            const auto smashed = forward(pair.client, x).output();
            if (forward(pair.server, smashed).output() != forward(net, x).output()) ++mismatched;
            ++compared;
        }
    }
    return {compared == 500 && mismatched == 0,
            std::to_string(compared) + " input/cut pairs, " + std::to_string(mismatched) + " not bit-exact"};
}

// 2. Central finite differences on a net using every layer kind.
Outcome gradient_correctness(const Context&) {
    const NetworkSpec spec{{2, 5, 6},
                           {LayerSpec::conv2d(2, 3, 3, 2), LayerSpec::relu(), LayerSpec::conv2d(3, 2, 2, 2),
                            LayerSpec::flatten(), LayerSpec::dense(16, 6), LayerSpec::relu(), LayerSpec::dense(6, 4),
                            LayerSpec::softmax_xent()}};
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0, params = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto net = init_network(spec, seed);
        params = param_count(net);
        const auto x = oracle::random_tensor({5, 2, 5, 6}, 100 + seed);
        const auto labels = oracle::random_labels(5, 4, 200 + seed);
        const auto grads = backward(net, forward(net, x), labels).grads;
        const auto rep = oracle::finite_difference_check(net, x, labels, grads, 1e-3);
        worst = std::max(worst, rep.max_rel_error);
        checked += rep.checked;
        skipped += rep.skipped_kinks;
    }
    const bool pass = params <= 1000 && checked > 0 && worst < 1e-3;
    return {pass, std::to_string(params) + " params, " + std::to_string(checked) + " components checked, " +
                      std::to_string(skipped) + " relu kinks skipped, max rel error " + num(worst) + " (limit 1e-3)"};
}

// 3. FSL with one VU and alpha = 1 against centralized unsplit SGD.
Outcome oracle_equivalence(const Context&) {
    SyntheticSpec s;
    s.seed = 3;
    s.per_class = 128;
    s.classes = 4;
    const auto data = synth_dataset(s);
    const auto arch = default_architecture(s.input_shape, s.classes, 4, 16);
    RoundConfig cfg;
    cfg.protocol = ProtocolKind::FSL;
    cfg.rounds = 5;
    cfg.batch_size = 32;
    cfg.eta = 0.05;
    cfg.alpha = 1.0;
    cfg.cut = SplitSpec{3};
    cfg.seed = 21;
    const std::vector<Shard> shards{data.all()};
    auto state = init_fleet(cfg, arch, 1);
    const auto expected = oracle::centralized_trajectory(init_network(arch, cfg.seed), shards[0], cfg);
    std::uint64_t worst = 0;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        run_fsl_round(state, shards, cfg);
        worst = std::max(worst, oracle::max_ulp_distance(evaluation_model(state).flat_parameters(),
                                                          expected[r].flat_parameters()));
    }
    return {worst == 0, std::to_string(data.size()) + " samples, 5 rounds, max ULP distance " + std::to_string(worst)};
}

// 4. Table rows at hand-substituted values, and the FSTL-FSL gap.
Outcome table_fidelity(const Context&) {
    LatencyParams q;
    q.T = 10;
    q.T_prime = 8;
    q.T_fedavg = 1;
    q.T_merge = 0.5;
    q.p = 1000;
    q.d = 100;
    q.h = 10;
    q.r = 0.2;
    q.R = 100;
    q.N = 10;
    // FL 10 + 1 + 2000/100; SL 10 + 2000/100 + 4000/100; FSL 10.5 + 2 + 4; FSTL 8.5 + 2 + 4
    const double want[4] = {31.0, 70.0, 16.5, 14.5};
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < 4; ++i) {
        const double got = latency_for(kAllProtocols[i], q).total_latency;
        if (got != want[i]) bad.push_back(std::string(protocol_name(kAllProtocols[i])) + "=" + num(got));
    }
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        LatencyParams p;
        p.T = rng.uniform(0.1, 100);
        p.T_prime = rng.uniform(0.1, 100);
        p.T_fedavg = rng.uniform(0.01, 10);
        p.T_merge = rng.uniform(0.01, 10);
        p.p = rng.uniform(1e3, 1e7);
        p.d = rng.uniform(1e2, 1e5);
        p.h = rng.uniform(1, 1e4);
        p.r = rng.uniform(0.01, 0.99);
        p.R = rng.uniform(1e3, 1e8);
        p.N = static_cast<double>(1 + rng.below(50));
        const double gap = fstl_latency(p).total_latency - fsl_latency(p).total_latency;
        const double scale = std::max(1.0, fsl_latency(p).total_latency);
        worst = std::max(worst, std::abs(gap - (p.T_prime - p.T)) / scale);
    }
    const bool pass = bad.empty() && worst <= 1e-12;
    std::string detail = "hand values FL 31, SL 70, FSL 16.5, FSTL 14.5 ";
    detail += bad.empty() ? "reproduced" : "differ:";
    for (const auto& b : bad) detail += " " + b;
    return {pass, detail + "; 1000 draws, max scaled |gap - (T' - T)| " + num(worst)};
}

// 5. Shape of the latency curve from symbols measured in a desk-scale run.
Outcome latency_shape(const Context& ctx) {
    auto cfg = mnist_config(ctx, 1, "criterion5");
    cfg.round.rounds = 1;
    cfg.n_vus = {2, 5, 10, 20};
    const auto rep = run_experiment(cfg);
    if (!rep.latency_params) return {false, "no measured latency symbols: " + rep.latency_error.value_or("?")};
    const auto q = *rep.latency_params;
    const std::vector<std::size_t> ns{2, 5, 10, 20};
    const auto rows = latency_vs_n_curve(q, ns);
    auto total = [&](std::size_t n, ProtocolKind k) {
        for (const auto& r : rows)
            if (r.n == n && r.method == k) return r.breakdown.total_latency;
        return std::nan("");
    };
    bool sl_up = true, fl_flat = true, fsl_down = true, fstl_down = true, fstl_le = true;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        fstl_le &= total(ns[i], ProtocolKind::FSTL) <= total(ns[i], ProtocolKind::FSL);
        if (!i) continue;
        sl_up &= total(ns[i], ProtocolKind::SL) > total(ns[i - 1], ProtocolKind::SL);
        fl_flat &= total(ns[i], ProtocolKind::FL) == total(ns[i - 1], ProtocolKind::FL);
        fsl_down &= total(ns[i], ProtocolKind::FSL) <= total(ns[i - 1], ProtocolKind::FSL);
        fstl_down &= total(ns[i], ProtocolKind::FSTL) <= total(ns[i - 1], ProtocolKind::FSTL);
    }
    std::ostringstream d;
    d << "SL increasing " << (sl_up ? "yes" : "no") << ", FL constant " << (fl_flat ? "yes" : "no")
      << ", FSL non-increasing " << (fsl_down ? "yes" : "no") << ", FSTL non-increasing "
      << (fstl_down ? "yes" : "no") << ", FSTL<=FSL " << (fstl_le ? "yes" : "no") << "; measured T=" << num(q.T)
      << " T'=" << num(q.T_prime);
    if (q.T_prime == q.T) d << " (equal: counted compute is the same for both, so FSTL=FSL)";
    return {sl_up && fl_flat && fsl_down && fstl_down && fstl_le, d.str()};
}

std::size_t rounds_to(const std::vector<RoundRecord>& recs, double target) {
    for (const auto& r : recs)
        if (r.test_accuracy >= target) return r.round;
    return recs.size() + 1;
}

// 6. Rounds to 85% test accuracy, FSTL against FSL from scratch, N = 4.
Outcome convergence_rate(const Context& ctx) {
    constexpr std::size_t kCap = 20;
    std::vector<double> fstl, fsl;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto cfg = mnist_config(ctx, seed, "criterion6-seed" + std::to_string(seed));
        cfg.protocols = {ProtocolKind::FSL, ProtocolKind::FSTL};
        cfg.n_vus = {4};
        cfg.round.rounds = kCap;
        const auto rep = run_experiment(cfg, {false, false});
        const auto a = rounds_to(require_cell(rep, ProtocolKind::FSTL, 4).records, 0.85);
        const auto b = rounds_to(require_cell(rep, ProtocolKind::FSL, 4).records, 0.85);
        fstl.push_back(static_cast<double>(a));
        fsl.push_back(static_cast<double>(b));
        per_seed += " seed" + std::to_string(seed) + " FSTL " + std::to_string(a) + " FSL " + std::to_string(b) + ";";
    }
    const double mf = median3(fstl), ms = median3(fsl);
    return {mf < ms, "median rounds to 85%: FSTL " + num(mf) + ", FSL " + num(ms) + " (cap " +
                         std::to_string(kCap) + ", " + std::to_string(kCap + 1) + " = not reached);" + per_seed};
}

// 7. Spread of final accuracy across N, FSTL against FL, total data fixed.
Outcome robustness_to_n(const Context& ctx) {
    const std::vector<std::size_t> ns{2, 5, 10, 20};
    std::vector<double> fstl_spread, fl_spread;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto cfg = mnist_config(ctx, seed, "criterion7-seed" + std::to_string(seed));
        cfg.protocols = {ProtocolKind::FL, ProtocolKind::FSTL};
        cfg.n_vus = ns;
        cfg.round.rounds = 10;
        const auto rep = run_experiment(cfg, {false, false});
        for (auto k : {ProtocolKind::FL, ProtocolKind::FSTL}) {
            double lo = 1.0, hi = 0.0;
            for (auto n : ns) {
                const double acc = require_cell(rep, k, n).records.back().test_accuracy;
                lo = std::min(lo, acc);
                hi = std::max(hi, acc);
            }
            (k == ProtocolKind::FL ? fl_spread : fstl_spread).push_back(hi - lo);
            per_seed += " seed" + std::to_string(seed) + " " + protocol_name(k) + " [" + num(lo) + ", " + num(hi) + "];";
        }
    }
    const double mf = median3(fstl_spread), ml = median3(fl_spread);
    return {mf < ml, "median spread FSTL " + num(mf) + ", FL " + num(ml) + ";" + per_seed};
}

std::vector<fs::path> csv_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") out.push_back(e.path().filename());
    std::sort(out.begin(), out.end());
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Replaying a manifest reproduces every CSV byte for byte.
Outcome determinism(const Context& ctx) {
    auto cfg = mnist_config(ctx, 5, "criterion8-run");
    cfg.dataset.train_subset = 1000;
    cfg.dataset.test_subset = 300;
    cfg.n_vus = {2, 5};
    cfg.round.rounds = 3;
    fs::remove_all(cfg.output_dir);
    const auto first = run_experiment(cfg);
    const fs::path replay = ctx.work / "criterion8-replay";
    fs::remove_all(replay);
    replay_manifest(first.manifest, replay);
    const auto a = csv_files(cfg.output_dir), b = csv_files(replay);
    std::size_t same = 0;
    std::string differing;
    for (const auto& f : a) {
        if (fs::exists(replay / f) && slurp(cfg.output_dir / f) == slurp(replay / f))
            ++same;
        else
            differing += " " + f.string();
    }
    const bool pass = first.all_ok() && !a.empty() && a == b && same == a.size();
    return {pass, std::to_string(same) + "/" + std::to_string(a.size()) + " CSVs byte-identical" +
                      (differing.empty() ? "" : "; differing:" + differing)};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)(const Context&);
};

const Criterion kCriteria[] = {
    {1, "split consistency", split_consistency},   {2, "gradient correctness", gradient_correctness},
    {3, "oracle equivalence", oracle_equivalence}, {4, "latency table fidelity", table_fidelity},
    {5, "latency-vs-N shape", latency_shape},      {6, "convergence rate", convergence_rate},
    {7, "robustness to N", robustness_to_n},       {8, "manifest determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> only;
    Context ctx;
    ctx.data = "data/mnist-subset";
    ctx.work = "acceptance-work";
    app.add_option("--only", only, "Criterion ids to run (default: all)")->check(CLI::Range(1, 8));
    app.add_option("--data", ctx.data, "Directory holding the MNIST subset IDX files");
    app.add_option("--work", ctx.work, "Scratch directory for run outputs");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(ctx.work);

    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " | "
                  << o.detail << " | " << num(std::round(secs * 10) / 10) << " s" << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures ? 1 : 0;
}
