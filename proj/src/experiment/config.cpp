#include "fstl/experiment/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "fstl/error.hpp"

namespace fstl {

namespace fs = std::filesystem;

namespace {

// Reads one TOML table and rejects keys nobody asked for.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }

    template <typename T>
    std::optional<T> get(const std::string& key) {
        const toml::node* node = find(key);
        if (!node) return std::nullopt;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = node->value<double>()) return *v;
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node->value<std::string>()) return *v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node->value<bool>()) return *v;
        } else {
            if (auto v = node->value<std::int64_t>()) {
                if (*v < 0) fail(key, "must be nonnegative");
                return static_cast<T>(*v);
            }
        }
        fail(key, "has the wrong type");
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (auto v = get<T>(key)) out = *v;
    }

    template <typename T>
    std::optional<std::vector<T>> get_list(const std::string& key) {
        const toml::node* node = find(key);
        if (!node) return std::nullopt;
        const auto* arr = node->as_array();
        if (!arr) fail(key, "must be an array");
        std::vector<T> out;
        for (const auto& item : *arr) {
            if constexpr (std::is_same_v<T, std::string>) {
                auto v = item.value<std::string>();
                if (!v) fail(key, "must hold strings");
                out.push_back(*v);
            } else {
                auto v = item.value<std::int64_t>();
                if (!v || *v < 0) fail(key, "must hold nonnegative integers");
                out.push_back(static_cast<T>(*v));
            }
        }
        return out;
    }

    const toml::table* child(const std::string& key) {
        const toml::node* node = find(key);
        if (!node) return nullptr;
        if (!node->is_table()) fail(key, "must be a table");
        return node->as_table();
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
        }
    }

private:
    const toml::node* find(const std::string& key) {
        seen_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError("config key '" + qualified(key) + "' " + what);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    if (!cfg.dataset.synthetic_seed_explicit) cfg.dataset.synthetic.seed = seed;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.protocols.empty()) throw ConfigError("at least one protocol is required");
    if (cfg.n_vus.empty()) throw ConfigError("at least one VU count is required");
    for (auto n : cfg.n_vus)
        if (n == 0) throw ConfigError("n_vus entries must be at least 1");
    if (cfg.model.conv_channels == 0 || cfg.model.hidden == 0) throw ConfigError("model sizes must be positive");
    if (cfg.dataset.source == DatasetConfig::Source::idx) {
        if (cfg.dataset.train_images.empty() || cfg.dataset.train_labels.empty() ||
            cfg.dataset.test_images.empty() || cfg.dataset.test_labels.empty())
            throw ConfigError("idx datasets need train_images, train_labels, test_images and test_labels");
    } else {
        if (cfg.dataset.synthetic.per_class == 0 || cfg.dataset.synthetic_test_per_class == 0)
            throw ConfigError("empty class");
        if (cfg.dataset.synthetic.classes < 2) throw ConfigError("synthetic data needs at least two classes");
    }
    RoundConfig probe = cfg.round;
    probe.protocol = ProtocolKind::FL;
    probe.cut.reset();
    validate_round_config(probe);
    validate_pretrain_spec(cfg.pretrain);
}

ExperimentConfig parse_config_toml(const std::string& text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(msg.str());
    }

    ExperimentConfig cfg;
    Section top(&root, "");
    top.read("seed", cfg.seed);
    if (auto out = top.get<std::string>("output_dir")) cfg.output_dir = resolve(base_dir, *out);
    if (auto list = top.get_list<std::string>("protocols")) {
        cfg.protocols.clear();
        for (const auto& name : *list) cfg.protocols.push_back(parse_protocol(name));
    }
    if (auto list = top.get_list<std::size_t>("n_vus")) cfg.n_vus = *list;

    Section data(top.child("dataset"), "dataset");
    if (auto src = data.get<std::string>("source")) {
        if (*src == "idx")
            cfg.dataset.source = DatasetConfig::Source::idx;
        else if (*src == "synthetic")
            cfg.dataset.source = DatasetConfig::Source::synthetic;
        else
            throw ConfigError("dataset.source must be 'idx' or 'synthetic'");
    }
    for (auto [key, field] : {std::pair{"train_images", &cfg.dataset.train_images},
                              std::pair{"train_labels", &cfg.dataset.train_labels},
                              std::pair{"test_images", &cfg.dataset.test_images},
                              std::pair{"test_labels", &cfg.dataset.test_labels}})
        if (auto v = data.get<std::string>(key)) *field = resolve(base_dir, *v);
    data.read("train_subset", cfg.dataset.train_subset);
    data.read("test_subset", cfg.dataset.test_subset);
    if (auto s = data.get<std::uint64_t>("seed")) {
        cfg.dataset.synthetic.seed = *s;
        cfg.dataset.synthetic_seed_explicit = true;
    } else {
        cfg.dataset.synthetic.seed = cfg.seed;
    }
    data.read("per_class", cfg.dataset.synthetic.per_class);
    data.read("test_per_class", cfg.dataset.synthetic_test_per_class);
    data.read("classes", cfg.dataset.synthetic.classes);
    if (auto shape = data.get_list<std::size_t>("input_shape")) cfg.dataset.synthetic.input_shape = *shape;
    data.read("separation", cfg.dataset.synthetic.separation);
    data.read("noise", cfg.dataset.synthetic.noise);
    data.finish();

    Section model(top.child("model"), "model");
    model.read("conv_channels", cfg.model.conv_channels);
    model.read("hidden", cfg.model.hidden);
    model.finish();

    Section training(top.child("training"), "training");
    training.read("rounds", cfg.round.rounds);
    training.read("local_epochs", cfg.round.local_epochs);
    training.read("batch_size", cfg.round.batch_size);
    training.read("eta", cfg.round.eta);
    training.read("alpha", cfg.round.alpha);
    training.read("sigma", cfg.round.sigma);
    training.read("cut", cfg.cut);
    if (auto stop = training.get<std::string>("stop")) {
        if (*stop == "max_rounds")
            cfg.round.stop.kind = StopCriterion::Kind::max_rounds;
        else if (*stop == "loss_threshold")
            cfg.round.stop.kind = StopCriterion::Kind::loss_threshold;
        else
            throw ConfigError("training.stop must be 'max_rounds' or 'loss_threshold'");
    }
    training.read("loss_threshold", cfg.round.stop.loss_threshold);
    training.finish();

    Section cost(top.child("cost"), "cost");
    cost.read("vu_macs_per_s", cfg.round.cost.vu_macs_per_s);
    cost.read("hap_macs_per_s", cfg.round.cost.hap_macs_per_s);
    cost.read("link_params_per_s", cfg.round.cost.link_params_per_s);
    if (auto bits = cost.get<double>("link_bits_per_s")) cfg.round.cost.link_params_per_s = params_per_second_from_bits(*bits);
    cost.finish();

    Section pre(top.child("pretrain"), "pretrain");
    if (auto s = pre.get<std::string>("scheme")) cfg.pretrain.scheme = parse_scheme(*s);
    pre.read("fraction", cfg.pretrain.fraction);
    if (auto classes = pre.get_list<std::uint32_t>("classes")) cfg.pretrain.classes = *classes;
    pre.read("epochs", cfg.pretrain.epochs);
    pre.read("eta", cfg.pretrain.eta);
    pre.read("batch_size", cfg.pretrain.batch_size);
    pre.read("holdout", cfg.pretrain.holdout);
    if (auto w = pre.get<std::string>("weights")) cfg.pretrained_weights = resolve(base_dir, *w);
    pre.finish();

    Section lat(top.child("latency"), "latency");
    auto& o = cfg.latency;
    for (auto [key, field] : {std::pair{"T", &o.T}, std::pair{"T_prime", &o.T_prime}, std::pair{"T_fedavg", &o.T_fedavg},
                              std::pair{"T_merge", &o.T_merge}, std::pair{"p", &o.p}, std::pair{"d", &o.d},
                              std::pair{"h", &o.h}, std::pair{"r", &o.r}, std::pair{"R", &o.R}})
        *field = lat.get<double>(key);
    lat.finish();

    top.finish();
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_toml(buf.str(), fs::absolute(path).parent_path());
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir.string();
    std::vector<std::string> protocols;
    for (auto p : cfg.protocols) protocols.emplace_back(protocol_name(p));
    j["protocols"] = protocols;
    j["n_vus"] = cfg.n_vus;

    auto& d = j["dataset"];
    const auto& dc = cfg.dataset;
    if (dc.source == DatasetConfig::Source::idx) {
        d["source"] = "idx";
        d["train_images"] = dc.train_images.string();
        d["train_labels"] = dc.train_labels.string();
        d["test_images"] = dc.test_images.string();
        d["test_labels"] = dc.test_labels.string();
        d["train_subset"] = dc.train_subset;
        d["test_subset"] = dc.test_subset;
    } else {
        d["source"] = "synthetic";
        d["seed"] = dc.synthetic.seed;
        d["per_class"] = dc.synthetic.per_class;
        d["test_per_class"] = dc.synthetic_test_per_class;
        d["classes"] = dc.synthetic.classes;
        d["input_shape"] = dc.synthetic.input_shape;
        d["separation"] = dc.synthetic.separation;
        d["noise"] = dc.synthetic.noise;
    }

    j["model"] = {{"conv_channels", cfg.model.conv_channels}, {"hidden", cfg.model.hidden}};

    const auto& r = cfg.round;
    j["training"] = {{"rounds", r.rounds},
                     {"local_epochs", r.local_epochs},
                     {"batch_size", r.batch_size},
                     {"eta", r.eta},
                     {"alpha", r.alpha},
                     {"sigma", r.sigma},
                     {"cut", cfg.cut},
                     {"stop", r.stop.kind == StopCriterion::Kind::max_rounds ? "max_rounds" : "loss_threshold"},
                     {"loss_threshold", r.stop.loss_threshold}};
    j["cost"] = {{"vu_macs_per_s", r.cost.vu_macs_per_s},
                 {"hap_macs_per_s", r.cost.hap_macs_per_s},
                 {"link_params_per_s", r.cost.link_params_per_s}};

    const auto& p = cfg.pretrain;
    auto& pj = j["pretrain"];
    pj["scheme"] = scheme_name(p.scheme);
    pj["fraction"] = p.fraction;
    pj["classes"] = p.classes;
    pj["epochs"] = p.epochs;
    pj["eta"] = p.eta;
    pj["batch_size"] = p.batch_size;
    pj["holdout"] = p.holdout;
    if (cfg.pretrained_weights) pj["weights"] = cfg.pretrained_weights->string();

    auto& lj = j["latency"];
    lj = nlohmann::ordered_json::object();
    const auto& o = cfg.latency;
    for (auto [key, field] : {std::pair{"T", &o.T}, std::pair{"T_prime", &o.T_prime}, std::pair{"T_fedavg", &o.T_fedavg},
                              std::pair{"T_merge", &o.T_merge}, std::pair{"p", &o.p}, std::pair{"d", &o.d},
                              std::pair{"h", &o.h}, std::pair{"r", &o.r}, std::pair{"R", &o.R}})
        if (*field) lj[key] = **field;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    try {
        ExperimentConfig cfg;
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.output_dir = j.at("output_dir").get<std::string>();
        cfg.protocols.clear();
        for (const auto& name : j.at("protocols")) cfg.protocols.push_back(parse_protocol(name.get<std::string>()));
        cfg.n_vus = j.at("n_vus").get<std::vector<std::size_t>>();

        const auto& d = j.at("dataset");
        auto& dc = cfg.dataset;
        if (d.at("source") == "idx") {
            dc.source = DatasetConfig::Source::idx;
            dc.train_images = d.at("train_images").get<std::string>();
            dc.train_labels = d.at("train_labels").get<std::string>();
            dc.test_images = d.at("test_images").get<std::string>();
            dc.test_labels = d.at("test_labels").get<std::string>();
            dc.train_subset = d.at("train_subset").get<std::size_t>();
            dc.test_subset = d.at("test_subset").get<std::size_t>();
        } else {
            dc.source = DatasetConfig::Source::synthetic;
            dc.synthetic.seed = d.at("seed").get<std::uint64_t>();
            dc.synthetic_seed_explicit = true;
            dc.synthetic.per_class = d.at("per_class").get<std::size_t>();
            dc.synthetic_test_per_class = d.at("test_per_class").get<std::size_t>();
            dc.synthetic.classes = d.at("classes").get<std::size_t>();
            dc.synthetic.input_shape = d.at("input_shape").get<Shape>();
            dc.synthetic.separation = d.at("separation").get<double>();
            dc.synthetic.noise = d.at("noise").get<double>();
        }

        cfg.model.conv_channels = j.at("model").at("conv_channels").get<std::size_t>();
        cfg.model.hidden = j.at("model").at("hidden").get<std::size_t>();

        const auto& t = j.at("training");
        auto& r = cfg.round;
        r.rounds = t.at("rounds").get<std::size_t>();
        r.local_epochs = t.at("local_epochs").get<std::size_t>();
        r.batch_size = t.at("batch_size").get<std::size_t>();
        r.eta = t.at("eta").get<double>();
        r.alpha = t.at("alpha").get<double>();
        r.sigma = t.at("sigma").get<double>();
        cfg.cut = t.at("cut").get<std::size_t>();
        r.stop.kind = t.at("stop") == "loss_threshold" ? StopCriterion::Kind::loss_threshold
                                                        : StopCriterion::Kind::max_rounds;
        r.stop.loss_threshold = t.at("loss_threshold").get<double>();

        const auto& c = j.at("cost");
        r.cost.vu_macs_per_s = c.at("vu_macs_per_s").get<double>();
        r.cost.hap_macs_per_s = c.at("hap_macs_per_s").get<double>();
        r.cost.link_params_per_s = c.at("link_params_per_s").get<double>();

        const auto& p = j.at("pretrain");
        cfg.pretrain.scheme = parse_scheme(p.at("scheme").get<std::string>());
        cfg.pretrain.fraction = p.at("fraction").get<double>();
        cfg.pretrain.classes = p.at("classes").get<std::vector<std::uint32_t>>();
        cfg.pretrain.epochs = p.at("epochs").get<std::size_t>();
        cfg.pretrain.eta = p.at("eta").get<double>();
        cfg.pretrain.batch_size = p.at("batch_size").get<std::size_t>();
        cfg.pretrain.holdout = p.at("holdout").get<double>();
        if (p.contains("weights")) cfg.pretrained_weights = p.at("weights").get<std::string>();

        const auto& l = j.at("latency");
        auto& o = cfg.latency;
        for (auto [key, field] : {std::pair{"T", &o.T}, std::pair{"T_prime", &o.T_prime},
                                  std::pair{"T_fedavg", &o.T_fedavg}, std::pair{"T_merge", &o.T_merge},
                                  std::pair{"p", &o.p}, std::pair{"d", &o.d}, std::pair{"h", &o.h},
                                  std::pair{"r", &o.r}, std::pair{"R", &o.R}})
            if (l.contains(key)) *field = l.at(key).get<double>();

        validate_config(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest config is malformed: ") + e.what());
    }
}

}  // namespace fstl
