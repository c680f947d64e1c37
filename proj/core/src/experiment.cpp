#include "dflsim/experiment.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dflsim/analysis.hpp"
#include "dflsim/error.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::experiment {

namespace {

std::size_t line_of(const YAML::Node& node) {
    const auto mark = node.Mark();
    return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

// A YAML mapping with a fixed key vocabulary. Unknown keys are rejected so typos
// surface as config errors instead of silently falling back to defaults.
class Section {
public:
    Section(const YAML::Node& node, std::string name, std::set<std::string> allowed)
        : node_(node), name_(std::move(name)) {
        if (!node_.IsMap()) throw ConfigError("'" + name_ + "' must be a mapping", line_of(node_));
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.contains(key))
                throw ConfigError("unknown key '" + key + "' in '" + name_ + "'", line_of(kv.first));
        }
    }

    bool has(const char* key) const { return static_cast<bool>(node_[key]); }
    YAML::Node at(const char* key) const { return node_[key]; }
    std::size_t line() const { return line_of(node_); }
    const std::string& name() const { return name_; }

    template <typename T>
    T get(const char* key, T fallback) const {
        const YAML::Node v = node_[key];
        if (!v) return fallback;
        return convert<T>(v, key);
    }

    template <typename T>
    T require(const char* key) const {
        const YAML::Node v = node_[key];
        if (!v) throw ConfigError("'" + name_ + "' is missing required key '" + key + "'", line());
        return convert<T>(v, key);
    }

    template <typename T>
    static T convert(const YAML::Node& v, const std::string& key) {
        try {
            if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                const auto text = v.as<std::string>();
                T out{};
                auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
                if (ec != std::errc{} || ptr != text.data() + text.size())
                    throw ConfigError("'" + key + "' must be a non-negative integer", line_of(v));
                return out;
            } else {
                return v.as<T>();
            }
        } catch (const YAML::Exception&) {
            throw ConfigError("'" + key + "' has the wrong type", line_of(v));
        }
    }

private:
    YAML::Node node_;
    std::string name_;
};

// Re-throws a validation failure from a sub-config with the line of its section.
template <typename Fn>
void validate_at(std::size_t line, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        if (e.line()) throw;
        throw ConfigError(e.what(), line);
    }
}

attacks::KSpec parse_k(const YAML::Node& v) {
    const auto text = Section::convert<std::string>(v, "k");
    if (text == "all") return attacks::KSpec::everything();
    std::size_t k{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (ec == std::errc{} && ptr == text.data() + text.size()) return attacks::KSpec::absolute(k);
    double f{};
    auto [fptr, fec] = std::from_chars(text.data(), text.data() + text.size(), f);
    if (fec == std::errc{} && fptr == text.data() + text.size() && f >= 0.0 && f <= 1.0)
        return attacks::KSpec::fraction(f);
    throw ConfigError("k must be a non-negative integer, a fraction in [0, 1], or 'all'", line_of(v));
}

std::vector<attacks::KSpec> parse_k_list(const YAML::Node& v) {
    if (!v.IsSequence()) throw ConfigError("k must be a list for sweeps", line_of(v));
    std::vector<attacks::KSpec> out;
    for (const auto& item : v) out.push_back(parse_k(item));
    return out;
}

attacks::TargetKind parse_kind(const YAML::Node& v) {
    try {
        return attacks::parse_target_kind(Section::convert<std::string>(v, "strategy"));
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), line_of(v));
    }
}

SyntheticSource parse_synthetic(const YAML::Node& node, std::uint64_t seed) {
    Section s(node, "data.synthetic",
              {"preset", "node_count", "dataless_count", "train_size_range", "train_size_mean", "test_size_range",
               "val_fraction", "class_balance", "separation", "clusters_per_class", "heterogeneity", "max_balance_skew", "max_shift",
               "label_noise"});
    const auto preset = s.get<std::string>("preset", "paper-replica");
    if (preset != "paper-replica") throw ConfigError("unknown synthetic preset '" + preset + "'", s.line());
    data::SyntheticSpec spec = data::SyntheticSpec::paper_replica();
    spec.node_count = s.get("node_count", spec.node_count);
    spec.dataless_count = s.get("dataless_count", spec.dataless_count);
    auto range = [&](const char* key, std::pair<std::size_t, std::size_t>& target) {
        if (!s.has(key)) return;
        const auto v = s.at(key);
        if (!v.IsSequence() || v.size() != 2) throw ConfigError(std::string(key) + " must be [min, max]", line_of(v));
        target = {Section::convert<std::size_t>(v[0], key), Section::convert<std::size_t>(v[1], key)};
    };
    range("train_size_range", spec.train_size_range);
    range("test_size_range", spec.test_size_range);
    spec.train_size_mean_target = s.get("train_size_mean", spec.train_size_mean_target);
    spec.val_fraction = s.get("val_fraction", spec.val_fraction);
    spec.class_balance = s.get("class_balance", spec.class_balance);
    spec.separation = s.get("separation", spec.separation);
    spec.clusters_per_class = s.get("clusters_per_class", spec.clusters_per_class);
    spec.heterogeneity = s.get("heterogeneity", spec.heterogeneity);
    spec.max_balance_skew = s.get("max_balance_skew", spec.max_balance_skew);
    spec.max_shift = s.get("max_shift", spec.max_shift);
    spec.label_noise = s.get("label_noise", spec.label_noise);
    spec.seed = derive_seed(seed, {stream::data});
    validate_at(s.line(), [&] { spec.validate(); });
    return {spec};
}

IngestSource parse_ingest(const YAML::Node& node, const std::filesystem::path& base, std::uint64_t seed) {
    Section s(node, "data.ingest", {"path", "delimiter", "split"});
    IngestSource src;
    src.path = s.require<std::string>("path");
    if (src.path.is_relative() && !base.empty()) src.path = base / src.path;
    auto delim = s.get<std::string>("delimiter", ",");
    if (delim == "\\t") delim = "\t";
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character", line_of(s.at("delimiter")));
    src.format.delimiter = delim[0];
    if (s.has("split")) {
        const auto v = s.at("split");
        if (!v.IsSequence() || v.size() != 3) throw ConfigError("split must be [train, val, test]", line_of(v));
        src.format.split = {v[0].as<double>(), v[1].as<double>(), v[2].as<double>()};
    }
    src.format.seed = derive_seed(seed, {stream::split});
    validate_at(s.line(), [&] { src.format.split.validate(); });
    return src;
}

MobilitySource parse_mobility(const YAML::Node& node, std::size_t default_nodes, std::uint64_t seed) {
    Section s(node, "topology.mobility", {"nodes", "snapshots", "radius", "speed", "pause_steps", "steps_per_snapshot"});
    topo::MobilitySpec spec;
    spec.node_count = s.get("nodes", default_nodes ? default_nodes : spec.node_count);
    spec.snapshot_count = s.get("snapshots", spec.snapshot_count);
    spec.radius = s.get("radius", spec.radius);
    if (s.has("speed")) {
        const auto v = s.at("speed");
        if (!v.IsSequence() || v.size() != 2) throw ConfigError("speed must be [min, max]", line_of(v));
        spec.speed_min = v[0].as<double>();
        spec.speed_max = v[1].as<double>();
    }
    spec.pause_steps = s.get("pause_steps", spec.pause_steps);
    spec.steps_per_snapshot = s.get("steps_per_snapshot", spec.steps_per_snapshot);
    spec.seed = derive_seed(seed, {stream::topology});
    validate_at(s.line(), [&] { spec.validate(); });
    return {spec};
}

engine::SimConfig parse_sim(const YAML::Node& node, std::uint64_t seed) {
    engine::SimConfig cfg;
    cfg.master_seed = seed;
    if (!node) return cfg;
    Section s(node, "sim",
              {"mode", "rounds", "arch", "learning_rate", "batch_size", "local_epochs", "aggregation", "relays",
               "shared_init", "traces", "workers"});
    const auto mode = s.get<std::string>("mode", "dfl");
    if (mode == "dfl") cfg.mode = engine::Mode::dfl;
    else if (mode == "local-only") cfg.mode = engine::Mode::local_only;
    else throw ConfigError("mode must be 'dfl' or 'local-only'", line_of(s.at("mode")));
    cfg.rounds = s.get("rounds", cfg.rounds);
    if (s.has("arch")) {
        const auto v = s.at("arch");
        if (v.IsScalar()) {
            const auto name = v.as<std::string>();
            if (name == "small") cfg.arch = nn::ModelArch::small();
            else if (name == "large") cfg.arch = nn::ModelArch::large();
            else throw ConfigError("arch must be 'small', 'large' or a list of hidden sizes", line_of(v));
        } else if (v.IsSequence()) {
            cfg.arch.hidden_dims.clear();
            for (const auto& h : v) cfg.arch.hidden_dims.push_back(Section::convert<std::size_t>(h, "arch"));
        } else {
            throw ConfigError("arch must be 'small', 'large' or a list of hidden sizes", line_of(v));
        }
    }
    cfg.train.learning_rate = s.get("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = s.get("batch_size", cfg.train.batch_size);
    cfg.train.local_epochs = s.get("local_epochs", cfg.train.local_epochs);
    const auto agg = s.get<std::string>("aggregation", "uniform");
    if (agg == "uniform") cfg.weighting = engine::Weighting::uniform;
    else if (agg == "data-size") cfg.weighting = engine::Weighting::data_size;
    else throw ConfigError("aggregation must be 'uniform' or 'data-size'", line_of(s.at("aggregation")));
    cfg.relays = s.get("relays", cfg.relays);
    cfg.shared_init = s.get("shared_init", cfg.shared_init);
    cfg.record_traces = s.get("traces", cfg.record_traces);
    cfg.workers = s.get("workers", cfg.workers);
    if (cfg.workers == 0) throw ConfigError("workers must be at least 1", line_of(s.at("workers")));
    validate_at(s.line(), [&] { cfg.validate(); });
    return cfg;
}

TargetSpec parse_target(const YAML::Node& node, const std::string& name) {
    Section s(node, name, {"strategy", "k", "ids"});
    TargetSpec t;
    if (!s.has("strategy")) throw ConfigError(name + " needs a strategy", s.line());
    t.kind = parse_kind(s.at("strategy"));
    if (t.kind == attacks::TargetKind::explicit_list) {
        if (!s.has("ids")) throw ConfigError(name + " with explicit_list needs 'ids'", s.line());
        t.ids = s.require<std::vector<NodeId>>("ids");
        t.k = attacks::KSpec::absolute(t.ids.size());
    } else if (t.kind == attacks::TargetKind::all) {
        t.k = attacks::KSpec::everything();
    } else {
        if (!s.has("k")) throw ConfigError(name + " needs 'k'", s.line());
        t.k = parse_k(s.at("k"));
    }
    return t;
}

AttackSpec parse_attack(const YAML::Node& node) {
    Section s(node, "attack", {"jam", "poison", "p_a"});
    AttackSpec a;
    if (s.has("jam")) a.jam = parse_target(s.at("jam"), "attack.jam");
    if (s.has("poison")) a.poison = parse_target(s.at("poison"), "attack.poison");
    a.p_a = s.get("p_a", a.poison ? 1.0 : 0.0);
    if (!(a.p_a >= 0.0 && a.p_a <= 1.0)) throw ConfigError("p_a must lie in [0, 1]", line_of(s.at("p_a")));
    return a;
}

attacks::SweepSpec parse_sweep(const YAML::Node& node, std::uint64_t seed) {
    Section s(node, "sweep", {"kind", "jam", "poison", "network", "p_a", "workers"});
    const auto kind_node = s.at("kind");
    if (!kind_node) throw ConfigError("sweep needs 'kind'", s.line());
    attacks::SweepSpec spec;
    try {
        spec.kind = attacks::parse_sweep_kind(kind_node.as<std::string>());
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), line_of(kind_node));
    }
    switch (spec.kind) {
        case attacks::SweepKind::jamming: spec = attacks::SweepSpec::jamming_grid(); break;
        case attacks::SweepKind::poisoning: spec = attacks::SweepSpec::poisoning_grid(); break;
        case attacks::SweepKind::joint: spec = attacks::SweepSpec::joint_grid(); break;
        case attacks::SweepKind::network: spec = attacks::SweepSpec::network_grid(attacks::TargetKind::degree); break;
    }
    auto role = [&](const char* key, attacks::TargetKind& kind, std::vector<attacks::KSpec>& ks) {
        if (!s.has(key)) return;
        Section r(s.at(key), std::string("sweep.") + key, {"strategy", "k"});
        if (r.has("strategy")) kind = parse_kind(r.at("strategy"));
        if (r.has("k")) ks = parse_k_list(r.at("k"));
    };
    role("jam", spec.jam_kind, spec.jam_k);
    role("poison", spec.poison_kind, spec.poison_k);
    role("network", spec.network_kind, spec.network_k);
    if (s.has("p_a")) spec.p_a = s.require<std::vector<double>>("p_a");
    spec.workers = s.get("workers", spec.workers);
    spec.random_seed = derive_seed(seed, {stream::targeting});
    validate_at(s.line(), [&] { spec.validate(); });
    return spec;
}

}  // namespace

ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(e.msg, e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
    }
    if (!root || root.IsNull()) throw ConfigError("spec is empty");
    Section top(root, "spec",
                {"schema_version", "seed", "output_dir", "data", "topology", "sim", "attack", "sweep",
                 "histogram_bin_width"});

    ExperimentSpec spec;
    if (!top.has("schema_version")) throw ConfigError("spec is missing 'schema_version'", top.line());
    spec.schema_version = top.get("schema_version", 0);
    if (spec.schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(spec.schema_version) + " (expected " +
                              std::to_string(kSchemaVersion) + ")",
                          line_of(top.at("schema_version")));
    spec.master_seed = top.get<std::uint64_t>("seed", 0);
    spec.output_dir = top.get<std::string>("output_dir", spec.output_dir.string());
    if (spec.output_dir.is_relative() && !base_dir.empty()) spec.output_dir = base_dir / spec.output_dir;
    spec.histogram_bin_width = top.get("histogram_bin_width", spec.histogram_bin_width);
    if (!(spec.histogram_bin_width > 0.0 && spec.histogram_bin_width <= 1.0))
        throw ConfigError("histogram_bin_width must be in (0, 1]", line_of(top.at("histogram_bin_width")));

    if (!top.has("data")) throw ConfigError("spec needs a 'data' section", top.line());
    Section data(top.at("data"), "data", {"synthetic", "ingest"});
    if (data.has("synthetic") == data.has("ingest"))
        throw ConfigError("'data' must set exactly one of 'synthetic' or 'ingest'", data.line());
    std::size_t data_nodes_total = 0;
    if (data.has("synthetic")) {
        auto src = parse_synthetic(data.at("synthetic"), spec.master_seed);
        data_nodes_total = src.spec.node_count + src.spec.dataless_count;
        spec.data = src;
    } else {
        spec.data = parse_ingest(data.at("ingest"), base_dir, spec.master_seed);
    }

    if (!top.has("topology")) throw ConfigError("spec needs a 'topology' section", top.line());
    Section topo_sec(top.at("topology"), "topology", {"mobility", "edge_list"});
    if (topo_sec.has("mobility") == topo_sec.has("edge_list"))
        throw ConfigError("'topology' must set exactly one of 'mobility' or 'edge_list'", topo_sec.line());
    if (topo_sec.has("mobility")) {
        auto src = parse_mobility(topo_sec.at("mobility"), data_nodes_total, spec.master_seed);
        if (data_nodes_total && src.spec.node_count != data_nodes_total)
            throw ConfigError("mobility has " + std::to_string(src.spec.node_count) + " nodes but the synthetic data has " +
                                  std::to_string(data_nodes_total),
                              line_of(topo_sec.at("mobility")));
        spec.topology = src;
    } else {
        Section e(topo_sec.at("edge_list"), "topology.edge_list", {"path", "nodes"});
        EdgeListSource src;
        src.path = e.require<std::string>("path");
        if (src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
        src.node_count = e.get<std::size_t>("nodes", 0);
        spec.topology = src;
    }

    spec.sim = parse_sim(top.at("sim"), spec.master_seed);
    if (top.has("attack")) spec.attack = parse_attack(top.at("attack"));
    if (top.has("sweep")) spec.sweep = parse_sweep(top.at("sweep"), spec.master_seed);
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read spec file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str(), path.parent_path());
}

namespace {

io::Json k_to_json(const attacks::KSpec& k) {
    switch (k.kind) {
        case attacks::KSpec::Kind::all: return "all";
        case attacks::KSpec::Kind::fraction: return k.value;
        case attacks::KSpec::Kind::absolute: return static_cast<std::size_t>(k.value);
    }
    return nullptr;
}

io::Json k_list_to_json(const std::vector<attacks::KSpec>& ks) {
    io::Json out = io::Json::array();
    for (const auto& k : ks) out.push_back(k_to_json(k));
    return out;
}

io::Json target_to_json(const TargetSpec& t) {
    io::Json j{{"strategy", attacks::to_string(t.kind)}, {"k", k_to_json(t.k)}};
    if (t.kind == attacks::TargetKind::explicit_list) j["ids"] = t.ids;
    return j;
}

io::Json baseline_key_json(const ExperimentSpec& spec) {
    auto j = resolved_config(spec);
    j.erase("attack");
    j.erase("sweep");
    j.erase("histogram_bin_width");
    return j;
}

}  // namespace

io::Json resolved_config(const ExperimentSpec& spec) {
    io::Json j;
    j["schema_version"] = spec.schema_version;
    j["seed"] = spec.master_seed;
    if (const auto* syn = std::get_if<SyntheticSource>(&spec.data)) {
        const auto& s = syn->spec;
        j["data"] = {{"synthetic",
                      {{"node_count", s.node_count},
                       {"dataless_count", s.dataless_count},
                       {"train_size_range", {s.train_size_range.first, s.train_size_range.second}},
                       {"train_size_mean", s.train_size_mean_target},
                       {"test_size_range", {s.test_size_range.first, s.test_size_range.second}},
                       {"val_fraction", s.val_fraction},
                       {"class_balance", s.class_balance},
                       {"separation", s.separation},
                       {"clusters_per_class", s.clusters_per_class},
                       {"heterogeneity", s.heterogeneity},
                       {"max_balance_skew", s.max_balance_skew},
                       {"max_shift", s.max_shift},
                       {"label_noise", s.label_noise}}}};
    } else {
        const auto& in = std::get<IngestSource>(spec.data);
        j["data"] = {{"ingest",
                      {{"path", in.path.filename().string()},
                       {"delimiter", std::string(1, in.format.delimiter)},
                       {"split", {in.format.split.train, in.format.split.val, in.format.split.test}}}}};
    }
    if (const auto* mob = std::get_if<MobilitySource>(&spec.topology)) {
        const auto& m = mob->spec;
        j["topology"] = {{"mobility",
                          {{"nodes", m.node_count},
                           {"snapshots", m.snapshot_count},
                           {"radius", m.radius},
                           {"speed", {m.speed_min, m.speed_max}},
                           {"pause_steps", m.pause_steps},
                           {"steps_per_snapshot", m.steps_per_snapshot}}}};
    } else {
        const auto& e = std::get<EdgeListSource>(spec.topology);
        j["topology"] = {{"edge_list", {{"path", e.path.filename().string()}, {"nodes", e.node_count}}}};
    }
    j["sim"] = io::sim_config_to_json(spec.sim);
    if (spec.attack) {
        io::Json a{{"p_a", spec.attack->p_a}};
        if (spec.attack->jam) a["jam"] = target_to_json(*spec.attack->jam);
        if (spec.attack->poison) a["poison"] = target_to_json(*spec.attack->poison);
        j["attack"] = a;
    }
    if (spec.sweep) {
        const auto& s = *spec.sweep;
        j["sweep"] = {{"kind", attacks::to_string(s.kind)},
                      {"jam", {{"strategy", attacks::to_string(s.jam_kind)}, {"k", k_list_to_json(s.jam_k)}}},
                      {"poison", {{"strategy", attacks::to_string(s.poison_kind)}, {"k", k_list_to_json(s.poison_k)}}},
                      {"network", {{"strategy", attacks::to_string(s.network_kind)}, {"k", k_list_to_json(s.network_k)}}},
                      {"p_a", s.p_a}};
    }
    j["histogram_bin_width"] = spec.histogram_bin_width;
    return j;
}

void apply_environment(ExperimentSpec& spec) {
    if (const char* dir = std::getenv("DFLSIM_OUTPUT_DIR"); dir && *dir) spec.output_dir = dir;
    if (const char* w = std::getenv("DFLSIM_WORKERS"); w && *w) {
        std::size_t workers = 0;
        const std::string_view text(w);
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), workers);
        if (ec != std::errc{} || ptr != text.data() + text.size() || workers == 0)
            throw ConfigError("DFLSIM_WORKERS must be a positive integer");
        spec.sim.workers = workers;
        if (spec.sweep) spec.sweep->workers = workers;
    }
}

data::Population materialize_population(const ExperimentSpec& spec) {
    if (const auto* syn = std::get_if<SyntheticSource>(&spec.data)) return data::generate_synthetic(syn->spec);
    const auto& in = std::get<IngestSource>(spec.data);
    return data::ingest(in.path, in.format);
}

topo::TopologySeries materialize_topology(const ExperimentSpec& spec) {
    if (const auto* mob = std::get_if<MobilitySource>(&spec.topology)) return topo::generate_mobility_topology(mob->spec);
    const auto& e = std::get<EdgeListSource>(spec.topology);
    return topo::read_edge_list(e.path, e.node_count);
}

namespace {

// Nodes present in the topology but absent from an ingested dataset become data-less relays.
void attach_dataless(data::Population& population, const topo::TopologySeries& topology) {
    std::set<NodeId> have;
    for (const auto& n : population.nodes) have.insert(n.node_id);
    for (auto id : population.dataless_node_ids) have.insert(id);
    for (NodeId id = 0; id < topology.node_count; ++id)
        if (!have.contains(id)) population.dataless_node_ids.push_back(id);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    Writer(std::filesystem::path dir, bool overwrite) : dir_(std::move(dir)), overwrite_(overwrite) {}

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }

    void ensure_absent(const std::string& name) const {
        if (!overwrite_ && std::filesystem::exists(path(name)))
            throw ArtifactExistsError(path(name).string() + " already exists (pass --overwrite to replace it)");
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        ensure_absent(name);
        const auto p = path(name);
        std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + p.string());
        body(out);
        if (!out) throw Error("failed writing " + p.string());
    }

private:
    std::filesystem::path dir_;
    bool overwrite_;
};

struct Loaded {
    ExperimentSpec spec;
    data::Population population;
    topo::TopologySeries topology;
};

Loaded load_inputs(const ExperimentSpec& spec) {
    Loaded l{spec, materialize_population(spec), materialize_topology(spec)};
    if (std::holds_alternative<IngestSource>(spec.data)) attach_dataless(l.population, l.topology);
    return l;
}

void log_line(const RunOptions& opts, const std::string& line) {
    if (opts.log) *opts.log << line << '\n';
}

// On-disk baseline cache under <output_dir>/baselines, keyed by the data, topology,
// sim config and seed. A stale cache is an error unless overwriting.
class BaselineStore {
public:
    BaselineStore(const ExperimentSpec& spec, const RunOptions& opts)
        : writer_(spec.output_dir / "baselines", true), opts_(opts), key_json_(baseline_key_json(spec)),
          key_(fnv1a(key_json_.dump())), seed_(spec.master_seed) {}

    void load_into(attacks::ExperimentContext& ctx) const {
        ctx.provide_baselines(load("dfl.json"), load("local.json"));
    }

    void save(attacks::ExperimentContext& ctx) const {
        save_one("dfl.json", ctx.dfl_baseline());
        save_one("local.json", ctx.local_baseline());
    }

private:
    std::optional<engine::ExperimentReport> load(const std::string& name) const {
        const auto p = writer_.path(name);
        if (!std::filesystem::exists(p)) return std::nullopt;
        std::ifstream in(p);
        io::Json j;
        try {
            j = io::Json::parse(in);
        } catch (const nlohmann::json::exception&) {
            throw Error("corrupt baseline cache " + p.string());
        }
        if (j.value("baseline_key", std::uint64_t{0}) != key_) {
            if (opts_.overwrite) return std::nullopt;
            throw ArtifactExistsError("baseline cache " + p.string() +
                                      " was computed for a different config (pass --overwrite to recompute)");
        }
        log_line(opts_, "reusing cached baseline " + p.string());
        return io::report_from_json(j);
    }

    void save_one(const std::string& name, const engine::ExperimentReport& report) const {
        auto j = io::report_to_json(report, {key_json_, seed_});
        j["baseline_key"] = key_;
        writer_.write(name, [&](std::ostream& out) { out << io::dump(j); });
    }

    Writer writer_;
    const RunOptions& opts_;
    io::Json key_json_;
    std::uint64_t key_;
    std::uint64_t seed_;
};

std::optional<attacks::TargetingStrategy> to_strategy(const std::optional<TargetSpec>& t, std::size_t eligible,
                                                      std::uint64_t seed) {
    if (!t) return std::nullopt;
    attacks::TargetingStrategy s;
    s.kind = t->kind;
    s.ids = t->ids;
    s.seed = seed;
    s.k = t->k.kind == attacks::KSpec::Kind::all ? eligible : t->k.resolve(eligible);
    if (t->k.kind == attacks::KSpec::Kind::all) s.kind = attacks::TargetKind::all;
    return s;
}

std::string summary_line(const char* name, const analysis::AccuracyStats& s) {
    std::ostringstream out;
    out << name << ": avg=" << io::format_number(s.average) << " min=" << io::format_number(s.minimum)
        << " max=" << io::format_number(s.maximum) << " std=" << io::format_number(s.std_dev);
    return out.str();
}

analysis::CorrelationTable correlations(const engine::ExperimentReport& dfl, const engine::ExperimentReport& local,
                                        const std::vector<topo::NodeNetStats>& net, const RunOptions& opts) {
    analysis::NodeValues a_dfl = dfl.accuracies(), a_ll = local.accuracies(), m, d, cc, c;
    for (const auto& n : dfl.nodes) {
        for (auto* v : {&m, &d, &cc, &c}) v->ids.push_back(n.node_id);
        m.values.push_back(static_cast<double>(n.train_size));
        d.values.push_back(net[n.node_id].avg_in_degree);
        cc.values.push_back(net[n.node_id].avg_cc_size);
        c.values.push_back(net[n.node_id].connected_time_ratio);
    }
    try {
        return analysis::correlation_report(a_dfl, a_ll, m, d, cc, c);
    } catch (const UndefinedCorrelationError& e) {
        // Degenerate experiment: report each pair individually, marking undefined ones.
        log_line(opts, std::string("warning: ") + e.what());
        analysis::CorrelationTable table;
        const std::pair<const char*, const analysis::NodeValues*> names[] = {
            {"a_DFL", &a_dfl}, {"a_LL", &a_ll}, {"m", &m}, {"d", &d}, {"C", &cc}, {"c", &c}};
        const int pairs[][2] = {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {0, 4}, {0, 5}};
        for (const auto& p : pairs) {
            analysis::CorrelationRow row{names[p[0]].first, names[p[1]].first, std::nan(""), std::nan("")};
            try {
                row.pearson = analysis::pearson(names[p[0]].second->values, names[p[1]].second->values);
                row.spearman = analysis::spearman(names[p[0]].second->values, names[p[1]].second->values);
            } catch (const UndefinedCorrelationError&) {
            }
            table.rows.push_back(row);
        }
        return table;
    }
}

}  // namespace

engine::ExperimentReport run(const ExperimentSpec& spec, const RunOptions& options) {
    const Writer writer(spec.output_dir, options.overwrite);
    const std::vector<std::string> artifacts = {"report.json",   "stats.tsv",      "correlation.tsv",
                                                "histogram.tsv", "network_metrics.tsv", "node_stats.tsv",
                                                "adjacency.tsv"};
    for (const auto& a : artifacts) writer.ensure_absent(a);

    auto inputs = load_inputs(spec);
    const io::ArtifactHeader header{resolved_config(spec), spec.master_seed};
    attacks::ExperimentContext ctx(inputs.population, inputs.topology, spec.sim);
    BaselineStore store(spec, options);
    store.load_into(ctx);

    log_line(options, "computing baselines");
    const auto& dfl = ctx.dfl_baseline();
    const auto& local = ctx.local_baseline();
    store.save(ctx);

    engine::ExperimentReport report = dfl;
    if (spec.attack && (spec.attack->jam || spec.attack->poison)) {
        const auto eligible = ctx.data_nodes().size();
        const auto seed = derive_seed(spec.master_seed, {stream::targeting});
        const auto plan = ctx.plan(to_strategy(spec.attack->jam, eligible, seed),
                                   to_strategy(spec.attack->poison, eligible, seed), spec.attack->p_a);
        log_line(options, "running attacked experiment");
        report = ctx.run(plan);
    } else if (spec.sim.mode == engine::Mode::local_only) {
        report = local;
    }

    writer.write("report.json", [&](std::ostream& out) { out << io::dump(io::report_to_json(report, header)); });
    writer.write("stats.tsv", [&](std::ostream& out) { io::write_stats_table(out, header, local.stats, report.stats); });
    writer.write("correlation.tsv", [&](std::ostream& out) {
        io::write_correlation_table(out, header, correlations(report, local, ctx.net_stats(), options));
    });
    writer.write("histogram.tsv", [&](std::ostream& out) {
        io::write_histogram(out, header, analysis::histogram(local.accuracy_values(), spec.histogram_bin_width),
                            analysis::histogram(report.accuracy_values(), spec.histogram_bin_width));
    });
    writer.write("network_metrics.tsv",
                 [&](std::ostream& out) { io::write_network_metrics(out, header, topo::metrics_over_time(inputs.topology)); });
    writer.write("node_stats.tsv", [&](std::ostream& out) { io::write_node_stats(out, header, ctx.net_stats()); });
    writer.write("adjacency.tsv",
                 [&](std::ostream& out) { io::write_matrix(out, header, topo::aggregate_adjacency(inputs.topology)); });

    log_line(options, summary_line("local-only", local.stats));
    log_line(options, summary_line("dfl       ", dfl.stats));
    if (spec.attack) log_line(options, summary_line("attacked  ", report.stats));
    return report;
}

attacks::SweepResult sweep(const ExperimentSpec& spec, const RunOptions& options) {
    if (!spec.sweep) throw ConfigError("spec has no 'sweep' section");
    const Writer writer(spec.output_dir, options.overwrite);
    const std::string table_name = std::string("sweep_") + attacks::to_string(spec.sweep->kind) + ".tsv";
    writer.ensure_absent(table_name);

    auto inputs = load_inputs(spec);
    const io::ArtifactHeader header{resolved_config(spec), spec.master_seed};
    attacks::ExperimentContext ctx(inputs.population, inputs.topology, spec.sim);
    BaselineStore store(spec, options);
    store.load_into(ctx);
    if (!ctx.has_dfl_baseline() || !ctx.has_local_baseline()) log_line(options, "computing missing baselines");
    ctx.dfl_baseline();
    ctx.local_baseline();
    store.save(ctx);

    log_line(options, "running sweep");
    auto result = attacks::attack_sweep(ctx, *spec.sweep);
    const auto eligible = result.eligible;

    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const auto& cell = result.cells[i];
        std::ostringstream name;
        name << "cells/cell-" << std::setw(3) << std::setfill('0') << i << '-' << attacks::to_string(cell.variant);
        if (cell.jam_k) name << '_' << cell.jam_k->label(eligible, spec.sweep->kind == attacks::SweepKind::network
                                                                       ? spec.sweep->network_kind
                                                                       : spec.sweep->jam_kind);
        if (cell.poison_k) {
            name << '_' << cell.poison_k->label(eligible, spec.sweep->kind == attacks::SweepKind::network
                                                              ? spec.sweep->network_kind
                                                              : spec.sweep->poison_kind);
            name << "_pa" << io::format_number(cell.p_a);
        }
        name << ".json";
        writer.write(name.str(), [&](std::ostream& out) {
            auto j = io::report_to_json(cell.report, header);
            out << io::dump(j);
        });
        log_line(options, name.str() + ": " + summary_line("cell", cell.report.stats));
    }
    writer.write(table_name,
                 [&](std::ostream& out) { io::write_sweep_table(out, header, result, ctx.dfl_baseline()); });
    return result;
}

void baseline(const ExperimentSpec& spec, const RunOptions& options) {
    auto inputs = load_inputs(spec);
    attacks::ExperimentContext ctx(inputs.population, inputs.topology, spec.sim);
    BaselineStore store(spec, options);
    store.load_into(ctx);
    const auto& dfl = ctx.dfl_baseline();
    const auto& local = ctx.local_baseline();
    store.save(ctx);
    log_line(options, summary_line("local-only", local.stats));
    log_line(options, summary_line("dfl       ", dfl.stats));
}

void netstats(const std::filesystem::path& edge_list, std::size_t node_count, const std::filesystem::path& output_dir,
              const RunOptions& options) {
    const Writer writer(output_dir, options.overwrite);
    for (const char* a : {"network_metrics.tsv", "node_stats.tsv", "adjacency.tsv"}) writer.ensure_absent(a);
    const auto series = topo::read_edge_list(edge_list, node_count);
    const io::ArtifactHeader header{
        io::Json{{"edge_list", edge_list.filename().string()}, {"nodes", series.node_count}}, 0};
    const auto metrics = topo::metrics_over_time(series);
    writer.write("network_metrics.tsv", [&](std::ostream& out) { io::write_network_metrics(out, header, metrics); });
    writer.write("node_stats.tsv",
                 [&](std::ostream& out) { io::write_node_stats(out, header, topo::node_net_stats(series)); });
    writer.write("adjacency.tsv",
                 [&](std::ostream& out) { io::write_matrix(out, header, topo::aggregate_adjacency(series)); });
    log_line(options, "wrote " + std::to_string(metrics.size()) + " snapshots of network metrics to " +
                          output_dir.string());
}

}  // namespace dflsim::experiment
