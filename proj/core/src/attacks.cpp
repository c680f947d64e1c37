#include "dflsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dflsim/error.hpp"
#include "dflsim/parallel.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::attacks {

const char* to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::dfl_rank: return "dfl_rank";
        case TargetKind::local_rank: return "local_rank";
        case TargetKind::degree: return "degree";
        case TargetKind::cc_size: return "cc_size";
        case TargetKind::conn_time: return "conn_time";
        case TargetKind::explicit_list: return "explicit_list";
        case TargetKind::random: return "random";
        case TargetKind::all: return "all";
    }
    return "?";
}

TargetKind parse_target_kind(const std::string& name) {
    for (auto k : {TargetKind::dfl_rank, TargetKind::local_rank, TargetKind::degree, TargetKind::cc_size,
                   TargetKind::conn_time, TargetKind::explicit_list, TargetKind::random, TargetKind::all})
        if (name == to_string(k)) return k;
    throw ConfigError("unknown targeting strategy '" + name + "'");
}

namespace {

const char* rank_suffix(TargetKind kind) {
    switch (kind) {
        case TargetKind::dfl_rank: return "J";
        case TargetKind::local_rank: return "P";
        case TargetKind::degree: return "d";
        case TargetKind::cc_size: return "C";
        case TargetKind::conn_time: return "c";
        case TargetKind::random: return "R";
        default: return "E";
    }
}

analysis::NodeValues restrict_to(const analysis::NodeValues& scores, const std::vector<NodeId>& eligible) {
    const std::set<NodeId> allowed(eligible.begin(), eligible.end());
    analysis::NodeValues out;
    for (std::size_t i = 0; i < scores.ids.size(); ++i) {
        if (!allowed.contains(scores.ids[i])) continue;
        out.ids.push_back(scores.ids[i]);
        out.values.push_back(scores.values[i]);
    }
    return out;
}

analysis::NodeValues net_scores(const std::vector<topo::NodeNetStats>& stats, const std::vector<NodeId>& nodes,
                                TargetKind kind) {
    analysis::NodeValues out;
    for (auto id : nodes) {
        if (id >= stats.size()) throw PlanError("network statistics do not cover node " + std::to_string(id));
        const auto& s = stats[id];
        out.ids.push_back(id);
        out.values.push_back(kind == TargetKind::degree    ? s.avg_in_degree
                             : kind == TargetKind::cc_size ? s.avg_cc_size
                                                           : s.connected_time_ratio);
    }
    return out;
}

}  // namespace

std::vector<NodeId> select_top_k(const analysis::NodeValues& scores, std::size_t k) {
    if (scores.ids.size() != scores.values.size()) throw PreconditionError("score ids and values differ in length");
    if (k > scores.ids.size())
        throw SelectionError("cannot select " + std::to_string(k) + " targets from " +
                             std::to_string(scores.ids.size()) + " eligible nodes");
    std::vector<std::size_t> order(scores.ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
        return scores.ids[a] < scores.ids[b];
    });
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(scores.ids[order[i]]);
    return out;
}

std::vector<NodeId> select_targets(const TargetingStrategy& strategy, const RankingInputs& inputs) {
    switch (strategy.kind) {
        case TargetKind::dfl_rank:
            if (!inputs.dfl_accuracy) throw PlanError("dfl_rank targeting requires the clean DFL baseline run");
            return select_top_k(restrict_to(*inputs.dfl_accuracy, inputs.data_nodes), strategy.k);
        case TargetKind::local_rank:
            if (!inputs.local_accuracy) throw PlanError("local_rank targeting requires the local-only baseline run");
            return select_top_k(restrict_to(*inputs.local_accuracy, inputs.data_nodes), strategy.k);
        case TargetKind::degree:
        case TargetKind::cc_size:
        case TargetKind::conn_time:
            if (!inputs.net_stats) throw PlanError("network-property targeting requires topology statistics");
            return select_top_k(net_scores(*inputs.net_stats, inputs.data_nodes, strategy.kind), strategy.k);
        case TargetKind::explicit_list: {
            std::set<NodeId> seen;
            for (auto id : strategy.ids)
                if (!seen.insert(id).second) throw SelectionError("duplicate id in explicit target list");
            return strategy.ids;
        }
        case TargetKind::random: {
            if (strategy.k > inputs.data_nodes.size())
                throw SelectionError("cannot select " + std::to_string(strategy.k) + " random targets from " +
                                     std::to_string(inputs.data_nodes.size()) + " eligible nodes");
            std::vector<NodeId> pool = inputs.data_nodes;
            std::sort(pool.begin(), pool.end());
            Rng rng(derive_seed(strategy.seed, {stream::targeting}));
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(strategy.k);
            return pool;
        }
        case TargetKind::all: {
            std::vector<NodeId> out(inputs.node_count);
            std::iota(out.begin(), out.end(), NodeId{0});
            return out;
        }
    }
    throw SelectionError("unknown targeting strategy");
}

AttackPlan build_plan(const std::optional<TargetingStrategy>& jam, const std::optional<TargetingStrategy>& poison,
                      double p_a, const RankingInputs& inputs) {
    if (!(p_a >= 0.0 && p_a <= 1.0)) throw PlanError("p_a must lie in [0, 1]");
    AttackPlan plan;
    plan.p_a = p_a;
    if (jam) {
        plan.jam_targets = select_targets(*jam, inputs);
        for (auto id : plan.jam_targets)
            if (inputs.node_count && id >= inputs.node_count)
                throw PlanError("jam target " + std::to_string(id) + " is not a node");
        plan.provenance.push_back({"jam", jam->kind, plan.jam_targets.size()});
    }
    if (poison) {
        if (poison->kind == TargetKind::all) {
            plan.poison_targets = inputs.data_nodes;
            std::sort(plan.poison_targets.begin(), plan.poison_targets.end());
        } else {
            plan.poison_targets = select_targets(*poison, inputs);
        }
        const std::set<NodeId> data(inputs.data_nodes.begin(), inputs.data_nodes.end());
        for (auto id : plan.poison_targets)
            if (!data.contains(id)) throw PlanError("cannot poison node " + std::to_string(id) + ": it holds no data");
        plan.provenance.push_back({"poison", poison->kind, plan.poison_targets.size()});
    }
    return plan;
}

std::size_t KSpec::resolve(std::size_t eligible) const {
    switch (kind) {
        case Kind::absolute: return static_cast<std::size_t>(value);
        case Kind::fraction: return static_cast<std::size_t>(std::llround(value * static_cast<double>(eligible)));
        case Kind::all: return eligible;
    }
    return 0;
}

std::string KSpec::label(std::size_t eligible, TargetKind target) const {
    if (kind == Kind::all) return "All";
    const auto k = resolve(eligible);
    if (k == 0) return "None";
    return "Top" + std::to_string(k) + "_" + rank_suffix(target);
}

ExperimentContext::ExperimentContext(const data::Population& population, const topo::TopologySeries& topology,
                                     engine::SimConfig config)
    : population_(population), topology_(topology), config_(std::move(config)),
      net_stats_(topo::node_net_stats(topology)) {}

const engine::ExperimentReport& ExperimentContext::dfl_baseline() {
    std::call_once(dfl_->once, [this] {
        if (dfl_->report) return;
        auto cfg = config_;
        cfg.mode = engine::Mode::dfl;
        dfl_->report = engine::run_experiment(population_, topology_, cfg);
        std::lock_guard lock(count_mutex_);
        ++runs_;
    });
    return *dfl_->report;
}

const engine::ExperimentReport& ExperimentContext::local_baseline() {
    std::call_once(local_->once, [this] {
        if (local_->report) return;
        auto cfg = config_;
        cfg.mode = engine::Mode::local_only;
        local_->report = engine::run_experiment(population_, topology_, cfg);
        std::lock_guard lock(count_mutex_);
        ++runs_;
    });
    return *local_->report;
}

bool ExperimentContext::has_dfl_baseline() const { return dfl_->report.has_value(); }
bool ExperimentContext::has_local_baseline() const { return local_->report.has_value(); }

void ExperimentContext::provide_baselines(std::optional<engine::ExperimentReport> dfl,
                                          std::optional<engine::ExperimentReport> local) {
    if (dfl) dfl_->report = std::move(dfl);
    if (local) local_->report = std::move(local);
}

std::size_t ExperimentContext::baseline_runs() const {
    std::lock_guard lock(count_mutex_);
    return runs_;
}

std::vector<NodeId> ExperimentContext::data_nodes() const {
    std::vector<NodeId> ids;
    for (const auto& n : population_.nodes) ids.push_back(n.node_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

RankingInputs ExperimentContext::ranking_inputs_for(const std::optional<TargetingStrategy>& jam,
                                                    const std::optional<TargetingStrategy>& poison) {
    RankingInputs in;
    in.data_nodes = data_nodes();
    in.node_count = topology_.node_count;
    in.net_stats = net_stats_;
    auto needs = [&](TargetKind kind) {
        return (jam && jam->kind == kind) || (poison && poison->kind == kind);
    };
    if (needs(TargetKind::dfl_rank)) in.dfl_accuracy = dfl_baseline().accuracies();
    if (needs(TargetKind::local_rank)) in.local_accuracy = local_baseline().accuracies();
    return in;
}

AttackPlan ExperimentContext::plan(const std::optional<TargetingStrategy>& jam,
                                   const std::optional<TargetingStrategy>& poison, double p_a) {
    return build_plan(jam, poison, p_a, ranking_inputs_for(jam, poison));
}

engine::ExperimentReport ExperimentContext::run(const AttackPlan& plan, engine::SimConfig config) const {
    return engine::run_experiment(population_, topology_, config, plan);
}

const char* to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::jamming: return "jamming";
        case SweepKind::poisoning: return "poisoning";
        case SweepKind::joint: return "joint";
        case SweepKind::network: return "network";
    }
    return "?";
}

SweepKind parse_sweep_kind(const std::string& name) {
    for (auto k : {SweepKind::jamming, SweepKind::poisoning, SweepKind::joint, SweepKind::network})
        if (name == to_string(k)) return k;
    throw ConfigError("unknown sweep kind '" + name + "'");
}

const char* to_string(CellVariant variant) {
    switch (variant) {
        case CellVariant::jam: return "jam";
        case CellVariant::poison: return "poison";
        case CellVariant::joint: return "joint";
    }
    return "?";
}

void SweepSpec::validate() const {
    auto check_p = [this] {
        if (p_a.empty()) throw ConfigError(std::string(to_string(kind)) + " sweep needs at least one p_a value");
        for (double p : p_a)
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep p_a values must lie in [0, 1]");
    };
    auto check_k = [](const std::vector<KSpec>& ks, const char* what) {
        if (ks.empty()) throw ConfigError(std::string("sweep needs at least one ") + what + " K value");
        for (const auto& k : ks) {
            if (k.kind == KSpec::Kind::fraction && !(k.value >= 0.0 && k.value <= 1.0))
                throw ConfigError("fractional K values must lie in [0, 1]");
            if (k.kind == KSpec::Kind::absolute && (k.value < 0 || k.value != std::floor(k.value)))
                throw ConfigError("absolute K values must be non-negative integers");
        }
    };
    switch (kind) {
        case SweepKind::jamming: check_k(jam_k, "jam"); break;
        case SweepKind::poisoning:
            check_k(poison_k, "poison");
            check_p();
            break;
        case SweepKind::joint:
            check_k(jam_k, "jam");
            check_k(poison_k, "poison");
            check_p();
            break;
        case SweepKind::network:
            check_k(network_k, "network");
            check_p();
            if (network_kind == TargetKind::explicit_list || network_kind == TargetKind::all)
                throw ConfigError("network sweep strategy must be a ranked or random strategy");
            break;
    }
    if (workers == 0) throw ConfigError("sweep workers must be at least 1");
}

SweepSpec SweepSpec::jamming_grid() {
    SweepSpec s;
    s.kind = SweepKind::jamming;
    for (std::size_t k = 10; k <= 90; k += 10) s.jam_k.push_back(KSpec::absolute(k));
    s.jam_k.push_back(KSpec::everything());
    return s;
}

SweepSpec SweepSpec::poisoning_grid() {
    SweepSpec s;
    s.kind = SweepKind::poisoning;
    s.poison_k = {KSpec::absolute(25), KSpec::absolute(47), KSpec::absolute(70)};
    s.p_a = {0.25, 0.5, 0.75, 1.0};
    return s;
}

SweepSpec SweepSpec::joint_grid() {
    SweepSpec s;
    s.kind = SweepKind::joint;
    s.jam_k = {KSpec::absolute(0), KSpec::absolute(25), KSpec::absolute(47), KSpec::absolute(70)};
    s.poison_k = {KSpec::absolute(25), KSpec::absolute(47), KSpec::absolute(70)};
    s.p_a = {0.5, 1.0};
    return s;
}

SweepSpec SweepSpec::network_grid(TargetKind kind) {
    SweepSpec s;
    s.kind = SweepKind::network;
    s.network_kind = kind;
    s.network_k = {KSpec::absolute(25), KSpec::absolute(47), KSpec::absolute(70)};
    s.p_a = {0.5, 1.0};
    return s;
}

namespace {

std::optional<TargetingStrategy> strategy_for(TargetKind kind, const KSpec& k, std::size_t eligible,
                                              std::uint64_t seed) {
    if (k.kind == KSpec::Kind::all) return TargetingStrategy{TargetKind::all, eligible, {}, seed};
    const auto count = k.resolve(eligible);
    if (count == 0) return std::nullopt;
    return TargetingStrategy{kind, count, {}, seed};
}

}  // namespace

SweepResult attack_sweep(ExperimentContext& context, const SweepSpec& spec) {
    spec.validate();
    SweepResult result;
    result.spec = spec;
    result.eligible = context.data_nodes().size();
    const auto eligible = result.eligible;
    const auto seed = derive_seed(spec.random_seed, {stream::targeting});

    struct Pending {
        SweepCell cell;
        std::optional<TargetingStrategy> jam, poison;
    };
    std::vector<Pending> pending;
    auto add = [&](CellVariant v, std::optional<KSpec> jk, TargetKind jkind, std::optional<KSpec> pk,
                   TargetKind pkind, double p) {
        Pending item;
        item.cell.variant = v;
        item.cell.jam_k = jk;
        item.cell.poison_k = pk;
        item.cell.p_a = p;
        if (jk) item.jam = strategy_for(jkind, *jk, eligible, seed);
        if (pk) item.poison = strategy_for(pkind, *pk, eligible, seed);
        pending.push_back(std::move(item));
    };

    switch (spec.kind) {
        case SweepKind::jamming:
            for (const auto& k : spec.jam_k) add(CellVariant::jam, k, spec.jam_kind, std::nullopt, spec.poison_kind, 0.0);
            break;
        case SweepKind::poisoning:
            for (const auto& k : spec.poison_k)
                for (double p : spec.p_a) add(CellVariant::poison, std::nullopt, spec.jam_kind, k, spec.poison_kind, p);
            break;
        case SweepKind::joint:
            for (const auto& pk : spec.poison_k)
                for (const auto& jk : spec.jam_k)
                    for (double p : spec.p_a) add(CellVariant::joint, jk, spec.jam_kind, pk, spec.poison_kind, p);
            break;
        case SweepKind::network:
            for (const auto& k : spec.network_k) {
                add(CellVariant::jam, k, spec.network_kind, std::nullopt, spec.network_kind, 0.0);
                for (double p : spec.p_a) {
                    add(CellVariant::poison, std::nullopt, spec.network_kind, k, spec.network_kind, p);
                    add(CellVariant::joint, k, spec.network_kind, k, spec.network_kind, p);
                }
            }
            break;
    }

    // Plans are resolved up front so every baseline is computed exactly once, before fan-out.
    std::vector<AttackPlan> plans;
    for (const auto& item : pending) plans.push_back(context.plan(item.jam, item.poison, item.cell.p_a));

    engine::SimConfig cell_config = context.config();
    cell_config.workers = std::max<std::size_t>(1, cell_config.workers / spec.workers);
    parallel_for(pending.size(), spec.workers,
                 [&](std::size_t i) { pending[i].cell.report = context.run(plans[i], cell_config); });

    for (auto& item : pending) {
        result.cells.push_back(std::move(item.cell));
    }
    return result;
}

}  // namespace dflsim::attacks
