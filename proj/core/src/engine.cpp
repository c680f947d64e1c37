#include "dflsim/engine.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "dflsim/error.hpp"
#include "dflsim/parallel.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::engine {

const char* to_string(Mode mode) { return mode == Mode::dfl ? "dfl" : "local-only"; }
const char* to_string(Weighting weighting) { return weighting == Weighting::uniform ? "uniform" : "data-size"; }

void SimConfig::validate() const {
    arch.validate();
    train.validate();
}

std::size_t SimConfig::effective_rounds(const topo::TopologySeries& topology) const {
    return rounds ? rounds : topology.snapshots.size();
}

analysis::NodeValues ExperimentReport::accuracies() const {
    analysis::NodeValues v;
    for (const auto& n : nodes) {
        v.ids.push_back(n.node_id);
        v.values.push_back(n.accuracy);
    }
    return v;
}

std::vector<double> ExperimentReport::accuracy_values() const { return accuracies().values; }

namespace {

// Data-less relays count as a single sample under data-size weighting.
double aggregation_weight(const NodeState& s, Weighting w) {
    if (w == Weighting::uniform) return 1.0;
    return s.has_data ? static_cast<double>(s.dataset->train.size()) : 1.0;
}

}  // namespace

std::vector<std::vector<NodeId>> exchange_and_aggregate(std::vector<NodeState>& states,
                                                        const topo::Snapshot& snapshot, Weighting weighting,
                                                        std::size_t workers) {
    const std::size_t n = states.size();
    std::vector<std::vector<NodeId>> incoming(n);
    for (const auto& e : snapshot.edges) {
        if (e.src >= n || e.dst >= n) throw ConfigError("snapshot edge outside the node range");
        const auto& sender = states[e.src];
        const auto& receiver = states[e.dst];
        if (receiver.jammed || !receiver.participates || !sender.participates) continue;
        incoming[e.dst].push_back(e.src);
    }

    // Aggregation reads only the pre-round parameters.
    std::vector<nn::ModelParams> updated(n);
    parallel_for(n, workers, [&](std::size_t i) {
        auto& from = incoming[i];
        std::sort(from.begin(), from.end());
        if (from.empty()) return;
        std::vector<const nn::ModelParams*> received;
        std::vector<double> weights;
        const bool weighted = weighting != Weighting::uniform;
        if (weighted) weights.push_back(aggregation_weight(states[i], weighting));
        for (auto j : from) {
            received.push_back(&states[j].params);
            if (weighted) weights.push_back(aggregation_weight(states[j], weighting));
        }
        updated[i] = nn::federated_average(states[i].params, received, weights);
    });
    for (std::size_t i = 0; i < n; ++i)
        if (!incoming[i].empty()) states[i].params = std::move(updated[i]);
    return incoming;
}

namespace {

void validate_inputs(const data::Population& population, const topo::TopologySeries& topology,
                     const SimConfig& config, const attacks::AttackPlan& plan) {
    config.validate();
    population.validate(config.arch.input_dim);
    topology.validate();
    if (topology.snapshots.empty()) throw ConfigError("topology has no snapshots");
    if (population.node_count() != topology.node_count)
        throw ConfigError("population has " + std::to_string(population.node_count()) +
                          " nodes but topology has " + std::to_string(topology.node_count));
    std::set<NodeId> ids;
    for (const auto& node : population.nodes) {
        ids.insert(node.node_id);
        if (node.train.empty()) throw ConfigError("node " + std::to_string(node.node_id) + " has no training rows");
        if (node.test.empty()) throw ConfigError("node " + std::to_string(node.node_id) + " has no test rows");
    }
    ids.insert(population.dataless_node_ids.begin(), population.dataless_node_ids.end());
    if (ids.size() != topology.node_count || *ids.rbegin() != topology.node_count - 1)
        throw ConfigError("population node ids must be exactly 0..N-1 for the topology's N nodes");

    if (!(plan.p_a >= 0.0 && plan.p_a <= 1.0)) throw ConfigError("p_a must lie in [0, 1]");
    for (auto id : plan.jam_targets)
        if (id >= topology.node_count) throw ConfigError("jam target " + std::to_string(id) + " is not a node");
    for (auto id : plan.poison_targets)
        if (!population.find(id))
            throw ConfigError("poison target " + std::to_string(id) + " has no data to poison");
}

nn::TrainConfig round_config(const SimConfig& config, NodeId id, std::size_t round) {
    nn::TrainConfig cfg = config.train;
    cfg.seed = derive_seed(config.master_seed, {stream::train, id, round});
    return cfg;
}

}  // namespace

ExperimentReport run_experiment(const data::Population& population, const topo::TopologySeries& topology,
                                const SimConfig& config, const attacks::AttackPlan& plan, RunObserver* observer) {
    validate_inputs(population, topology, config, plan);
    RunObserver null_observer;
    RunObserver& obs = observer ? *observer : null_observer;

    const std::size_t n = topology.node_count;
    const std::set<NodeId> jam(plan.jam_targets.begin(), plan.jam_targets.end());
    const std::set<NodeId> poison(plan.poison_targets.begin(), plan.poison_targets.end());

    const std::uint64_t shared_seed = derive_seed(config.master_seed, {stream::init});
    const nn::ModelParams shared_init = nn::init_params(config.arch, shared_seed);

    std::vector<NodeState> states(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = states[i];
        s.node_id = static_cast<NodeId>(i);
        s.dataset = population.find(s.node_id);
        s.has_data = s.dataset != nullptr;
        s.participates = s.has_data || config.relays;
        s.jammed = jam.contains(s.node_id);
        s.poisoned = poison.contains(s.node_id);
        if (auto it = config.init_seed_overrides.find(s.node_id); it != config.init_seed_overrides.end())
            s.params = nn::init_params(config.arch, it->second);
        else if (config.shared_init)
            s.params = shared_init;
        else
            s.params = nn::init_params(config.arch, derive_seed(config.master_seed, {stream::init, i}));
    }

    // Training splits; poisoned nodes get a relabeled private copy.
    obs.on_phase(Phase::poisoning);
    std::vector<LabeledRows> poisoned_rows(n);
    std::vector<const LabeledRows*> train_of(n, nullptr);
    for (auto& s : states) {
        if (!s.has_data) continue;
        train_of[s.node_id] = &s.dataset->train;
        if (s.poisoned) {
            poisoned_rows[s.node_id] = s.dataset->train;
            data::flip_labels(poisoned_rows[s.node_id].labels, plan.p_a,
                              derive_seed(config.master_seed, {stream::poison, s.node_id}));
            train_of[s.node_id] = &poisoned_rows[s.node_id];
        }
    }

    std::vector<std::size_t> data_nodes;
    for (const auto& s : states)
        if (s.has_data) data_nodes.push_back(s.node_id);

    std::vector<double> last_loss(n, 0.0);
    auto train_all = [&](std::size_t round) {
        parallel_for(data_nodes.size(), config.workers, [&](std::size_t k) {
            auto& s = states[data_nodes[k]];
            const auto stats = nn::train_local(s.params, *train_of[s.node_id], round_config(config, s.node_id, round));
            last_loss[s.node_id] =
                std::accumulate(stats.epoch_losses.begin(), stats.epoch_losses.end(), 0.0) / stats.epoch_losses.size();
        });
    };

    obs.on_phase(Phase::initial_training);
    train_all(0);

    ExperimentReport report;
    report.config = config;
    report.plan = plan;

    obs.on_phase(Phase::rounds);
    const std::size_t rounds = config.effective_rounds(topology);
    for (std::size_t r = 0; r < rounds; ++r) {
        obs.on_round(r);
        const auto& snapshot = topology.snapshot_for_round(r);
        std::vector<std::vector<NodeId>> received(n);
        if (config.mode == Mode::dfl) received = exchange_and_aggregate(states, snapshot, config.weighting, config.workers);

        RoundTrace trace;
        if (config.record_traces) {
            trace.round = r;
            trace.time_index = snapshot.time_index;
            for (const auto& s : states) {
                NodeRoundTrace t;
                t.node_id = s.node_id;
                t.received_from = received[s.node_id];
                if (s.has_data && !s.dataset->val.empty()) t.val_accuracy_pre = nn::evaluate(s.params, s.dataset->val);
                trace.nodes.push_back(std::move(t));
            }
        }

        train_all(r + 1);

        if (config.record_traces) {
            for (auto& t : trace.nodes) {
                const auto& s = states[t.node_id];
                if (!s.has_data) continue;
                t.train_loss = last_loss[s.node_id];
                if (!s.dataset->val.empty()) t.val_accuracy_post = nn::evaluate(s.params, s.dataset->val);
            }
            report.traces.push_back(std::move(trace));
        }
    }

    obs.on_phase(Phase::evaluation);
    for (auto id : data_nodes) {
        const auto& s = states[id];
        obs.on_test_split_read(s.node_id);
        report.nodes.push_back(NodeResult{s.node_id, s.dataset->train.size(), s.dataset->test.size(),
                                          nn::evaluate(s.params, s.dataset->test), s.jammed, s.poisoned});
    }
    report.stats = analysis::accuracy_stats(report.accuracy_values());
    return report;
}

}  // namespace dflsim::engine
