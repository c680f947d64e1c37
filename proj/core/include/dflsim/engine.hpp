#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dflsim/analysis.hpp"
#include "dflsim/attack_plan.hpp"
#include "dflsim/dataset.hpp"
#include "dflsim/nn.hpp"
#include "dflsim/topology.hpp"

namespace dflsim::engine {

enum class Mode { local_only, dfl };
enum class Weighting { uniform, data_size };

struct SimConfig {
    std::size_t rounds = 0;  // 0 means one round per topology snapshot
    nn::ModelArch arch = nn::ModelArch::large();
    nn::TrainConfig train;   // train.seed is ignored; per-node seeds derive from master_seed
    Weighting weighting = Weighting::uniform;
    Mode mode = Mode::dfl;
    std::uint64_t master_seed = 0;
    bool relays = true;       // data-less nodes aggregate and forward
    bool shared_init = true;  // every node starts from the same parameters
    std::map<NodeId, std::uint64_t> init_seed_overrides;
    bool record_traces = false;
    std::size_t workers = 1;

    void validate() const;
    std::size_t effective_rounds(const topo::TopologySeries& topology) const;
};

struct NodeState {
    NodeId node_id = 0;
    nn::ModelParams params;
    const data::NodeDataset* dataset = nullptr;  // null for data-less nodes
    bool jammed = false;
    bool poisoned = false;
    bool has_data = false;
    bool participates = true;  // false for data-less nodes when relays are off
};

struct NodeRoundTrace {
    NodeId node_id = 0;
    std::vector<NodeId> received_from;
    std::optional<double> train_loss;
    std::optional<double> val_accuracy_pre;   // after aggregation, before training
    std::optional<double> val_accuracy_post;  // after training
};

struct RoundTrace {
    std::size_t round = 0;
    std::int64_t time_index = 0;
    std::vector<NodeRoundTrace> nodes;
};

struct NodeResult {
    NodeId node_id = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double accuracy = 0.0;
    bool jammed = false;
    bool poisoned = false;
};

struct ExperimentReport {
    SimConfig config;
    attacks::AttackPlan plan;
    std::vector<NodeResult> nodes;  // data nodes, ascending id
    analysis::AccuracyStats stats;
    std::vector<RoundTrace> traces;

    analysis::NodeValues accuracies() const;
    std::vector<double> accuracy_values() const;
};

enum class Phase { poisoning, initial_training, rounds, evaluation };

// Observation hooks for tests and progress reporting. Callbacks may arrive from worker threads.
class RunObserver {
public:
    virtual ~RunObserver() = default;
    virtual void on_phase(Phase) {}
    virtual void on_round(std::size_t /*round*/) {}
    virtual void on_test_split_read(NodeId) {}
};

// Synchronous exchange: every receiver sees the senders' parameters from before the call.
// Node i receives from j when edge j->i exists, both participate, and i is not jammed.
// Returns, per node, the ids it received from.
std::vector<std::vector<NodeId>> exchange_and_aggregate(std::vector<NodeState>& states,
                                                        const topo::Snapshot& snapshot, Weighting weighting,
                                                        std::size_t workers = 1);

ExperimentReport run_experiment(const data::Population& population, const topo::TopologySeries& topology,
                                const SimConfig& config, const attacks::AttackPlan& plan = {},
                                RunObserver* observer = nullptr);

const char* to_string(Mode mode);
const char* to_string(Weighting weighting);

}  // namespace dflsim::engine
