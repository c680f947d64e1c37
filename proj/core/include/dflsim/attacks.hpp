#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dflsim/analysis.hpp"
#include "dflsim/attack_plan.hpp"
#include "dflsim/engine.hpp"
#include "dflsim/topology.hpp"

namespace dflsim::attacks {

struct TargetingStrategy {
    TargetKind kind = TargetKind::explicit_list;
    std::size_t k = 0;
    std::vector<NodeId> ids;  // explicit_list only
    std::uint64_t seed = 0;   // random only
};

// Score vectors the ranked strategies draw from. Missing entries mean the
// corresponding baseline has not been computed.
struct RankingInputs {
    std::vector<NodeId> data_nodes;  // eligible for ranked, random and poison selection
    std::size_t node_count = 0;      // `all` jamming covers every node
    std::optional<analysis::NodeValues> dfl_accuracy;
    std::optional<analysis::NodeValues> local_accuracy;
    std::optional<std::vector<topo::NodeNetStats>> net_stats;  // indexed by node id
};

// Top k by descending score; equal scores go to the lower node id.
std::vector<NodeId> select_top_k(const analysis::NodeValues& scores, std::size_t k);

std::vector<NodeId> select_targets(const TargetingStrategy& strategy, const RankingInputs& inputs);

AttackPlan build_plan(const std::optional<TargetingStrategy>& jam, const std::optional<TargetingStrategy>& poison,
                      double p_a, const RankingInputs& inputs);

// K given as an absolute count, a fraction of the eligible nodes, or "all".
struct KSpec {
    enum class Kind { absolute, fraction, all };
    Kind kind = Kind::absolute;
    double value = 0.0;

    static KSpec absolute(std::size_t k) { return {Kind::absolute, static_cast<double>(k)}; }
    static KSpec fraction(double f) { return {Kind::fraction, f}; }
    static KSpec everything() { return {Kind::all, 0.0}; }

    std::size_t resolve(std::size_t eligible) const;
    std::string label(std::size_t eligible, TargetKind kind) const;
};

// Owns the inputs of one experiment family and computes the clean DFL and local-only
// baselines at most once each, however many threads ask for them.
class ExperimentContext {
public:
    ExperimentContext(const data::Population& population, const topo::TopologySeries& topology,
                      engine::SimConfig config);

    const data::Population& population() const { return population_; }
    const topo::TopologySeries& topology() const { return topology_; }
    const engine::SimConfig& config() const { return config_; }

    const engine::ExperimentReport& dfl_baseline();
    const engine::ExperimentReport& local_baseline();
    bool has_dfl_baseline() const;
    bool has_local_baseline() const;
    // Installs baselines loaded from a cache; must happen before the first request.
    void provide_baselines(std::optional<engine::ExperimentReport> dfl, std::optional<engine::ExperimentReport> local);
    std::size_t baseline_runs() const;

    const std::vector<topo::NodeNetStats>& net_stats() const { return net_stats_; }
    std::vector<NodeId> data_nodes() const;

    // Ranking inputs with exactly the baselines the given strategies need.
    RankingInputs ranking_inputs_for(const std::optional<TargetingStrategy>& jam,
                                     const std::optional<TargetingStrategy>& poison);
    AttackPlan plan(const std::optional<TargetingStrategy>& jam, const std::optional<TargetingStrategy>& poison,
                    double p_a);

    engine::ExperimentReport run(const AttackPlan& plan, engine::SimConfig config) const;
    engine::ExperimentReport run(const AttackPlan& plan) const { return run(plan, config_); }

private:
    struct Slot {
        std::once_flag once;
        std::optional<engine::ExperimentReport> report;
    };

    const data::Population& population_;
    const topo::TopologySeries& topology_;
    engine::SimConfig config_;
    std::vector<topo::NodeNetStats> net_stats_;
    std::unique_ptr<Slot> dfl_ = std::make_unique<Slot>();
    std::unique_ptr<Slot> local_ = std::make_unique<Slot>();
    mutable std::mutex count_mutex_;
    std::size_t runs_ = 0;
};

enum class SweepKind { jamming, poisoning, joint, network };

const char* to_string(SweepKind kind);
SweepKind parse_sweep_kind(const std::string& name);

struct SweepSpec {
    SweepKind kind = SweepKind::jamming;
    TargetKind jam_kind = TargetKind::dfl_rank;
    std::vector<KSpec> jam_k;
    TargetKind poison_kind = TargetKind::local_rank;
    std::vector<KSpec> poison_k;
    TargetKind network_kind = TargetKind::degree;  // network sweeps use it for both roles
    std::vector<KSpec> network_k;
    std::vector<double> p_a;
    std::uint64_t random_seed = 0;
    std::size_t workers = 1;

    void validate() const;
    static SweepSpec jamming_grid();    // K = 10..90 step 10 plus all
    static SweepSpec poisoning_grid();  // K in {25, 47, 70}, p_a in {0.25, 0.5, 0.75, 1}
    static SweepSpec joint_grid();      // K_J in {0, 25, 47, 70}, K_P in {25, 47, 70}, p_a in {0.5, 1}
    static SweepSpec network_grid(TargetKind kind);  // K in {25, 47, 70}, p_a in {0.5, 1}
};

enum class CellVariant { jam, poison, joint };

struct SweepCell {
    CellVariant variant = CellVariant::jam;
    std::optional<KSpec> jam_k;
    std::optional<KSpec> poison_k;
    double p_a = 0.0;
    engine::ExperimentReport report;
};

struct SweepResult {
    SweepSpec spec;
    std::size_t eligible = 0;
    std::vector<SweepCell> cells;
};

// One report per grid cell, all sharing the context's baselines and seeds.
SweepResult attack_sweep(ExperimentContext& context, const SweepSpec& spec);

const char* to_string(CellVariant variant);

}  // namespace dflsim::attacks
