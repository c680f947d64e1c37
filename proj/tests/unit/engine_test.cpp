#include <doctest.h>

#include <algorithm>
#include <mutex>

#include "dflsim/engine.hpp"
#include "dflsim/error.hpp"
#include "dflsim/report.hpp"
#include "helpers.hpp"

using namespace dflsim;
using namespace dflsim::engine;

namespace {

SimConfig small_config(std::uint64_t seed = 1) {
    SimConfig c;
    c.arch = nn::ModelArch::small();
    c.master_seed = seed;
    c.train.learning_rate = 0.05;
    return c;
}

std::vector<NodeState> states_from(std::vector<nn::ModelParams> params) {
    std::vector<NodeState> s(params.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i].node_id = static_cast<NodeId>(i);
        s[i].params = std::move(params[i]);
    }
    return s;
}

double max_abs_diff(const nn::ModelParams& a, const nn::ModelParams& b) {
    double d = 0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        d = std::max(d, (a.layers[l].weights - b.layers[l].weights).cwiseAbs().maxCoeff());
        d = std::max(d, (a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff());
    }
    return d;
}

std::string results_text(const ExperimentReport& r) { return io::dump(io::results_to_json(r)); }

class PhaseRecorder : public RunObserver {
public:
    void on_phase(Phase p) override {
        std::lock_guard lock(mutex_);
        phase_ = p;
    }
    void on_test_split_read(NodeId id) override {
        std::lock_guard lock(mutex_);
        reads_.push_back({phase_, id});
    }
    std::vector<std::pair<Phase, NodeId>> reads() const { return reads_; }

private:
    std::mutex mutex_;
    Phase phase_ = Phase::poisoning;
    std::vector<std::pair<Phase, NodeId>> reads_;
};

}  // namespace

TEST_SUITE("engine") {
    TEST_CASE("exchange: node with no in-edges keeps its parameters") {
        const auto arch = nn::ModelArch::small();
        auto states = states_from({nn::init_params(arch, 1), nn::init_params(arch, 2), nn::init_params(arch, 3)});
        const auto before = states;
        const auto got = exchange_and_aggregate(states, {0, {{0, 1}}}, Weighting::uniform);
        CHECK(got[0].empty());
        CHECK(got[1] == std::vector<NodeId>{0});
        CHECK(states[0].params == before[0].params);
        CHECK(states[2].params == before[2].params);
        CHECK_FALSE(states[1].params == before[1].params);
    }

    TEST_CASE("exchange: star center becomes the mean of all k+1 models") {
        const auto arch = nn::ModelArch::small();
        std::vector<nn::ModelParams> params;
        for (std::uint64_t i = 0; i < 5; ++i) params.push_back(nn::init_params(arch, 10 + i));
        auto states = states_from(params);
        std::vector<topo::Edge> edges;
        for (NodeId leaf = 1; leaf < 5; ++leaf) edges.push_back({leaf, 0});
        exchange_and_aggregate(states, {0, edges}, Weighting::uniform);
        for (std::size_t l = 0; l < params[0].layers.size(); ++l) {
            Matrix mean = Matrix::Zero(params[0].layers[l].weights.rows(), params[0].layers[l].weights.cols());
            for (const auto& p : params) mean += p.layers[l].weights;
            mean /= 5.0;
            CHECK((states[0].params.layers[l].weights - mean).cwiseAbs().maxCoeff() < 1e-15);
        }
        for (std::size_t i = 1; i < 5; ++i) CHECK(states[i].params == params[i]);
    }

    TEST_CASE("exchange: synchronous semantics use pre-round parameters") {
        const auto arch = nn::ModelArch::small();
        const auto a = nn::init_params(arch, 1), b = nn::init_params(arch, 2);
        auto states = states_from({a, b});
        exchange_and_aggregate(states, {0, {{0, 1}, {1, 0}}}, Weighting::uniform);
        // Both end at the same average, which is only true if neither saw the other's update.
        CHECK(states[0].params == states[1].params);
        const nn::ModelParams* both[] = {&b};
        CHECK(states[0].params == nn::federated_average(a, std::span<const nn::ModelParams* const>(both)));
    }

    TEST_CASE("exchange: jammed nodes receive nothing but still send") {
        const auto arch = nn::ModelArch::small();
        auto states = states_from({nn::init_params(arch, 1), nn::init_params(arch, 2)});
        states[0].jammed = true;
        const auto before = states;
        const auto got = exchange_and_aggregate(states, {0, {{0, 1}, {1, 0}}}, Weighting::uniform);
        CHECK(got[0].empty());
        CHECK(states[0].params == before[0].params);
        CHECK_FALSE(states[1].params == before[1].params);

        for (auto& s : states) s.jammed = true;
        const auto frozen = states;
        exchange_and_aggregate(states, {0, {{0, 1}, {1, 0}}}, Weighting::uniform);
        for (std::size_t i = 0; i < 2; ++i) CHECK(states[i].params == frozen[i].params);
    }

    TEST_CASE("exchange: information crosses a line one hop per round") {
        const auto arch = nn::ModelArch::small();
        const auto common = nn::init_params(arch, 7);
        auto states = states_from({nn::init_params(arch, 99), common, common});
        const topo::Snapshot line{0, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}};
        exchange_and_aggregate(states, line, Weighting::uniform);
        CHECK(states[2].params == common);
        CHECK(max_abs_diff(states[1].params, common) > 1e-6);
        exchange_and_aggregate(states, line, Weighting::uniform);
        CHECK(max_abs_diff(states[2].params, common) > 1e-6);
    }

    TEST_CASE("exchange: data-size weighting") {
        const auto arch = nn::ModelArch::small();
        auto pop = testing::toy_population(2, 0, 3, 30);
        pop.nodes[1].train = testing::blobs(10, data::kFeatureCount, 5);
        const auto a = nn::init_params(arch, 1), b = nn::init_params(arch, 2);
        auto states = states_from({a, b});
        for (std::size_t i = 0; i < 2; ++i) {
            states[i].dataset = &pop.nodes[i];
            states[i].has_data = true;
        }
        exchange_and_aggregate(states, {0, {{1, 0}}}, Weighting::data_size);
        const Matrix expected = (30.0 * a.layers[0].weights + 10.0 * b.layers[0].weights) / 40.0;
        CHECK((states[0].params.layers[0].weights - expected).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("edgeless topology reproduces local-only training exactly") {
        const auto pop = testing::toy_population(4, 0, 2);
        const auto topo = testing::series(4, {{}, {}, {}});
        auto cfg = small_config();
        const auto dfl = run_experiment(pop, topo, cfg);
        cfg.mode = Mode::local_only;
        const auto local = run_experiment(pop, topo, cfg);
        CHECK(results_text(dfl) == results_text(local));
    }

    TEST_CASE("jamming every node reproduces local-only training exactly") {
        const auto pop = testing::toy_population(4, 1, 3);
        const auto topo = testing::static_undirected(5, 3, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
        auto cfg = small_config();
        cfg.record_traces = true;
        attacks::AttackPlan plan;
        for (NodeId i = 0; i < 5; ++i) plan.jam_targets.push_back(i);
        const auto jammed = run_experiment(pop, topo, cfg, plan);
        for (const auto& round : jammed.traces)
            for (const auto& node : round.nodes) CHECK(node.received_from.empty());
        const auto clean = run_experiment(pop, topo, cfg);
        CHECK(clean.traces[0].nodes[0].received_from == std::vector<NodeId>{1, 4});
        cfg.mode = Mode::local_only;
        const auto local = run_experiment(pop, topo, cfg);
        CHECK(results_text(jammed) == results_text(local));
    }

    TEST_CASE("two nodes with identical data stay identical") {
        auto pop = testing::toy_population(2, 0, 4);
        pop.nodes[1].train = pop.nodes[0].train;
        pop.nodes[1].test = pop.nodes[0].test;
        auto cfg = small_config();
        cfg.train.batch_size = 1000;  // full batch, so row order cannot matter
        const auto r = run_experiment(pop, testing::static_undirected(2, 4, {{0, 1}}), cfg);
        CHECK(r.nodes[0].accuracy == r.nodes[1].accuracy);
    }

    TEST_CASE("node order in the population does not change the outcome") {
        const auto pop = testing::toy_population(5, 1, 6);
        auto shuffled = pop;
        std::reverse(shuffled.nodes.begin(), shuffled.nodes.end());
        const auto topo = testing::static_undirected(6, 3, {{0, 1}, {1, 5}, {5, 2}, {3, 4}});
        const auto a = run_experiment(pop, topo, small_config());
        const auto b = run_experiment(shuffled, topo, small_config());
        CHECK(results_text(a) == results_text(b));
    }

    TEST_CASE("runs are deterministic and worker-count independent") {
        const auto pop = testing::toy_population(6, 1, 8);
        const auto topo = testing::static_undirected(7, 4, {{0, 1}, {1, 2}, {2, 6}, {6, 3}, {4, 5}});
        auto cfg = small_config(21);
        const auto a = run_experiment(pop, topo, cfg);
        CHECK(results_text(a) == results_text(run_experiment(pop, topo, cfg)));
        cfg.workers = 3;
        CHECK(results_text(a) == results_text(run_experiment(pop, topo, cfg)));
        cfg.workers = 1;
        cfg.master_seed = 22;
        CHECK_FALSE(results_text(a) == results_text(run_experiment(pop, topo, cfg)));
    }

    TEST_CASE("test splits are read only during evaluation") {
        const auto pop = testing::toy_population(4, 1, 9);
        const auto topo = testing::static_undirected(5, 3, {{0, 1}, {1, 4}, {4, 2}});
        auto cfg = small_config();
        cfg.record_traces = true;
        cfg.workers = 2;
        attacks::AttackPlan plan;
        plan.poison_targets = {1};
        plan.p_a = 1.0;
        PhaseRecorder rec;
        const auto r = run_experiment(pop, topo, cfg, plan, &rec);
        const auto reads = rec.reads();
        CHECK(reads.size() == 4);
        for (const auto& [phase, id] : reads) CHECK(phase == Phase::evaluation);
        CHECK(r.traces.size() == 3);
    }

    TEST_CASE("poisoning with p_a = 0 changes nothing") {
        const auto pop = testing::toy_population(4, 0, 10);
        const auto topo = testing::static_undirected(4, 3, {{0, 1}, {1, 2}, {2, 3}});
        attacks::AttackPlan plan;
        plan.poison_targets = {0, 1, 2, 3};
        plan.p_a = 0.0;
        CHECK(results_text(run_experiment(pop, topo, small_config(), plan)) ==
              results_text(run_experiment(pop, topo, small_config())));
    }

    TEST_CASE("report covers data nodes only and flags targets") {
        const auto pop = testing::toy_population(3, 2, 11);
        const auto topo = testing::static_undirected(5, 2, {{0, 3}, {3, 1}, {1, 4}, {4, 2}});
        attacks::AttackPlan plan;
        plan.jam_targets = {3, 1};
        plan.poison_targets = {2};
        plan.p_a = 0.5;
        const auto r = run_experiment(pop, topo, small_config(), plan);
        REQUIRE(r.nodes.size() == 3);
        CHECK(r.nodes[1].jammed);
        CHECK_FALSE(r.nodes[0].jammed);
        CHECK(r.nodes[2].poisoned);
        CHECK(r.nodes[0].train_size == 24);
        CHECK(r.nodes[0].test_size == 12);
    }

    TEST_CASE("mismatched inputs are rejected") {
        const auto pop = testing::toy_population(3, 0, 12);
        CHECK_THROWS_AS(run_experiment(pop, testing::series(4, {{}}), small_config()), ConfigError);
        CHECK_THROWS_AS(run_experiment(pop, testing::series(3, {}), small_config()), ConfigError);
        attacks::AttackPlan plan;
        plan.jam_targets = {7};
        CHECK_THROWS_AS(run_experiment(pop, testing::series(3, {{}}), small_config(), plan), ConfigError);
        plan = {};
        plan.p_a = 1.5;
        CHECK_THROWS_AS(run_experiment(pop, testing::series(3, {{}}), small_config(), plan), ConfigError);
    }
}
