#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include "dflsim/experiment.hpp"
#include "helpers.hpp"

using namespace dflsim;
using namespace dflsim::experiment;
namespace fs = std::filesystem;

namespace {

const std::string kTinySpec = R"(schema_version: 1
seed: 3
output_dir: out
data:
  synthetic:
    preset: paper-replica
    node_count: 6
    dataless_count: 1
    train_size_range: [20, 60]
    train_size_mean: 35
    test_size_range: [5, 15]
topology:
  mobility:
    snapshots: 4
    radius: 0.4
sim:
  arch: small
  learning_rate: 0.05
)";

struct CliResult {
    int exit_code = -1;
    std::string output;
};

// Runs the dflsim binary with the given arguments; stdout and stderr are merged.
CliResult cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
    const auto log = scratch / "cli.log";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + std::string(DFLSIM_CLI) + "' " + args + " > '" +
                            log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_file(log)};
}

std::size_t line_of(const std::string& text) {
    try {
        parse_spec(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return SIZE_MAX;
}

std::size_t data_rows(const std::string& tsv) {
    std::istringstream in(tsv);
    std::string line;
    std::size_t rows = 0;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        ++rows;
    }
    return rows;
}

}  // namespace

TEST_SUITE("experiment") {
    TEST_CASE("spec parsing fills defaults and resolves paths") {
        const auto spec = parse_spec(kTinySpec, "/base");
        CHECK(spec.master_seed == 3);
        CHECK(spec.output_dir == fs::path("/base/out"));
        const auto& synth = std::get<SyntheticSource>(spec.data).spec;
        CHECK(synth.node_count == 6);
        CHECK(synth.clusters_per_class == 16);
        const auto& mob = std::get<MobilitySource>(spec.topology).spec;
        CHECK(mob.node_count == 7);
        CHECK(spec.sim.arch == nn::ModelArch::small());
        CHECK(spec.sim.train.learning_rate == 0.05);
        CHECK_FALSE(spec.attack);

        const auto config = resolved_config(spec);
        CHECK_FALSE(config.contains("output_dir"));
        CHECK_FALSE(config["sim"].contains("workers"));
        CHECK(config["seed"] == 3);
    }

    TEST_CASE("spec errors carry the offending line") {
        CHECK(line_of(kTinySpec + "colour: blue\n") == 19);
        std::string typo = kTinySpec;
        typo.replace(typo.find("radius"), 6, "radios");
        CHECK(line_of(typo) == 15);
        CHECK(line_of("seed: 1\n") != SIZE_MAX);
        CHECK(line_of("schema_version: 2\n") == 1);
        std::string both = kTinySpec;
        both.insert(both.find("topology:"), "  ingest:\n    path: rows.csv\n");
        CHECK(line_of(both) == 5);
        std::string bad_k = kTinySpec + "attack:\n  jam:\n    strategy: dfl_rank\n    k: 1.7\n";
        CHECK(line_of(bad_k) == 22);
        std::string bad_arch = kTinySpec;
        bad_arch.replace(bad_arch.find("arch: small"), 11, "arch: [16, 0]");
        CHECK(line_of(bad_arch) != SIZE_MAX);
        CHECK_THROWS_AS(load_spec("/nonexistent/spec.yaml"), ConfigError);
    }

    TEST_CASE("node counts must agree between data and topology") {
        std::string spec = kTinySpec;
        spec.replace(spec.find("snapshots: 4"), 12, "nodes: 9\n    snapshots: 4");
        CHECK_THROWS_AS(parse_spec(spec), ConfigError);
    }

    TEST_CASE("environment overrides") {
        auto spec = parse_spec(kTinySpec, "/base");
        ::setenv("DFLSIM_OUTPUT_DIR", "/elsewhere", 1);
        ::setenv("DFLSIM_WORKERS", "3", 1);
        apply_environment(spec);
        CHECK(spec.output_dir == fs::path("/elsewhere"));
        CHECK(spec.sim.workers == 3);
        ::setenv("DFLSIM_WORKERS", "zero", 1);
        CHECK_THROWS_AS(apply_environment(spec), ConfigError);
        ::unsetenv("DFLSIM_OUTPUT_DIR");
        ::unsetenv("DFLSIM_WORKERS");
    }

    TEST_CASE("edge-list topology with ingested data") {
        testing::TempDir dir("ingest");
        fs::copy(testing::fixture("four_rows.csv"), dir / "rows.csv");
        testing::write_file(dir / "edges.txt", "# nodes: 8\n0 0 7\n0 7 0\n1\n");
        testing::write_file(dir / "spec.yaml", "schema_version: 1\n"
                                               "data:\n  ingest:\n    path: rows.csv\n"
                                               "topology:\n  edge_list:\n    path: edges.txt\n");
        const auto spec = load_spec(dir / "spec.yaml");
        const auto pop = materialize_population(spec);
        const auto topo = materialize_topology(spec);
        CHECK(pop.nodes.size() == 2);
        CHECK(pop.nodes[1].node_id == 7);
        CHECK(topo.node_count == 8);
        CHECK(topo.snapshots.size() == 2);
    }

    TEST_CASE("ingest delimiter and split settings") {
        const std::string head = "schema_version: 1\ndata:\n  ingest:\n    path: rows.tsv\n";
        const std::string tail = "topology:\n  edge_list:\n    path: edges.txt\n";
        const auto tab = parse_spec(head + "    delimiter: '\\t'\n    split: [0.6, 0.2, 0.2]\n" + tail);
        const auto& fmt = std::get<IngestSource>(tab.data).format;
        CHECK(fmt.delimiter == '\t');
        CHECK(fmt.split.train == 0.6);
        CHECK(line_of(head + "    delimiter: ';;'\n" + tail) == 5);
        CHECK(line_of(head + "    split: [0.6, 0.6, 0.2]\n" + tail) != SIZE_MAX);
    }

    TEST_CASE("cli: validate is side-effect free") {
        testing::TempDir dir("validate");
        testing::write_file(dir / "spec.yaml", kTinySpec);
        const auto r = cli("validate '" + (dir / "spec.yaml").string() + "'", dir.path());
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("ok") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "out"));
    }

    TEST_CASE("cli: config errors exit with code 2 and name the line") {
        testing::TempDir dir("badspec");
        std::string both = kTinySpec;
        both.insert(both.find("topology:"), "  ingest:\n    path: rows.csv\n");
        testing::write_file(dir / "spec.yaml", both);
        const auto r = cli("validate '" + (dir / "spec.yaml").string() + "'", dir.path());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("line 5") != std::string::npos);
        CHECK(cli("frobnicate", dir.path()).exit_code == 2);
    }

    TEST_CASE("cli: runs are byte-reproducible and protect existing output") {
        testing::TempDir dir("run");
        testing::write_file(dir / "spec.yaml", kTinySpec + "attack:\n  jam:\n    strategy: dfl_rank\n    k: 2\n");
        const std::string spec = "'" + (dir / "spec.yaml").string() + "'";
        const auto first = cli("run -q " + spec + " -o '" + (dir / "a").string() + "'", dir.path());
        REQUIRE(first.exit_code == 0);
        REQUIRE(cli("run -q " + spec + " -o '" + (dir / "b").string() + "'", dir.path()).exit_code == 0);
        for (const char* name : {"report.json", "stats.tsv", "correlation.tsv", "histogram.tsv", "network_metrics.tsv",
                                 "node_stats.tsv", "adjacency.tsv"}) {
            CAPTURE(name);
            REQUIRE(fs::exists(dir / "a" / name));
            CHECK(testing::read_file(dir / "a" / name) == testing::read_file(dir / "b" / name));
        }
        CHECK(data_rows(testing::read_file(dir / "a" / "correlation.tsv")) == 6);

        const auto again = cli("run -q " + spec + " -o '" + (dir / "a").string() + "'", dir.path());
        CHECK(again.exit_code == 1);
        CHECK(again.output.find("exists") != std::string::npos);
        CHECK(cli("run -q --overwrite " + spec + " -o '" + (dir / "a").string() + "'", dir.path()).exit_code == 0);

        // The environment picks the output directory when -o is absent.
        const auto env = cli("run -q " + spec, dir.path(), "DFLSIM_OUTPUT_DIR='" + (dir / "c").string() + "'");
        CHECK(env.exit_code == 0);
        CHECK(testing::read_file(dir / "c" / "report.json") == testing::read_file(dir / "a" / "report.json"));
    }

    TEST_CASE("cli: poisoning sweep writes one report per cell and a table") {
        testing::TempDir dir("sweep");
        testing::write_file(dir / "spec.yaml",
                            kTinySpec + "sweep:\n  kind: poisoning\n  poison:\n    strategy: local_rank\n"
                                        "    k: [1, 2, 3]\n");
        const auto r = cli("sweep -q '" + (dir / "spec.yaml").string() + "'", dir.path());
        REQUIRE(r.exit_code == 0);
        std::size_t cells = 0;
        for (const auto& e : fs::directory_iterator(dir / "out" / "cells")) cells += e.path().extension() == ".json";
        CHECK(cells == 12);
        REQUIRE(fs::exists(dir / "out" / "sweep_poisoning.tsv"));
        // Clean row plus one per K.
        CHECK(data_rows(testing::read_file(dir / "out" / "sweep_poisoning.tsv")) == 4);
    }

    TEST_CASE("cli: netstats on an edge list") {
        testing::TempDir dir("netstats");
        const auto r = cli("netstats '" + testing::fixture("toy_edges.txt").string() + "' -o '" +
                               (dir / "ns").string() + "'",
                           dir.path());
        REQUIRE(r.exit_code == 0);
        CHECK(data_rows(testing::read_file(dir / "ns" / "network_metrics.tsv")) == 2);
        CHECK(data_rows(testing::read_file(dir / "ns" / "node_stats.tsv")) == 4);
        CHECK(data_rows("header\n" + testing::read_file(dir / "ns" / "adjacency.tsv")) == 4);
    }
}
