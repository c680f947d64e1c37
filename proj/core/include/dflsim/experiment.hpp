#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dflsim/attacks.hpp"
#include "dflsim/dataset.hpp"
#include "dflsim/engine.hpp"
#include "dflsim/error.hpp"
#include "dflsim/report.hpp"
#include "dflsim/topology.hpp"

namespace dflsim::experiment {

inline constexpr int kSchemaVersion = 1;

struct SyntheticSource {
    data::SyntheticSpec spec;
};

struct IngestSource {
    std::filesystem::path path;
    data::IngestFormat format;
};

struct MobilitySource {
    topo::MobilitySpec spec;
};

struct EdgeListSource {
    std::filesystem::path path;
    std::size_t node_count = 0;  // 0: take it from the file
};

// One attack role as written in a spec; K is resolved against the data-node count.
struct TargetSpec {
    attacks::TargetKind kind = attacks::TargetKind::explicit_list;
    attacks::KSpec k;
    std::vector<NodeId> ids;  // explicit_list only
};

struct AttackSpec {
    std::optional<TargetSpec> jam;
    std::optional<TargetSpec> poison;
    double p_a = 0.0;
};

// A parsed and validated experiment description. Seeds for data, topology and
// training all derive from master_seed.
struct ExperimentSpec {
    int schema_version = kSchemaVersion;
    std::uint64_t master_seed = 0;
    std::variant<SyntheticSource, IngestSource> data;
    std::variant<MobilitySource, EdgeListSource> topology;
    engine::SimConfig sim;
    std::optional<AttackSpec> attack;
    std::optional<attacks::SweepSpec> sweep;
    std::filesystem::path output_dir = "dflsim-out";
    double histogram_bin_width = 0.05;
};

// Parses and validates. Throws ConfigError carrying the 1-based line of the offending entry.
ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);

// Fully resolved configuration (every default filled in). Output location and worker
// counts are execution settings and are left out so artifacts do not depend on them.
io::Json resolved_config(const ExperimentSpec& spec);

// Applies DFLSIM_OUTPUT_DIR and DFLSIM_WORKERS when set.
void apply_environment(ExperimentSpec& spec);

data::Population materialize_population(const ExperimentSpec& spec);
topo::TopologySeries materialize_topology(const ExperimentSpec& spec);

struct RunOptions {
    bool overwrite = false;
    std::ostream* log = nullptr;  // progress and summary lines
};

// Output-hygiene failure: artifact exists and overwrite was not requested.
class ArtifactExistsError : public Error {
public:
    using Error::Error;
};

// Single run: baselines, the configured (possibly attacked) experiment, and every
// analysis artifact. Returns the experiment's report.
engine::ExperimentReport run(const ExperimentSpec& spec, const RunOptions& options);

// Attack sweep: one report per grid cell plus the consolidated table.
attacks::SweepResult sweep(const ExperimentSpec& spec, const RunOptions& options);

// Computes (or reuses) the clean DFL and local-only baselines and caches them on disk.
void baseline(const ExperimentSpec& spec, const RunOptions& options);

// Network metrics, per-node statistics and aggregated adjacency of a topology file.
void netstats(const std::filesystem::path& edge_list, std::size_t node_count, const std::filesystem::path& output_dir,
              const RunOptions& options);

}  // namespace dflsim::experiment
