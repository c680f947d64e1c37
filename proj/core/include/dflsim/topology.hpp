#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dflsim/types.hpp"

namespace dflsim::topo {

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// One directed adjacency snapshot. Edges are kept sorted and unique.
struct Snapshot {
    std::int64_t time_index = 0;
    std::vector<Edge> edges;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct TopologySeries {
    std::size_t node_count = 0;
    std::vector<Snapshot> snapshots;

    // Sorts and dedups edges; throws ConfigError on self-loops, out-of-range
    // endpoints or non-increasing time indices.
    void normalize();
    void validate() const;
    const Snapshot& snapshot_for_round(std::size_t round) const { return snapshots[round % snapshots.size()]; }

    friend bool operator==(const TopologySeries&, const TopologySeries&) = default;
};

// Components of the undirected closure, each sorted ascending, ordered by smallest member.
std::vector<std::vector<NodeId>> connected_components(const Snapshot& snapshot, std::size_t node_count);

struct SnapshotMetrics {
    std::int64_t time_index = 0;
    double avg_degree = 0.0;
    std::size_t component_count = 0;
    double avg_component_size = 0.0;
    std::size_t largest_component_size = 0;
};

using NetworkMetricsSeries = std::vector<SnapshotMetrics>;

NetworkMetricsSeries metrics_over_time(const TopologySeries& series);

struct NodeNetStats {
    double avg_in_degree = 0.0;
    double avg_cc_size = 0.0;
    double connected_time_ratio = 0.0;
};

// Indexed by node id.
std::vector<NodeNetStats> node_net_stats(const TopologySeries& series);

// Row-major node_count x node_count matrix; entry (i, j) is the fraction of snapshots with edge i->j.
Matrix aggregate_adjacency(const TopologySeries& series);

struct MobilitySpec {
    std::size_t node_count = 100;
    std::size_t snapshot_count = 60;
    double radius = 0.12;
    double speed_min = 0.005;  // unit-square lengths per time step
    double speed_max = 0.03;
    std::size_t pause_steps = 2;
    std::size_t steps_per_snapshot = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Random-waypoint walk in the unit square; edge i->j (and j->i) whenever the pair is
// within `radius` (inclusive) and radius > 0.
TopologySeries generate_mobility_topology(const MobilitySpec& spec);

// Text edge list. Lines are "t src dst" edges or a bare "t" declaring a (possibly empty)
// snapshot; '#' starts a comment, and "# nodes: N" fixes the node count.
TopologySeries read_edge_list(std::istream& in, std::size_t node_count = 0);
TopologySeries read_edge_list(const std::filesystem::path& path, std::size_t node_count = 0);
void write_edge_list(std::ostream& out, const TopologySeries& series);

}  // namespace dflsim::topo
