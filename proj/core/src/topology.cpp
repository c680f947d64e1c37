#include "dflsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "dflsim/error.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::topo {

void TopologySeries::normalize() {
    for (auto& s : snapshots) {
        std::sort(s.edges.begin(), s.edges.end());
        s.edges.erase(std::unique(s.edges.begin(), s.edges.end()), s.edges.end());
    }
    validate();
}

void TopologySeries::validate() const {
    if (node_count == 0) throw ConfigError("topology must have at least one node");
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const auto& s = snapshots[k];
        if (k > 0 && s.time_index <= snapshots[k - 1].time_index)
            throw ConfigError("topology time indices must be strictly increasing");
        for (const auto& e : s.edges) {
            if (e.src == e.dst) throw ConfigError("self-loop on node " + std::to_string(e.src));
            if (e.src >= node_count || e.dst >= node_count)
                throw ConfigError("edge endpoint outside node range at time " + std::to_string(s.time_index));
        }
    }
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }

    std::size_t size_of(std::size_t x) { return size_[find(x)]; }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

DisjointSets components_of(const Snapshot& snapshot, std::size_t node_count) {
    DisjointSets sets(node_count);
    for (const auto& e : snapshot.edges) sets.unite(e.src, e.dst);
    return sets;
}

// Undirected neighbor count per node.
std::vector<std::size_t> undirected_degrees(const Snapshot& snapshot, std::size_t node_count) {
    std::vector<std::vector<NodeId>> nbrs(node_count);
    for (const auto& e : snapshot.edges) {
        nbrs[e.src].push_back(e.dst);
        nbrs[e.dst].push_back(e.src);
    }
    std::vector<std::size_t> deg(node_count);
    for (std::size_t i = 0; i < node_count; ++i) {
        auto& v = nbrs[i];
        std::sort(v.begin(), v.end());
        deg[i] = static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
    }
    return deg;
}

}  // namespace

std::vector<std::vector<NodeId>> connected_components(const Snapshot& snapshot, std::size_t node_count) {
    auto sets = components_of(snapshot, node_count);
    std::vector<std::vector<NodeId>> out;
    std::vector<std::size_t> slot(node_count, SIZE_MAX);
    for (std::size_t i = 0; i < node_count; ++i) {
        const auto root = sets.find(i);
        if (slot[root] == SIZE_MAX) {
            slot[root] = out.size();
            out.emplace_back();
        }
        out[slot[root]].push_back(static_cast<NodeId>(i));
    }
    return out;
}

NetworkMetricsSeries metrics_over_time(const TopologySeries& series) {
    if (series.snapshots.empty()) throw PreconditionError("metrics_over_time needs at least one snapshot");
    NetworkMetricsSeries out;
    const auto n = static_cast<double>(series.node_count);
    for (const auto& s : series.snapshots) {
        const auto comps = connected_components(s, series.node_count);
        const auto deg = undirected_degrees(s, series.node_count);
        SnapshotMetrics m;
        m.time_index = s.time_index;
        m.avg_degree = static_cast<double>(std::accumulate(deg.begin(), deg.end(), std::size_t{0})) / n;
        m.component_count = comps.size();
        m.avg_component_size = n / static_cast<double>(comps.size());
        for (const auto& c : comps) m.largest_component_size = std::max(m.largest_component_size, c.size());
        out.push_back(m);
    }
    return out;
}

std::vector<NodeNetStats> node_net_stats(const TopologySeries& series) {
    if (series.snapshots.empty()) throw PreconditionError("node_net_stats needs at least one snapshot");
    const std::size_t n = series.node_count;
    std::vector<double> in_deg(n, 0.0), cc(n, 0.0), connected(n, 0.0);
    for (const auto& s : series.snapshots) {
        auto sets = components_of(s, n);
        std::vector<bool> touched(n, false);
        for (const auto& e : s.edges) {
            in_deg[e.dst] += 1.0;
            touched[e.src] = touched[e.dst] = true;
        }
        for (std::size_t i = 0; i < n; ++i) {
            cc[i] += static_cast<double>(sets.size_of(i));
            if (touched[i]) connected[i] += 1.0;
        }
    }
    const auto t = static_cast<double>(series.snapshots.size());
    std::vector<NodeNetStats> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {in_deg[i] / t, cc[i] / t, connected[i] / t};
    return out;
}

Matrix aggregate_adjacency(const TopologySeries& series) {
    if (series.snapshots.empty()) throw PreconditionError("aggregate_adjacency needs at least one snapshot");
    const auto n = static_cast<Eigen::Index>(series.node_count);
    Matrix counts = Matrix::Zero(n, n);
    for (const auto& s : series.snapshots)
        for (const auto& e : s.edges) counts(e.src, e.dst) += 1.0;
    return counts / static_cast<double>(series.snapshots.size());
}

void MobilitySpec::validate() const {
    if (node_count == 0) throw ConfigError("mobility node_count must be positive");
    if (snapshot_count == 0) throw ConfigError("mobility snapshot_count must be positive");
    if (!(radius >= 0.0)) throw ConfigError("mobility radius must be non-negative");
    if (!(speed_min >= 0.0) || speed_max < speed_min) throw ConfigError("mobility speed range is invalid");
    if (steps_per_snapshot == 0) throw ConfigError("mobility steps_per_snapshot must be positive");
}

TopologySeries generate_mobility_topology(const MobilitySpec& spec) {
    spec.validate();
    struct Walker {
        double x, y, tx, ty, speed;
        std::size_t pause;
    };
    Rng rng(derive_seed(spec.seed, {stream::topology}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_speed = [&] { return spec.speed_min + (spec.speed_max - spec.speed_min) * unit(rng); };

    std::vector<Walker> walkers(spec.node_count);
    for (auto& w : walkers) {
        w.x = unit(rng);
        w.y = unit(rng);
        w.tx = unit(rng);
        w.ty = unit(rng);
        w.speed = draw_speed();
        w.pause = 0;
    }

    TopologySeries series;
    series.node_count = spec.node_count;
    for (std::size_t t = 0; t < spec.snapshot_count; ++t) {
        if (t > 0) {
            for (std::size_t step = 0; step < spec.steps_per_snapshot; ++step) {
                for (auto& w : walkers) {
                    if (w.pause > 0) {
                        --w.pause;
                        continue;
                    }
                    const double dx = w.tx - w.x, dy = w.ty - w.y;
                    const double dist = std::hypot(dx, dy);
                    if (dist <= w.speed) {
                        w.x = w.tx;
                        w.y = w.ty;
                        w.tx = unit(rng);
                        w.ty = unit(rng);
                        w.speed = draw_speed();
                        w.pause = spec.pause_steps;
                    } else {
                        w.x += dx / dist * w.speed;
                        w.y += dy / dist * w.speed;
                    }
                }
            }
        }
        Snapshot snap{static_cast<std::int64_t>(t), {}};
        if (spec.radius > 0.0) {
            for (std::size_t i = 0; i < walkers.size(); ++i) {
                for (std::size_t j = i + 1; j < walkers.size(); ++j) {
                    if (std::hypot(walkers[i].x - walkers[j].x, walkers[i].y - walkers[j].y) <= spec.radius) {
                        snap.edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
                        snap.edges.push_back({static_cast<NodeId>(j), static_cast<NodeId>(i)});
                    }
                }
            }
        }
        series.snapshots.push_back(std::move(snap));
    }
    series.normalize();
    return series;
}

TopologySeries read_edge_list(std::istream& in, std::size_t node_count) {
    std::map<std::int64_t, std::vector<Edge>> by_time;
    std::size_t declared_nodes = 0;
    std::size_t max_id = 0;
    bool any_edge = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            std::istringstream comment(line.substr(hash + 1));
            std::string key;
            std::size_t value = 0;
            if (comment >> key && key == "nodes:" && comment >> value) declared_nodes = value;
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::vector<long long> values;
        long long v;
        while (fields >> v) values.push_back(v);
        if (!fields.eof()) throw IngestError("non-integer token in edge list", line_no);
        if (values.empty()) continue;
        if (values.size() == 1) {
            by_time[values[0]];
            continue;
        }
        if (values.size() != 3) throw IngestError("expected 't src dst'", line_no);
        if (values[1] < 0 || values[2] < 0) throw IngestError("negative node id", line_no);
        if (values[1] == values[2]) throw IngestError("self-loop", line_no);
        by_time[values[0]].push_back({static_cast<NodeId>(values[1]), static_cast<NodeId>(values[2])});
        max_id = std::max<std::size_t>(max_id, static_cast<std::size_t>(std::max(values[1], values[2])));
        any_edge = true;
    }
    if (by_time.empty()) throw IngestError("edge list contains no snapshots");

    TopologySeries series;
    series.node_count = node_count ? node_count : declared_nodes ? declared_nodes : (any_edge ? max_id + 1 : 0);
    if (any_edge && max_id >= series.node_count)
        throw IngestError("edge endpoint " + std::to_string(max_id) + " exceeds node count " +
                          std::to_string(series.node_count));
    for (auto& [t, edges] : by_time) series.snapshots.push_back({t, std::move(edges)});
    series.normalize();
    return series;
}

TopologySeries read_edge_list(const std::filesystem::path& path, std::size_t node_count) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    return read_edge_list(in, node_count);
}

void write_edge_list(std::ostream& out, const TopologySeries& series) {
    out << "# nodes: " << series.node_count << '\n';
    for (const auto& s : series.snapshots) {
        out << s.time_index << '\n';
        for (const auto& e : s.edges) out << s.time_index << ' ' << e.src << ' ' << e.dst << '\n';
    }
}

}  // namespace dflsim::topo
