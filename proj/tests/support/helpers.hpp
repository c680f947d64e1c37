#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "dflsim/dataset.hpp"
#include "dflsim/rng.hpp"
#include "dflsim/topology.hpp"

namespace testing {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("dflsim-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(DFLSIM_FIXTURE_DIR) / name; }

// Two Gaussian blobs at +-1 along the first axis, `dim` features.
inline dflsim::LabeledRows blobs(std::size_t n, std::size_t dim, std::uint64_t seed, double gap = 2.0) {
    dflsim::Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    dflsim::LabeledRows rows;
    rows.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < n; ++r) {
        const dflsim::Label y = static_cast<dflsim::Label>(r % 2);
        for (std::size_t c = 0; c < dim; ++c)
            rows.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                noise(rng) + (c == 0 ? (y ? gap / 2 : -gap / 2) : 0.0);
        rows.labels.push_back(y);
    }
    return rows;
}

// Small population of data nodes 0..n_data-1 plus data-less nodes after them.
inline dflsim::data::Population toy_population(std::size_t n_data, std::size_t n_dataless, std::uint64_t seed,
                                               std::size_t train = 24, std::size_t test = 12) {
    dflsim::data::Population pop;
    for (std::size_t i = 0; i < n_data; ++i) {
        dflsim::data::NodeDataset node;
        node.node_id = static_cast<dflsim::NodeId>(i);
        node.train = blobs(train, dflsim::data::kFeatureCount, dflsim::derive_seed(seed, {i, 0}));
        node.val = blobs(6, dflsim::data::kFeatureCount, dflsim::derive_seed(seed, {i, 1}));
        node.test = blobs(test, dflsim::data::kFeatureCount, dflsim::derive_seed(seed, {i, 2}));
        pop.nodes.push_back(std::move(node));
    }
    for (std::size_t j = 0; j < n_dataless; ++j) pop.dataless_node_ids.push_back(static_cast<dflsim::NodeId>(n_data + j));
    return pop;
}

inline dflsim::topo::TopologySeries series(std::size_t n, std::vector<std::vector<dflsim::topo::Edge>> snapshots) {
    dflsim::topo::TopologySeries s;
    s.node_count = n;
    for (std::size_t t = 0; t < snapshots.size(); ++t)
        s.snapshots.push_back({static_cast<std::int64_t>(t), std::move(snapshots[t])});
    s.normalize();
    return s;
}

// Both directions of every listed pair, identical in every one of `t` snapshots.
inline dflsim::topo::TopologySeries static_undirected(std::size_t n, std::size_t t,
                                                      const std::vector<std::pair<dflsim::NodeId, dflsim::NodeId>>& pairs) {
    std::vector<dflsim::topo::Edge> edges;
    for (auto [a, b] : pairs) {
        edges.push_back({a, b});
        edges.push_back({b, a});
    }
    return series(n, std::vector<std::vector<dflsim::topo::Edge>>(t, edges));
}

}  // namespace testing
