#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dflsim/types.hpp"

namespace dflsim::data {

inline constexpr std::size_t kFeatureCount = 22;

struct NodeDataset {
    NodeId node_id = 0;
    LabeledRows train;
    LabeledRows val;
    LabeledRows test;

    std::size_t total_rows() const { return train.size() + val.size() + test.size(); }
    friend bool operator==(const NodeDataset&, const NodeDataset&) = default;
};

// Data-bearing nodes plus the ids of nodes that exist in the network but hold no data.
struct Population {
    std::vector<NodeDataset> nodes;
    std::vector<NodeId> dataless_node_ids;

    std::size_t node_count() const { return nodes.size() + dataless_node_ids.size(); }
    std::size_t total_rows() const;
    // Throws ConfigError on duplicate ids or malformed rows.
    void validate(std::size_t feature_count = kFeatureCount) const;
    const NodeDataset* find(NodeId id) const;

    friend bool operator==(const Population&, const Population&) = default;
};

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;

    void validate() const;
};

struct IngestFormat {
    char delimiter = ',';
    SplitRatios split;
    std::uint64_t seed = 0;
    std::size_t feature_count = kFeatureCount;
};

// Delimited text with a header row; columns node_id, f1..fN, label.
Population ingest(const std::filesystem::path& path, const IngestFormat& format);
Population ingest(std::istream& in, const IngestFormat& format);

// Writes rows back in the ingest layout (one row per sample, node-major, train/val/test order).
void write_rows(std::ostream& out, const Population& population, char delimiter = ',');

// Canonical cache format: keeps the split assignment and exact bit patterns of every feature.
void write_population(std::ostream& out, const Population& population);
Population read_population(std::istream& in);

struct SyntheticSpec {
    std::size_t node_count = 94;  // nodes with data
    std::size_t dataless_count = 6;
    std::pair<std::size_t, std::size_t> train_size_range{86, 2514};
    double train_size_mean_target = 689.0;
    std::pair<std::size_t, std::size_t> test_size_range{3, 114};
    double val_fraction = 0.15 / 0.70;  // val rows per train row
    double class_balance = 0.5;         // P(label = 1)
    double separation = 9.0;            // distance between class means, in noise std units
    std::size_t clusters_per_class = 16;  // >1 places each class on random centers at radius separation/2
    double heterogeneity = 1.0;         // 0 gives IID nodes
    double max_balance_skew = 0.2;      // per-node class balance spread at heterogeneity 1
    double max_shift = 0.5;             // per-node feature shift norm at heterogeneity 1
    double label_noise = 0.0;           // fraction of labels drawn uniformly at random
    std::uint64_t seed = 0;

    static SyntheticSpec paper_replica();
    void validate() const;
};

// Per-node train sizes honoring the range with the smallest and largest node pinned
// to the range ends and the mean matched to the target.
std::vector<std::size_t> draw_train_sizes(const SyntheticSpec& spec);

Population generate_synthetic(const SyntheticSpec& spec);

// Flips each label independently with probability p_a.
void flip_labels(std::span<Label> labels, double p_a, std::uint64_t seed);

}  // namespace dflsim::data
