#include "dflsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "dflsim/error.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::data {

std::size_t Population::total_rows() const {
    std::size_t n = 0;
    for (const auto& node : nodes) n += node.total_rows();
    return n;
}

void Population::validate(std::size_t feature_count) const {
    std::set<NodeId> seen;
    auto check_split = [&](const NodeDataset& node, const LabeledRows& rows, const char* name) {
        if (rows.features.rows() != static_cast<Eigen::Index>(rows.labels.size()))
            throw ConfigError("node " + std::to_string(node.node_id) + " " + name + " split has mismatched rows");
        if (!rows.empty() && rows.features.cols() != static_cast<Eigen::Index>(feature_count))
            throw ConfigError("node " + std::to_string(node.node_id) + " " + name + " split does not have " +
                              std::to_string(feature_count) + " features");
        if (!rows.features.allFinite())
            throw ConfigError("node " + std::to_string(node.node_id) + " has non-finite features");
        for (auto y : rows.labels)
            if (y > 1) throw ConfigError("node " + std::to_string(node.node_id) + " has a non-binary label");
    };
    for (const auto& node : nodes) {
        if (!seen.insert(node.node_id).second)
            throw ConfigError("duplicate node id " + std::to_string(node.node_id) + " in population");
        check_split(node, node.train, "train");
        check_split(node, node.val, "val");
        check_split(node, node.test, "test");
    }
    for (auto id : dataless_node_ids)
        if (!seen.insert(id).second)
            throw ConfigError("duplicate node id " + std::to_string(id) + " in population");
}

const NodeDataset* Population::find(NodeId id) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [id](const NodeDataset& n) { return n.node_id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

void SplitRatios::validate() const {
    if (train < 0 || val < 0 || test < 0) throw ConfigError("split ratios must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (train <= 0) throw ConfigError("train split ratio must be positive");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_exact(std::string_view s, T& value) {
    s = trim(s);
    if (s.empty()) return false;
    if constexpr (std::is_floating_point_v<T>) {
        if (s.front() == '+') s.remove_prefix(1);
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct RawRow {
    std::vector<double> features;
    Label label;
};

LabeledRows to_rows(const std::vector<const RawRow*>& rows, std::size_t feature_count) {
    LabeledRows out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_count));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < feature_count; ++c)
            out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r]->features[c];
        out.labels.push_back(rows[r]->label);
    }
    return out;
}

}  // namespace

Population ingest(const std::filesystem::path& path, const IngestFormat& format) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    return ingest(in, format);
}

Population ingest(std::istream& in, const IngestFormat& format) {
    format.split.validate();
    const std::size_t expected_cols = format.feature_count + 2;
    std::map<NodeId, std::vector<RawRow>> by_node;

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        auto fields = split_fields(view, format.delimiter);
        if (!have_header) {
            if (fields.size() != expected_cols)
                throw IngestError("header has " + std::to_string(fields.size()) + " columns, expected " +
                                      std::to_string(expected_cols),
                                  line_no);
            have_header = true;
            continue;
        }
        if (fields.size() != expected_cols)
            throw IngestError("row has " + std::to_string(fields.size()) + " columns, expected " +
                                  std::to_string(expected_cols),
                              line_no);
        NodeId id{};
        if (!parse_exact(fields.front(), id))
            throw IngestError("node id '" + std::string(trim(fields.front())) + "' is not a non-negative integer",
                              line_no);
        RawRow row;
        row.features.resize(format.feature_count);
        for (std::size_t c = 0; c < format.feature_count; ++c) {
            if (!parse_exact(fields[c + 1], row.features[c]) || !std::isfinite(row.features[c]))
                throw IngestError("feature " + std::to_string(c + 1) + " is not a finite number", line_no);
        }
        int label = -1;
        if (!parse_exact(fields.back(), label) || (label != 0 && label != 1))
            throw IngestError("label '" + std::string(trim(fields.back())) + "' is not 0 or 1", line_no);
        row.label = static_cast<Label>(label);
        by_node[id].push_back(std::move(row));
    }
    if (!have_header) throw IngestError("empty input: no header row");
    if (by_node.empty()) throw IngestError("input has a header but no data rows");

    Population pop;
    for (const auto& [id, rows] : by_node) {
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(format.seed, {stream::split, id}));
        std::shuffle(order.begin(), order.end(), rng);

        const auto n = static_cast<double>(rows.size());
        auto n_train = static_cast<std::size_t>(std::llround(n * format.split.train));
        auto n_val = static_cast<std::size_t>(std::llround(n * format.split.val));
        n_train = std::clamp<std::size_t>(n_train, 1, rows.size());
        n_val = std::min(n_val, rows.size() - n_train);

        std::vector<const RawRow*> train, val, test;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const RawRow* r = &rows[order[i]];
            if (i < n_train) train.push_back(r);
            else if (i < n_train + n_val) val.push_back(r);
            else test.push_back(r);
        }
        pop.nodes.push_back(NodeDataset{id, to_rows(train, format.feature_count), to_rows(val, format.feature_count),
                                        to_rows(test, format.feature_count)});
    }
    return pop;
}

void write_rows(std::ostream& out, const Population& population, char delimiter) {
    const std::size_t features =
        population.nodes.empty() ? kFeatureCount : static_cast<std::size_t>(population.nodes.front().train.features.cols());
    out << "node_id";
    for (std::size_t c = 1; c <= features; ++c) out << delimiter << 'f' << c;
    out << delimiter << "label\n";
    for (const auto& node : population.nodes) {
        for (const LabeledRows* split : {&node.train, &node.val, &node.test}) {
            for (std::size_t r = 0; r < split->size(); ++r) {
                out << node.node_id;
                for (Eigen::Index c = 0; c < split->features.cols(); ++c)
                    out << delimiter << format_double(split->features(static_cast<Eigen::Index>(r), c));
                out << delimiter << static_cast<int>(split->labels[r]) << '\n';
            }
        }
    }
}

void write_population(std::ostream& out, const Population& population) {
    out << "dflsim-population 1\n";
    out << "dataless";
    for (auto id : population.dataless_node_ids) out << ' ' << id;
    out << '\n';
    for (const auto& node : population.nodes) {
        const auto cols = node.train.empty() ? kFeatureCount : static_cast<std::size_t>(node.train.features.cols());
        out << "node " << node.node_id << ' ' << node.train.size() << ' ' << node.val.size() << ' '
            << node.test.size() << ' ' << cols << '\n';
        for (const LabeledRows* split : {&node.train, &node.val, &node.test}) {
            for (std::size_t r = 0; r < split->size(); ++r) {
                out << static_cast<int>(split->labels[r]);
                for (Eigen::Index c = 0; c < split->features.cols(); ++c)
                    out << ' ' << format_double(split->features(static_cast<Eigen::Index>(r), c));
                out << '\n';
            }
        }
    }
}

Population read_population(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) throw IngestError("unexpected end of population file", line_no);
        ++line_no;
        return std::istringstream(line);
    };

    {
        auto header = next_line();
        std::string magic;
        int version = 0;
        header >> magic >> version;
        if (magic != "dflsim-population" || version != 1) throw IngestError("not a dflsim population file", line_no);
    }
    Population pop;
    {
        auto dl = next_line();
        std::string tag;
        dl >> tag;
        if (tag != "dataless") throw IngestError("expected 'dataless' line", line_no);
        NodeId id;
        while (dl >> id) pop.dataless_node_ids.push_back(id);
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream hdr(line);
        std::string tag;
        NodeDataset node;
        std::size_t sizes[3];
        std::size_t cols = 0;
        if (!(hdr >> tag >> node.node_id >> sizes[0] >> sizes[1] >> sizes[2] >> cols) || tag != "node")
            throw IngestError("malformed node header", line_no);
        LabeledRows* splits[3] = {&node.train, &node.val, &node.test};
        for (int s = 0; s < 3; ++s) {
            splits[s]->features.resize(static_cast<Eigen::Index>(sizes[s]), static_cast<Eigen::Index>(cols));
            for (std::size_t r = 0; r < sizes[s]; ++r) {
                next_line();
                auto fields = split_fields(trim(line), ' ');
                if (fields.size() != cols + 1) throw IngestError("wrong field count in population row", line_no);
                int label = -1;
                if (!parse_exact(fields[0], label) || (label != 0 && label != 1))
                    throw IngestError("bad label in population row", line_no);
                splits[s]->labels.push_back(static_cast<Label>(label));
                for (std::size_t c = 0; c < cols; ++c) {
                    double v{};
                    if (!parse_exact(fields[c + 1], v)) throw IngestError("bad feature in population row", line_no);
                    splits[s]->features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
                }
            }
        }
        pop.nodes.push_back(std::move(node));
    }
    return pop;
}

SyntheticSpec SyntheticSpec::paper_replica() { return SyntheticSpec{}; }

void SyntheticSpec::validate() const {
    if (node_count == 0) throw ConfigError("synthetic node_count must be positive");
    if (train_size_range.first == 0 || train_size_range.first > train_size_range.second)
        throw ConfigError("synthetic train_size_range must be a nonempty positive range");
    if (test_size_range.first == 0 || test_size_range.first > test_size_range.second)
        throw ConfigError("synthetic test_size_range must be a nonempty positive range");
    if (train_size_mean_target < static_cast<double>(train_size_range.first) ||
        train_size_mean_target > static_cast<double>(train_size_range.second))
        throw ConfigError("synthetic train_size_mean_target lies outside train_size_range");
    if (!(class_balance > 0.0 && class_balance < 1.0)) throw ConfigError("class_balance must be in (0, 1)");
    if (!(separation >= 0.0)) throw ConfigError("separation must be non-negative");
    if (clusters_per_class == 0) throw ConfigError("clusters_per_class must be positive");
    if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) throw ConfigError("heterogeneity must be in [0, 1]");
    if (!(max_balance_skew >= 0.0 && max_balance_skew < 0.5)) throw ConfigError("max_balance_skew must be in [0, 0.5)");
    if (!(max_shift >= 0.0)) throw ConfigError("max_shift must be non-negative");
    if (!(val_fraction >= 0.0)) throw ConfigError("val_fraction must be non-negative");
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ConfigError("label_noise must be in [0, 1]");
}

std::vector<std::size_t> draw_train_sizes(const SyntheticSpec& spec) {
    spec.validate();
    const auto lo = static_cast<double>(spec.train_size_range.first);
    const auto hi = static_cast<double>(spec.train_size_range.second);
    const std::size_t n = spec.node_count;
    Rng rng(derive_seed(spec.seed, {stream::data, 0}));

    std::vector<double> raw(n);
    std::lognormal_distribution<double> spread(0.0, 0.9);
    for (auto& x : raw) x = spread(rng);
    // Pin the extremes so the realised range matches the declared range.
    if (n >= 2) {
        auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
        *mn = -1.0;
        *mx = std::numeric_limits<double>::infinity();
    }

    auto sizes_for = [&](double scale) {
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = raw[i] < 0 ? lo : std::isinf(raw[i]) ? hi : std::clamp(lo + scale * raw[i], lo, hi);
        return s;
    };
    auto mean_of = [](const std::vector<double>& s) { return std::accumulate(s.begin(), s.end(), 0.0) / s.size(); };

    std::vector<double> sizes;
    if (n == 1) {
        sizes = {spec.train_size_mean_target};
    } else {
        double a = 0.0, b = hi * 4.0;
        while (mean_of(sizes_for(b)) < spec.train_size_mean_target && b < 1e12) b *= 2;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (mean_of(sizes_for(mid)) < spec.train_size_mean_target ? a : b) = mid;
        }
        sizes = sizes_for(0.5 * (a + b));
    }
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(sizes[i])), spec.train_size_range.first,
                                         spec.train_size_range.second);
    return out;
}

namespace {

Vector random_unit(Rng& rng, std::size_t dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    return v / v.norm();
}

}  // namespace

Population generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const auto sizes = draw_train_sizes(spec);
    const auto [tr_lo, tr_hi] = spec.train_size_range;
    const auto [te_lo, te_hi] = spec.test_size_range;

    Rng global(derive_seed(spec.seed, {stream::data, 1}));
    const Vector direction = random_unit(global, kFeatureCount);
    const Vector half_gap = 0.5 * spec.separation * direction;
    std::vector<Vector> centers[2];
    for (int y = 0; y < 2; ++y) {
        if (spec.clusters_per_class == 1) {
            centers[y].push_back(y == 1 ? half_gap : Vector(-half_gap));
            continue;
        }
        for (std::size_t k = 0; k < spec.clusters_per_class; ++k)
            centers[y].push_back(0.5 * spec.separation * random_unit(global, kFeatureCount));
    }
    std::uniform_int_distribution<std::size_t> pick_cluster(0, spec.clusters_per_class - 1);

    Population pop;
    for (std::size_t i = 0; i < spec.node_count; ++i) {
        Rng rng(derive_seed(spec.seed, {stream::data, 2, i}));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, 1.0);

        const double skew = spec.heterogeneity * spec.max_balance_skew * (2.0 * unit(rng) - 1.0);
        const double balance = std::clamp(spec.class_balance + skew, 0.01, 0.99);
        const Vector shift = spec.heterogeneity * spec.max_shift * unit(rng) * random_unit(rng, kFeatureCount);

        const std::size_t n_train = sizes[i];
        const double frac = tr_hi > tr_lo ? static_cast<double>(n_train - tr_lo) / static_cast<double>(tr_hi - tr_lo) : 0.0;
        const auto n_test = static_cast<std::size_t>(
            std::llround(static_cast<double>(te_lo) + frac * static_cast<double>(te_hi - te_lo)));
        const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n_train) * spec.val_fraction));

        auto draw = [&](std::size_t count) {
            LabeledRows rows;
            rows.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(kFeatureCount));
            rows.labels.reserve(count);
            for (std::size_t r = 0; r < count; ++r) {
                const Label y = unit(rng) < balance ? 1 : 0;
                const Vector& center = centers[y][spec.clusters_per_class == 1 ? 0 : pick_cluster(rng)];
                for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(kFeatureCount); ++c)
                    rows.features(static_cast<Eigen::Index>(r), c) = center(c) + shift(c) + noise(rng);
                Label observed = y;
                if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise) observed = unit(rng) < 0.5 ? 1 : 0;
                rows.labels.push_back(observed);
            }
            return rows;
        };

        NodeDataset node;
        node.node_id = static_cast<NodeId>(i);
        node.train = draw(n_train);
        node.val = draw(n_val);
        node.test = draw(std::clamp(n_test, te_lo, te_hi));
        pop.nodes.push_back(std::move(node));
    }
    for (std::size_t j = 0; j < spec.dataless_count; ++j)
        pop.dataless_node_ids.push_back(static_cast<NodeId>(spec.node_count + j));
    return pop;
}

void flip_labels(std::span<Label> labels, double p_a, std::uint64_t seed) {
    if (!(p_a >= 0.0 && p_a <= 1.0)) throw PreconditionError("flip probability must lie in [0, 1]");
    if (p_a == 0.0) return;
    if (p_a == 1.0) {
        for (auto& y : labels) y = static_cast<Label>(1 - y);
        return;
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& y : labels)
        if (unit(rng) < p_a) y = static_cast<Label>(1 - y);
}

}  // namespace dflsim::data
