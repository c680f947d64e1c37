#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dflsim/types.hpp"

namespace dflsim::analysis {

// Percent change of each statistic relative to a baseline. For std_dev the sign is
// reversed, so a reduction in spread reads as a positive improvement.
struct Improvement {
    double average = 0.0;
    double minimum = 0.0;
    double maximum = 0.0;
    double std_dev = 0.0;
};

// Population (not sample) standard deviation: the node set is the whole experiment.
struct AccuracyStats {
    double average = 0.0;
    double minimum = 0.0;
    double maximum = 0.0;
    double std_dev = 0.0;
    std::optional<Improvement> improvement;
};

AccuracyStats accuracy_stats(std::span<const double> accuracies, const AccuracyStats* baseline = nullptr);

Improvement improvement_over(const AccuracyStats& current, const AccuracyStats& baseline);

// Sample Pearson coefficient. Throws UndefinedCorrelationError when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based), ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson on average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

// Per-node values keyed by node id, in a fixed order.
struct NodeValues {
    std::vector<NodeId> ids;
    std::vector<double> values;
};

struct CorrelationRow {
    std::string lhs;
    std::string rhs;
    double pearson = 0.0;
    double spearman = 0.0;
};

struct CorrelationTable {
    std::vector<CorrelationRow> rows;
};

// The six pairs (a_DFL, a_LL), (a_DFL, m), (a_LL, m), (a_DFL, d), (a_DFL, C), (a_DFL, c).
// Every input must carry the same id sequence.
CorrelationTable correlation_report(const NodeValues& a_dfl, const NodeValues& a_ll, const NodeValues& m,
                                    const NodeValues& d, const NodeValues& cc_size, const NodeValues& conn_time);

struct HistogramBin {
    double left = 0.0;
    std::size_t count = 0;
};

// Bins of `bin_width` partitioning [0, 1]; the last bin is closed on the right and
// values are clamped into range.
std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width);

}  // namespace dflsim::analysis
