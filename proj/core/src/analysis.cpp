#include "dflsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dflsim/error.hpp"

namespace dflsim::analysis {

namespace {

double pct_change(double value, double base) { return (value - base) / base * 100.0; }

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw PreconditionError("correlation inputs differ in length");
    if (x.size() < 2) throw PreconditionError("correlation needs at least two observations");
}

}  // namespace

AccuracyStats accuracy_stats(std::span<const double> accuracies, const AccuracyStats* baseline) {
    if (accuracies.empty()) throw PreconditionError("accuracy_stats of an empty vector");
    AccuracyStats s;
    const auto n = static_cast<double>(accuracies.size());
    // Sort first so the sums do not depend on input order.
    std::vector<double> sorted(accuracies.begin(), accuracies.end());
    std::sort(sorted.begin(), sorted.end());
    s.minimum = sorted.front();
    s.maximum = sorted.back();
    s.average = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : sorted) ss += (a - s.average) * (a - s.average);
    s.std_dev = std::sqrt(ss / n);
    if (baseline) s.improvement = improvement_over(s, *baseline);
    return s;
}

Improvement improvement_over(const AccuracyStats& current, const AccuracyStats& baseline) {
    return {pct_change(current.average, baseline.average), pct_change(current.minimum, baseline.minimum),
            pct_change(current.maximum, baseline.maximum),
            (baseline.std_dev - current.std_dev) / baseline.std_dev * 100.0};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (x_const || y_const || sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("correlation is undefined for a constant vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

CorrelationTable correlation_report(const NodeValues& a_dfl, const NodeValues& a_ll, const NodeValues& m,
                                    const NodeValues& d, const NodeValues& cc_size, const NodeValues& conn_time) {
    for (const NodeValues* v : {&a_dfl, &a_ll, &m, &d, &cc_size, &conn_time}) {
        if (v->ids.size() != v->values.size()) throw PreconditionError("node id and value counts differ");
        if (v->ids != a_dfl.ids) throw PreconditionError("correlation vectors are not over the same node set");
    }
    CorrelationTable table;
    auto add = [&](const char* lhs, const NodeValues& x, const char* rhs, const NodeValues& y) {
        table.rows.push_back({lhs, rhs, pearson(x.values, y.values), spearman(x.values, y.values)});
    };
    add("a_DFL", a_dfl, "a_LL", a_ll);
    add("a_DFL", a_dfl, "m", m);
    add("a_LL", a_ll, "m", m);
    add("a_DFL", a_dfl, "d", d);
    add("a_DFL", a_dfl, "C", cc_size);
    add("a_DFL", a_dfl, "c", conn_time);
    return table;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw PreconditionError("bin_width must be positive");
    // Tolerance keeps values such as 0.7 / 0.1 = 6.999... in the bin a reader expects.
    constexpr double kEdgeSlack = 1e-9;
    const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(1.0 / bin_width - kEdgeSlack)));
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b].left = static_cast<double>(b) * bin_width;
    for (double v : values) {
        const double pos = std::clamp(v, 0.0, 1.0) / bin_width + kEdgeSlack;
        const auto b = std::min(bins - 1, static_cast<std::size_t>(std::floor(pos)));
        ++out[b].count;
    }
    return out;
}

}  // namespace dflsim::analysis
