#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dflsim/analysis.hpp"
#include "dflsim/attacks.hpp"
#include "dflsim/engine.hpp"
#include "dflsim/topology.hpp"

namespace dflsim::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "dflsim-report/1";

// Reproducibility header stamped on every artifact: the fully resolved experiment
// config plus the master seed.
struct ArtifactHeader {
    Json config = Json::object();
    std::uint64_t master_seed = 0;
};

Json sim_config_to_json(const engine::SimConfig& config);
Json plan_to_json(const attacks::AttackPlan& plan);
Json stats_to_json(const analysis::AccuracyStats& stats);

// The outcome part of a report (aggregate stats plus per-node accuracies), without
// config or attack echo. Two runs with the same outcome serialize identically.
Json results_to_json(const engine::ExperimentReport& report);

Json report_to_json(const engine::ExperimentReport& report, const ArtifactHeader& header);
std::string dump(const Json& json);

// Reads back the fields needed to reuse a report as a baseline (plan, per-node
// results, stats, sim config). Throws InputError on schema mismatch.
engine::ExperimentReport report_from_json(const Json& json);

// Delimiter-separated tables. Each begins with '#'-prefixed header lines.
void write_header(std::ostream& out, const ArtifactHeader& header);
void write_stats_table(std::ostream& out, const ArtifactHeader& header, const analysis::AccuracyStats& local_only,
                       const analysis::AccuracyStats& dfl);
void write_correlation_table(std::ostream& out, const ArtifactHeader& header, const analysis::CorrelationTable& table);
void write_histogram(std::ostream& out, const ArtifactHeader& header, const std::vector<analysis::HistogramBin>& local_only,
                     const std::vector<analysis::HistogramBin>& dfl);
void write_network_metrics(std::ostream& out, const ArtifactHeader& header, const topo::NetworkMetricsSeries& series);
void write_node_stats(std::ostream& out, const ArtifactHeader& header, const std::vector<topo::NodeNetStats>& stats);
void write_matrix(std::ostream& out, const ArtifactHeader& header, const Matrix& matrix);

// Consolidated sweep table laid out like the published tables: rows are target sets,
// columns are p_a values (or attack variants) for the average and minimum accuracy.
void write_sweep_table(std::ostream& out, const ArtifactHeader& header, const attacks::SweepResult& sweep,
                       const engine::ExperimentReport& clean_dfl);

std::string format_number(double value);

}  // namespace dflsim::io
