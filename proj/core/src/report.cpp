#include "dflsim/report.hpp"

#include <charconv>
#include <map>
#include <set>
#include <ostream>

#include "dflsim/error.hpp"

namespace dflsim::io {

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

Json sim_config_to_json(const engine::SimConfig& c) {
    Json overrides = Json::object();
    for (const auto& [id, seed] : c.init_seed_overrides) overrides[std::to_string(id)] = seed;
    return Json{
        {"mode", engine::to_string(c.mode)},
        {"rounds", c.rounds},
        {"arch",
         {{"input_dim", c.arch.input_dim}, {"hidden_dims", c.arch.hidden_dims}, {"output_dim", c.arch.output_dim}}},
        {"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"local_epochs", c.train.local_epochs},
        {"aggregation", engine::to_string(c.weighting)},
        {"relays", c.relays},
        {"shared_init", c.shared_init},
        {"init_seed_overrides", overrides},
        {"record_traces", c.record_traces},
        {"master_seed", c.master_seed},
    };
}

Json plan_to_json(const attacks::AttackPlan& plan) {
    Json provenance = Json::array();
    for (const auto& p : plan.provenance)
        provenance.push_back({{"role", p.role}, {"strategy", attacks::to_string(p.kind)}, {"k", p.k}});
    return Json{{"jam_targets", plan.jam_targets},
                {"poison_targets", plan.poison_targets},
                {"p_a", plan.p_a},
                {"provenance", provenance}};
}

Json stats_to_json(const analysis::AccuracyStats& s) {
    Json j{{"average", s.average}, {"minimum", s.minimum}, {"maximum", s.maximum}, {"std_dev", s.std_dev}};
    if (s.improvement) {
        const auto& i = *s.improvement;
        j["improvement_pct"] = {
            {"average", i.average}, {"minimum", i.minimum}, {"maximum", i.maximum}, {"std_dev", i.std_dev}};
    }
    return j;
}

Json results_to_json(const engine::ExperimentReport& report) {
    Json nodes = Json::array();
    for (const auto& n : report.nodes)
        nodes.push_back({{"node_id", n.node_id},
                         {"train_size", n.train_size},
                         {"test_size", n.test_size},
                         {"accuracy", n.accuracy}});
    return Json{{"stats", stats_to_json(report.stats)}, {"nodes", nodes}};
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json traces_to_json(const std::vector<engine::RoundTrace>& traces) {
    Json out = Json::array();
    for (const auto& t : traces) {
        Json nodes = Json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"node_id", n.node_id},
                             {"received_from", n.received_from},
                             {"train_loss", optional_number(n.train_loss)},
                             {"val_accuracy_pre", optional_number(n.val_accuracy_pre)},
                             {"val_accuracy_post", optional_number(n.val_accuracy_post)}});
        out.push_back({{"round", t.round}, {"time_index", t.time_index}, {"nodes", nodes}});
    }
    return out;
}

}  // namespace

Json report_to_json(const engine::ExperimentReport& report, const ArtifactHeader& header) {
    Json j{{"schema", kReportSchema},
           {"master_seed", header.master_seed},
           {"config", header.config},
           {"sim", sim_config_to_json(report.config)},
           {"attack", plan_to_json(report.plan)},
           {"results", results_to_json(report)}};
    if (report.config.record_traces) j["traces"] = traces_to_json(report.traces);
    return j;
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

engine::ExperimentReport report_from_json(const Json& j) {
    try {
        if (j.at("schema").get<std::string>() != kReportSchema) throw InputError("unsupported report schema");
        engine::ExperimentReport r;
        const auto& sim = j.at("sim");
        r.config.mode = sim.at("mode").get<std::string>() == "dfl" ? engine::Mode::dfl : engine::Mode::local_only;
        r.config.rounds = sim.at("rounds").get<std::size_t>();
        r.config.arch.input_dim = sim.at("arch").at("input_dim").get<std::size_t>();
        r.config.arch.hidden_dims = sim.at("arch").at("hidden_dims").get<std::vector<std::size_t>>();
        r.config.arch.output_dim = sim.at("arch").at("output_dim").get<std::size_t>();
        r.config.train.learning_rate = sim.at("learning_rate").get<double>();
        r.config.train.batch_size = sim.at("batch_size").get<std::size_t>();
        r.config.train.local_epochs = sim.at("local_epochs").get<std::size_t>();
        r.config.weighting =
            sim.at("aggregation").get<std::string>() == "uniform" ? engine::Weighting::uniform : engine::Weighting::data_size;
        r.config.relays = sim.at("relays").get<bool>();
        r.config.shared_init = sim.at("shared_init").get<bool>();
        r.config.master_seed = sim.at("master_seed").get<std::uint64_t>();

        const auto& attack = j.at("attack");
        r.plan.jam_targets = attack.at("jam_targets").get<std::vector<NodeId>>();
        r.plan.poison_targets = attack.at("poison_targets").get<std::vector<NodeId>>();
        r.plan.p_a = attack.at("p_a").get<double>();

        const auto& results = j.at("results");
        const std::set<NodeId> jam(r.plan.jam_targets.begin(), r.plan.jam_targets.end());
        const std::set<NodeId> poison(r.plan.poison_targets.begin(), r.plan.poison_targets.end());
        for (const auto& n : results.at("nodes")) {
            engine::NodeResult nr;
            nr.node_id = n.at("node_id").get<NodeId>();
            nr.train_size = n.at("train_size").get<std::size_t>();
            nr.test_size = n.at("test_size").get<std::size_t>();
            nr.accuracy = n.at("accuracy").get<double>();
            nr.jammed = jam.contains(nr.node_id);
            nr.poisoned = poison.contains(nr.node_id);
            r.nodes.push_back(nr);
        }
        r.stats = analysis::accuracy_stats(r.accuracy_values());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed report: ") + e.what());
    }
}

void write_header(std::ostream& out, const ArtifactHeader& header) {
    out << "# dflsim artifact\n";
    out << "# master_seed: " << header.master_seed << '\n';
    out << "# config: " << header.config.dump() << '\n';
}

void write_stats_table(std::ostream& out, const ArtifactHeader& header, const analysis::AccuracyStats& local_only,
                       const analysis::AccuracyStats& dfl) {
    write_header(out, header);
    const auto imp = analysis::improvement_over(dfl, local_only);
    out << "metric\tno_dfl\twith_dfl\tdfl_improvement_pct\n";
    out << "average\t" << format_number(local_only.average) << '\t' << format_number(dfl.average) << '\t'
        << format_number(imp.average) << '\n';
    out << "minimum\t" << format_number(local_only.minimum) << '\t' << format_number(dfl.minimum) << '\t'
        << format_number(imp.minimum) << '\n';
    out << "maximum\t" << format_number(local_only.maximum) << '\t' << format_number(dfl.maximum) << '\t'
        << format_number(imp.maximum) << '\n';
    out << "std_dev\t" << format_number(local_only.std_dev) << '\t' << format_number(dfl.std_dev) << '\t'
        << format_number(imp.std_dev) << '\n';
}

void write_correlation_table(std::ostream& out, const ArtifactHeader& header, const analysis::CorrelationTable& table) {
    write_header(out, header);
    out << "x\ty\tpearson\tspearman\n";
    for (const auto& r : table.rows)
        out << r.lhs << '\t' << r.rhs << '\t' << format_number(r.pearson) << '\t' << format_number(r.spearman) << '\n';
}

void write_histogram(std::ostream& out, const ArtifactHeader& header, const std::vector<analysis::HistogramBin>& local_only,
                     const std::vector<analysis::HistogramBin>& dfl) {
    write_header(out, header);
    out << "bin_left\tcount_no_dfl\tcount_dfl\n";
    for (std::size_t b = 0; b < dfl.size(); ++b)
        out << format_number(dfl[b].left) << '\t' << (b < local_only.size() ? local_only[b].count : 0) << '\t'
            << dfl[b].count << '\n';
}

void write_network_metrics(std::ostream& out, const ArtifactHeader& header, const topo::NetworkMetricsSeries& series) {
    write_header(out, header);
    out << "time_index\tavg_degree\tcomponents\tavg_cc_size\tlargest_cc_size\n";
    for (const auto& m : series)
        out << m.time_index << '\t' << format_number(m.avg_degree) << '\t' << m.component_count << '\t'
            << format_number(m.avg_component_size) << '\t' << m.largest_component_size << '\n';
}

void write_node_stats(std::ostream& out, const ArtifactHeader& header, const std::vector<topo::NodeNetStats>& stats) {
    write_header(out, header);
    out << "node_id\tavg_in_degree\tavg_cc_size\tconnected_time_ratio\n";
    for (std::size_t i = 0; i < stats.size(); ++i)
        out << i << '\t' << format_number(stats[i].avg_in_degree) << '\t' << format_number(stats[i].avg_cc_size) << '\t'
            << format_number(stats[i].connected_time_ratio) << '\n';
}

void write_matrix(std::ostream& out, const ArtifactHeader& header, const Matrix& matrix) {
    write_header(out, header);
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) out << (c ? "\t" : "") << format_number(matrix(r, c));
        out << '\n';
    }
}

namespace {

std::string k_label(const std::optional<attacks::KSpec>& k, std::size_t eligible, attacks::TargetKind kind) {
    return k ? k->label(eligible, kind) : "None";
}

}  // namespace

void write_sweep_table(std::ostream& out, const ArtifactHeader& header, const attacks::SweepResult& sweep,
                       const engine::ExperimentReport& clean_dfl) {
    using attacks::CellVariant;
    using attacks::SweepKind;
    write_header(out, header);
    const auto& spec = sweep.spec;
    const auto n = sweep.eligible;
    const auto& base = clean_dfl.stats;

    auto pa_columns = [&](const char* first) {
        out << first;
        for (const char* metric : {"avg", "min"})
            for (double p : spec.p_a) out << '\t' << metric << "_pa=" << format_number(p);
    };

    switch (spec.kind) {
        case SweepKind::jamming: {
            out << "jammed\tavg\tmin\n";
            out << "None\t" << format_number(base.average) << '\t' << format_number(base.minimum) << '\n';
            for (const auto& c : sweep.cells)
                out << k_label(c.jam_k, n, spec.jam_kind) << '\t' << format_number(c.report.stats.average) << '\t'
                    << format_number(c.report.stats.minimum) << '\n';
            break;
        }
        case SweepKind::poisoning: {
            pa_columns("poisoned");
            out << "\nNone";
            for (int m = 0; m < 2; ++m)
                for (std::size_t i = 0; i < spec.p_a.size(); ++i)
                    out << '\t' << format_number(m == 0 ? base.average : base.minimum);
            out << '\n';
            for (const auto& k : spec.poison_k) {
                std::map<double, const analysis::AccuracyStats*> row;
                for (const auto& c : sweep.cells)
                    if (c.poison_k && c.poison_k->kind == k.kind && c.poison_k->value == k.value) row[c.p_a] = &c.report.stats;
                out << k.label(n, spec.poison_kind);
                for (double p : spec.p_a) out << '\t' << format_number(row.at(p)->average);
                for (double p : spec.p_a) out << '\t' << format_number(row.at(p)->minimum);
                out << '\n';
            }
            break;
        }
        case SweepKind::joint: {
            out << "poisoned\t";
            pa_columns("jammed");
            out << '\n';
            for (const auto& pk : spec.poison_k) {
                for (const auto& jk : spec.jam_k) {
                    std::map<double, const analysis::AccuracyStats*> row;
                    for (const auto& c : sweep.cells)
                        if (c.poison_k->kind == pk.kind && c.poison_k->value == pk.value && c.jam_k->kind == jk.kind &&
                            c.jam_k->value == jk.value)
                            row[c.p_a] = &c.report.stats;
                    out << pk.label(n, spec.poison_kind) << '\t' << jk.label(n, spec.jam_kind);
                    for (double p : spec.p_a) out << '\t' << format_number(row.at(p)->average);
                    for (double p : spec.p_a) out << '\t' << format_number(row.at(p)->minimum);
                    out << '\n';
                }
            }
            break;
        }
        case SweepKind::network: {
            out << "attack\tjam_avg\tjam_min\tpoison_avg\tpoison_min\tjoint_avg\tjoint_min\n";
            for (const auto& k : spec.network_k) {
                auto match = [&](const std::optional<attacks::KSpec>& ck) {
                    return ck && ck->kind == k.kind && ck->value == k.value;
                };
                const analysis::AccuracyStats* jam = nullptr;
                std::map<double, const analysis::AccuracyStats*> poison, joint;
                for (const auto& c : sweep.cells) {
                    if (c.variant == CellVariant::jam && match(c.jam_k)) jam = &c.report.stats;
                    if (c.variant == CellVariant::poison && match(c.poison_k)) poison[c.p_a] = &c.report.stats;
                    if (c.variant == CellVariant::joint && match(c.jam_k)) joint[c.p_a] = &c.report.stats;
                }
                for (double p : spec.p_a) {
                    out << k.label(n, spec.network_kind) << ", p_a=" << format_number(p) << '\t'
                        << format_number(jam->average) << '\t' << format_number(jam->minimum) << '\t'
                        << format_number(poison.at(p)->average) << '\t' << format_number(poison.at(p)->minimum) << '\t'
                        << format_number(joint.at(p)->average) << '\t' << format_number(joint.at(p)->minimum) << '\n';
                }
            }
            break;
        }
    }
}

}  // namespace dflsim::io
