#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dflsim/types.hpp"

namespace dflsim::attacks {

enum class TargetKind {
    dfl_rank,    // Top K_J: best clean-DFL accuracy
    local_rank,  // Top K_P: best local-only accuracy
    degree,      // Top K_d: average in-degree
    cc_size,     // Top K_C: average connected-component size
    conn_time,   // Top K_c: connected-time ratio
    explicit_list,
    random,
    all,
};

struct TargetRecord {
    std::string role;  // "jam" or "poison"
    TargetKind kind = TargetKind::explicit_list;
    std::size_t k = 0;
};

struct AttackPlan {
    std::vector<NodeId> jam_targets;     // in selection order
    std::vector<NodeId> poison_targets;  // in selection order; data nodes only
    double p_a = 0.0;
    std::vector<TargetRecord> provenance;

    bool empty() const { return jam_targets.empty() && poison_targets.empty(); }
};

const char* to_string(TargetKind kind);
// Throws ConfigError for unknown names.
TargetKind parse_target_kind(const std::string& name);

}  // namespace dflsim::attacks
