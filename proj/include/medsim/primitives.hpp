#pragma once

#include <map>
#include <set>
#include <vector>

#include "medsim/engine.hpp"

namespace medsim {

// Growth log of per-agent accumulative sets: (step, element) additions.
struct ObserverLog {
    std::map<AgentId, std::vector<std::pair<long, int>>> additions;
};

// The three defining clauses of (M1,M2)-uniformity, checked over a completed
// run: containment in {1..M2}, eventual size >= M1, and eventual equality of
// honest observers.
bool uniformity_check(const ObserverLog& log, const std::set<AgentId>& honest, int m1, int m2);

// Convenience for building observer logs out of recorded completions whose
// key starts with the given prefix and whose initiator byte is the element.
ObserverLog observers_from_recorder(const Recorder& rec, const std::string& tag,
                                    const std::string& key_prefix);

}  // namespace medsim
