#include "medsim/primitives.hpp"

#include <algorithm>

namespace medsim {

bool uniformity_check(const ObserverLog& log, const std::set<AgentId>& honest, int m1, int m2) {
    std::map<AgentId, std::set<int>> final_sets;
    for (AgentId i : honest) final_sets[i] = {};
    for (const auto& [agent, adds] : log.additions) {
        if (!honest.count(agent)) continue;
        for (auto& [step, elem] : adds) {
            if (elem < 1 || elem > m2) return false;  // escapes {1..M2}
            final_sets[agent].insert(elem);
        }
    }
    const std::set<int>* first = nullptr;
    for (AgentId i : honest) {
        const auto& s = final_sets[i];
        if (static_cast<int>(s.size()) < m1) return false;  // never reaches M1
        if (!first) first = &s;
        else if (*first != s) return false;  // honest observers never converge
    }
    return true;
}

ObserverLog observers_from_recorder(const Recorder& rec, const std::string& tag,
                                    const std::string& key_prefix) {
    ObserverLog log;
    for (const auto& e : rec.entries()) {
        if (e.tag != tag) continue;
        if (e.key.rfind(key_prefix, 0) != 0) continue;
        // element = initiator field of the label "kind:initiator:index:round..."
        std::size_t c1 = e.key.find(':');
        if (c1 == std::string::npos) continue;
        std::size_t c2 = e.key.find(':', c1 + 1);
        if (c2 == std::string::npos) continue;
        int elem = std::stoi(e.key.substr(c1 + 1, c2 - c1 - 1));
        log.additions[e.agent].emplace_back(e.step, elem);
    }
    return log;
}

}  // namespace medsim
