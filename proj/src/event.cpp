#include "medsim/event.hpp"

#include <map>
#include <sstream>

#include "medsim/bytes.hpp"
#include "medsim/errors.hpp"

namespace medsim {

AgentId event_subject(const Event& e) {
    return std::visit(
        [](const auto& ev) -> AgentId {
            using T = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<T, SndEvent>) return ev.from;
            else if constexpr (std::is_same_v<T, RecEvent>) return ev.to;
            else return ev.who;
        },
        e);
}

SchedulerView scheduler_view(const GlobalHistory& h, int n, bool mediator) {
    SchedulerView v;
    v.n = n;
    v.mediator = mediator;
    v.events.reserve(h.events.size());
    for (const Event& e : h.events) {
        ViewEvent ve;
        if (auto* s = std::get_if<SchEvent>(&e)) {
            ve.type = ViewEvent::Type::Sch;
            ve.a = s->who;
        } else if (auto* sn = std::get_if<SndEvent>(&e)) {
            ve.type = ViewEvent::Type::Snd;
            ve.a = sn->from;
            ve.b = sn->to;
            ve.index = sn->index;
        } else if (auto* r = std::get_if<RecEvent>(&e)) {
            ve.type = ViewEvent::Type::Rec;
            ve.a = r->to;
            ve.b = r->from;
            ve.index = r->index;
        } else if (auto* c = std::get_if<CompEvent>(&e)) {
            ve.type = ViewEvent::Type::Comp;
            ve.a = c->who;
        } else if (auto* o = std::get_if<OutEvent>(&e)) {
            ve.type = ViewEvent::Type::Out;
            ve.a = o->who;
        } else if (auto* d = std::get_if<DoneEvent>(&e)) {
            ve.type = ViewEvent::Type::Done;
            ve.a = d->who;
        }
        v.events.push_back(ve);
    }
    return v;
}

LocalHistory project_local(const GlobalHistory& h, AgentId id) {
    LocalHistory lh;
    lh.id = id;
    if (id >= 1 && static_cast<std::size_t>(id) < h.inputs.size()) lh.input = h.inputs[id];
    for (const Event& e : h.events)
        if (event_subject(e) == id) lh.events.push_back(e);
    return lh;
}

std::vector<std::optional<std::string>> outputs(const GlobalHistory& h, int n) {
    std::vector<std::optional<std::string>> out(static_cast<std::size_t>(n) + 1);
    for (const Event& e : h.events)
        if (auto* o = std::get_if<OutEvent>(&e))
            if (o->who >= 1 && o->who <= n) out[static_cast<std::size_t>(o->who)] = o->value;
    return out;
}

std::string serialize_trace(const GlobalHistory& h) {
    std::ostringstream os;
    for (const Event& e : h.events) {
        if (auto* s = std::get_if<SchEvent>(&e)) {
            os << "SCH " << s->who << '\n';
        } else if (auto* sn = std::get_if<SndEvent>(&e)) {
            os << "SND " << sn->from << ' ' << sn->to << ' ' << sn->index << ' '
               << to_hex(sn->msg) << '\n';
        } else if (auto* r = std::get_if<RecEvent>(&e)) {
            os << "REC " << r->to << ' ' << r->from << ' ' << r->index << '\n';
        } else if (auto* c = std::get_if<CompEvent>(&e)) {
            os << "COMP " << c->who << ' ' << to_hex(c->value) << '\n';
        } else if (auto* o = std::get_if<OutEvent>(&e)) {
            os << "OUT " << o->who << ' ' << o->value << '\n';
        } else if (auto* d = std::get_if<DoneEvent>(&e)) {
            os << "DONE " << d->who << '\n';
        }
    }
    return os.str();
}

GlobalHistory parse_trace(const std::string& text) {
    GlobalHistory h;
    std::istringstream is(text);
    std::string line;
    // Sent payloads by channel, to resolve REC lines.
    std::map<std::pair<int, int>, std::vector<std::string>> sent;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "SCH") {
            int i;
            ls >> i;
            h.events.push_back(SchEvent{i});
        } else if (tag == "SND") {
            int from, to, idx;
            std::string hex;
            ls >> from >> to >> idx >> hex;
            std::string payload = from_hex(hex);
            sent[{from, to}].push_back(payload);
            h.events.push_back(SndEvent{payload, to, from, idx});
        } else if (tag == "REC") {
            int to, from, idx;
            ls >> to >> from >> idx;
            auto& chan = sent[{from, to}];
            if (idx < 1 || static_cast<std::size_t>(idx) > chan.size())
                throw Error("trace REC refers to unknown message");
            h.events.push_back(RecEvent{chan[static_cast<std::size_t>(idx - 1)], from, to, idx});
        } else if (tag == "COMP") {
            int i;
            std::string hex;
            ls >> i >> hex;
            h.events.push_back(CompEvent{from_hex(hex), i});
        } else if (tag == "OUT") {
            int i;
            ls >> i;
            std::string s;
            std::getline(ls, s);
            if (!s.empty() && s.front() == ' ') s.erase(0, 1);
            h.events.push_back(OutEvent{s, i});
        } else if (tag == "DONE") {
            int i;
            ls >> i;
            h.events.push_back(DoneEvent{i});
        } else {
            throw Error("unknown trace line: " + line);
        }
    }
    return h;
}

}  // namespace medsim
