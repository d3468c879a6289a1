#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace medsim {

// Agents are 1..n; the mediator, when present, is principal 0.
using AgentId = int;
constexpr AgentId kMediator = 0;

struct SchEvent {
    AgentId who;
};
struct SndEvent {
    std::string msg;
    AgentId to;
    AgentId from;
    int index;  // index of this message in the (from,to) channel, 1-based
};
struct RecEvent {
    std::string msg;
    AgentId from;
    AgentId to;
    int index;  // matches the SndEvent index on the same channel
};
struct CompEvent {
    std::string value;
    AgentId who;
};
struct OutEvent {
    std::string value;
    AgentId who;
};
struct DoneEvent {
    AgentId who;
};

using Event = std::variant<SchEvent, SndEvent, RecEvent, CompEvent, OutEvent, DoneEvent>;

AgentId event_subject(const Event& e);

struct GlobalHistory {
    std::vector<std::string> inputs;  // index 0 unused; inputs[i] for agent i
    std::vector<Event> events;
};

struct LocalHistory {
    AgentId id = 0;
    std::string input;
    std::vector<Event> events;  // subsequence of the global history involving id
};

// Instance labels ride on view events when the run is configured to expose
// them; the label octets mirror the wire header (kind, initiator, index,
// round_tag) plus the subkind byte.
struct ViewLabel {
    uint8_t kind = 0;
    uint8_t initiator = 0;
    uint16_t index = 0;
    uint16_t round = 0;
    uint8_t subkind = 0;
};

struct ViewEvent {
    enum class Type { Sch, Snd, Rec, Comp, Out, Done };
    Type type;
    AgentId a = 0;        // Sch/Comp/Out/Done: subject; Snd: sender; Rec: recipient
    AgentId b = 0;        // Snd: recipient; Rec: sender
    int index = 0;        // Rec: channel index of the delivered message; Snd: channel index
    std::optional<ViewLabel> label;  // present only when labels are exposed
};

struct SchedulerView {
    int n = 0;
    bool mediator = false;
    std::vector<ViewEvent> events;
};

// Payload-stripping projection (no labels; labels exist only on live views
// produced by an engine configured to expose them).
SchedulerView scheduler_view(const GlobalHistory& h, int n, bool mediator);

LocalHistory project_local(const GlobalHistory& h, AgentId id);

// Last Out per agent; std::nullopt is the non-termination sentinel.
std::vector<std::optional<std::string>> outputs(const GlobalHistory& h, int n);

// Line-delimited textual trace, one event per line. Stable format:
//   SCH i | SND from to idx payloadhex | REC to from idx | COMP i valuehex |
//   OUT i s | DONE i
std::string serialize_trace(const GlobalHistory& h);
GlobalHistory parse_trace(const std::string& text);

}  // namespace medsim
