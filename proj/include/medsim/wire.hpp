#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "medsim/bytes.hpp"
#include "medsim/event.hpp"

namespace medsim {

// Instance kinds carried in the canonical message header.
enum class Kind : uint8_t {
    Vss = 1,
    Cons = 2,
    Bcast = 3,
    Acs = 4,
    Cc = 5,
    Open = 6,
    GShare = 7,
    ProceedI = 0x10,
    ProceedD = 0x11,
    Milestone = 0x12,
};

// Every message of an instance carries this label; together with the
// subkind byte it is the full routing key.
struct InstanceLabel {
    Kind kind = Kind::Vss;
    uint8_t initiator = 0;
    uint16_t index = 0;
    uint16_t round = 0;

    auto operator<=>(const InstanceLabel&) const = default;

    std::string str() const {
        return std::to_string(static_cast<int>(kind)) + ":" + std::to_string(initiator) + ":" +
               std::to_string(index) + ":" + std::to_string(round);
    }
};

struct WireMsg {
    InstanceLabel label;
    uint8_t subkind = 0;
    std::string body;
};

// Header layout: kind(1) initiator(1) index(2) round(2) subkind(1), payload.
inline std::string encode_wire(const WireMsg& m) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(m.label.kind));
    w.u8(m.label.initiator);
    w.u16(m.label.index);
    w.u16(m.label.round);
    w.u8(m.subkind);
    w.bytes(m.body);
    return w.take();
}

inline std::optional<WireMsg> decode_wire(const std::string& payload) {
    if (payload.size() < 7) return std::nullopt;
    ByteReader r(payload);
    WireMsg m;
    m.label.kind = static_cast<Kind>(r.u8());
    m.label.initiator = r.u8();
    m.label.index = r.u16();
    m.label.round = r.u16();
    m.subkind = r.u8();
    m.body = r.rest();
    return m;
}

inline std::optional<ViewLabel> peek_label(const std::string& payload) {
    auto m = decode_wire(payload);
    if (!m) return std::nullopt;
    ViewLabel v;
    v.kind = static_cast<uint8_t>(m->label.kind);
    v.initiator = m->label.initiator;
    v.index = m->label.index;
    v.round = m->label.round;
    v.subkind = m->subkind;
    return v;
}

}  // namespace medsim
