#pragma once

#include <cstdint>
#include <string>

#include "medsim/errors.hpp"

namespace medsim {

// Little-endian append-only writer over std::string payloads.
class ByteWriter {
  public:
    void u8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(uint16_t v) {
        u8(static_cast<uint8_t>(v & 0xff));
        u8(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        u16(static_cast<uint16_t>(v & 0xffff));
        u16(static_cast<uint16_t>(v >> 16));
    }
    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v & 0xffffffffu));
        u32(static_cast<uint32_t>(v >> 32));
    }
    void bytes(const std::string& s) { out_ += s; }

    std::string take() { return std::move(out_); }
    const std::string& str() const { return out_; }

  private:
    std::string out_;
};

// Bounded reader; any overrun throws Error so malformed messages from
// malicious agents can be dropped per-instance.
class ByteReader {
  public:
    explicit ByteReader(const std::string& s) : s_(s) {}

    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(s_[pos_++]);
    }
    uint16_t u16() {
        uint16_t lo = u8();
        return static_cast<uint16_t>(lo | (static_cast<uint16_t>(u8()) << 8));
    }
    uint32_t u32() {
        uint32_t lo = u16();
        return lo | (static_cast<uint32_t>(u16()) << 16);
    }
    uint64_t u64() {
        uint64_t lo = u32();
        return lo | (static_cast<uint64_t>(u32()) << 32);
    }
    std::string rest() {
        std::string r = s_.substr(pos_);
        pos_ = s_.size();
        return r;
    }
    bool empty() const { return pos_ >= s_.size(); }
    std::size_t remaining() const { return s_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > s_.size()) throw Error("truncated message body");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

std::string to_hex(const std::string& bytes);
std::string from_hex(const std::string& hex);

}  // namespace medsim
