#include "medsim/rng.hpp"

#include "medsim/bytes.hpp"

namespace medsim {

uint64_t RandomSource::below(uint64_t n) {
    if (n <= 1) return 0;
    int width = 0;
    uint64_t m = n - 1;
    while (m) {
        ++width;
        m >>= 1;
    }
    for (;;) {
        uint64_t v = 0;
        for (int i = 0; i < width; ++i) v = (v << 1) | bit();
        if (v < n) return v;
    }
}

namespace {
// splitmix64 finalizer; stable across platforms.
uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace

uint64_t mix_seed(uint64_t master, uint64_t salt) { return mix64(master ^ mix64(salt)); }

uint64_t mix_seed(uint64_t master, const std::string& salt) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : salt) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return mix_seed(master, h);
}

std::string to_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

std::string from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw Error("odd-length hex string");
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error("bad hex digit");
    };
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<char>((nib(hex[i]) << 4) | nib(hex[i + 1])));
    return out;
}

}  // namespace medsim
