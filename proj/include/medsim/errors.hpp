#pragma once

#include <stdexcept>
#include <string>

namespace medsim {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DivisionByZero : Error {
    DivisionByZero() : Error("division by zero in field") {}
};

struct Inconsistent : Error {
    explicit Inconsistent(const std::string& what = "points do not lie on the interpolant")
        : Error(what) {}
};

struct DecodeFailure : Error {
    explicit DecodeFailure(const std::string& what = "no polynomial within error budget")
        : Error(what) {}
};

struct NotRealizable : Error {
    explicit NotRealizable(const std::string& what = "no degree-bounded polynomial fits")
        : Error(what) {}
};

struct SchedulerViolation : Error {
    explicit SchedulerViolation(const std::string& what) : Error(what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

struct EncodingOverflow : Error {
    explicit EncodingOverflow(const std::string& what) : Error(what) {}
};

struct DesyncError : Error {
    explicit DesyncError(const std::string& what) : Error(what) {}
};

// Raised by TapeSource when the enumeration prefix is exhausted; the
// distribution enumerator catches it and forks the prefix.
struct TapeExhausted {
    std::size_t bits_needed;
};

}  // namespace medsim
