#pragma once

#include <charconv>
#include <cstdint>
#include <string>

#include "kix/errors.hpp"

namespace kix {

// Shortest decimal form that parses back to the same bits, so emitted logs,
// reports, and checkpoints are byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Whole-string numeric parses; `what` names the file kind in the error.
inline double parse_double(const std::string& s, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw IoError(std::string(what) + " holds a malformed number '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const char* what) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw IoError(std::string(what) + " holds a malformed integer '" + s + "'");
    return v;
}

// Seeds use the full unsigned 64-bit range, so they get their own parse.
inline std::uint64_t parse_uint(const std::string& s, const char* what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw IoError(std::string(what) + " holds a malformed unsigned integer '" + s + "'");
    return v;
}

}  // namespace kix
