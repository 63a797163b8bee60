#pragma once

#include <charconv>
#include <cstdint>
#include <string>

#include "mdlm/common.hpp"

namespace mdlm::csv {

// Shortest round-trip formatting via to_chars: locale-independent and
// byte-stable, which the reproducibility contract on output CSVs relies on.
inline std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt(int64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt(int v) { return fmt(static_cast<int64_t>(v)); }

} // namespace mdlm::csv
