#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "linalg.hpp"

namespace tensorpole::io {

inline constexpr std::string_view version = "0.1.0";
inline constexpr std::string_view units_line = "frequencies MHz (rad/us internally), angles rad, time us";

inline double mhz_to_internal(double mhz) { return two_pi * mhz; }
inline double internal_to_mhz(double w) { return w / two_pi; }

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(std::string_view canonical_config) { return hex64(fnv1a64(canonical_config)); }

// Comment block for CSV artifacts; JSON artifacts carry the same fields under "header".
inline std::string header_comment(std::string_view command, std::string_view canonical_config) {
    std::string s;
    s += "# tensorpole " + std::string(version) + " " + std::string(command) + "\n";
    s += "# config fnv1a64:" + config_hash(canonical_config) + "\n";
    s += "# units: " + std::string(units_line) + "\n";
    return s;
}

inline std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string general(double v, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace tensorpole::io
