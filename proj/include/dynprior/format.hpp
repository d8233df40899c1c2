#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <system_error>

namespace dynprior {

/// Shortest round-trip decimal form; "nan" for NaN. Locale-independent, so
/// emitted files are byte-stable across runs and machines.
inline std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

inline std::string format_count(std::uint64_t x) { return std::to_string(x); }

}  // namespace dynprior
