#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace hjbv {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Exact inverse of format_double; throws std::invalid_argument on bad text.
double parse_double(const std::string& text);

} // namespace hjbv
