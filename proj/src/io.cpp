#include "hjbverify/io.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hjbv {

double parse_double(const std::string& text) {
    if (text == "nan" || text == "-nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (text == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (text == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return v;
}

} // namespace hjbv
