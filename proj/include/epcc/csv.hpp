#pragma once

#include <charconv>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace epcc::csv {

/// Shortest representation that parses back to the same double.
inline std::string format(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

inline void header(std::ostream& out, std::initializer_list<std::string_view> columns) {
    bool first = true;
    for (auto c : columns) {
        if (!first) out << ',';
        out << c;
        first = false;
    }
    out << '\n';
}

inline void row(std::ostream& out, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        out << format(values[i]);
    }
    out << '\n';
}

} // namespace epcc::csv
