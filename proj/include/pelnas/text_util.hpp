#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pelnas::text {

/// Shortest decimal form that parses back to the same double.
inline auto format_double(double v) -> std::string
{
    char buf[64];
    auto const res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline auto trim(std::string_view s) -> std::string_view
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

inline auto parse_double(std::string_view s) -> std::optional<double>
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') { s.remove_prefix(1); }
    double v = 0.0;
    auto const res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) { return std::nullopt; }
    return v;
}

inline auto parse_u64(std::string_view s) -> std::optional<std::uint64_t>
{
    s = trim(s);
    std::uint64_t v = 0;
    auto const res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) { return std::nullopt; }
    return v;
}

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline auto split_csv(std::string_view line) -> std::vector<std::string>
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char const c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline auto csv_escape(std::string_view s) -> std::string
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) { return std::string(s); }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') { out += '"'; }
        out += c;
    }
    out += '"';
    return out;
}

} // namespace pelnas::text
