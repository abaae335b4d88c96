#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "termalign/errors.hpp"

namespace termalign {

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_ascii_space(s[b])) ++b;
    while (e > b && is_ascii_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// ASCII lowercasing; bytes >= 0x80 pass through so UTF-8 stays intact.
inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// Lowercase, trim, and collapse internal whitespace runs to single spaces.
// Empty output is legal; callers that need non-empty text filter afterwards.
inline std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (is_ascii_space(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

// Splits a namespaced identifier at the first colon. Prefix is empty when
// there is no colon.
inline std::pair<std::string_view, std::string_view> split_id(std::string_view id) {
    auto pos = id.find(':');
    if (pos == std::string_view::npos) return {std::string_view{}, id};
    return {id.substr(0, pos), id.substr(pos + 1)};
}

// Canonical identifier form: trimmed, prefix uppercased, and dots stripped
// from ICD-10 local ids ("ICD10:Q87.8" == "ICD10:Q878"). Sources disagree on
// the dotted form, so everything is compared dotless.
inline std::string normalize_id(std::string_view raw) {
    std::string t = trim(raw);
    auto [prefix, local] = split_id(t);
    if (prefix.empty()) return t;
    std::string p(prefix);
    for (char& c : p)
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    std::string l = trim(local);
    if (p.rfind("ICD10", 0) == 0)
        l.erase(std::remove(l.begin(), l.end(), '.'), l.end());
    return p + ":" + l;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Shortest round-trip formatting; locale independent, so repeated runs emit
// byte-identical files.
inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw Error("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_uint(std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw Error("not an unsigned integer: '" + std::string(s) + "'");
    return v;
}

}  // namespace termalign
