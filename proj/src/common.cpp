// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/common.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <limits>

namespace iml {

std::string Fnv1a::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
}

std::string fnv1a_hex(std::string_view bytes) { return Fnv1a{}.update(bytes).hex(); }

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw PreconditionError("Rng::below: bound must be positive");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string casefold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string normalize_label(std::string_view s) {
    return casefold(join(split_whitespace(s), " "));
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) out.emplace_back(s.substr(start));
            break;
        }
        auto line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = nl + 1;
    }
    return out;
}

std::vector<std::string> alpha_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

bool starts_with_words(std::string_view text, std::string_view prefix_text, std::size_t word_count) {
    auto required = split_whitespace(prefix_text);
    if (required.size() > word_count) required.resize(word_count);
    const auto got = split_whitespace(text);
    if (got.size() < required.size()) return false;
    return std::equal(required.begin(), required.end(), got.begin());
}

std::string leading_words(std::string_view text, std::size_t word_count) {
    std::size_t i = 0;
    std::size_t seen = 0;
    std::size_t end = 0;
    while (i < text.size() && seen < word_count) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        while (i < text.size() && !is_space(text[i])) ++i;
        end = i;
        ++seen;
    }
    return std::string(text.substr(0, end));
}

}  // namespace iml
