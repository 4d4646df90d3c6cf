// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/prompts.hpp"

#include <cctype>

#include "iml/assets.hpp"
#include "iml/common.hpp"

namespace iml {

std::string_view prompt_template(std::string_view name) {
    for (const auto& a : assets::prompts()) {
        if (a.name == name) return a.text;
    }
    throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

std::string prompt_templates_hash() {
    Fnv1a h;
    h.update(kPromptTemplateVersion);
    for (const auto& a : assets::prompts()) {
        h.update_u64(a.name.size()).update(a.name).update_u64(a.text.size()).update(a.text);
    }
    return h.hex();
}

std::string substitute_slots(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const char c = tmpl[i];
        if (c != '{') {
            out.push_back(c);
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_' ||
                                   std::isdigit(static_cast<unsigned char>(tmpl[j])))) {
            ++j;
        }
        if (j == i + 1 || j >= tmpl.size() || tmpl[j] != '}') {
            out.push_back(c);
            ++i;
            continue;
        }
        const std::string slot(tmpl.substr(i + 1, j - i - 1));
        const auto it = values.find(slot);
        if (it == values.end()) throw ConfigError("template slot {" + slot + "} has no value");
        out += it->second;
        i = j + 1;
    }
    return out;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    // Asset files end with a newline; prompts do not.
    while (!tmpl.empty() && tmpl.back() == '\n') tmpl.remove_suffix(1);
    return substitute_slots(tmpl, values);
}

std::string_view to_string(ParseFailure f) {
    switch (f) {
        case ParseFailure::NoMarker: return "no-marker";
        case ParseFailure::UnknownLabel: return "unknown-label";
        case ParseFailure::BackendError: return "backend-error";
    }
    return "no-marker";
}

std::optional<ParseFailure> parse_failure_from_string(std::string_view s) {
    for (auto f : {ParseFailure::NoMarker, ParseFailure::UnknownLabel, ParseFailure::BackendError}) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

ParsedAnswer parse_answer(std::string_view raw, const std::vector<std::string>& classes) {
    ParsedAnswer out;
    const std::string folded = casefold(raw);
    static constexpr std::string_view kMarker = "finish[";
    const auto pos = folded.rfind(kMarker);
    if (pos == std::string::npos) {
        out.failure = ParseFailure::NoMarker;
        return out;
    }
    const auto open = pos + kMarker.size();
    const auto close = folded.find(']', open);
    if (close == std::string::npos) {
        out.failure = ParseFailure::NoMarker;
        return out;
    }
    out.extracted = std::string(raw.substr(open, close - open));
    const auto norm = normalize_label(out.extracted);
    for (const auto& c : classes) {
        if (normalize_label(c) == norm) {
            out.label = c;
            return out;
        }
    }
    out.failure = ParseFailure::UnknownLabel;
    return out;
}

std::map<std::string, std::string> split_sections(std::string_view text) {
    std::map<std::string, std::string> out;
    std::string current;
    std::vector<std::string> buf;
    bool in_section = false;
    auto flush = [&] {
        if (!in_section) return;
        while (!buf.empty() && trim(buf.back()).empty()) buf.pop_back();
        std::size_t b = 0;
        while (b < buf.size() && trim(buf[b]).empty()) ++b;
        std::vector<std::string> kept(buf.begin() + static_cast<std::ptrdiff_t>(b), buf.end());
        out.emplace(current, join(kept, "\n"));
        buf.clear();
    };
    for (const auto& line : split_lines(text)) {
        if (line.rfind("### ", 0) == 0) {
            flush();
            current = trim(std::string_view(line).substr(4));
            in_section = true;
            continue;
        }
        if (in_section) buf.push_back(line);
    }
    flush();
    return out;
}

std::optional<std::string> header_value(std::string_view text, std::string_view key) {
    const std::string prefix = std::string(key) + ":";
    for (const auto& line : split_lines(text)) {
        if (line.rfind("### ", 0) == 0) break;
        if (line.rfind(prefix, 0) == 0) return trim(std::string_view(line).substr(prefix.size()));
    }
    return std::nullopt;
}

}  // namespace iml
