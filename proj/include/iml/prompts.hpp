// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iml {

inline constexpr std::string_view kPromptTemplateVersion = "prompts/v1";

/// Named template text; throws ConfigError for unknown names.
std::string_view prompt_template(std::string_view name);

/// Hash over every prompt template and the version tag.
std::string prompt_templates_hash();

/// Single-pass substitution of {slot} markers. Substituted text is never
/// rescanned. Unfilled slots are errors.
std::string substitute_slots(std::string_view tmpl, const std::map<std::string, std::string>& values);
/// substitute_slots() after dropping the template's trailing newlines.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

enum class ParseFailure { NoMarker, UnknownLabel, BackendError };
std::string_view to_string(ParseFailure f);
std::optional<ParseFailure> parse_failure_from_string(std::string_view s);

struct ParsedAnswer {
    std::optional<std::string> label;  // canonical class name when parsed
    std::optional<ParseFailure> failure;
    std::string extracted;  // raw marker content, if any

    [[nodiscard]] bool ok() const { return label.has_value(); }
};

/// Takes the last Finish[...] (marker is case-insensitive), trims, collapses
/// whitespace, case-folds and matches against the class names.
ParsedAnswer parse_answer(std::string_view raw, const std::vector<std::string>& classes);

/// Sections introduced by lines of the form "### <name>". Each section runs to
/// the next such line (or the end), without surrounding blank lines.
std::map<std::string, std::string> split_sections(std::string_view text);
/// Value of the first "<key>: <value>" line.
std::optional<std::string> header_value(std::string_view text, std::string_view key);

}  // namespace iml
