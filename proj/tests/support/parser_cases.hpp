// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "iml/prompts.hpp"

namespace testing {

struct ParserCase {
    std::string_view raw;
    std::optional<std::string_view> label;
    std::optional<iml::ParseFailure> failure;
};

inline constexpr auto kNoMarker = iml::ParseFailure::NoMarker;
inline constexpr auto kUnknown = iml::ParseFailure::UnknownLabel;

inline const std::array<ParserCase, 20> kParserCases{{
    {"Finish[Creature A]", "Creature A", std::nullopt},
    {"I think... Finish[ creature a ]", "Creature A", std::nullopt},
    {"The answer is Creature A", std::nullopt, kNoMarker},
    {"finish[Creature B]", "Creature B", std::nullopt},
    {"FINISH[CREATURE C]", "Creature C", std::nullopt},
    {"Finish[Creature D].", "Creature D", std::nullopt},
    {"Finish[Creature A] Finish[Creature B]", "Creature B", std::nullopt},
    {"Finish[Creature E]", std::nullopt, kUnknown},
    {"Finish[]", std::nullopt, kUnknown},
    {"Finish[Creature A", std::nullopt, kNoMarker},
    {"", std::nullopt, kNoMarker},
    {"Finish[\tCreature   B\n]", "Creature B", std::nullopt},
    {"Answer: Finish[Creature C]\nThat is my answer.", "Creature C", std::nullopt},
    {"Finish [Creature A]", std::nullopt, kNoMarker},
    {"Finish(Creature A)", std::nullopt, kNoMarker},
    {"Finish[Creature A or Creature B]", std::nullopt, kUnknown},
    {"Finish[A]", std::nullopt, kUnknown},
    {"Thought: it is huge and red.\nAction: Finish[creature a]", "Creature A", std::nullopt},
    {"Finish[Creature B] ... actually Finish[Creature Z]", std::nullopt, kUnknown},
    {"Finish[Creature D ]\n\n", "Creature D", std::nullopt},
}};

}  // namespace testing
