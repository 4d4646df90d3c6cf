// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>

namespace iml::assets {

struct Asset {
    std::string_view name;
    std::string_view text;
};

/// Prompt templates, one per task tag (REVISE has one per momentum mode).
std::span<const Asset> prompts();
/// Oracle-note formats: head, per-class item and tail separated by "%%".
std::span<const Asset> oracle_notes();

}  // namespace iml::assets
