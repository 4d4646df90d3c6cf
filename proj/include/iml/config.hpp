// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Flat "key = value" configuration shared by every subcommand. Keys are listed
// in docs/config.md; unknown keys are rejected.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "iml/backend.hpp"
#include "iml/benchmark.hpp"
#include "iml/evaluation.hpp"
#include "iml/learning.hpp"
#include "iml/records.hpp"

namespace iml {

struct EvalConfig {
    std::uint64_t seed = 1;
    std::size_t split_size = 320;
    std::size_t n_groups = 80;
    std::size_t k = 5;
    std::size_t n_pairs = 5;
    std::size_t icl_k = 4;
};

class CliConfig {
  public:
    CliConfig();

    /// Applies "key = value" lines ('#' starts a comment).
    void load_text(std::string_view text, std::string_view origin = "config");
    void load_file(const std::string& path);
    /// Applies one "key=value" override.
    void set(std::string_view assignment);
    void set(const std::string& key, const std::string& value);

    [[nodiscard]] GenConfig gen() const;
    [[nodiscard]] LearningConfig learning() const;
    /// The backend for a phase ("inference", "induction", "revision"), with
    /// any "<phase>.backend.*" keys applied over "backend.*".
    [[nodiscard]] BackendConfig backend(std::string_view phase) const;
    [[nodiscard]] EvalConfig eval() const;

    /// Every effective value, sorted by key.
    [[nodiscard]] ConfigEcho echo() const;
    [[nodiscard]] static std::vector<std::string> known_keys();

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace iml
