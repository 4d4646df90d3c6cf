// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Note grammars.
//
// Canonical lines carry evidence counts and are what the scripted oracle
// writes:
//
//   Creature A: size=huge (support 17/20)
//   Creature B: no rule (support 0/32)
//
// "k/n" means k of n supporting trajectories showed the named polarity; the
// other n-k showed the opposite one. Free-form notes (the oracle-note formats,
// or whatever a live model writes) are read with extract_rules(), which only
// looks for class names and lexicon adjectives.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iml/benchmark.hpp"

namespace iml {

struct NoteLine {
    std::size_t class_index = 0;
    std::optional<std::size_t> dimension;  // empty for "no rule"
    int polarity = 0;
    std::uint64_t support = 0;
    std::uint64_t total = 0;
    std::string text;  // the line as written

    [[nodiscard]] bool is_rule() const { return dimension.has_value(); }
};

class NoteGrammar {
  public:
    NoteGrammar(const Lexicon& lexicon, const LabelMap& labels) : lexicon_(&lexicon), labels_(&labels) {}

    [[nodiscard]] std::optional<NoteLine> parse_line(std::string_view line) const;
    /// Canonical lines in order; everything else is skipped.
    [[nodiscard]] std::vector<NoteLine> parse(std::string_view text) const;

    [[nodiscard]] std::string rule_line(std::size_t class_index, std::size_t dim, int polarity, std::uint64_t support,
                                        std::uint64_t total) const;
    [[nodiscard]] std::string no_rule_line(std::size_t class_index, std::uint64_t support, std::uint64_t total) const;

    [[nodiscard]] const Lexicon& lexicon() const { return *lexicon_; }
    [[nodiscard]] const LabelMap& labels() const { return *labels_; }

  private:
    const Lexicon* lexicon_;
    const LabelMap* labels_;
};

/// Polarity counts per dimension for one class.
struct DimensionEvidence {
    std::array<std::uint64_t, 2> counts{0, 0};

    void add(const NoteLine& line) {
        counts[line.polarity] += line.support;
        counts[1 - line.polarity] += line.total - line.support;
    }
    [[nodiscard]] std::uint64_t total() const { return counts[0] + counts[1]; }
    /// Ties go to polarity 0.
    [[nodiscard]] int majority() const { return counts[1] > counts[0] ? 1 : 0; }
    [[nodiscard]] double share() const {
        return total() ? static_cast<double>(counts[majority()]) / static_cast<double>(total()) : 0.0;
    }
};

/// Conditions read from free-form notes: per class, dimension -> required polarity.
/// A dimension named with both polarities for the same class is dropped.
using ClassConditions = std::map<std::size_t, int>;
std::vector<ClassConditions> extract_rules(std::string_view notes, const Lexicon& lexicon, const LabelMap& labels);

}  // namespace iml
