// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Four-class creature classification benchmark.
//
// Every sample is one row of a 10-column truth table rendered as text: each
// column is a creature dimension with two opposing adjective lists, and a word
// is drawn from the list selected by the bit. The first two bits decide the
// label; the remaining eight are distractors.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace iml {

using Bits = std::vector<std::uint8_t>;

struct DimensionSpec {
    std::string name;
    std::vector<std::string> polarity0;
    std::vector<std::string> polarity1;

    [[nodiscard]] const std::vector<std::string>& words(int polarity) const {
        return polarity == 0 ? polarity0 : polarity1;
    }
};

struct WordSense {
    std::size_t dimension;
    int polarity;
};

class Lexicon {
  public:
    Lexicon() = default;
    /// Validates: disjoint polarity lists, globally unique lower-case words.
    explicit Lexicon(std::vector<DimensionSpec> dimensions);

    [[nodiscard]] const std::vector<DimensionSpec>& dimensions() const { return dims_; }
    [[nodiscard]] std::size_t size() const { return dims_.size(); }
    [[nodiscard]] const DimensionSpec& operator[](std::size_t i) const { return dims_[i]; }
    [[nodiscard]] std::optional<WordSense> lookup(std::string_view word) const;
    /// First word of the polarity list; used when writing rules.
    [[nodiscard]] const std::string& representative(std::size_t dim, int polarity) const {
        return dims_[dim].words(polarity).front();
    }
    [[nodiscard]] std::optional<std::size_t> dimension_index(std::string_view name) const;

    [[nodiscard]] std::string to_text() const;
    static Lexicon from_text(std::string_view text);
    [[nodiscard]] std::string hash() const;

    friend bool operator==(const Lexicon& a, const Lexicon& b) { return a.to_text() == b.to_text(); }

  private:
    std::vector<DimensionSpec> dims_;
    std::unordered_map<std::string, WordSense> index_;
};

Lexicon build_default_lexicon();

/// Bijection from the first two feature bits to abstract class names.
class LabelMap {
  public:
    /// Labels for (0,0), (0,1), (1,0), (1,1).
    LabelMap();
    explicit LabelMap(std::array<std::string, 4> labels);

    [[nodiscard]] const std::string& operator()(int b0, int b1) const { return labels_[b0 * 2 + b1]; }
    [[nodiscard]] const std::array<std::string, 4>& labels() const { return labels_; }
    /// Index of a label in class order, matched exactly.
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view label) const;

  private:
    std::array<std::string, 4> labels_;
};

struct Sample {
    std::uint64_t id = 0;
    Bits bits;
    std::vector<std::string> words;
    std::string question;
    std::string label;
};

struct GenConfig {
    std::size_t n_dimensions = 10;
    std::size_t n_classes = 4;
    std::size_t combos_per_entry = 4;
    std::size_t entries_per_class = 200;
    bool paper_literal_mode = false;
    std::uint64_t seed = 7;

    /// Rows actually used per class after applying paper_literal_mode.
    [[nodiscard]] std::size_t effective_entries_per_class() const {
        return paper_literal_mode ? 32 : entries_per_class;
    }
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
    GenConfig config;
    std::string lexicon_hash;
    std::vector<std::uint32_t> heldout_entries;  // truth-table row indices
    std::vector<std::uint32_t> used_entries;
};

/// Question wording; {0}..{9} take the adjectives, {classes} the candidate list.
extern const std::string_view kDefaultQuestionTemplate;

std::string render_question(const std::vector<std::string>& words, std::string_view tmpl,
                            const std::vector<std::string>& class_names);

/// Truth-table row index -> bit vector, most significant bit first.
Bits row_bits(std::uint32_t row, std::size_t n_dimensions);

std::string oracle_label(const Bits& bits, const LabelMap& label_map);

Dataset generate_dataset(const GenConfig& config, const Lexicon& lexicon, const LabelMap& label_map);

/// Recovers the feature bits from question text by adjective lookup.
/// Returns nullopt unless every dimension is named exactly once.
std::optional<Bits> recover_bits(std::string_view question, const Lexicon& lexicon);

struct DatasetReport {
    std::map<std::string, std::size_t> class_counts;
    std::size_t duplicate_word_vectors = 0;
    /// Mutual information (bits) of each distractor dimension with the label, by dimension index.
    std::map<std::size_t, double> distractor_mi_bits;
    /// Best single-feature classifier accuracy for each distractor dimension.
    std::map<std::size_t, double> distractor_lone_accuracy;
    double oracle_accuracy = 0.0;
    std::size_t roundtrip_failures = 0;
    std::vector<std::string> failures;

    [[nodiscard]] bool ok() const { return failures.empty(); }
    [[nodiscard]] std::string to_text() const;
};

DatasetReport verify_dataset(const Dataset& dataset, const Lexicon& lexicon, const LabelMap& label_map);

// Line-delimited JSON: a header record then one record per sample.
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(std::string_view text);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_hash(const Dataset& dataset);

}  // namespace iml
