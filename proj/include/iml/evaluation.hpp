// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Scoring, curve smoothing, ability tests, the few-shot baseline and
// stagnation diagnostics.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iml/benchmark.hpp"
#include "iml/chat.hpp"
#include "iml/learning.hpp"
#include "iml/notes.hpp"
#include "iml/records.hpp"

namespace iml {

/// 1 iff `pred` names `gold` after trim and case-fold.
int exact_match(const std::optional<std::string>& pred, const std::string& gold);
double accuracy(std::span<const TrajectoryRecord> trajectories);
/// Trailing moving average: out[t] = mean(values[max(0, t-w+1) .. t]).
std::vector<double> smooth(std::span<const double> values, std::size_t window);
double mean(std::span<const double> values);
/// Sample standard deviation (n-1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

enum class AbilityKind { Inference, Induction, Revision };
std::string_view to_string(AbilityKind kind);
std::optional<AbilityKind> parse_ability_kind(std::string_view s);

struct AbilityReport {
    AbilityKind kind = AbilityKind::Inference;
    std::vector<std::string> trial_ids;  // format names, group ids or pair ids
    std::vector<double> values;
    double mean = 0.0;
    double std = 0.0;
    ConfigEcho config;

    static AbilityReport from_values(AbilityKind kind, std::vector<std::string> trial_ids, std::vector<double> values,
                                     ConfigEcho config);
    /// Columns (test, trial, value) with trailing mean and std rows.
    [[nodiscard]] std::string to_csv() const;
    /// "mean ± std" in percent.
    [[nodiscard]] std::string summary() const;
};

/// The ground-truth rules rendered in each shipped note format.
struct OracleNoteSet {
    std::vector<std::string> names;
    std::vector<std::string> texts;

    static OracleNoteSet render(const Lexicon& lexicon, const LabelMap& labels);
};

struct EvalSettings {
    Decoding answer_decoding{0.0, 128};
    Decoding notes_decoding{0.0, 1024};
    std::size_t concurrency = 8;
    std::uint64_t seed = 1;
};

/// Accuracy of `notes` (used as merged notes) on `split`.
double notes_accuracy(const std::string& notes, std::span<const Sample> split, ChatBackend& backend,
                      const LabelMap& labels, const EvalSettings& settings);

AbilityReport inference_ability_test(const OracleNoteSet& notes, std::span<const Sample> split, ChatBackend& backend,
                                     const LabelMap& labels, const EvalSettings& settings);

struct InductionTestResult {
    AbilityReport report;
    std::vector<std::string> group_notes;  // all groups, in group order
    std::vector<std::size_t> chosen;       // evaluated group indices
};

/// Answers `samples` with "no idea" notes, induces one note per group of
/// consecutive trajectories, then evaluates k seeded groups on all samples.
InductionTestResult induction_ability_test(std::span<const Sample> samples, std::size_t n_groups, std::size_t k,
                                           ChatBackend& induction, ChatBackend& inference, const LabelMap& labels,
                                           const EvalSettings& settings);

struct RevisionPair {
    std::size_t a = 0;
    std::size_t b = 0;
    double acc_a = 0.0;
    double acc_b = 0.0;
    double acc_merged = 0.0;
    std::string merged;
};

struct RevisionTestResult {
    AbilityReport report;
    std::vector<RevisionPair> pairs;
};

/// acc(merged) - min(acc(a), acc(b)).
double revision_delta(double acc_a, double acc_b, double acc_merged);

/// Draws n_pairs disjoint seeded pairs from `pool`, merges each with one REVISE
/// call and reports the accuracy deltas.
RevisionTestResult revision_ability_test(std::span<const std::string> pool, std::size_t n_pairs,
                                         ChatBackend& revision, ChatBackend& inference, std::span<const Sample> split,
                                         const LabelMap& labels, const EvalSettings& settings);

struct IclResult {
    double accuracy = 0.0;
    std::vector<Sample> exemplars;
    std::vector<Sample> split;
    std::string prompt_preview;  // prompt of the first scored sample
};

std::string exemplar_block(std::span<const Sample> exemplars);
ChatRequest assemble_baseline_prompt(std::span<const Sample> exemplars, const Sample& sample, const LabelMap& labels,
                                     Decoding decoding);

/// k-shot baseline with at least one exemplar per class. Exemplars are drawn
/// from `pool` and removed from it; the remaining samples (at most
/// `split_size` if given) are scored.
IclResult icl_baseline(std::span<const Sample> pool, std::size_t k, ChatBackend& backend, const LabelMap& labels,
                       const EvalSettings& settings, std::optional<std::size_t> split_size = std::nullopt);

struct RevisionFlags {
    std::size_t step = 0;
    std::uint64_t version_to = 0;
    bool verbatim_unchanged = false;
    std::vector<std::string> conflicts;  // classes kept unchanged against contrary batch evidence
};

struct StagnationReport {
    std::vector<RevisionFlags> events;
    std::map<std::size_t, double> unchanged_rate;  // per step with revisions
    std::size_t longest_unchanged_streak = 0;
    std::size_t trailing_unchanged = 0;
    std::size_t unchanged_under_conflict = 0;

    [[nodiscard]] std::string to_csv() const;
};

/// `grammar` enables conflict detection (canonical-grammar runs only).
StagnationReport stagnation_metrics(const RunHistory& history, std::span<const NotesState> snapshots,
                                    std::span<const RevisionRecord> revisions, const NoteGrammar* grammar);

/// Columns (step, raw_accuracy, smoothed_accuracy).
std::string curve_csv(const RunHistory& history, std::size_t window);

}  // namespace iml
