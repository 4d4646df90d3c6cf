// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Value types shared by the learning loop, the run store and evaluation.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iml/benchmark.hpp"
#include "iml/prompts.hpp"

namespace iml {

inline constexpr std::string_view kInitialNotes = "no idea";

/// The learnable state: one note per class plus the merged note used at inference.
struct NotesState {
    std::map<std::string, std::string> per_class;
    std::string merged{kInitialNotes};
    std::uint64_t version = 0;
    std::uint64_t samples_seen = 0;

    static NotesState initial(const LabelMap& labels);
    /// Initial state whose merged note is `notes`; used by evaluation.
    static NotesState with_merged(const LabelMap& labels, std::string notes);

    friend bool operator==(const NotesState&, const NotesState&) = default;
};

struct TrajectoryRecord {
    std::uint64_t sample_id = 0;
    std::string observation;
    std::uint64_t notes_version = 0;
    std::string raw_action;
    std::optional<std::string> parsed_answer;
    std::optional<ParseFailure> failure;
    int reward = 0;
    std::string gold;

    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// One per-class revision inside a revision event.
struct ClassRevision {
    std::string label;
    std::string previous;
    std::string batch;
    std::string revised;
    bool momentum_violation = false;

    friend bool operator==(const ClassRevision&, const ClassRevision&) = default;
};

struct RevisionRecord {
    std::size_t step = 0;
    std::uint64_t version_from = 0;
    std::uint64_t version_to = 0;
    std::uint64_t trajectories = 0;
    std::vector<ClassRevision> classes;
    std::string merged;

    friend bool operator==(const RevisionRecord&, const RevisionRecord&) = default;
};

struct StepRecord {
    std::size_t step = 0;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    std::uint64_t notes_version = 0;
    std::string snapshot_id;
    std::size_t parse_failures = 0;
    std::vector<std::uint64_t> revisions;  // versions produced during this step
    std::size_t momentum_violations = 0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

struct RunHistory {
    ConfigEcho config;
    std::string dataset_hash;
    std::string template_hash;
    std::vector<StepRecord> steps;

    [[nodiscard]] std::size_t revision_events() const;
    [[nodiscard]] std::vector<double> accuracies() const;
    /// Canonical text form; two runs are identical iff these strings are.
    [[nodiscard]] std::string to_text() const;

    friend bool operator==(const RunHistory&, const RunHistory&) = default;
};

std::string snapshot_id(std::uint64_t version);

}  // namespace iml
