// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// The in-memory learning loop.
//
// Each step answers a batch of questions with the current merged notes
// (inference), summarizes the resulting trajectories per class in minibatches
// and folds the summaries into running batch notes (induction), and, every
// `accumulation_step` trajectories, rewrites the per-class notes from the batch
// notes and merges them (revision). Model weights never change; only notes do.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iml/benchmark.hpp"
#include "iml/chat.hpp"
#include "iml/records.hpp"

namespace iml {

class RunStore;

enum class MomentumKind { None, Partial, Full };
std::string_view to_string(MomentumKind kind);
std::optional<MomentumKind> parse_momentum(std::string_view s);

struct MomentumMode {
    MomentumKind kind = MomentumKind::Full;
    /// Words of the previous note a Partial-momentum reply must start with.
    std::size_t prefix_words = 10;
};

enum class MergeMode { Chat, Concat };

struct LearningConfig {
    std::size_t batch_size = 320;
    std::size_t minibatch_size = 32;
    std::size_t accumulation_step = 320;
    MomentumMode momentum;
    std::size_t max_steps = 10;
    bool cycle_data = false;
    std::size_t smoothing_window = 3;
    MergeMode merge_mode = MergeMode::Chat;
    std::size_t concurrency = 8;
    Decoding answer_decoding{0.0, 128};
    Decoding notes_decoding{0.0, 1024};

    void validate(std::size_t dataset_size) const;
    [[nodiscard]] ConfigEcho echo() const;
};

struct PhaseBackends {
    std::shared_ptr<ChatBackend> inference;
    std::shared_ptr<ChatBackend> induction;
    std::shared_ptr<ChatBackend> revision;

    static PhaseBackends same(std::shared_ptr<ChatBackend> backend) { return {backend, backend, backend}; }
};

/// Induction or revision failure. The run can resume from the last completed phase.
struct PhaseError : Error {
    PhaseError(const std::string& what, std::string phase_name, std::size_t minibatch)
        : Error(what), phase(std::move(phase_name)), minibatch_index(minibatch) {}
    std::string phase;
    std::size_t minibatch_index;
};

/// Thrown when a run stops on request after a given number of phases.
struct RunHalted : Error {
    using Error::Error;
};

std::vector<std::string> class_names(const LabelMap& labels);

// Prompt assembly. Every prompt starts with the "## TASK: <tag>" line.
ChatRequest assemble_inference_prompt(const NotesState& notes, const Sample& sample, const LabelMap& labels,
                                      Decoding decoding);
ChatRequest assemble_induction_prompt(std::span<const TrajectoryRecord> trajectories, const std::string& label,
                                      Decoding decoding);
ChatRequest assemble_accumulate_prompt(const std::string& running, const std::string& incoming,
                                       const std::string& label, Decoding decoding);
struct ReviseInputs {
    std::string target;  // class label, or "all"
    std::string previous;
    std::string batch;
    MomentumMode momentum;
    std::uint64_t previous_samples = 0;
    std::uint64_t batch_samples = 0;
    bool reminder = false;  // second Partial attempt
};
ChatRequest assemble_revise_prompt(const ReviseInputs& in, Decoding decoding);
ChatRequest assemble_merge_prompt(const std::map<std::string, std::string>& per_class, const LabelMap& labels,
                                  Decoding decoding);

struct InferenceOutcome {
    std::vector<TrajectoryRecord> trajectories;  // ordered by sample id
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t parse_failures = 0;
};

/// One chat call per sample, up to `concurrency` in flight. Backend errors
/// become ParseFailure::BackendError trajectories with reward 0.
InferenceOutcome run_inference_phase(std::span<const Sample> batch, const NotesState& notes, ChatBackend& backend,
                                     const LabelMap& labels, Decoding decoding, std::size_t concurrency);

std::string induce_minibatch(std::span<const TrajectoryRecord> trajectories, const std::string& label,
                             ChatBackend& backend, Decoding decoding, std::size_t minibatch_index = 0);

/// Empty running notes return the minibatch notes unchanged; otherwise one ACCUMULATE call.
std::string accumulate_batch_notes(const std::string& running, const std::string& minibatch_notes,
                                   const std::string& label, ChatBackend& backend, Decoding decoding);

struct RevisionOutcome {
    NotesState next;
    RevisionRecord record;
    std::size_t momentum_violations = 0;
};

/// Revises every class note against its batch note, then merges. On failure the
/// input state is untouched and PhaseError is thrown.
RevisionOutcome revise_notes(const NotesState& prev, const std::map<std::string, std::string>& batch_notes,
                             std::uint64_t inducted, const MomentumMode& momentum, ChatBackend& backend,
                             const LabelMap& labels, Decoding decoding, MergeMode merge_mode);

struct RunOptions {
    bool resume = false;
    /// Stop (as if killed) after this many completed phases. Test hook.
    std::optional<std::size_t> halt_after_phases;
    /// Called after each completed step.
    std::function<void(const StepRecord&)> on_step;
};

/// Runs (or resumes) the loop to completion. The store must already be
/// initialized for this run.
RunHistory run_learning(const LearningConfig& config, const Dataset& dataset, const LabelMap& labels,
                        const PhaseBackends& backends, RunStore& store, const RunOptions& options = {});

}  // namespace iml
