// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Run directory layout:
//
//   manifest                   flat "key = value" text, rewritten atomically
//   checkpoint.json            loop position after the last completed phase
//   history.jsonl              one record per completed step
//   revisions.jsonl            one record per revision event
//   trajectories/step-<n>.log  trajectory records of step n
//   notes/step-<v>.txt         notes snapshot of version v (immutable)
//   reports/                   CSV exports

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iml/records.hpp"

namespace iml {

enum class RunStatus { Running, Halted, Complete };
std::string_view to_string(RunStatus s);

struct RunManifest {
    std::string run_id;
    RunStatus status = RunStatus::Running;
    std::size_t last_step = 0;
    std::string last_phase = "init";
    std::string dataset_hash;
    std::string template_hash;
    std::map<std::string, std::string> backends;  // phase -> backend kind
    ConfigEcho learning;                          // echoed into RunHistory
    ConfigEcho settings;                          // every effective CLI setting

    [[nodiscard]] std::string to_text() const;
    static RunManifest from_text(std::string_view text);
};

std::string make_run_id(std::string_view seed_material);

struct LoopCheckpoint {
    std::size_t step = 1;           // step in progress
    std::string phase = "start";    // last completed phase: start|inference|induction|revision|step
    std::size_t cursor = 0;         // trajectories of this step already inducted
    std::size_t minibatch = 0;      // minibatches of this step already inducted
    std::map<std::string, std::string> accumulator;
    std::uint64_t accumulated = 0;  // trajectories folded into the accumulator
    std::uint64_t notes_version = 0;
    std::vector<std::uint64_t> step_revisions;
    std::size_t step_violations = 0;
    std::size_t phases_completed = 0;
};

class RunStore {
  public:
    /// Creates the layout in a fresh directory. An existing run is refused
    /// unless `resume` is set, in which case it is opened and reconciled with
    /// its checkpoint.
    static RunStore init_run(const std::filesystem::path& dir, const RunManifest& manifest, bool resume);
    /// Opens an existing run read-only (reporting).
    static RunStore open(const std::filesystem::path& dir);

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    [[nodiscard]] bool resumed() const { return resumed_; }
    [[nodiscard]] const RunManifest& manifest() const { return manifest_; }

    /// Status moves forward only; a halted run may be resumed (back to running).
    void set_status(RunStatus status);
    void record_progress(std::size_t step, const std::string& phase);

    void write_trajectories(std::size_t step, std::span<const TrajectoryRecord> records);
    void append_trajectory(std::size_t step, const TrajectoryRecord& record);
    [[nodiscard]] std::vector<TrajectoryRecord> read_trajectories(std::size_t step) const;

    /// Throws IoError if this version was already written.
    void snapshot_notes(const NotesState& notes);
    [[nodiscard]] NotesState load_notes(std::uint64_t version) const;
    [[nodiscard]] std::vector<std::uint64_t> snapshot_versions() const;

    void append_revision(const RevisionRecord& record);
    [[nodiscard]] std::vector<RevisionRecord> read_revisions() const;

    void append_step(const StepRecord& record);
    [[nodiscard]] RunHistory load_history() const;

    void save_checkpoint(const LoopCheckpoint& checkpoint);
    [[nodiscard]] std::optional<LoopCheckpoint> load_checkpoint() const;

    void write_report(const std::string& name, const std::string& content);

  private:
    explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
    void write_manifest();
    void reconcile(const LoopCheckpoint& checkpoint);

    std::filesystem::path dir_;
    RunManifest manifest_;
    bool resumed_ = false;
};

// Serialization helpers, also used by tests and tools.
std::string trajectory_to_json(const TrajectoryRecord& r);
TrajectoryRecord trajectory_from_json(std::string_view line);
std::string notes_to_json(const NotesState& n);
NotesState notes_from_json(std::string_view text);
std::string revision_to_json(const RevisionRecord& r);
RevisionRecord revision_from_json(std::string_view line);

void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void append_line_durable(const std::filesystem::path& path, const std::string& line);
std::string read_file(const std::filesystem::path& path);

}  // namespace iml
