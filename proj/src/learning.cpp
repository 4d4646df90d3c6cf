// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/learning.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "iml/prompts.hpp"
#include "iml/run_store.hpp"

namespace iml {

std::string_view to_string(MomentumKind kind) {
    switch (kind) {
        case MomentumKind::None: return "none";
        case MomentumKind::Partial: return "partial";
        case MomentumKind::Full: return "full";
    }
    return "full";
}

std::optional<MomentumKind> parse_momentum(std::string_view s) {
    const auto v = casefold(trim(s));
    if (v == "none") return MomentumKind::None;
    if (v == "partial") return MomentumKind::Partial;
    if (v == "full") return MomentumKind::Full;
    return std::nullopt;
}

void LearningConfig::validate(std::size_t dataset_size) const {
    if (batch_size == 0 || minibatch_size == 0 || accumulation_step == 0 || max_steps == 0) {
        throw ConfigError("batch_size, minibatch_size, accumulation_step and max_steps must be positive");
    }
    if (minibatch_size > accumulation_step || accumulation_step > batch_size) {
        throw ConfigError("expected minibatch_size <= accumulation_step <= batch_size");
    }
    if (smoothing_window == 0) throw ConfigError("smoothing_window must be at least 1");
    if (concurrency == 0) throw ConfigError("concurrency must be at least 1");
    if (momentum.kind == MomentumKind::Partial && momentum.prefix_words == 0) {
        throw ConfigError("partial momentum needs prefix_words >= 1");
    }
    if (batch_size > dataset_size) throw ConfigError("batch_size exceeds the dataset size");
    if (!cycle_data && batch_size * max_steps > dataset_size) {
        throw ConfigError("batch_size * max_steps exceeds the dataset size; enable cycle_data or lower max_steps");
    }
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string one_line(std::string_view s) {
    std::string out(trim(s));
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

}  // namespace

ConfigEcho LearningConfig::echo() const {
    return {
        {"batch_size", std::to_string(batch_size)},
        {"minibatch_size", std::to_string(minibatch_size)},
        {"accumulation_step", std::to_string(accumulation_step)},
        {"momentum", std::string(to_string(momentum.kind))},
        {"momentum_prefix_words", std::to_string(momentum.prefix_words)},
        {"max_steps", std::to_string(max_steps)},
        {"cycle_data", cycle_data ? "true" : "false"},
        {"smoothing_window", std::to_string(smoothing_window)},
        {"merge_mode", merge_mode == MergeMode::Chat ? "chat" : "concat"},
        {"answer_temperature", fmt_double(answer_decoding.temperature)},
        {"answer_max_tokens", std::to_string(answer_decoding.max_tokens)},
        {"notes_temperature", fmt_double(notes_decoding.temperature)},
        {"notes_max_tokens", std::to_string(notes_decoding.max_tokens)},
    };
}

std::vector<std::string> class_names(const LabelMap& labels) {
    return {labels.labels().begin(), labels.labels().end()};
}

ChatRequest assemble_inference_prompt(const NotesState& notes, const Sample& sample, const LabelMap& labels,
                                      Decoding decoding) {
    if (trim(notes.merged).empty()) throw PreconditionError("merged notes are empty");
    const auto text = render_template(prompt_template("inference"), {{"classes", join(class_names(labels), ", ")},
                                                                     {"notes", notes.merged},
                                                                     {"question", sample.question}});
    return make_request(TaskTag::Inference, text, decoding);
}

ChatRequest assemble_induction_prompt(std::span<const TrajectoryRecord> trajectories, const std::string& label,
                                      Decoding decoding) {
    if (trajectories.empty()) throw PreconditionError("induction needs at least one trajectory");
    std::vector<std::string> blocks;
    for (const auto& t : trajectories) {
        const auto answer = t.parsed_answer ? *t.parsed_answer : one_line(t.raw_action);
        blocks.push_back("Question: " + one_line(t.observation) + "\nAnswer: " + answer +
                         "\nReward: " + std::to_string(t.reward));
    }
    const auto text = render_template(prompt_template("induction"),
                                      {{"target", label}, {"experiences", join(blocks, "\n\n")}});
    return make_request(TaskTag::Induction, text, decoding);
}

ChatRequest assemble_accumulate_prompt(const std::string& running, const std::string& incoming,
                                       const std::string& label, Decoding decoding) {
    const auto text = render_template(prompt_template("accumulate"),
                                      {{"target", label}, {"running", running}, {"incoming", incoming}});
    return make_request(TaskTag::Accumulate, text, decoding);
}

ChatRequest assemble_revise_prompt(const ReviseInputs& in, Decoding decoding) {
    std::string text;
    switch (in.momentum.kind) {
        case MomentumKind::None:
            text = render_template(prompt_template("revise_none"),
                                   {{"target", in.target}, {"previous", in.previous}, {"batch", in.batch}});
            break;
        case MomentumKind::Partial:
            text = render_template(
                prompt_template("revise_partial"),
                {{"target", in.target},
                 {"previous", in.previous},
                 {"batch", in.batch},
                 {"prefix", leading_words(in.previous, in.momentum.prefix_words)},
                 {"reminder", in.reminder ? " Your previous reply did not begin with the required opening." : ""}});
            break;
        case MomentumKind::Full:
            text = render_template(prompt_template("revise_full"),
                                   {{"target", in.target},
                                    {"previous", in.previous},
                                    {"batch", in.batch},
                                    {"previous_samples", std::to_string(in.previous_samples)},
                                    {"batch_samples", std::to_string(in.batch_samples)}});
            break;
    }
    return make_request(TaskTag::Revise, text, decoding);
}

ChatRequest assemble_merge_prompt(const std::map<std::string, std::string>& per_class, const LabelMap& labels,
                                  Decoding decoding) {
    std::vector<std::string> sections;
    for (const auto& label : labels.labels()) {
        const auto it = per_class.find(label);
        if (it == per_class.end()) throw PreconditionError("merge: no notes for " + label);
        sections.push_back("### Notes for " + label + "\n" + it->second);
    }
    const auto text = render_template(prompt_template("merge"), {{"sections", join(sections, "\n\n")}});
    return make_request(TaskTag::Merge, text, decoding);
}

InferenceOutcome run_inference_phase(std::span<const Sample> batch, const NotesState& notes, ChatBackend& backend,
                                     const LabelMap& labels, Decoding decoding, std::size_t concurrency) {
    if (batch.empty()) throw PreconditionError("inference batch is empty");
    const auto classes = class_names(labels);
    std::vector<ChatRequest> requests;
    requests.reserve(batch.size());
    for (const auto& s : batch) requests.push_back(assemble_inference_prompt(notes, s, labels, decoding));

    InferenceOutcome out;
    out.trajectories.resize(batch.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= batch.size()) return;
            const auto& s = batch[i];
            auto& t = out.trajectories[i];
            t.sample_id = s.id;
            t.observation = s.question;
            t.notes_version = notes.version;
            t.gold = s.label;
            try {
                t.raw_action = backend.chat(requests[i]).text;
                const auto parsed = parse_answer(t.raw_action, classes);
                t.parsed_answer = parsed.label;
                t.failure = parsed.failure;
            } catch (const BackendError&) {
                t.failure = ParseFailure::BackendError;
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
                next.store(batch.size());
                return;
            }
            t.reward = t.parsed_answer && *t.parsed_answer == t.gold ? 1 : 0;
        }
    };
    const auto n_threads = std::min(concurrency, batch.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    std::stable_sort(out.trajectories.begin(), out.trajectories.end(),
                     [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
    for (const auto& t : out.trajectories) {
        out.correct += static_cast<std::size_t>(t.reward);
        if (t.failure) ++out.parse_failures;
    }
    out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.trajectories.size());
    return out;
}

std::string induce_minibatch(std::span<const TrajectoryRecord> trajectories, const std::string& label,
                             ChatBackend& backend, Decoding decoding, std::size_t minibatch_index) {
    const auto request = assemble_induction_prompt(trajectories, label, decoding);
    try {
        return backend.chat(request).text;
    } catch (const BackendError& e) {
        throw PhaseError("induction failed for " + label + " in minibatch " + std::to_string(minibatch_index) +
                             ": " + e.what(),
                         "induction", minibatch_index);
    }
}

std::string accumulate_batch_notes(const std::string& running, const std::string& minibatch_notes,
                                   const std::string& label, ChatBackend& backend, Decoding decoding) {
    if (trim(minibatch_notes).empty()) throw PreconditionError("minibatch notes are empty");
    if (trim(running).empty()) return minibatch_notes;
    const auto request = assemble_accumulate_prompt(running, minibatch_notes, label, decoding);
    try {
        return backend.chat(request).text;
    } catch (const BackendError& e) {
        throw PhaseError("accumulation failed for " + label + ": " + e.what(), "induction", 0);
    }
}

RevisionOutcome revise_notes(const NotesState& prev, const std::map<std::string, std::string>& batch_notes,
                             std::uint64_t inducted, const MomentumMode& momentum, ChatBackend& backend,
                             const LabelMap& labels, Decoding decoding, MergeMode merge_mode) {
    RevisionOutcome out;
    out.next = prev;
    out.record.version_from = prev.version;
    out.record.version_to = prev.version + 1;
    out.record.trajectories = inducted;
    auto call = [&](const ChatRequest& request) {
        try {
            return backend.chat(request).text;
        } catch (const BackendError& e) {
            throw PhaseError(std::string("revision failed: ") + e.what(), "revision", 0);
        }
    };
    for (const auto& label : labels.labels()) {
        const auto bit = batch_notes.find(label);
        if (bit == batch_notes.end()) throw PreconditionError("revision: no batch notes for " + label);
        const auto pit = prev.per_class.find(label);
        if (pit == prev.per_class.end()) throw PreconditionError("revision: no previous notes for " + label);

        ReviseInputs in{label, pit->second, bit->second, momentum, prev.samples_seen, inducted, false};
        auto reply = call(assemble_revise_prompt(in, decoding));
        bool violation = false;
        if (momentum.kind == MomentumKind::Partial) {
            const auto prefix = leading_words(in.previous, momentum.prefix_words);
            if (!starts_with_words(reply, prefix, momentum.prefix_words)) {
                in.reminder = true;
                reply = call(assemble_revise_prompt(in, decoding));
                if (!starts_with_words(reply, prefix, momentum.prefix_words)) {
                    reply = prefix + "\n" + reply;
                    violation = true;
                    ++out.momentum_violations;
                }
            }
        }
        out.next.per_class[label] = reply;
        out.record.classes.push_back({label, in.previous, in.batch, reply, violation});
    }
    if (merge_mode == MergeMode::Chat) {
        out.next.merged = call(assemble_merge_prompt(out.next.per_class, labels, decoding));
    } else {
        std::vector<std::string> parts;
        for (const auto& label : labels.labels()) parts.push_back(out.next.per_class.at(label));
        out.next.merged = join(parts, "\n");
    }
    out.next.version = prev.version + 1;
    out.next.samples_seen = prev.samples_seen + inducted;
    out.record.merged = out.next.merged;
    return out;
}

namespace {

std::vector<Sample> step_batch(const Dataset& dataset, const LearningConfig& config, std::size_t step) {
    const auto n = dataset.samples.size();
    const auto start = (step - 1) * config.batch_size;
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);
    for (std::size_t i = 0; i < config.batch_size; ++i) batch.push_back(dataset.samples[(start + i) % n]);
    return batch;
}

class LoopDriver {
  public:
    LoopDriver(const LearningConfig& config, const LabelMap& labels, const PhaseBackends& backends, RunStore& store,
               const RunOptions& options)
        : config_(config), labels_(labels), backends_(backends), store_(store), options_(options) {}

    void completed(LoopCheckpoint& ckpt, const std::string& phase) {
        ckpt.phase = phase;
        ++ckpt.phases_completed;
        store_.save_checkpoint(ckpt);
        if (options_.halt_after_phases && ckpt.phases_completed >= *options_.halt_after_phases) {
            store_.set_status(RunStatus::Halted);
            throw RunHalted("run halted after " + std::to_string(ckpt.phases_completed) + " phases");
        }
    }

    void run(const Dataset& dataset) {
        LoopCheckpoint ckpt;
        NotesState notes = NotesState::initial(labels_);
        if (const auto saved = store_.load_checkpoint()) {
            ckpt = *saved;
            notes = store_.load_notes(ckpt.notes_version);
        } else {
            store_.snapshot_notes(notes);
            completed(ckpt, "start");
        }

        while (ckpt.step <= config_.max_steps) {
            const auto step = ckpt.step;
            std::vector<TrajectoryRecord> trajectories;
            if (ckpt.phase == "start" || ckpt.phase == "step") {
                const auto batch = step_batch(dataset, config_, step);
                auto outcome = run_inference_phase(batch, notes, *backends_.inference, labels_,
                                                   config_.answer_decoding, config_.concurrency);
                store_.write_trajectories(step, outcome.trajectories);
                trajectories = std::move(outcome.trajectories);
                ckpt.cursor = 0;
                ckpt.minibatch = 0;
                ckpt.step_revisions.clear();
                ckpt.step_violations = 0;
                completed(ckpt, "inference");
            } else {
                trajectories = store_.read_trajectories(step);
            }

            while (true) {
                if (ckpt.accumulated == config_.accumulation_step) {
                    auto rev = revise_notes(notes, ckpt.accumulator, ckpt.accumulated, config_.momentum,
                                            *backends_.revision, labels_, config_.notes_decoding,
                                            config_.merge_mode);
                    rev.record.step = step;
                    store_.snapshot_notes(rev.next);
                    store_.append_revision(rev.record);
                    notes = std::move(rev.next);
                    ckpt.notes_version = notes.version;
                    ckpt.accumulator.clear();
                    ckpt.accumulated = 0;
                    ckpt.step_revisions.push_back(notes.version);
                    ckpt.step_violations += rev.momentum_violations;
                    completed(ckpt, "revision");
                }
                if (ckpt.cursor >= trajectories.size()) break;

                const auto chunk = std::min({config_.minibatch_size,
                                             static_cast<std::size_t>(config_.accumulation_step - ckpt.accumulated),
                                             trajectories.size() - ckpt.cursor});
                const std::span<const TrajectoryRecord> mb(trajectories.data() + ckpt.cursor, chunk);
                for (const auto& label : labels_.labels()) {
                    const auto mb_notes = induce_minibatch(mb, label, *backends_.induction, config_.notes_decoding,
                                                           ckpt.minibatch);
                    auto& running = ckpt.accumulator[label];
                    running = accumulate_batch_notes(running, mb_notes, label, *backends_.induction,
                                                     config_.notes_decoding);
                }
                ckpt.cursor += chunk;
                ckpt.accumulated += chunk;
                ++ckpt.minibatch;
                completed(ckpt, "induction");
            }

            StepRecord rec;
            rec.step = step;
            rec.total = trajectories.size();
            for (const auto& t : trajectories) {
                rec.correct += static_cast<std::size_t>(t.reward);
                if (t.failure) ++rec.parse_failures;
            }
            rec.accuracy = static_cast<double>(rec.correct) / static_cast<double>(rec.total);
            rec.notes_version = trajectories.front().notes_version;
            rec.snapshot_id = snapshot_id(rec.notes_version);
            rec.revisions = ckpt.step_revisions;
            rec.momentum_violations = ckpt.step_violations;
            store_.append_step(rec);
            if (options_.on_step) options_.on_step(rec);

            ckpt.step = step + 1;
            ckpt.cursor = 0;
            ckpt.minibatch = 0;
            ckpt.step_revisions.clear();
            ckpt.step_violations = 0;
            completed(ckpt, "step");
        }
    }

  private:
    const LearningConfig& config_;
    const LabelMap& labels_;
    const PhaseBackends& backends_;
    RunStore& store_;
    const RunOptions& options_;
};

}  // namespace

RunHistory run_learning(const LearningConfig& config, const Dataset& dataset, const LabelMap& labels,
                        const PhaseBackends& backends, RunStore& store, const RunOptions& options) {
    config.validate(dataset.samples.size());
    if (!backends.inference || !backends.induction || !backends.revision) {
        throw PreconditionError("a backend is required for every phase");
    }
    RunHistory history;
    history.config = config.echo();
    history.dataset_hash = dataset_hash(dataset);
    history.template_hash = prompt_templates_hash();
    if (store.manifest().dataset_hash != history.dataset_hash) {
        throw PreconditionError("run store was initialized for a different dataset");
    }

    if (store.manifest().status != RunStatus::Complete) {
        if (store.manifest().status == RunStatus::Halted) store.set_status(RunStatus::Running);
        LoopDriver driver(config, labels, backends, store, options);
        try {
            driver.run(dataset);
        } catch (const PhaseError&) {
            store.set_status(RunStatus::Halted);
            throw;
        }
        store.set_status(RunStatus::Complete);
    }
    history.steps = store.load_history().steps;
    return history;
}

}  // namespace iml
