// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "iml/assets.hpp"
#include "iml/prompts.hpp"

namespace iml {

namespace {

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// Sends every request (bounded concurrency) and scores the replies in order.
std::vector<int> score_requests(const std::vector<ChatRequest>& requests, std::span<const Sample> golds,
                                ChatBackend& backend, const LabelMap& labels, std::size_t concurrency) {
    const auto classes = class_names(labels);
    std::vector<int> rewards(requests.size(), 0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                const auto parsed = parse_answer(backend.chat(requests[i]).text, classes);
                rewards[i] = exact_match(parsed.label, golds[i].label);
            } catch (const BackendError&) {
                rewards[i] = 0;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                next.store(requests.size());
                return;
            }
        }
    };
    const auto n = std::min<std::size_t>(std::max<std::size_t>(concurrency, 1), requests.size());
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    return rewards;
}

double mean_reward(const std::vector<int>& rewards) {
    if (rewards.empty()) return 0.0;
    return static_cast<double>(std::accumulate(rewards.begin(), rewards.end(), 0)) /
           static_cast<double>(rewards.size());
}

}  // namespace

int exact_match(const std::optional<std::string>& pred, const std::string& gold) {
    return pred && normalize_label(*pred) == normalize_label(gold) ? 1 : 0;
}

double accuracy(std::span<const TrajectoryRecord> trajectories) {
    if (trajectories.empty()) return 0.0;
    std::size_t sum = 0;
    for (const auto& t : trajectories) sum += static_cast<std::size_t>(t.reward);
    return static_cast<double>(sum) / static_cast<double>(trajectories.size());
}

std::vector<double> smooth(std::span<const double> values, std::size_t window) {
    if (window == 0) throw PreconditionError("smoothing window must be at least 1");
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) {
        const auto lo = t + 1 >= window ? t + 1 - window : 0;
        double s = 0.0;
        for (std::size_t i = lo; i <= t; ++i) s += values[i];
        out.push_back(s / static_cast<double>(t - lo + 1));
    }
    return out;
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (const auto v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const auto m = mean(values);
    double ss = 0.0;
    for (const auto v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::string_view to_string(AbilityKind kind) {
    switch (kind) {
        case AbilityKind::Inference: return "inference";
        case AbilityKind::Induction: return "induction";
        case AbilityKind::Revision: return "revision";
    }
    return "inference";
}

std::optional<AbilityKind> parse_ability_kind(std::string_view s) {
    if (s == "inference") return AbilityKind::Inference;
    if (s == "induction") return AbilityKind::Induction;
    if (s == "revision") return AbilityKind::Revision;
    return std::nullopt;
}

AbilityReport AbilityReport::from_values(AbilityKind kind, std::vector<std::string> trial_ids,
                                         std::vector<double> values, ConfigEcho config) {
    if (trial_ids.size() != values.size()) throw PreconditionError("one trial id per value is required");
    AbilityReport r;
    r.kind = kind;
    r.trial_ids = std::move(trial_ids);
    r.values = std::move(values);
    r.mean = iml::mean(r.values);
    r.std = sample_std(r.values);
    r.config = std::move(config);
    return r;
}

std::string AbilityReport::to_csv() const {
    const std::string test(to_string(kind));
    std::string out = "test,trial,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out += test + "," + trial_ids[i] + "," + fmt6(values[i]) + "\n";
    out += test + ",mean," + fmt6(mean) + "\n";
    out += test + ",std," + fmt6(std) + "\n";
    return out;
}

std::string AbilityReport::summary() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: %.2f (\xC2\xB1 %.2f) over %zu trials", std::string(to_string(kind)).c_str(),
                  100.0 * mean, 100.0 * std, values.size());
    return buf;
}

OracleNoteSet OracleNoteSet::render(const Lexicon& lexicon, const LabelMap& labels) {
    if (lexicon.size() < 2) throw PreconditionError("oracle notes need two discriminative dimensions");
    OracleNoteSet set;
    for (const auto& asset : assets::oracle_notes()) {
        std::vector<std::string> parts;
        std::string_view rest = asset.text;
        for (;;) {
            const auto at = rest.find("%%");
            if (at == std::string_view::npos) {
                parts.emplace_back(rest);
                break;
            }
            parts.emplace_back(rest.substr(0, at));
            rest = rest.substr(at + 2);
            if (!rest.empty() && rest.front() == '\n') rest.remove_prefix(1);
        }
        if (parts.size() != 3) throw PreconditionError("oracle note format '" + std::string(asset.name) + "' needs head%%item%%tail");
        const std::map<std::string, std::string> dims{{"dim0", lexicon[0].name}, {"dim1", lexicon[1].name}};
        std::string text = substitute_slots(parts[0], dims);
        for (int b0 = 0; b0 < 2; ++b0) {
            for (int b1 = 0; b1 < 2; ++b1) {
                text += substitute_slots(parts[1], {{"label", labels(b0, b1)},
                                                    {"dim0", lexicon[0].name},
                                                    {"word0", lexicon.representative(0, b0)},
                                                    {"dim1", lexicon[1].name},
                                                    {"word1", lexicon.representative(1, b1)}});
            }
        }
        text += substitute_slots(parts[2], dims);
        while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
        set.names.emplace_back(asset.name);
        set.texts.push_back(std::move(text));
    }
    return set;
}

double notes_accuracy(const std::string& notes, std::span<const Sample> split, ChatBackend& backend,
                      const LabelMap& labels, const EvalSettings& settings) {
    if (split.empty()) throw PreconditionError("evaluation split is empty");
    const auto state = NotesState::with_merged(labels, notes);
    std::vector<ChatRequest> requests;
    requests.reserve(split.size());
    for (const auto& s : split) requests.push_back(assemble_inference_prompt(state, s, labels, settings.answer_decoding));
    return mean_reward(score_requests(requests, split, backend, labels, settings.concurrency));
}

AbilityReport inference_ability_test(const OracleNoteSet& notes, std::span<const Sample> split, ChatBackend& backend,
                                     const LabelMap& labels, const EvalSettings& settings) {
    if (split.empty()) throw PreconditionError("inference test split is empty");
    if (notes.texts.empty()) throw PreconditionError("no oracle note formats");
    std::vector<double> values;
    for (const auto& text : notes.texts) values.push_back(notes_accuracy(text, split, backend, labels, settings));
    return AbilityReport::from_values(AbilityKind::Inference, notes.names, std::move(values),
                                      {{"split_size", std::to_string(split.size())},
                                       {"formats", join(notes.names, ";")}});
}

InductionTestResult induction_ability_test(std::span<const Sample> samples, std::size_t n_groups, std::size_t k,
                                           ChatBackend& induction, ChatBackend& inference, const LabelMap& labels,
                                           const EvalSettings& settings) {
    if (samples.empty()) throw PreconditionError("induction test needs samples");
    if (n_groups == 0 || samples.size() % n_groups != 0) {
        throw PreconditionError("n_groups must divide the sample count");
    }
    if (k == 0 || k > n_groups) throw PreconditionError("k must be in [1, n_groups]");

    const auto outcome = run_inference_phase(samples, NotesState::initial(labels), inference, labels,
                                             settings.answer_decoding, settings.concurrency);
    const auto group_size = samples.size() / n_groups;
    InductionTestResult result;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::span<const TrajectoryRecord> group(outcome.trajectories.data() + g * group_size, group_size);
        std::vector<std::string> parts;
        for (const auto& label : labels.labels()) {
            parts.push_back(induce_minibatch(group, label, induction, settings.notes_decoding, g));
        }
        result.group_notes.push_back(join(parts, "\n"));
    }
    std::vector<std::size_t> order(n_groups);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(settings.seed);
    rng.shuffle(order);
    result.chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto g : result.chosen) {
        ids.push_back("group-" + std::to_string(g));
        values.push_back(notes_accuracy(result.group_notes[g], samples, inference, labels, settings));
    }
    result.report = AbilityReport::from_values(AbilityKind::Induction, std::move(ids), std::move(values),
                                               {{"samples", std::to_string(samples.size())},
                                                {"n_groups", std::to_string(n_groups)},
                                                {"k", std::to_string(k)},
                                                {"seed", std::to_string(settings.seed)}});
    return result;
}

double revision_delta(double acc_a, double acc_b, double acc_merged) { return acc_merged - std::min(acc_a, acc_b); }

RevisionTestResult revision_ability_test(std::span<const std::string> pool, std::size_t n_pairs,
                                         ChatBackend& revision, ChatBackend& inference, std::span<const Sample> split,
                                         const LabelMap& labels, const EvalSettings& settings) {
    if (n_pairs == 0) throw PreconditionError("n_pairs must be positive");
    if (pool.size() < 2 * n_pairs) throw PreconditionError("notes pool must hold at least 2 * n_pairs notes");
    if (split.empty()) throw PreconditionError("revision test split is empty");

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(settings.seed);
    rng.shuffle(order);

    RevisionTestResult result;
    std::vector<std::string> ids;
    std::vector<double> deltas;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        RevisionPair pair;
        pair.a = order[2 * p];
        pair.b = order[2 * p + 1];
        ReviseInputs in{"all", pool[pair.a], pool[pair.b], MomentumMode{}, 0, 0, false};
        try {
            pair.merged = revision.chat(assemble_revise_prompt(in, settings.notes_decoding)).text;
        } catch (const BackendError& e) {
            throw PhaseError(std::string("revision test merge failed: ") + e.what(), "revision", p);
        }
        pair.acc_a = notes_accuracy(pool[pair.a], split, inference, labels, settings);
        pair.acc_b = notes_accuracy(pool[pair.b], split, inference, labels, settings);
        pair.acc_merged = trim(pair.merged).empty() ? 0.0
                                                    : notes_accuracy(pair.merged, split, inference, labels, settings);
        ids.push_back("pair-" + std::to_string(pair.a) + "-" + std::to_string(pair.b));
        deltas.push_back(revision_delta(pair.acc_a, pair.acc_b, pair.acc_merged));
        result.pairs.push_back(std::move(pair));
    }
    result.report = AbilityReport::from_values(AbilityKind::Revision, std::move(ids), std::move(deltas),
                                               {{"pool_size", std::to_string(pool.size())},
                                                {"n_pairs", std::to_string(n_pairs)},
                                                {"split_size", std::to_string(split.size())},
                                                {"seed", std::to_string(settings.seed)}});
    return result;
}

std::string exemplar_block(std::span<const Sample> exemplars) {
    std::vector<std::string> blocks;
    for (const auto& s : exemplars) blocks.push_back("Question: " + s.question + "\nAnswer: Finish[" + s.label + "]");
    return join(blocks, "\n\n");
}

ChatRequest assemble_baseline_prompt(std::span<const Sample> exemplars, const Sample& sample, const LabelMap& labels,
                                     Decoding decoding) {
    const auto text = render_template(prompt_template("baseline"), {{"classes", join(class_names(labels), ", ")},
                                                                    {"exemplars", exemplar_block(exemplars)},
                                                                    {"question", sample.question}});
    return make_request(TaskTag::Baseline, text, decoding);
}

IclResult icl_baseline(std::span<const Sample> pool, std::size_t k, ChatBackend& backend, const LabelMap& labels,
                       const EvalSettings& settings, std::optional<std::size_t> split_size) {
    const auto& names = labels.labels();
    if (k == 0) throw PreconditionError("k must be positive");
    if (k < names.size()) throw PreconditionError("k must cover every class (k >= " + std::to_string(names.size()) + ")");
    if (pool.size() <= k) throw PreconditionError("pool too small for k exemplars plus a split");

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(settings.seed);
    rng.shuffle(order);

    std::vector<bool> taken(pool.size(), false);
    std::vector<std::size_t> picked;
    for (const auto& label : names) {
        const auto it = std::find_if(order.begin(), order.end(),
                                     [&](std::size_t i) { return !taken[i] && pool[i].label == label; });
        if (it == order.end()) throw PreconditionError("no exemplar available for " + label);
        taken[*it] = true;
        picked.push_back(*it);
    }
    for (const auto i : order) {
        if (picked.size() >= k) break;
        if (!taken[i]) {
            taken[i] = true;
            picked.push_back(i);
        }
    }

    IclResult result;
    for (const auto i : picked) result.exemplars.push_back(pool[i]);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (taken[i]) continue;
        if (split_size && result.split.size() >= *split_size) break;
        result.split.push_back(pool[i]);
    }
    std::vector<ChatRequest> requests;
    requests.reserve(result.split.size());
    for (const auto& s : result.split) {
        requests.push_back(assemble_baseline_prompt(result.exemplars, s, labels, settings.answer_decoding));
    }
    result.prompt_preview = requests.front().final_user_text();
    result.accuracy = mean_reward(score_requests(requests, result.split, backend, labels, settings.concurrency));
    return result;
}

StagnationReport stagnation_metrics(const RunHistory& history, std::span<const NotesState> snapshots,
                                    std::span<const RevisionRecord> revisions, const NoteGrammar* grammar) {
    if (snapshots.size() < 2) throw PreconditionError("stagnation metrics need at least two notes snapshots");
    if (history.revision_events() != revisions.size()) {
        throw PreconditionError("revision records do not match the run history");
    }
    std::map<std::uint64_t, const NotesState*> by_version;
    for (const auto& s : snapshots) by_version[s.version] = &s;

    StagnationReport report;
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_step;  // step -> (unchanged, events)
    std::size_t streak = 0;
    for (const auto& rev : revisions) {
        const auto from = by_version.find(rev.version_from);
        const auto to = by_version.find(rev.version_to);
        if (from == by_version.end() || to == by_version.end()) {
            throw PreconditionError("missing notes snapshot for revision " + std::to_string(rev.version_to));
        }
        RevisionFlags flags;
        flags.step = rev.step;
        flags.version_to = rev.version_to;
        flags.verbatim_unchanged = from->second->per_class == to->second->per_class;

        if (grammar) {
            for (const auto& cls : rev.classes) {
                if (cls.revised != cls.previous) continue;
                const auto idx = grammar->labels().index_of(cls.label);
                if (!idx) continue;
                std::map<std::size_t, int> retained;
                for (const auto& line : grammar->parse(cls.revised)) {
                    if (line.class_index == *idx && line.is_rule()) retained[*line.dimension] = line.polarity;
                }
                bool conflict = false;
                for (const auto& line : grammar->parse(cls.batch)) {
                    if (line.class_index != *idx || !line.is_rule()) continue;
                    const auto it = retained.find(*line.dimension);
                    if (it != retained.end() && it->second != line.polarity) conflict = true;
                }
                if (conflict) flags.conflicts.push_back(cls.label);
            }
        }
        report.unchanged_under_conflict += flags.conflicts.size();
        auto& [unchanged, events] = per_step[rev.step];
        ++events;
        if (flags.verbatim_unchanged) {
            ++unchanged;
            report.longest_unchanged_streak = std::max(report.longest_unchanged_streak, ++streak);
        } else {
            streak = 0;
        }
        report.events.push_back(std::move(flags));
    }
    report.trailing_unchanged = streak;
    for (const auto& [step, counts] : per_step) {
        report.unchanged_rate[step] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return report;
}

std::string StagnationReport::to_csv() const {
    std::string out = "step,version,verbatim_unchanged,unchanged_under_conflict,conflict_classes\n";
    for (const auto& e : events) {
        out += std::to_string(e.step) + "," + std::to_string(e.version_to) + "," +
               (e.verbatim_unchanged ? "1" : "0") + "," + std::to_string(e.conflicts.size()) + "," +
               join(e.conflicts, ";") + "\n";
    }
    return out;
}

std::string curve_csv(const RunHistory& history, std::size_t window) {
    const auto raw = history.accuracies();
    const auto smoothed = smooth(raw, window);
    std::string out = "step,raw_accuracy,smoothed_accuracy\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out += std::to_string(history.steps[i].step) + "," + fmt6(raw[i]) + "," + fmt6(smoothed[i]) + "\n";
    }
    return out;
}

}  // namespace iml
