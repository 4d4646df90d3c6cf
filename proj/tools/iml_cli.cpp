// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// iml: generate datasets, run the learning loop, ability tests and the
// few-shot baseline, and export reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iml/backend.hpp"
#include "iml/benchmark.hpp"
#include "iml/config.hpp"
#include "iml/evaluation.hpp"
#include "iml/learning.hpp"
#include "iml/prompts.hpp"
#include "iml/run_store.hpp"

namespace fs = std::filesystem;
using namespace iml;

namespace {

enum Exit : int {
    kOk = 0,
    kConfig = 2,
    kBackend = 3,
    kIo = 4,
    kVerification = 5,
    kHalted = 6,
};

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::string dataset;
    std::string backend;
};

void add_common(CLI::App* cmd, Common& c, bool with_dataset = true) {
    cmd->add_option("--config", c.config_file, "Config file (key = value)");
    cmd->add_option("--set", c.sets, "Override a config key (key=value); repeatable");
    if (with_dataset) cmd->add_option("--dataset", c.dataset, "Dataset file; generated from gen.* keys if omitted");
    cmd->add_option("--backend", c.backend, "Backend kind for every phase")
        ->check(CLI::IsMember({"http", "oracle", "replay"}));
}

CliConfig load_config(const Common& c) {
    CliConfig cfg;
    if (!c.config_file.empty()) cfg.load_file(c.config_file);
    for (const auto& s : c.sets) cfg.set(std::string_view(s));
    if (!c.backend.empty()) cfg.set("backend.kind", c.backend);
    return cfg;
}

Dataset obtain_dataset(const Common& c, const CliConfig& cfg, const Lexicon& lexicon, const LabelMap& labels) {
    if (!c.dataset.empty()) return load_dataset(c.dataset);
    return generate_dataset(cfg.gen(), lexicon, labels);
}

class BackendPool {
  public:
    BackendPool(const CliConfig& cfg, const Lexicon& lexicon, const LabelMap& labels)
        : cfg_(cfg), lexicon_(lexicon), labels_(labels) {}

    std::shared_ptr<ChatBackend> get(const std::string& phase) {
        const auto bc = cfg_.backend(phase);
        const auto key = describe(bc);
        auto& slot = cache_[key];
        if (!slot) slot = make_backend(bc, lexicon_, labels_);
        kinds_[phase] = std::string(to_string(bc.kind)) + (bc.record ? "+record" : "");
        return slot;
    }

    PhaseBackends phases() { return {get("inference"), get("induction"), get("revision")}; }
    [[nodiscard]] const std::map<std::string, std::string>& kinds() const { return kinds_; }

  private:
    static std::string describe(const BackendConfig& b) {
        return std::string(to_string(b.kind)) + "|" + b.endpoint + "|" + b.model + "|" + b.api_key_env + "|" +
               b.cassette + "|" + (b.record ? "r" : "") + "|" + std::to_string(b.oracle.seed) + "|" +
               std::to_string(b.oracle.error_rate) + "|" + std::to_string(b.oracle.decision_threshold) + "|" +
               std::to_string(b.oracle.min_support) + "|" + std::to_string(b.retry.max_attempts) + "|" +
               std::to_string(b.retry.backoff_base.count()) + "|" + std::to_string(b.retry.jitter) + "|" +
               std::to_string(b.timeout.count());
    }

    const CliConfig& cfg_;
    const Lexicon& lexicon_;
    const LabelMap& labels_;
    std::map<std::string, std::shared_ptr<ChatBackend>> cache_;
    std::map<std::string, std::string> kinds_;
};

EvalSettings eval_settings(const CliConfig& cfg) {
    const auto lc = cfg.learning();
    EvalSettings s;
    s.answer_decoding = lc.answer_decoding;
    s.notes_decoding = lc.notes_decoding;
    s.concurrency = lc.concurrency;
    s.seed = cfg.eval().seed;
    return s;
}

std::span<const Sample> head(const Dataset& ds, std::size_t n) {
    if (n == 0 || n > ds.samples.size()) throw ConfigError("eval.split_size must be in [1, dataset size]");
    return {ds.samples.data(), n};
}

std::vector<std::string> read_notes_pool(const std::string& path) {
    // Notes are separated by lines holding only "---".
    std::vector<std::string> pool;
    std::vector<std::string> current;
    auto flush = [&] {
        auto text = trim(join(current, "\n"));
        if (!text.empty()) pool.push_back(std::move(text));
        current.clear();
    };
    for (const auto& line : split_lines(read_file(path))) {
        if (trim(line) == "---") {
            flush();
        } else {
            current.push_back(line);
        }
    }
    flush();
    return pool;
}

void print_pct(const char* label, double v) { std::printf("%s%.2f%%\n", label, 100.0 * v); }

int cmd_generate(const Common& c, std::optional<std::uint64_t> seed, bool paper_literal, const std::string& out,
                 const std::string& lexicon_out) {
    auto cfg = load_config(c);
    if (seed) cfg.set("gen.seed", std::to_string(*seed));
    if (paper_literal) cfg.set("gen.paper_literal_mode", "true");
    const auto lexicon = build_default_lexicon();
    const LabelMap labels;
    const auto dataset = generate_dataset(cfg.gen(), lexicon, labels);
    const auto report = verify_dataset(dataset, lexicon, labels);
    save_dataset(dataset, out);
    write_file_atomic(out + ".report.txt", report.to_text());
    if (!lexicon_out.empty()) write_file_atomic(lexicon_out, lexicon.to_text());
    std::printf("wrote %zu samples to %s (hash %s)\n", dataset.samples.size(), out.c_str(),
                dataset_hash(dataset).c_str());
    std::printf("%s", report.to_text().c_str());
    return report.ok() ? kOk : kVerification;
}

int cmd_learn(const Common& c, const std::string& run_dir, bool resume, const std::string& momentum,
              std::optional<std::size_t> accumulation, std::optional<std::size_t> halt_after) {
    auto cfg = load_config(c);
    if (!momentum.empty()) cfg.set("learning.momentum", momentum);
    if (accumulation) cfg.set("learning.accumulation_step", std::to_string(*accumulation));
    const auto lexicon = build_default_lexicon();
    const LabelMap labels;
    const auto dataset = obtain_dataset(c, cfg, lexicon, labels);
    const auto learning = cfg.learning();
    learning.validate(dataset.samples.size());
    BackendPool pool(cfg, lexicon, labels);
    const auto backends = pool.phases();

    RunManifest manifest;
    manifest.dataset_hash = dataset_hash(dataset);
    manifest.template_hash = prompt_templates_hash();
    std::string material = manifest.dataset_hash;
    for (const auto& [key, value] : cfg.echo()) material += "|" + key + "=" + value;
    manifest.run_id = make_run_id(material);
    manifest.backends = pool.kinds();
    manifest.learning = learning.echo();
    manifest.settings = cfg.echo();
    manifest.settings.emplace_back("dataset", c.dataset.empty() ? "<generated>" : c.dataset);
    auto store = RunStore::init_run(run_dir, manifest, resume);

    RunOptions options;
    options.resume = resume;
    options.halt_after_phases = halt_after;
    options.on_step = [](const StepRecord& s) {
        std::printf("%4zu  %8.4f  %5zu/%-5zu  %6zu  v%-4llu\n", s.step, s.accuracy, s.correct, s.total,
                    s.parse_failures, static_cast<unsigned long long>(s.notes_version));
        std::fflush(stdout);
    };
    std::printf("step  accuracy  correct      parse   notes\n");
    RunHistory history;
    try {
        history = run_learning(learning, dataset, labels, backends, store, options);
    } catch (const RunHalted& e) {
        std::fprintf(stderr, "iml: %s; resume with --resume\n", e.what());
        return kHalted;
    }
    store.write_report("curve.csv", curve_csv(history, learning.smoothing_window));
    std::printf("revision events: %zu\n", history.revision_events());
    std::printf("run %s complete: %s\n", store.manifest().run_id.c_str(), run_dir.c_str());
    return kOk;
}

int cmd_ability(const Common& c, const std::string& kind_name, const std::string& notes_pool,
                const std::string& out) {
    const auto cfg = load_config(c);
    const auto kind = parse_ability_kind(kind_name);
    if (!kind) throw ConfigError("unknown ability kind '" + kind_name + "'");
    const auto lexicon = build_default_lexicon();
    const LabelMap labels;
    const auto dataset = obtain_dataset(c, cfg, lexicon, labels);
    const auto ec = cfg.eval();
    const auto settings = eval_settings(cfg);
    const auto split = head(dataset, ec.split_size);
    BackendPool pool(cfg, lexicon, labels);

    AbilityReport report;
    switch (*kind) {
        case AbilityKind::Inference:
            report = inference_ability_test(OracleNoteSet::render(lexicon, labels), split, *pool.get("inference"),
                                            labels, settings);
            break;
        case AbilityKind::Induction:
            report = induction_ability_test(split, ec.n_groups, ec.k, *pool.get("induction"), *pool.get("inference"),
                                            labels, settings)
                         .report;
            break;
        case AbilityKind::Revision: {
            std::vector<std::string> notes;
            if (!notes_pool.empty()) {
                notes = read_notes_pool(notes_pool);
            } else {
                notes = induction_ability_test(split, ec.n_groups, std::min<std::size_t>(1, ec.n_groups),
                                               *pool.get("induction"), *pool.get("inference"), labels, settings)
                            .group_notes;
            }
            report = revision_ability_test(notes, ec.n_pairs, *pool.get("revision"), *pool.get("inference"), split,
                                           labels, settings)
                         .report;
            break;
        }
    }
    for (std::size_t i = 0; i < report.values.size(); ++i) {
        std::printf("%-24s %+.4f\n", report.trial_ids[i].c_str(), report.values[i]);
    }
    std::printf("%s\n", report.summary().c_str());
    if (!out.empty()) write_file_atomic(out, report.to_csv());
    return kOk;
}

int cmd_baseline(const Common& c, std::optional<std::size_t> k_flag) {
    const auto cfg = load_config(c);
    const auto k = k_flag.value_or(cfg.eval().icl_k);
    const auto lexicon = build_default_lexicon();
    const LabelMap labels;
    const auto dataset = obtain_dataset(c, cfg, lexicon, labels);
    const auto settings = eval_settings(cfg);
    BackendPool pool(cfg, lexicon, labels);
    const auto result =
        icl_baseline(dataset.samples, k, *pool.get("inference"), labels, settings, cfg.eval().split_size);
    std::printf("exemplars:");
    for (const auto& s : result.exemplars) std::printf(" #%llu(%s)", static_cast<unsigned long long>(s.id), s.label.c_str());
    std::printf("\nscored samples: %zu\n", result.split.size());
    print_pct("accuracy: ", result.accuracy);
    return kOk;
}

int cmd_report(const std::string& run_dir, const std::string& out_dir) {
    const auto store = RunStore::open(run_dir);
    const auto history = store.load_history();
    std::size_t window = 3;
    for (const auto& [k, v] : store.manifest().learning) {
        if (k == "smoothing_window") window = std::stoul(v);
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    write_file_atomic(fs::path(out_dir) / "curve.csv", curve_csv(history, window));

    std::vector<NotesState> snapshots;
    for (const auto v : store.snapshot_versions()) snapshots.push_back(store.load_notes(v));
    const auto revisions = store.read_revisions();
    if (snapshots.size() >= 2) {
        const auto lexicon = build_default_lexicon();
        const LabelMap labels;
        const NoteGrammar grammar(lexicon, labels);
        const auto oracle_run = store.manifest().backends.count("revision") &&
                                store.manifest().backends.at("revision").rfind("oracle", 0) == 0;
        const auto stag = stagnation_metrics(history, snapshots, revisions, oracle_run ? &grammar : nullptr);
        write_file_atomic(fs::path(out_dir) / "stagnation.csv", stag.to_csv());
        std::printf("revision events: %zu, verbatim-unchanged streak: %zu (trailing %zu), unchanged-under-conflict: %zu\n",
                    stag.events.size(), stag.longest_unchanged_streak, stag.trailing_unchanged,
                    stag.unchanged_under_conflict);
    } else {
        write_file_atomic(fs::path(out_dir) / "stagnation.csv",
                          "step,version,verbatim_unchanged,unchanged_under_conflict,conflict_classes\n");
    }
    const auto smoothed = smooth(history.accuracies(), window);
    for (std::size_t i = 0; i < history.steps.size(); ++i) {
        std::printf("%4zu  %.4f  %.4f\n", history.steps[i].step, history.steps[i].accuracy, smoothed[i]);
    }
    std::printf("wrote %s/curve.csv and %s/stagnation.csv\n", out_dir.c_str(), out_dir.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"In-memory learning harness"};
    app.require_subcommand(1);

    Common gen_c, learn_c, ability_c, baseline_c;

    auto* gen = app.add_subcommand("generate", "Generate and verify a dataset");
    std::optional<std::uint64_t> seed;
    bool paper_literal = false;
    std::string out, lexicon_out;
    add_common(gen, gen_c, false);
    gen->add_option("--seed", seed, "Generation seed");
    gen->add_flag("--paper-literal", paper_literal, "128 truth-table rows (512 samples)");
    gen->add_option("--out", out, "Dataset output path")->required();
    gen->add_option("--lexicon-out", lexicon_out, "Also export the lexicon");

    auto* learn = app.add_subcommand("learn", "Run (or resume) the learning loop");
    std::string run_dir, momentum;
    bool resume = false;
    std::optional<std::size_t> accumulation, halt_after;
    add_common(learn, learn_c);
    learn->add_option("--run-dir", run_dir, "Run directory")->required();
    learn->add_flag("--resume", resume, "Resume an existing run");
    learn->add_option("--momentum", momentum, "none|partial|full")->check(CLI::IsMember({"none", "partial", "full"}));
    learn->add_option("--accumulation-step", accumulation, "Trajectories per revision");
    learn->add_option("--halt-after-phases", halt_after, "Stop after this many phases (testing)")
        ->group("");

    auto* ability = app.add_subcommand("ability", "Run an ability test");
    std::string kind, notes_pool, ability_out;
    add_common(ability, ability_c);
    ability->add_option("--kind", kind, "inference|induction|revision")
        ->required()
        ->check(CLI::IsMember({"inference", "induction", "revision"}));
    ability->add_option("--notes-pool", notes_pool, "Notes for the revision test, separated by '---' lines");
    ability->add_option("--out", ability_out, "CSV report path");

    auto* baseline = app.add_subcommand("baseline", "Few-shot baseline accuracy");
    std::optional<std::size_t> k;
    add_common(baseline, baseline_c);
    baseline->add_option("--k", k, "Number of exemplars (default eval.icl_k)");

    auto* report = app.add_subcommand("report", "Export curves and stagnation metrics of a run");
    std::string report_dir, report_out;
    report->add_option("--run-dir", report_dir, "Run directory")->required();
    report->add_option("--out", report_out, "CSV output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*gen) return cmd_generate(gen_c, seed, paper_literal, out, lexicon_out);
        if (*learn) return cmd_learn(learn_c, run_dir, resume, momentum, accumulation, halt_after);
        if (*ability) return cmd_ability(ability_c, kind, notes_pool, ability_out);
        if (*baseline) return cmd_baseline(baseline_c, k);
        if (*report) return cmd_report(report_dir, report_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "iml: config error: %s\n", e.what());
        return kConfig;
    } catch (const PreconditionError& e) {
        std::fprintf(stderr, "iml: %s\n", e.what());
        return kConfig;
    } catch (const GenerationError& e) {
        std::fprintf(stderr, "iml: generation error: %s\n", e.what());
        return kConfig;
    } catch (const BackendError& e) {
        std::fprintf(stderr, "iml: backend error: %s\n", e.what());
        return kBackend;
    } catch (const PhaseError& e) {
        std::fprintf(stderr, "iml: %s phase failed: %s; resume with --resume\n", e.phase.c_str(), e.what());
        return kBackend;
    } catch (const IoError& e) {
        std::fprintf(stderr, "iml: I/O error: %s\n", e.what());
        return kIo;
    } catch (const Error& e) {
        std::fprintf(stderr, "iml: %s\n", e.what());
        return kConfig;
    }
    return kOk;
}
