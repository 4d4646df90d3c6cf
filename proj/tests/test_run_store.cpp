// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <regex>

#include "doctest.h"
#include "iml/evaluation.hpp"
#include "iml/run_store.hpp"
#include "support/helpers.hpp"

using namespace iml;
namespace fs = std::filesystem;

namespace {

LearningConfig tiny_config() {
    LearningConfig cfg;
    cfg.batch_size = 64;
    cfg.minibatch_size = 32;
    cfg.accumulation_step = 32;
    cfg.max_steps = 3;
    return cfg;
}

RunManifest sample_manifest() {
    RunManifest m;
    m.run_id = "20260101T000000Z-0123abcd";
    m.status = RunStatus::Halted;
    m.last_step = 4;
    m.last_phase = "induction";
    m.dataset_hash = "aa";
    m.template_hash = "bb";
    m.backends = {{"inference", "http"}, {"revision", "oracle"}};
    m.learning = {{"batch_size", "320"}, {"momentum", "full"}};
    m.settings = {{"backend.cassette", ""}, {"backend.endpoint", "http://x/v1?a=b"}};
    return m;
}

void append_raw(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::app);
    out << text;
}

std::size_t count_lines(const fs::path& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
    return n;
}

}  // namespace

TEST_SUITE("run_store") {
    TEST_CASE("manifest text round trip") {
        const auto m = sample_manifest();
        const auto back = RunManifest::from_text(m.to_text());
        CHECK(back.run_id == m.run_id);
        CHECK(back.status == m.status);
        CHECK(back.last_step == m.last_step);
        CHECK(back.last_phase == m.last_phase);
        CHECK(back.backends == m.backends);
        CHECK(back.learning == m.learning);
        CHECK(back.settings == m.settings);
        CHECK(back.to_text() == m.to_text());
        CHECK_THROWS_AS(RunManifest::from_text("no equals sign\n"), IoError);
        CHECK_THROWS_AS(RunManifest::from_text("status = exploded\n"), IoError);
    }

    TEST_CASE("run ids") {
        const auto id = make_run_id("seed");
        CHECK(std::regex_match(id, std::regex(R"(\d{8}T\d{6}Z-[0-9a-f]{8})")));
        CHECK(id.substr(17) == fnv1a_hex("seed").substr(0, 8));
    }

    TEST_CASE("status transitions") {
        testing::TempDir tmp;
        const auto cfg = tiny_config();
        auto store = RunStore::init_run(tmp.path() / "run", testing::manifest_for(testing::default_dataset(), cfg), false);
        CHECK(store.manifest().status == RunStatus::Running);
        store.set_status(RunStatus::Halted);
        CHECK_THROWS_AS(store.set_status(RunStatus::Complete), PreconditionError);
        store.set_status(RunStatus::Halted);
        store.set_status(RunStatus::Running);
        store.set_status(RunStatus::Complete);
        CHECK_THROWS_AS(store.set_status(RunStatus::Running), PreconditionError);
        CHECK_THROWS_AS(store.set_status(RunStatus::Halted), PreconditionError);
        CHECK(RunStore::open(tmp.path() / "run").manifest().status == RunStatus::Complete);
    }

    TEST_CASE("init refuses existing or foreign directories") {
        testing::TempDir tmp;
        const auto& ds = testing::default_dataset();
        const auto cfg = tiny_config();
        const auto dir = tmp.path() / "run";
        const auto m = testing::manifest_for(ds, cfg);
        RunStore::init_run(dir, m, false);
        for (const auto* sub : {"trajectories", "notes", "reports"}) CHECK(fs::is_directory(dir / sub));
        CHECK_THROWS_AS(RunStore::init_run(dir, m, false), ConfigError);

        auto other = m;
        other.learning.back().second = "0.5";
        CHECK_THROWS_AS(RunStore::init_run(dir, other, true), ConfigError);
        other = m;
        other.dataset_hash = "ffff";
        CHECK_THROWS_AS(RunStore::init_run(dir, other, true), ConfigError);
        CHECK(RunStore::init_run(dir, m, true).resumed());

        fs::create_directories(tmp.path() / "foreign");
        append_raw(tmp.path() / "foreign" / "x.txt", "x");
        CHECK_THROWS_AS(RunStore::init_run(tmp.path() / "foreign", m, false), ConfigError);
        CHECK_THROWS_AS(RunStore::open(tmp.path() / "missing"), IoError);
    }

    TEST_CASE("snapshots are immutable") {
        testing::TempDir tmp;
        auto store = RunStore::init_run(tmp.path() / "run", testing::manifest_for(testing::default_dataset(), tiny_config()), false);
        auto notes = NotesState::initial(testing::labels());
        store.snapshot_notes(notes);
        notes.merged = "changed";
        CHECK_THROWS_AS(store.snapshot_notes(notes), IoError);
        CHECK(store.load_notes(0) == NotesState::initial(testing::labels()));
        notes.version = 1;
        notes.samples_seen = 32;
        store.snapshot_notes(notes);
        CHECK(store.load_notes(1) == notes);
        CHECK(store.snapshot_versions() == std::vector<std::uint64_t>{0, 1});
        CHECK_THROWS_AS(store.load_notes(7), IoError);
    }

    TEST_CASE("record serialization round trips") {
        TrajectoryRecord t;
        t.sample_id = 12;
        t.observation = "q \"quoted\"\nline";
        t.notes_version = 3;
        t.raw_action = "Finish[Creature Z]";
        t.failure = ParseFailure::UnknownLabel;
        t.gold = "Creature A";
        CHECK(trajectory_from_json(trajectory_to_json(t)) == t);
        CHECK(trajectory_to_json(t).find('\n') == std::string::npos);
        t.failure.reset();
        t.parsed_answer = "Creature A";
        t.reward = 1;
        CHECK(trajectory_from_json(trajectory_to_json(t)) == t);
        CHECK_THROWS_AS(trajectory_from_json("{}"), IoError);

        RevisionRecord r;
        r.step = 2;
        r.version_from = 4;
        r.version_to = 5;
        r.trajectories = 320;
        r.classes = {{"Creature A", "p", "b", "r", true}};
        r.merged = "m";
        CHECK(revision_from_json(revision_to_json(r)) == r);

        NotesState n = NotesState::with_merged(testing::labels(), "x\ny");
        n.version = 9;
        CHECK(notes_from_json(notes_to_json(n)) == n);
    }

    TEST_CASE("file helpers") {
        testing::TempDir tmp;
        const auto p = tmp / "f.txt";
        write_file_atomic(p, "one");
        write_file_atomic(p, "two");
        CHECK(read_file(p) == "two");
        append_line_durable(tmp / "log", "a");
        append_line_durable(tmp / "log", "b");
        CHECK(read_file(tmp / "log") == "a\nb\n");
        std::size_t entries = 0;
        for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
        CHECK(entries == 2);
        CHECK_THROWS_AS(read_file(tmp / "nope"), IoError);
        CHECK_THROWS_AS(write_file_atomic(tmp / "no" / "dir" / "f", "x"), IoError);
    }

    TEST_CASE("empty run has an empty history and a header-only curve") {
        testing::TempDir tmp;
        const auto cfg = tiny_config();
        auto store = RunStore::init_run(tmp.path() / "run", testing::manifest_for(testing::default_dataset(), cfg), false);
        const auto h = store.load_history();
        CHECK(h.steps.empty());
        CHECK(h.config == cfg.echo());
        CHECK(curve_csv(h, 3) == "step,raw_accuracy,smoothed_accuracy\n");
        CHECK_FALSE(store.load_checkpoint());
        store.write_report("x.csv", "a\n");
        CHECK(read_file(tmp.path() / "run" / "reports" / "x.csv") == "a\n");
    }

    TEST_CASE("resume discards records newer than the checkpoint") {
        const auto cfg = tiny_config();
        const auto& ds = testing::default_dataset();
        testing::TempDir ref, tmp;
        const auto expected = testing::run_oracle(ref.path() / "run", cfg);
        const auto dir = tmp.path() / "run";
        const auto m = testing::manifest_for(ds, cfg);

        // Phase 1 start, 2 inference, 3 induction, 4 revision, 5 induction, 6 revision, 7 step, 8 inference.
        for (const std::size_t halt : {std::size_t{4}, std::size_t{7}, std::size_t{8}}) {
            CAPTURE(halt);
            fs::remove_all(dir);
            {
                auto store = RunStore::init_run(dir, m, false);
                RunOptions opts;
                opts.halt_after_phases = halt;
                CHECK_THROWS_AS(run_learning(cfg, ds, testing::labels(), PhaseBackends::same(testing::oracle()), store, opts),
                                RunHalted);
            }
            const auto ckpt = RunStore::open(dir).load_checkpoint();
            REQUIRE(ckpt);
            CHECK(ckpt->phases_completed == halt);

            // Leftovers of work that was in flight when the process died.
            auto future = RunStore::open(dir).load_notes(ckpt->notes_version);
            future.version = ckpt->notes_version + 1;
            future.merged = "stale";
            write_file_atomic(dir / "notes" / "step-99.txt", notes_to_json(future));
            fs::rename(dir / "notes" / "step-99.txt",
                       dir / "notes" / ("step-" + std::to_string(future.version) + ".txt"));
            RevisionRecord stale;
            stale.step = ckpt->step;
            stale.version_from = ckpt->notes_version;
            stale.version_to = future.version;
            append_line_durable(dir / "revisions.jsonl", revision_to_json(stale));
            append_raw(dir / "history.jsonl", R"({"step":)" + std::to_string(ckpt->step) + ",\"corr");
            if (ckpt->phase == "step") {
                append_line_durable(dir / "trajectories" / ("step-" + std::to_string(ckpt->step) + ".log"), "{}");
            }
            const auto revisions_before = count_lines(dir / "revisions.jsonl");

            auto store = RunStore::init_run(dir, m, true);
            CHECK(store.manifest().status == RunStatus::Running);
            CHECK(store.snapshot_versions().back() == ckpt->notes_version);
            CHECK(count_lines(dir / "revisions.jsonl") == revisions_before - 1);
            CHECK(store.load_history().steps.size() == ckpt->step - 1);
            if (ckpt->phase == "step") CHECK_FALSE(fs::exists(dir / "trajectories" / ("step-" + std::to_string(ckpt->step) + ".log")));

            const auto resumed = run_learning(cfg, ds, testing::labels(), PhaseBackends::same(testing::oracle()), store);
            CHECK(resumed.to_text() == expected.to_text());
            CHECK(read_file(dir / "revisions.jsonl") == read_file(ref.path() / "run" / "revisions.jsonl"));
            for (const auto v : store.snapshot_versions()) {
                CHECK(store.load_notes(v) == RunStore::open(ref.path() / "run").load_notes(v));
            }
        }
    }

    TEST_CASE("a completed run resumes without new work") {
        const auto cfg = tiny_config();
        testing::TempDir tmp;
        const auto dir = tmp.path() / "run";
        const auto first = testing::run_oracle(dir, cfg);
        const auto before = read_file(dir / "history.jsonl");
        auto spy = std::make_shared<testing::SpyBackend>(testing::oracle());
        auto store = RunStore::init_run(dir, testing::manifest_for(testing::default_dataset(), cfg), true);
        const auto again = run_learning(cfg, testing::default_dataset(), testing::labels(), PhaseBackends::same(spy), store);
        CHECK(again == first);
        CHECK(read_file(dir / "history.jsonl") == before);
        CHECK(spy->requests(TaskTag::Inference).empty());
        CHECK(store.manifest().status == RunStatus::Complete);
    }

    TEST_CASE("corrupt checkpoint is an I/O error") {
        testing::TempDir tmp;
        auto store = RunStore::init_run(tmp.path() / "run", testing::manifest_for(testing::default_dataset(), tiny_config()), false);
        write_file_atomic(tmp.path() / "run" / "checkpoint.json", "{not json");
        CHECK_THROWS_AS(store.load_checkpoint(), IoError);
    }
}
