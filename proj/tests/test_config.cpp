// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "doctest.h"
#include "iml/config.hpp"
#include "iml/run_store.hpp"
#include "support/helpers.hpp"

using namespace iml;

TEST_SUITE("config") {
    TEST_CASE("defaults") {
        const CliConfig cfg;
        CHECK(cfg.learning().echo() == LearningConfig{}.echo());
        CHECK(cfg.learning().concurrency == 8);
        const auto g = cfg.gen();
        CHECK(g.seed == 7);
        CHECK(g.entries_per_class == 200);
        CHECK(g.combos_per_entry == 4);
        CHECK_FALSE(g.paper_literal_mode);
        const auto b = cfg.backend("inference");
        CHECK(b.kind == BackendKind::Oracle);
        CHECK(b.api_key_env == "OPENAI_API_KEY");
        CHECK(b.retry.max_attempts == 4);
        CHECK(b.retry.backoff_base.count() == 500);
        CHECK(b.retry.jitter == 0.25);
        CHECK(b.timeout.count() == 60000);
        CHECK(b.oracle.decision_threshold == 0.8);
        CHECK(b.oracle.min_support == 8);
        const auto e = cfg.eval();
        CHECK(e.seed == 1);
        CHECK(e.split_size == 320);
        CHECK(e.n_groups == 80);
        CHECK(e.k == 5);
        CHECK(e.n_pairs == 5);
        CHECK(e.icl_k == 4);

        const auto echo = cfg.echo();
        CHECK(std::is_sorted(echo.begin(), echo.end()));
        CHECK(echo.size() == CliConfig::known_keys().size());
    }

    TEST_CASE("config text with comments and overrides") {
        CliConfig cfg;
        cfg.load_text(
            "# experiment\n"
            "learning.accumulation_step = 128   # smaller windows\n"
            "\n"
            "learning.momentum=partial\n"
            "learning.merge_mode = concat\n"
            "backend.oracle_seed = 3\n"
            "revision.backend.oracle_seed = 9\n");
        cfg.set("learning.max_steps=4");
        const auto lc = cfg.learning();
        CHECK(lc.accumulation_step == 128);
        CHECK(lc.momentum.kind == MomentumKind::Partial);
        CHECK(lc.merge_mode == MergeMode::Concat);
        CHECK(lc.max_steps == 4);
        CHECK(cfg.backend("inference").oracle.seed == 3);
        CHECK(cfg.backend("induction").oracle.seed == 3);
        CHECK(cfg.backend("revision").oracle.seed == 9);
        const auto echo = cfg.echo();
        CHECK(std::find(echo.begin(), echo.end(), std::pair<std::string, std::string>{"revision.backend.oracle_seed", "9"}) !=
              echo.end());
    }

    TEST_CASE("bad input is a config error") {
        CliConfig cfg;
        CHECK_THROWS_AS(cfg.set("learning.batch_sise=3"), ConfigError);
        CHECK_THROWS_AS(cfg.set("learning.batch_size"), ConfigError);
        CHECK_THROWS_AS(cfg.set("training.backend.kind=http"), ConfigError);
        CHECK_THROWS_AS(cfg.set("revision.backend.nonsense=1"), ConfigError);
        try {
            cfg.load_text("learning.batch_size = 320\nbogus = 1\n", "exp.conf");
            FAIL("expected a config error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("exp.conf:2") != std::string::npos);
        }
        CHECK_THROWS_AS(cfg.load_text("just words\n"), ConfigError);
        CHECK_THROWS_AS(cfg.load_file("/nonexistent/iml.conf"), ConfigError);

        auto bad = [](const std::string& assignment, auto getter) {
            CliConfig c;
            c.set(assignment);
            CHECK_THROWS_AS(getter(c), ConfigError);
        };
        bad("learning.batch_size=-1", [](const CliConfig& c) { return c.learning(); });
        bad("learning.batch_size=3x", [](const CliConfig& c) { return c.learning(); });
        bad("learning.momentum=some", [](const CliConfig& c) { return c.learning(); });
        bad("learning.merge_mode=vote", [](const CliConfig& c) { return c.learning(); });
        bad("learning.cycle_data=maybe", [](const CliConfig& c) { return c.learning(); });
        bad("learning.answer_temperature=-0.5", [](const CliConfig& c) { return c.learning(); });
        bad("learning.notes_max_tokens=0", [](const CliConfig& c) { return c.learning(); });
        bad("backend.kind=grpc", [](const CliConfig& c) { return c.backend("inference"); });
        bad("backend.jitter=2", [](const CliConfig& c) { return c.backend("inference"); });
        bad("backend.max_attempts=0", [](const CliConfig& c) { return c.backend("inference"); });
        bad("backend.oracle_error_rate=1.5", [](const CliConfig& c) { return c.backend("inference"); });
        bad("backend.kind=http", [](const CliConfig& c) { return c.backend("inference"); });
        bad("gen.seed=abc", [](const CliConfig& c) { return c.gen(); });
        bad("eval.k=", [](const CliConfig& c) { return c.eval(); });
    }

    TEST_CASE("config files") {
        testing::TempDir tmp;
        write_file_atomic(tmp / "exp.conf", "backend.kind = http\nbackend.endpoint = http://h/v1\nbackend.model = m\n");
        CliConfig cfg;
        cfg.load_file((tmp / "exp.conf").string());
        const auto b = cfg.backend("induction");
        CHECK(b.kind == BackendKind::Http);
        CHECK(b.endpoint == "http://h/v1");
        CHECK(b.model == "m");
    }
}
