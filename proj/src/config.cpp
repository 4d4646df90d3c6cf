// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/config.hpp"

#include <array>
#include <charconv>

#include "iml/run_store.hpp"

namespace iml {

namespace {

constexpr std::array<std::string_view, 3> kPhases = {"inference", "induction", "revision"};

const std::vector<std::pair<std::string, std::string>>& defaults() {
    static const std::vector<std::pair<std::string, std::string>> d = {
        {"gen.seed", "7"},
        {"gen.entries_per_class", "200"},
        {"gen.combos_per_entry", "4"},
        {"gen.paper_literal_mode", "false"},
        {"learning.batch_size", "320"},
        {"learning.minibatch_size", "32"},
        {"learning.accumulation_step", "320"},
        {"learning.momentum", "full"},
        {"learning.momentum_prefix_words", "10"},
        {"learning.max_steps", "10"},
        {"learning.cycle_data", "false"},
        {"learning.smoothing_window", "3"},
        {"learning.merge_mode", "chat"},
        {"learning.concurrency", "8"},
        {"learning.answer_temperature", "0"},
        {"learning.answer_max_tokens", "128"},
        {"learning.notes_temperature", "0"},
        {"learning.notes_max_tokens", "1024"},
        {"backend.kind", "oracle"},
        {"backend.endpoint", ""},
        {"backend.model", ""},
        {"backend.api_key_env", "OPENAI_API_KEY"},
        {"backend.max_attempts", "4"},
        {"backend.backoff_base_ms", "500"},
        {"backend.jitter", "0.25"},
        {"backend.timeout_ms", "60000"},
        {"backend.cassette", ""},
        {"backend.record", "false"},
        {"backend.oracle_seed", "0"},
        {"backend.oracle_error_rate", "0"},
        {"backend.oracle_threshold", "0.8"},
        {"backend.oracle_min_support", "8"},
        {"eval.seed", "1"},
        {"eval.split_size", "320"},
        {"eval.n_groups", "80"},
        {"eval.k", "5"},
        {"eval.n_pairs", "5"},
        {"eval.icl_k", "4"},
    };
    return d;
}

bool is_phase_key(std::string_view key) {
    for (const auto phase : kPhases) {
        const std::string prefix = std::string(phase) + ".backend.";
        if (key.rfind(prefix, 0) == 0) {
            const auto base = "backend." + std::string(key.substr(prefix.size()));
            for (const auto& [k, v] : defaults()) {
                if (k == base) return true;
            }
        }
    }
    return false;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto f = casefold(v);
    if (f == "true" || f == "1" || f == "yes") return true;
    if (f == "false" || f == "0" || f == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

int to_tokens(const std::string& key, const std::string& v) {
    const auto n = to_u64(key, v);
    if (n == 0 || n > 1'000'000) throw ConfigError(key + ": expected a positive token count");
    return static_cast<int>(n);
}

}  // namespace

CliConfig::CliConfig() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
}

std::vector<std::string> CliConfig::known_keys() {
    std::vector<std::string> out;
    for (const auto& [k, v] : defaults()) out.push_back(k);
    return out;
}

void CliConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key) && !is_phase_key(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

void CliConfig::set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void CliConfig::load_text(std::string_view text, std::string_view origin) {
    std::size_t lineno = 0;
    for (const auto& raw : split_lines(text)) {
        ++lineno;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string::npos) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key = value");
        }
        try {
            set(std::string_view(line));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void CliConfig::load_file(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError&) {
        throw ConfigError("cannot read config file " + path);
    }
    load_text(text, path);
}

GenConfig CliConfig::gen() const {
    GenConfig g;
    g.seed = to_u64("gen.seed", values_.at("gen.seed"));
    g.entries_per_class = to_size("gen.entries_per_class", values_.at("gen.entries_per_class"));
    g.combos_per_entry = to_size("gen.combos_per_entry", values_.at("gen.combos_per_entry"));
    g.paper_literal_mode = to_bool("gen.paper_literal_mode", values_.at("gen.paper_literal_mode"));
    return g;
}

LearningConfig CliConfig::learning() const {
    auto v = [&](const char* k) -> const std::string& { return values_.at(std::string("learning.") + k); };
    auto key = [](const char* k) { return std::string("learning.") + k; };
    LearningConfig c;
    c.batch_size = to_size(key("batch_size"), v("batch_size"));
    c.minibatch_size = to_size(key("minibatch_size"), v("minibatch_size"));
    c.accumulation_step = to_size(key("accumulation_step"), v("accumulation_step"));
    const auto m = parse_momentum(v("momentum"));
    if (!m) throw ConfigError("learning.momentum: expected none, partial or full, got '" + v("momentum") + "'");
    c.momentum.kind = *m;
    c.momentum.prefix_words = to_size(key("momentum_prefix_words"), v("momentum_prefix_words"));
    c.max_steps = to_size(key("max_steps"), v("max_steps"));
    c.cycle_data = to_bool(key("cycle_data"), v("cycle_data"));
    c.smoothing_window = to_size(key("smoothing_window"), v("smoothing_window"));
    const auto merge = casefold(v("merge_mode"));
    if (merge == "chat") {
        c.merge_mode = MergeMode::Chat;
    } else if (merge == "concat") {
        c.merge_mode = MergeMode::Concat;
    } else {
        throw ConfigError("learning.merge_mode: expected chat or concat, got '" + v("merge_mode") + "'");
    }
    c.concurrency = to_size(key("concurrency"), v("concurrency"));
    c.answer_decoding.temperature = to_double(key("answer_temperature"), v("answer_temperature"));
    c.answer_decoding.max_tokens = to_tokens(key("answer_max_tokens"), v("answer_max_tokens"));
    c.notes_decoding.temperature = to_double(key("notes_temperature"), v("notes_temperature"));
    c.notes_decoding.max_tokens = to_tokens(key("notes_max_tokens"), v("notes_max_tokens"));
    if (c.answer_decoding.temperature < 0 || c.notes_decoding.temperature < 0) {
        throw ConfigError("temperatures must be >= 0");
    }
    return c;
}

BackendConfig CliConfig::backend(std::string_view phase) const {
    auto v = [&](const std::string& name) -> std::string {
        const auto override_key = std::string(phase) + ".backend." + name;
        if (const auto it = values_.find(override_key); it != values_.end()) return it->second;
        return values_.at("backend." + name);
    };
    auto key = [&](const std::string& name) { return "backend." + name; };
    BackendConfig b;
    const auto kind = parse_backend_kind(v("kind"));
    if (!kind) throw ConfigError("backend.kind: expected http, replay or oracle, got '" + v("kind") + "'");
    b.kind = *kind;
    b.endpoint = v("endpoint");
    b.model = v("model");
    b.api_key_env = v("api_key_env");
    const auto attempts = to_u64(key("max_attempts"), v("max_attempts"));
    if (attempts == 0 || attempts > 100) throw ConfigError("backend.max_attempts must be in [1, 100]");
    b.retry.max_attempts = static_cast<int>(attempts);
    b.retry.backoff_base = std::chrono::milliseconds(to_u64(key("backoff_base_ms"), v("backoff_base_ms")));
    b.retry.jitter = to_double(key("jitter"), v("jitter"));
    if (b.retry.jitter < 0.0 || b.retry.jitter > 1.0) throw ConfigError("backend.jitter must be in [0, 1]");
    b.timeout = std::chrono::milliseconds(to_u64(key("timeout_ms"), v("timeout_ms")));
    b.cassette = v("cassette");
    b.record = to_bool(key("record"), v("record"));
    b.oracle.seed = to_u64(key("oracle_seed"), v("oracle_seed"));
    b.oracle.error_rate = to_double(key("oracle_error_rate"), v("oracle_error_rate"));
    if (b.oracle.error_rate < 0.0 || b.oracle.error_rate > 1.0) {
        throw ConfigError("backend.oracle_error_rate must be in [0, 1]");
    }
    b.oracle.decision_threshold = to_double(key("oracle_threshold"), v("oracle_threshold"));
    b.oracle.min_support = to_u64(key("oracle_min_support"), v("oracle_min_support"));
    b.validate();
    return b;
}

EvalConfig CliConfig::eval() const {
    EvalConfig e;
    e.seed = to_u64("eval.seed", values_.at("eval.seed"));
    e.split_size = to_size("eval.split_size", values_.at("eval.split_size"));
    e.n_groups = to_size("eval.n_groups", values_.at("eval.n_groups"));
    e.k = to_size("eval.k", values_.at("eval.k"));
    e.n_pairs = to_size("eval.n_pairs", values_.at("eval.n_pairs"));
    e.icl_k = to_size("eval.icl_k", values_.at("eval.icl_k"));
    return e;
}

ConfigEcho CliConfig::echo() const { return {values_.begin(), values_.end()}; }

}  // namespace iml
