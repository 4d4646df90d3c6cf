// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/backend.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace iml {

using ojson = nlohmann::ordered_json;

std::vector<std::chrono::milliseconds> RetryPolicy::schedule(std::uint64_t seed) const {
    std::vector<std::chrono::milliseconds> out;
    std::mt19937_64 gen(seed);
    const double jitter_frac = std::clamp(jitter, 0.0, 1.0);
    for (int attempt = 1; attempt < max_attempts; ++attempt) {
        const double base = static_cast<double>(backoff_base.count()) * static_cast<double>(1ULL << (attempt - 1));
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(base * (1.0 + jitter_frac * u)));
        // base doubles each attempt and jitter adds at most one base, so order holds;
        // the clamp only guards rounding.
        if (!out.empty() && delay < out.back()) delay = out.back();
        out.push_back(delay);
    }
    return out;
}

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Http: return "http";
        case BackendKind::Replay: return "replay";
        case BackendKind::Oracle: return "oracle";
    }
    return "oracle";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
    for (auto k : {BackendKind::Http, BackendKind::Replay, BackendKind::Oracle}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

void BackendConfig::validate() const {
    if (kind == BackendKind::Http && (endpoint.empty() || model.empty())) {
        throw ConfigError("http backend needs both endpoint and model");
    }
    if (kind == BackendKind::Replay && cassette.empty()) throw ConfigError("replay backend needs a cassette path");
    if (record && cassette.empty()) throw ConfigError("recording needs a cassette path");
    if (retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
    if (retry.jitter < 0.0 || retry.jitter > 1.0) throw ConfigError("retry jitter must be within [0, 1]");
    if (oracle.error_rate < 0.0 || oracle.error_rate > 1.0) throw ConfigError("oracle error rate must be within [0, 1]");
}

std::string request_snapshot(const ChatRequest& request) {
    ojson j;
    j["task"] = std::string(to_string(request.task));
    j["messages"] = ojson::array();
    for (const auto& m : request.messages) {
        j["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.text}});
    }
    j["temperature"] = request.decoding.temperature;
    j["max_tokens"] = request.decoding.max_tokens;
    return j.dump();
}

std::string cassette_line(const CassetteEntry& e) {
    ojson j;
    j["hash"] = e.hash;
    j["request"] = ojson::parse(e.request_snapshot);
    j["response"] = e.response;
    return j.dump();
}

std::vector<CassetteEntry> read_cassette(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cassette: " + path);
    std::vector<CassetteEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = ojson::parse(line);
            out.push_back({j.at("hash").get<std::string>(), j.at("request").dump(), j.at("response").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw IoError("cassette " + path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner, std::string cassette_path)
    : inner_(std::move(inner)), path_(std::move(cassette_path)) {
    if (!inner_) throw ConfigError("recording needs an inner backend");
    std::ofstream touch(path_, std::ios::app);
    if (!touch) throw IoError("cannot open cassette for writing: " + path_);
}

ChatResponse RecordingBackend::chat(const ChatRequest& request) {
    auto resp = inner_->chat(request);
    const CassetteEntry entry{request.hash(), request_snapshot(request), resp.text};
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << cassette_line(entry) << "\n";
    out.flush();
    if (!out) throw IoError("cassette write failed: " + path_);
    return resp;
}

ReplayBackend::ReplayBackend(const std::string& cassette_path) {
    if (!std::filesystem::exists(cassette_path)) throw IoError("cassette not found: " + cassette_path);
    for (auto& e : read_cassette(cassette_path)) {
        by_hash_[e.hash].push_back(std::move(e.response));
        ++entries_;
    }
}

ChatResponse ReplayBackend::chat(const ChatRequest& request) {
    const auto h = request.hash();
    std::lock_guard lock(mu_);
    const auto it = by_hash_.find(h);
    if (it == by_hash_.end()) {
        throw CassetteMiss("no recorded response for " + std::string(to_string(request.task)) + " request " + h);
    }
    auto& cur = cursor_[h];
    ChatResponse resp;
    resp.text = it->second[std::min(cur, it->second.size() - 1)];
    ++cur;
    return resp;
}

std::shared_ptr<ChatBackend> record_replay_wrap(std::shared_ptr<ChatBackend> inner, CassetteMode mode,
                                                const std::string& cassette_path) {
    if (mode == CassetteMode::Record) return std::make_shared<RecordingBackend>(std::move(inner), cassette_path);
    return std::make_shared<ReplayBackend>(cassette_path);
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config, const Lexicon& lexicon, const LabelMap& labels) {
    config.validate();
    std::shared_ptr<ChatBackend> backend;
    switch (config.kind) {
        case BackendKind::Replay: return std::make_shared<ReplayBackend>(config.cassette);
        case BackendKind::Http: backend = std::make_shared<HttpBackend>(config); break;
        case BackendKind::Oracle: backend = std::make_shared<OracleBackend>(OracleState{lexicon, labels, config.oracle}); break;
    }
    if (config.record) backend = record_replay_wrap(std::move(backend), CassetteMode::Record, config.cassette);
    return backend;
}

}  // namespace iml
