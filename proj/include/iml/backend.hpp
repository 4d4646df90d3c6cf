// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iml/chat.hpp"
#include "iml/oracle.hpp"

namespace iml {

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds backoff_base{500};
    /// Fraction of the current delay added as random jitter, in [0, 1].
    double jitter = 0.25;

    /// Delays slept before attempts 2..max_attempts. Nondecreasing as long as jitter <= 1.
    [[nodiscard]] std::vector<std::chrono::milliseconds> schedule(std::uint64_t seed) const;
};

enum class BackendKind { Http, Replay, Oracle };
std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct BackendConfig {
    BackendKind kind = BackendKind::Oracle;
    std::string endpoint;  // e.g. https://api.openai.com/v1
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    RetryPolicy retry;
    std::chrono::milliseconds timeout{60000};
    std::string cassette;
    /// Record the live session into `cassette` while talking to the endpoint.
    bool record = false;
    OracleOptions oracle;

    /// Throws ConfigError when required fields for the kind are missing.
    void validate() const;
};

/// Sleeps between retries; replaceable in tests.
using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// OpenAI-compatible POST <endpoint>/chat/completions.
class HttpBackend final : public ChatBackend {
  public:
    explicit HttpBackend(BackendConfig config, Sleeper sleeper = {});
    ChatResponse chat(const ChatRequest& request) override;
    [[nodiscard]] std::string kind() const override { return "http"; }

    /// The JSON body sent for a request.
    [[nodiscard]] std::string request_body(const ChatRequest& request) const;
    /// Extracts the first choice's message content from a response body.
    static ChatResponse parse_response_body(const std::string& body);

  private:
    BackendConfig config_;
    std::string api_key_;
    Sleeper sleeper_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

struct CassetteEntry {
    std::string hash;
    std::string request_snapshot;  // JSON of the messages and decoding
    std::string response;
};

std::string cassette_line(const CassetteEntry& entry);
std::vector<CassetteEntry> read_cassette(const std::string& path);
std::string request_snapshot(const ChatRequest& request);

/// Forwards to an inner backend and appends every exchange to a cassette file.
class RecordingBackend final : public ChatBackend {
  public:
    RecordingBackend(std::shared_ptr<ChatBackend> inner, std::string cassette_path);
    ChatResponse chat(const ChatRequest& request) override;
    [[nodiscard]] std::string kind() const override { return "record:" + inner_->kind(); }

  private:
    std::shared_ptr<ChatBackend> inner_;
    std::string path_;
    std::mutex mu_;
};

/// Serves responses from a cassette by request hash. Repeated identical
/// requests are served in recorded order; the last response is reused after that.
class ReplayBackend final : public ChatBackend {
  public:
    explicit ReplayBackend(const std::string& cassette_path);
    ChatResponse chat(const ChatRequest& request) override;
    [[nodiscard]] std::string kind() const override { return "replay"; }
    [[nodiscard]] std::size_t size() const { return entries_; }

  private:
    std::map<std::string, std::vector<std::string>> by_hash_;
    std::map<std::string, std::size_t> cursor_;
    std::size_t entries_ = 0;
    std::mutex mu_;
};

/// Wraps a backend according to record / replay mode.
enum class CassetteMode { Record, Replay };
std::shared_ptr<ChatBackend> record_replay_wrap(std::shared_ptr<ChatBackend> inner, CassetteMode mode,
                                                const std::string& cassette_path);

/// Builds the backend a config describes. The oracle needs the run's lexicon and labels.
std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config, const Lexicon& lexicon, const LabelMap& labels);

}  // namespace iml
