// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iml/common.hpp"

namespace iml {

enum class TaskTag { Inference, Induction, Accumulate, Revise, Merge, Baseline };

std::string_view to_string(TaskTag tag);
std::optional<TaskTag> parse_task_tag(std::string_view text);

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string text;
};

struct Decoding {
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct ChatRequest {
    TaskTag task = TaskTag::Inference;
    std::vector<ChatMessage> messages;
    Decoding decoding;

    /// Throws PreconditionError unless the final user message starts with the task tag line.
    void validate() const;
    [[nodiscard]] const std::string& final_user_text() const;
    /// Stable hash over messages and decoding parameters.
    [[nodiscard]] std::string hash() const;
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::optional<TokenUsage> usage;
    double latency_ms = 0.0;
};

// Backend failures. Each is distinct so the harness can report them separately.
struct BackendError : Error {
    using Error::Error;
};
struct TransportError : BackendError {
    using BackendError::BackendError;
};
struct AuthError : BackendError {
    using BackendError::BackendError;
};
struct RequestError : BackendError {
    using BackendError::BackendError;
};
struct CassetteMiss : BackendError {
    using BackendError::BackendError;
};

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    /// Must be safe to call concurrently.
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    [[nodiscard]] virtual std::string kind() const = 0;
};

/// Builds a request with the harness system message and one user message.
ChatRequest make_request(TaskTag task, std::string user_text, Decoding decoding);

}  // namespace iml
