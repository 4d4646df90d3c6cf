// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/chat.hpp"

#include <array>
#include <cstdio>

namespace iml {

namespace {
constexpr std::array<std::pair<TaskTag, std::string_view>, 6> kTags{{
    {TaskTag::Inference, "INFERENCE"},
    {TaskTag::Induction, "INDUCTION"},
    {TaskTag::Accumulate, "ACCUMULATE"},
    {TaskTag::Revise, "REVISE"},
    {TaskTag::Merge, "MERGE"},
    {TaskTag::Baseline, "BASELINE"},
}};

constexpr std::string_view kSystemPrompt =
    "You are a careful assistant that learns to identify creatures from experience. "
    "Follow the requested answer format exactly.";
}  // namespace

std::string_view to_string(TaskTag tag) {
    for (const auto& [t, s] : kTags) {
        if (t == tag) return s;
    }
    return "UNKNOWN";
}

std::optional<TaskTag> parse_task_tag(std::string_view text) {
    for (const auto& [t, s] : kTags) {
        if (s == text) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

const std::string& ChatRequest::final_user_text() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::User) return it->text;
    }
    throw PreconditionError("chat request has no user message");
}

void ChatRequest::validate() const {
    const auto& text = final_user_text();
    const std::string tag_line = "## TASK: " + std::string(to_string(task));
    const auto nl = text.find('\n');
    const auto first = std::string_view(text).substr(0, nl);
    if (first != tag_line) {
        throw PreconditionError("chat request: final user message must start with '" + tag_line + "'");
    }
    if (decoding.temperature < 0.0) throw PreconditionError("chat request: negative temperature");
    if (decoding.max_tokens <= 0) throw PreconditionError("chat request: max_tokens must be positive");
}

std::string ChatRequest::hash() const {
    Fnv1a h;
    for (const auto& m : messages) {
        h.update(to_string(m.role)).update(std::string_view("\x1f", 1));
        h.update_u64(m.text.size()).update(m.text);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "|t=%.6f|m=%d", decoding.temperature, decoding.max_tokens);
    h.update(buf);
    return h.hex();
}

ChatRequest make_request(TaskTag task, std::string user_text, Decoding decoding) {
    ChatRequest req;
    req.task = task;
    req.decoding = decoding;
    req.messages.push_back({Role::System, std::string(kSystemPrompt)});
    req.messages.push_back({Role::User, std::move(user_text)});
    req.validate();
    return req;
}

}  // namespace iml
