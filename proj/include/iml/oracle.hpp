// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Scripted stand-in for a chat model. It reads the harness prompts by their
// documented layout and answers like an ideal learner:
//
//   INFERENCE   apply the rules found in the notes; otherwise a seeded guess
//   BASELINE    seeded guess (exemplars are ignored)
//   INDUCTION   count adjective polarities over reward-1 answers for the target
//   ACCUMULATE  add canonical supports
//   REVISE      support-weighted majority of previous and batch notes
//   MERGE       union of the per-class notes
//
// Anything it cannot read gets the reply "CANNOT PARSE".

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "iml/benchmark.hpp"
#include "iml/chat.hpp"

namespace iml {

inline constexpr std::string_view kOracleRefusal = "CANNOT PARSE";

struct OracleOptions {
    std::uint64_t seed = 0;
    /// Probability of replacing an inference answer with a random class.
    double error_rate = 0.0;
    /// A revised rule is kept only if its majority share exceeds this...
    double decision_threshold = 0.8;
    /// ...and it rests on at least this many trajectories.
    std::uint64_t min_support = 8;
};

struct OracleState {
    Lexicon lexicon = build_default_lexicon();
    LabelMap labels;
    OracleOptions options;
};

ChatResponse oracle_chat(const ChatRequest& request, const OracleState& state);

/// The answer the oracle gives when no rule in its notes applies.
std::string oracle_guess(std::string_view question, const OracleState& state);

class OracleBackend final : public ChatBackend {
  public:
    explicit OracleBackend(OracleState state) : state_(std::move(state)) {}
    ChatResponse chat(const ChatRequest& request) override { return oracle_chat(request, state_); }
    [[nodiscard]] std::string kind() const override { return "oracle"; }
    [[nodiscard]] const OracleState& state() const { return state_; }

  private:
    const OracleState state_;
};

}  // namespace iml
