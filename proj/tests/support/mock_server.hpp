// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// A local OpenAI-compatible chat completions server answering with the
// scripted oracle. Scripted status codes can be queued ahead of real replies.

#pragma once

#include <atomic>
#include <deque>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"
#include "iml/oracle.hpp"
#include "json.hpp"
#include "support/helpers.hpp"

namespace testing {

class MockServer {
  public:
    explicit MockServer(std::string api_key = "test-key") : api_key_(std::move(api_key)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() { stop(); }
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    [[nodiscard]] std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    [[nodiscard]] int port() const { return port_; }
    [[nodiscard]] std::size_t hits() const { return hits_.load(); }

    /// The next calls answer with these statuses before any real reply.
    void queue_statuses(std::initializer_list<int> statuses) {
        std::lock_guard lock(mu_);
        for (const int s : statuses) scripted_.push_back(s);
    }
    std::string last_body() const {
        std::lock_guard lock(mu_);
        return last_body_;
    }
    std::string last_auth() const {
        std::lock_guard lock(mu_);
        return last_auth_;
    }

  private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ++hits_;
        int scripted = 0;
        {
            std::lock_guard lock(mu_);
            last_body_ = req.body;
            last_auth_ = req.get_header_value("Authorization");
            if (!scripted_.empty()) {
                scripted = scripted_.front();
                scripted_.pop_front();
            }
        }
        if (scripted != 0) {
            res.status = scripted;
            res.set_content(R"({"error":{"message":"scripted"}})", "application/json");
            return;
        }
        if (req.get_header_value("Authorization") != "Bearer " + api_key_) {
            res.status = 401;
            res.set_content(R"({"error":{"message":"bad key"}})", "application/json");
            return;
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            res.status = 400;
            return;
        }
        iml::ChatRequest request;
        for (const auto& m : body.at("messages")) {
            const auto role = m.at("role").get<std::string>();
            request.messages.push_back({role == "system"      ? iml::Role::System
                                        : role == "assistant" ? iml::Role::Assistant
                                                              : iml::Role::User,
                                        m.at("content").get<std::string>()});
        }
        const auto reply = iml::oracle_chat(request, state_).text;
        nlohmann::json out = {
            {"id", "cmpl-test"},
            {"object", "chat.completion"},
            {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}},
                          {"finish_reason", "stop"}}}},
            {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 5}, {"total_tokens", 15}}},
        };
        res.set_content(out.dump(), "application/json");
    }

    std::string api_key_;
    iml::OracleState state_{lexicon(), labels(), {}};
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::size_t> hits_{0};
    mutable std::mutex mu_;
    std::deque<int> scripted_;
    std::string last_body_;
    std::string last_auth_;
};

}  // namespace testing
