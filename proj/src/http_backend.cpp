// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "iml/backend.hpp"
#include "json.hpp"

namespace iml {

namespace {

struct Endpoint {
    std::string scheme_host_port;
    std::string path_prefix;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must start with http:// or https://: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("this build has no TLS support; use an http:// endpoint");
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) ep.path_prefix = url.substr(path_start);
    while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    return ep;
}

bool transient_status(int status) { return status == 408 || status == 429 || (status >= 500 && status <= 599); }

}  // namespace

HttpBackend::HttpBackend(BackendConfig config, Sleeper sleeper) : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    config_.validate();
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw AuthError("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
    const auto ep = split_endpoint(config_.endpoint);
    scheme_host_port_ = ep.scheme_host_port;
    path_prefix_ = ep.path_prefix;
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::request_body(const ChatRequest& request) const {
    nlohmann::ordered_json j;
    j["model"] = config_.model;
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) {
        j["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.text}});
    }
    j["temperature"] = request.decoding.temperature;
    j["max_tokens"] = request.decoding.max_tokens;
    return j.dump();
}

ChatResponse HttpBackend::parse_response_body(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        ChatResponse resp;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        resp.text = content.is_null() ? std::string() : content.get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            TokenUsage u;
            u.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            u.completion_tokens = j["usage"].value("completion_tokens", 0);
            resp.usage = u;
        }
        return resp;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed chat completion response: ") + e.what());
    }
}

ChatResponse HttpBackend::chat(const ChatRequest& request) {
    request.validate();
    const auto body = request_body(request);
    const auto delays = config_.retry.schedule(Fnv1a{}.update(body).digest());
    const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    const auto path = path_prefix_ + "/chat/completions";
    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1) sleeper_(delays[static_cast<std::size_t>(attempt - 2)]);
        const auto started = std::chrono::steady_clock::now();
        httplib::Client cli(scheme_host_port_);
        const auto secs = config_.timeout.count() / 1000;
        const auto usecs = (config_.timeout.count() % 1000) * 1000;
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status == 200) {
            auto resp = parse_response_body(res->body);
            resp.latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            return resp;
        }
        if (status == 401 || status == 403) throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
        if (!transient_status(status)) {
            throw RequestError("endpoint rejected request (HTTP " + std::to_string(status) + "): " + res->body.substr(0, 200));
        }
        last_error = "HTTP " + std::to_string(status);
    }
    throw TransportError("giving up after " + std::to_string(config_.retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace iml
