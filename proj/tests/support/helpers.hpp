// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "iml/benchmark.hpp"
#include "iml/chat.hpp"
#include "iml/learning.hpp"
#include "iml/oracle.hpp"
#include "iml/run_store.hpp"

namespace testing {

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("iml-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline const iml::Lexicon& lexicon() {
    static const iml::Lexicon lex = iml::build_default_lexicon();
    return lex;
}

inline const iml::LabelMap& labels() {
    static const iml::LabelMap map;
    return map;
}

inline const iml::Dataset& default_dataset() {
    static const iml::Dataset ds = iml::generate_dataset(iml::GenConfig{}, lexicon(), labels());
    return ds;
}

inline std::shared_ptr<iml::OracleBackend> oracle(iml::OracleOptions options = {}) {
    return std::make_shared<iml::OracleBackend>(iml::OracleState{lexicon(), labels(), options});
}

/// Wraps another backend, keeping every request and optionally rewriting replies.
class SpyBackend final : public iml::ChatBackend {
  public:
    using Rewrite = std::function<std::string(const iml::ChatRequest&, std::string reply)>;

    explicit SpyBackend(std::shared_ptr<iml::ChatBackend> inner, Rewrite rewrite = {})
        : inner_(std::move(inner)), rewrite_(std::move(rewrite)) {}

    iml::ChatResponse chat(const iml::ChatRequest& request) override {
        auto resp = inner_->chat(request);
        if (rewrite_) resp.text = rewrite_(request, resp.text);
        std::lock_guard lock(mu_);
        requests_.push_back(request);
        replies_.push_back(resp.text);
        return resp;
    }
    [[nodiscard]] std::string kind() const override { return "spy"; }

    std::vector<iml::ChatRequest> requests(iml::TaskTag tag) const {
        std::lock_guard lock(mu_);
        std::vector<iml::ChatRequest> out;
        for (const auto& r : requests_) {
            if (r.task == tag) out.push_back(r);
        }
        return out;
    }
    std::vector<std::pair<iml::ChatRequest, std::string>> exchanges(iml::TaskTag tag) const {
        std::lock_guard lock(mu_);
        std::vector<std::pair<iml::ChatRequest, std::string>> out;
        for (std::size_t i = 0; i < requests_.size(); ++i) {
            if (requests_[i].task == tag) out.emplace_back(requests_[i], replies_[i]);
        }
        return out;
    }

  private:
    std::shared_ptr<iml::ChatBackend> inner_;
    Rewrite rewrite_;
    mutable std::mutex mu_;
    std::vector<iml::ChatRequest> requests_;
    std::vector<std::string> replies_;
};

/// Fails every call whose task matches, after `pass` successful ones.
class FailingBackend final : public iml::ChatBackend {
  public:
    FailingBackend(std::shared_ptr<iml::ChatBackend> inner, iml::TaskTag tag, std::size_t pass)
        : inner_(std::move(inner)), tag_(tag), pass_(pass) {}
    iml::ChatResponse chat(const iml::ChatRequest& request) override {
        if (request.task == tag_ && seen_.fetch_add(1) >= pass_) throw iml::TransportError("injected failure");
        return inner_->chat(request);
    }
    [[nodiscard]] std::string kind() const override { return "failing"; }

  private:
    std::shared_ptr<iml::ChatBackend> inner_;
    iml::TaskTag tag_;
    std::size_t pass_;
    std::atomic<std::size_t> seen_{0};
};

inline iml::RunManifest manifest_for(const iml::Dataset& ds, const iml::LearningConfig& cfg) {
    iml::RunManifest m;
    m.run_id = "test";
    m.dataset_hash = iml::dataset_hash(ds);
    m.template_hash = iml::prompt_templates_hash();
    m.backends = {{"inference", "oracle"}, {"induction", "oracle"}, {"revision", "oracle"}};
    m.learning = cfg.echo();
    return m;
}

/// Runs the loop to completion in a fresh directory under `dir`.
inline iml::RunHistory run_oracle(const std::filesystem::path& dir, const iml::LearningConfig& cfg,
                                  const iml::Dataset& ds = default_dataset(),
                                  std::shared_ptr<iml::ChatBackend> backend = nullptr) {
    if (!backend) backend = oracle();
    auto store = iml::RunStore::init_run(dir, manifest_for(ds, cfg), false);
    return iml::run_learning(cfg, ds, labels(), iml::PhaseBackends::same(backend), store);
}

}  // namespace testing
