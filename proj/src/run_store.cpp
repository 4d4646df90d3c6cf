// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/run_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "iml/common.hpp"
#include "json.hpp"

namespace iml {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void io_fail(const std::string& what, const fs::path& path) {
    throw IoError(what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& path) {
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            io_fail("write failed for", path);
        }
        off += static_cast<std::size_t>(n);
    }
}

std::vector<std::string> read_lines(const fs::path& path) {
    if (!fs::exists(path)) return {};
    std::vector<std::string> out;
    for (auto& line : split_lines(read_file(path))) {
        if (!trim(line).empty()) out.push_back(std::move(line));
    }
    return out;
}

std::optional<std::string> opt_string(const ojson& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("cannot create", tmp);
    write_all(fd, content, tmp);
    if (::fsync(fd) != 0) {
        ::close(fd);
        io_fail("fsync failed for", tmp);
    }
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void append_line_durable(const fs::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("cannot open", path);
    write_all(fd, line + "\n", path);
    if (::fsync(fd) != 0) {
        ::close(fd);
        io_fail("fsync failed for", path);
    }
    ::close(fd);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Running: return "running";
        case RunStatus::Halted: return "halted";
        case RunStatus::Complete: return "complete";
    }
    return "running";
}

std::string RunManifest::to_text() const {
    std::string out = "# iml run manifest\n";
    auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("run_id", run_id);
    kv("status", std::string(to_string(status)));
    kv("last_step", std::to_string(last_step));
    kv("last_phase", last_phase);
    kv("dataset_hash", dataset_hash);
    kv("template_hash", template_hash);
    for (const auto& [phase, kind] : backends) kv("backend." + phase, kind);
    for (const auto& [k, v] : learning) kv("learning." + k, v);
    for (const auto& [k, v] : settings) kv("config." + k, v);
    return out;
}

RunManifest RunManifest::from_text(std::string_view text) {
    RunManifest m;
    for (const auto& raw : split_lines(text)) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("manifest: malformed line '" + line + "'");
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        if (key == "run_id") {
            m.run_id = value;
        } else if (key == "status") {
            if (value == "running") m.status = RunStatus::Running;
            else if (value == "halted") m.status = RunStatus::Halted;
            else if (value == "complete") m.status = RunStatus::Complete;
            else throw IoError("manifest: unknown status '" + value + "'");
        } else if (key == "last_step") {
            m.last_step = std::stoull(value);
        } else if (key == "last_phase") {
            m.last_phase = value;
        } else if (key == "dataset_hash") {
            m.dataset_hash = value;
        } else if (key == "template_hash") {
            m.template_hash = value;
        } else if (key.rfind("backend.", 0) == 0) {
            m.backends[key.substr(8)] = value;
        } else if (key.rfind("learning.", 0) == 0) {
            m.learning.emplace_back(key.substr(9), value);
        } else if (key.rfind("config.", 0) == 0) {
            m.settings.emplace_back(key.substr(7), value);
        } else {
            throw IoError("manifest: unknown key '" + key + "'");
        }
    }
    return m;
}

std::string make_run_id(std::string_view seed_material) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return std::string(buf) + "-" + fnv1a_hex(seed_material).substr(0, 8);
}

RunStore RunStore::init_run(const fs::path& dir, const RunManifest& manifest, bool resume) {
    RunStore store(dir);
    const auto manifest_path = dir / "manifest";
    if (fs::exists(manifest_path)) {
        if (!resume) throw ConfigError("run directory already holds a run (use --resume): " + dir.string());
        store.manifest_ = RunManifest::from_text(read_file(manifest_path));
        if (store.manifest_.dataset_hash != manifest.dataset_hash) {
            throw ConfigError("cannot resume: dataset differs from the one the run started with");
        }
        if (store.manifest_.learning != manifest.learning) {
            throw ConfigError("cannot resume: learning configuration differs from the manifest");
        }
        store.resumed_ = true;
        if (const auto ckpt = store.load_checkpoint()) store.reconcile(*ckpt);
        if (store.manifest_.status != RunStatus::Complete) store.set_status(RunStatus::Running);
        return store;
    }
    std::error_code ec;
    if (fs::exists(dir) && !fs::is_empty(dir, ec)) {
        throw ConfigError("run directory exists and is not an empty run: " + dir.string());
    }
    for (const auto* sub : {"trajectories", "notes", "reports"}) {
        fs::create_directories(dir / sub, ec);
        if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
    }
    store.manifest_ = manifest;
    store.manifest_.status = RunStatus::Running;
    store.write_manifest();
    return store;
}

RunStore RunStore::open(const fs::path& dir) {
    RunStore store(dir);
    const auto manifest_path = dir / "manifest";
    if (!fs::exists(manifest_path)) throw IoError("no run manifest in " + dir.string());
    store.manifest_ = RunManifest::from_text(read_file(manifest_path));
    return store;
}

void RunStore::write_manifest() { write_file_atomic(dir_ / "manifest", manifest_.to_text()); }

void RunStore::set_status(RunStatus status) {
    const auto cur = manifest_.status;
    const bool ok = cur == status || (cur == RunStatus::Running) ||
                    (cur == RunStatus::Halted && status == RunStatus::Running);
    if (!ok) {
        throw PreconditionError("run status cannot go from " + std::string(to_string(cur)) + " to " +
                                std::string(to_string(status)));
    }
    manifest_.status = status;
    write_manifest();
}

void RunStore::record_progress(std::size_t step, const std::string& phase) {
    manifest_.last_step = step;
    manifest_.last_phase = phase;
    write_manifest();
}

std::string trajectory_to_json(const TrajectoryRecord& r) {
    ojson j;
    j["sample_id"] = r.sample_id;
    j["observation"] = r.observation;
    j["notes_version"] = r.notes_version;
    j["raw_action"] = r.raw_action;
    j["parsed_answer"] = r.parsed_answer ? ojson(*r.parsed_answer) : ojson(nullptr);
    j["failure"] = r.failure ? ojson(std::string(to_string(*r.failure))) : ojson(nullptr);
    j["reward"] = r.reward;
    j["gold"] = r.gold;
    return j.dump();
}

TrajectoryRecord trajectory_from_json(std::string_view line) {
    try {
        const auto j = ojson::parse(line);
        TrajectoryRecord r;
        r.sample_id = j.at("sample_id").get<std::uint64_t>();
        r.observation = j.at("observation").get<std::string>();
        r.notes_version = j.at("notes_version").get<std::uint64_t>();
        r.raw_action = j.at("raw_action").get<std::string>();
        r.parsed_answer = opt_string(j, "parsed_answer");
        if (const auto f = opt_string(j, "failure")) {
            r.failure = parse_failure_from_string(*f);
            if (!r.failure) throw IoError("trajectory: unknown failure '" + *f + "'");
        }
        r.reward = j.at("reward").get<int>();
        r.gold = j.at("gold").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("trajectory record: ") + e.what());
    }
}

std::string notes_to_json(const NotesState& n) {
    ojson j;
    j["version"] = n.version;
    j["samples_seen"] = n.samples_seen;
    j["per_class"] = ojson::object();
    for (const auto& [k, v] : n.per_class) j["per_class"][k] = v;
    j["merged"] = n.merged;
    return j.dump(2);
}

NotesState notes_from_json(std::string_view text) {
    try {
        const auto j = ojson::parse(text);
        NotesState n;
        n.version = j.at("version").get<std::uint64_t>();
        n.samples_seen = j.at("samples_seen").get<std::uint64_t>();
        for (const auto& [k, v] : j.at("per_class").items()) n.per_class[k] = v.get<std::string>();
        n.merged = j.at("merged").get<std::string>();
        return n;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("notes snapshot: ") + e.what());
    }
}

std::string revision_to_json(const RevisionRecord& r) {
    ojson j;
    j["step"] = r.step;
    j["version_from"] = r.version_from;
    j["version_to"] = r.version_to;
    j["trajectories"] = r.trajectories;
    j["classes"] = ojson::array();
    for (const auto& c : r.classes) {
        j["classes"].push_back({{"label", c.label},
                                {"previous", c.previous},
                                {"batch", c.batch},
                                {"revised", c.revised},
                                {"momentum_violation", c.momentum_violation}});
    }
    j["merged"] = r.merged;
    return j.dump();
}

RevisionRecord revision_from_json(std::string_view line) {
    try {
        const auto j = ojson::parse(line);
        RevisionRecord r;
        r.step = j.at("step").get<std::size_t>();
        r.version_from = j.at("version_from").get<std::uint64_t>();
        r.version_to = j.at("version_to").get<std::uint64_t>();
        r.trajectories = j.at("trajectories").get<std::uint64_t>();
        for (const auto& c : j.at("classes")) {
            r.classes.push_back({c.at("label").get<std::string>(), c.at("previous").get<std::string>(),
                                 c.at("batch").get<std::string>(), c.at("revised").get<std::string>(),
                                 c.at("momentum_violation").get<bool>()});
        }
        r.merged = j.at("merged").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("revision record: ") + e.what());
    }
}

namespace {

fs::path trajectory_path(const fs::path& dir, std::size_t step) {
    return dir / "trajectories" / ("step-" + std::to_string(step) + ".log");
}

fs::path notes_path(const fs::path& dir, std::uint64_t version) {
    return dir / "notes" / (snapshot_id(version) + ".txt");
}

ojson step_json(const StepRecord& s) {
    ojson j;
    j["step"] = s.step;
    j["correct"] = s.correct;
    j["total"] = s.total;
    j["accuracy"] = s.accuracy;
    j["notes_version"] = s.notes_version;
    j["snapshot"] = s.snapshot_id;
    j["parse_failures"] = s.parse_failures;
    j["revisions"] = s.revisions;
    j["momentum_violations"] = s.momentum_violations;
    return j;
}

StepRecord step_from_json(const std::string& line) {
    try {
        const auto j = ojson::parse(line);
        StepRecord s;
        s.step = j.at("step").get<std::size_t>();
        s.correct = j.at("correct").get<std::size_t>();
        s.total = j.at("total").get<std::size_t>();
        s.accuracy = j.at("accuracy").get<double>();
        s.notes_version = j.at("notes_version").get<std::uint64_t>();
        s.snapshot_id = j.at("snapshot").get<std::string>();
        s.parse_failures = j.at("parse_failures").get<std::size_t>();
        s.revisions = j.at("revisions").get<std::vector<std::uint64_t>>();
        s.momentum_violations = j.at("momentum_violations").get<std::size_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("history record: ") + e.what());
    }
}

}  // namespace

void RunStore::write_trajectories(std::size_t step, std::span<const TrajectoryRecord> records) {
    std::string content;
    for (const auto& r : records) content += trajectory_to_json(r) + "\n";
    write_file_atomic(trajectory_path(dir_, step), content);
}

void RunStore::append_trajectory(std::size_t step, const TrajectoryRecord& record) {
    append_line_durable(trajectory_path(dir_, step), trajectory_to_json(record));
}

std::vector<TrajectoryRecord> RunStore::read_trajectories(std::size_t step) const {
    const auto path = trajectory_path(dir_, step);
    if (!fs::exists(path)) throw IoError("missing trajectory log " + path.string());
    std::vector<TrajectoryRecord> out;
    for (const auto& line : read_lines(path)) out.push_back(trajectory_from_json(line));
    return out;
}

void RunStore::snapshot_notes(const NotesState& notes) {
    const auto path = notes_path(dir_, notes.version);
    if (fs::exists(path)) throw IoError("notes snapshot already exists (snapshots are immutable): " + path.string());
    write_file_atomic(path, notes_to_json(notes));
}

NotesState RunStore::load_notes(std::uint64_t version) const {
    return notes_from_json(read_file(notes_path(dir_, version)));
}

std::vector<std::uint64_t> RunStore::snapshot_versions() const {
    std::vector<std::uint64_t> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_ / "notes", ec)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("step-", 0) != 0 || entry.path().extension() != ".txt") continue;
        const auto stem = entry.path().stem().string().substr(5);
        if (stem.empty() || stem.find_first_not_of("0123456789") != std::string::npos) continue;
        out.push_back(std::stoull(stem));
    }
    std::sort(out.begin(), out.end());
    return out;
}

void RunStore::append_revision(const RevisionRecord& record) {
    append_line_durable(dir_ / "revisions.jsonl", revision_to_json(record));
}

std::vector<RevisionRecord> RunStore::read_revisions() const {
    std::vector<RevisionRecord> out;
    for (const auto& line : read_lines(dir_ / "revisions.jsonl")) out.push_back(revision_from_json(line));
    return out;
}

void RunStore::append_step(const StepRecord& record) {
    append_line_durable(dir_ / "history.jsonl", step_json(record).dump());
}

RunHistory RunStore::load_history() const {
    RunHistory h;
    h.config = manifest_.learning;
    h.dataset_hash = manifest_.dataset_hash;
    h.template_hash = manifest_.template_hash;
    for (const auto& line : read_lines(dir_ / "history.jsonl")) h.steps.push_back(step_from_json(line));
    return h;
}

void RunStore::save_checkpoint(const LoopCheckpoint& c) {
    ojson j;
    j["step"] = c.step;
    j["phase"] = c.phase;
    j["cursor"] = c.cursor;
    j["minibatch"] = c.minibatch;
    j["accumulator"] = ojson::object();
    for (const auto& [k, v] : c.accumulator) j["accumulator"][k] = v;
    j["accumulated"] = c.accumulated;
    j["notes_version"] = c.notes_version;
    j["step_revisions"] = c.step_revisions;
    j["step_violations"] = c.step_violations;
    j["phases_completed"] = c.phases_completed;
    write_file_atomic(dir_ / "checkpoint.json", j.dump(2));
    record_progress(c.step, c.phase);
}

std::optional<LoopCheckpoint> RunStore::load_checkpoint() const {
    const auto path = dir_ / "checkpoint.json";
    if (!fs::exists(path)) return std::nullopt;
    try {
        const auto j = ojson::parse(read_file(path));
        LoopCheckpoint c;
        c.step = j.at("step").get<std::size_t>();
        c.phase = j.at("phase").get<std::string>();
        c.cursor = j.at("cursor").get<std::size_t>();
        c.minibatch = j.at("minibatch").get<std::size_t>();
        for (const auto& [k, v] : j.at("accumulator").items()) c.accumulator[k] = v.get<std::string>();
        c.accumulated = j.at("accumulated").get<std::uint64_t>();
        c.notes_version = j.at("notes_version").get<std::uint64_t>();
        c.step_revisions = j.at("step_revisions").get<std::vector<std::uint64_t>>();
        c.step_violations = j.at("step_violations").get<std::size_t>();
        c.phases_completed = j.at("phases_completed").get<std::size_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
}

void RunStore::reconcile(const LoopCheckpoint& c) {
    // Drop anything written after the last acknowledged phase.
    for (const auto v : snapshot_versions()) {
        if (v > c.notes_version) fs::remove(notes_path(dir_, v));
    }
    auto keep_lines = [&](const fs::path& path, auto keep) {
        if (!fs::exists(path)) return;
        std::string content;
        bool dropped = false;
        for (const auto& line : read_lines(path)) {
            bool ok = false;
            try {
                ok = keep(line);
            } catch (const IoError&) {
                // torn final append
            }
            if (ok) {
                content += line + "\n";
            } else {
                dropped = true;
            }
        }
        if (dropped) write_file_atomic(path, content);
    };
    keep_lines(dir_ / "revisions.jsonl",
               [&](const std::string& l) { return revision_from_json(l).version_to <= c.notes_version; });
    keep_lines(dir_ / "history.jsonl", [&](const std::string& l) { return step_from_json(l).step < c.step; });
    if (c.phase == "start" || c.phase == "step") {
        std::error_code ec;
        fs::remove(trajectory_path(dir_, c.step), ec);
    }
}

void RunStore::write_report(const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(dir_ / "reports", ec);
    write_file_atomic(dir_ / "reports" / name, content);
}

}  // namespace iml
