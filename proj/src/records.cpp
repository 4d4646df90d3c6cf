// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/records.hpp"

#include <cstdio>

namespace iml {

NotesState NotesState::initial(const LabelMap& labels) {
    NotesState n;
    for (const auto& l : labels.labels()) n.per_class[l] = std::string(kInitialNotes);
    return n;
}

NotesState NotesState::with_merged(const LabelMap& labels, std::string notes) {
    auto n = initial(labels);
    n.merged = std::move(notes);
    return n;
}

std::size_t RunHistory::revision_events() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.revisions.size();
    return n;
}

std::vector<double> RunHistory::accuracies() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.accuracy);
    return out;
}

std::string RunHistory::to_text() const {
    std::string out = "# iml run history\n";
    out += "dataset_hash = " + dataset_hash + "\n";
    out += "template_hash = " + template_hash + "\n";
    for (const auto& [k, v] : config) out += k + " = " + v + "\n";
    char buf[64];
    for (const auto& s : steps) {
        std::snprintf(buf, sizeof buf, "%.6f", s.accuracy);
        out += "step=" + std::to_string(s.step) + " correct=" + std::to_string(s.correct) +
               " total=" + std::to_string(s.total) + " accuracy=" + buf +
               " notes_version=" + std::to_string(s.notes_version) + " snapshot=" + s.snapshot_id +
               " parse_failures=" + std::to_string(s.parse_failures) + " revisions=";
        for (std::size_t i = 0; i < s.revisions.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s.revisions[i]);
        }
        if (s.revisions.empty()) out += "-";
        out += " momentum_violations=" + std::to_string(s.momentum_violations) + "\n";
    }
    return out;
}

std::string snapshot_id(std::uint64_t version) { return "step-" + std::to_string(version); }

}  // namespace iml
