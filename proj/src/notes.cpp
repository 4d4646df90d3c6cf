// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/notes.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "iml/common.hpp"

namespace iml {

namespace {

const std::regex& rule_regex() {
    static const std::regex re(R"(^\s*(.+?):\s*([a-z][a-z-]*)=([a-z]+)\s*\(support\s+(\d+)/(\d+)\)\s*$)");
    return re;
}

const std::regex& no_rule_regex() {
    static const std::regex re(R"(^\s*(.+?):\s*no rule\s*\(support\s+(\d+)/(\d+)\)\s*$)");
    return re;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::optional<NoteLine> NoteGrammar::parse_line(std::string_view line) const {
    const std::string s(line);
    std::smatch m;
    NoteLine out;
    out.text = s;
    if (std::regex_match(s, m, rule_regex())) {
        const auto cls = labels_->index_of(m[1].str());
        const auto dim = lexicon_->dimension_index(m[2].str());
        const auto sense = lexicon_->lookup(m[3].str());
        if (!cls || !dim || !sense || sense->dimension != *dim) return std::nullopt;
        out.class_index = *cls;
        out.dimension = *dim;
        out.polarity = sense->polarity;
        out.support = std::stoull(m[4].str());
        out.total = std::stoull(m[5].str());
    } else if (std::regex_match(s, m, no_rule_regex())) {
        const auto cls = labels_->index_of(m[1].str());
        if (!cls) return std::nullopt;
        out.class_index = *cls;
        out.support = std::stoull(m[2].str());
        out.total = std::stoull(m[3].str());
    } else {
        return std::nullopt;
    }
    if (out.support > out.total) return std::nullopt;
    return out;
}

std::vector<NoteLine> NoteGrammar::parse(std::string_view text) const {
    std::vector<NoteLine> out;
    for (const auto& line : split_lines(text)) {
        if (auto parsed = parse_line(line)) out.push_back(std::move(*parsed));
    }
    return out;
}

std::string NoteGrammar::rule_line(std::size_t class_index, std::size_t dim, int polarity, std::uint64_t support,
                                   std::uint64_t total) const {
    return labels_->labels()[class_index] + ": " + (*lexicon_)[dim].name + "=" + lexicon_->representative(dim, polarity) +
           " (support " + std::to_string(support) + "/" + std::to_string(total) + ")";
}

std::string NoteGrammar::no_rule_line(std::size_t class_index, std::uint64_t support, std::uint64_t total) const {
    return labels_->labels()[class_index] + ": no rule (support " + std::to_string(support) + "/" +
           std::to_string(total) + ")";
}

std::vector<ClassConditions> extract_rules(std::string_view notes, const Lexicon& lexicon, const LabelMap& labels) {
    const auto& names = labels.labels();
    std::vector<std::map<std::size_t, std::set<int>>> seen(names.size());
    std::vector<std::string> folded_names;
    for (const auto& n : names) folded_names.push_back(normalize_label(n));

    std::optional<std::size_t> current;
    for (const auto& raw_line : split_lines(notes)) {
        const std::string line = casefold(raw_line);

        // Class mentions with their byte offsets.
        std::vector<std::pair<std::size_t, std::size_t>> mentions;
        for (std::size_t c = 0; c < folded_names.size(); ++c) {
            const auto& name = folded_names[c];
            std::size_t pos = line.find(name);
            while (pos != std::string::npos) {
                const bool left_ok = pos == 0 || !is_word_char(line[pos - 1]);
                const std::size_t end = pos + name.size();
                const bool right_ok = end >= line.size() || !is_word_char(line[end]);
                if (left_ok && right_ok) mentions.emplace_back(pos, c);
                pos = line.find(name, pos + 1);
            }
        }
        std::sort(mentions.begin(), mentions.end());

        // Adjectives with their byte offsets.
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && !std::isalpha(static_cast<unsigned char>(line[i]))) ++i;
            const std::size_t start = i;
            while (i < line.size() && std::isalpha(static_cast<unsigned char>(line[i]))) ++i;
            if (i == start) break;
            const auto sense = lexicon.lookup(std::string_view(line).substr(start, i - start));
            if (!sense) continue;
            std::optional<std::size_t> owner;
            if (mentions.size() == 1) {
                owner = mentions.front().second;
            } else if (mentions.size() > 1) {
                owner = mentions.front().second;
                for (const auto& [pos, c] : mentions) {
                    if (pos <= start) owner = c;
                }
            } else {
                owner = current;
            }
            if (owner) seen[*owner][sense->dimension].insert(sense->polarity);
        }
        if (!mentions.empty()) current = mentions.back().second;
    }

    std::vector<ClassConditions> out(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (const auto& [dim, pols] : seen[c]) {
            if (pols.size() == 1) out[c][dim] = *pols.begin();
        }
    }
    return out;
}

}  // namespace iml
