// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/oracle.hpp"

#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "iml/notes.hpp"
#include "iml/prompts.hpp"

namespace iml {

namespace {

struct Refusal {};

std::string last_question(std::string_view text) {
    static constexpr std::string_view kMarker = "\nQuestion: ";
    const auto pos = text.rfind(kMarker);
    if (pos == std::string_view::npos) throw Refusal{};
    const auto start = pos + kMarker.size();
    const auto end = text.find('\n', start);
    return std::string(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::size_t require_class(std::string_view text, std::string_view key, const LabelMap& labels) {
    const auto value = header_value(text, key);
    if (!value) throw Refusal{};
    const auto idx = labels.index_of(*value);
    if (!idx) throw Refusal{};
    return *idx;
}

const std::string& require_section(const std::map<std::string, std::string>& sections, const std::string& name) {
    const auto it = sections.find(name);
    if (it == sections.end()) throw Refusal{};
    return it->second;
}

double unit_hash(std::uint64_t seed, std::string_view salt, std::string_view text) {
    const auto h = Fnv1a{}.update_u64(seed).update(salt).update(text).digest();
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::string finish(const std::string& label) { return "Finish[" + label + "]"; }

std::string answer_question(std::string_view question, std::string_view notes, const OracleState& st) {
    const auto bits = recover_bits(question, st.lexicon);
    if (!bits) throw Refusal{};
    const auto& names = st.labels.labels();
    if (st.options.error_rate > 0.0 && unit_hash(st.options.seed, "noise", question) < st.options.error_rate) {
        const auto pick = Fnv1a{}.update_u64(st.options.seed).update("noise-label").update(question).digest();
        return finish(names[pick % names.size()]);
    }
    const auto rules = extract_rules(notes, st.lexicon, st.labels);
    std::optional<std::size_t> best;
    std::size_t best_size = 0;
    for (std::size_t c = 0; c < rules.size(); ++c) {
        const auto& cond = rules[c];
        if (cond.empty()) continue;
        bool match = true;
        for (const auto& [dim, pol] : cond) {
            if (dim >= bits->size() || (*bits)[dim] != pol) {
                match = false;
                break;
            }
        }
        if (match && cond.size() > best_size) {
            best = c;
            best_size = cond.size();
        }
    }
    if (best) return finish(names[*best]);
    return finish(oracle_guess(question, st));
}

std::string do_inference(std::string_view text, const OracleState& st) {
    static constexpr std::string_view kNotes = "\nYour notes:\n";
    const auto notes_at = text.find(kNotes);
    const auto q_at = text.rfind("\nQuestion: ");
    if (notes_at == std::string_view::npos || q_at == std::string_view::npos || q_at < notes_at) throw Refusal{};
    const auto notes = text.substr(notes_at + kNotes.size(), q_at - notes_at - kNotes.size());
    return answer_question(last_question(text), notes, st);
}

std::string do_baseline(std::string_view text, const OracleState& st) {
    return answer_question(last_question(text), "", st);
}

std::string do_induction(std::string_view text, const OracleState& st) {
    const auto target = require_class(text, "Target", st.labels);
    const auto sections = split_sections(text);
    const auto& experiences = require_section(sections, "Experiences");
    const NoteGrammar grammar(st.lexicon, st.labels);

    const std::size_t dims = st.lexicon.size();
    std::vector<std::array<std::uint64_t, 2>> counts(dims, {0, 0});
    std::uint64_t shown = 0;
    std::uint64_t support = 0;
    std::string question;
    std::string answer;
    for (const auto& line : split_lines(experiences)) {
        if (line.rfind("Question: ", 0) == 0) {
            question = line.substr(10);
        } else if (line.rfind("Answer: ", 0) == 0) {
            answer = trim(std::string_view(line).substr(8));
        } else if (line.rfind("Reward: ", 0) == 0) {
            const auto reward = trim(std::string_view(line).substr(8));
            if (reward != "0" && reward != "1") throw Refusal{};
            ++shown;
            if (reward == "1" && normalize_label(answer) == normalize_label(st.labels.labels()[target])) {
                const auto bits = recover_bits(question, st.lexicon);
                if (!bits) throw Refusal{};
                for (std::size_t d = 0; d < dims; ++d) ++counts[d][(*bits)[d]];
                ++support;
            }
            question.clear();
            answer.clear();
        }
    }
    if (shown == 0) throw Refusal{};
    if (support == 0) return grammar.no_rule_line(target, 0, shown);
    std::vector<std::string> lines;
    for (std::size_t d = 0; d < dims; ++d) {
        const int p = counts[d][1] > counts[d][0] ? 1 : 0;
        lines.push_back(grammar.rule_line(target, d, p, counts[d][p], support));
    }
    return join(lines, "\n");
}

std::string do_accumulate(std::string_view text, const OracleState& st) {
    const auto target = require_class(text, "Target", st.labels);
    const auto sections = split_sections(text);
    const NoteGrammar grammar(st.lexicon, st.labels);
    std::map<std::size_t, DimensionEvidence> evidence;
    std::uint64_t no_rule_total = 0;
    bool any = false;
    for (const char* name : {"Running notes", "New notes"}) {
        for (const auto& line : grammar.parse(require_section(sections, name))) {
            if (line.class_index != target) continue;
            any = true;
            if (line.is_rule()) {
                evidence[*line.dimension].add(line);
            } else {
                no_rule_total += line.total;
            }
        }
    }
    if (!any) throw Refusal{};
    if (evidence.empty()) return grammar.no_rule_line(target, 0, no_rule_total);
    std::vector<std::string> lines;
    for (const auto& [dim, ev] : evidence) {
        const int p = ev.majority();
        lines.push_back(grammar.rule_line(target, dim, p, ev.counts[p], ev.total()));
    }
    return join(lines, "\n");
}

struct ClassNotes {
    std::map<std::size_t, DimensionEvidence> evidence;
    std::map<std::size_t, std::vector<const NoteLine*>> lines;  // by dimension, in order
    std::vector<const NoteLine*> no_rule;
};

std::map<std::size_t, ClassNotes> group_by_class(const std::vector<NoteLine>& parsed) {
    std::map<std::size_t, ClassNotes> out;
    for (const auto& line : parsed) {
        auto& cn = out[line.class_index];
        if (line.is_rule()) {
            cn.evidence[*line.dimension].add(line);
            cn.lines[*line.dimension].push_back(&line);
        } else {
            cn.no_rule.push_back(&line);
        }
    }
    return out;
}

std::string do_revise(std::string_view text, const OracleState& st) {
    const auto momentum = header_value(text, "Momentum");
    const auto scope = header_value(text, "Class");
    if (!momentum || !scope || (*momentum != "none" && *momentum != "partial" && *momentum != "full")) {
        throw Refusal{};
    }
    const bool full = *momentum == "full";
    const auto sections = split_sections(text);
    const NoteGrammar grammar(st.lexicon, st.labels);
    const auto prev_parsed = grammar.parse(require_section(sections, "Previous notes"));
    const auto batch_parsed = grammar.parse(require_section(sections, "Batch notes"));
    const auto prev = group_by_class(prev_parsed);
    const auto batch = group_by_class(batch_parsed);

    std::vector<std::size_t> classes;
    if (*scope == "all") {
        for (std::size_t c = 0; c < st.labels.labels().size(); ++c) {
            if (prev.count(c) || batch.count(c)) classes.push_back(c);
        }
    } else {
        const auto idx = st.labels.index_of(*scope);
        if (!idx) throw Refusal{};
        classes.push_back(*idx);
    }

    static const ClassNotes kEmpty;
    std::vector<std::string> out;
    for (const auto c : classes) {
        const auto& p = prev.count(c) ? prev.at(c) : kEmpty;
        const auto& b = batch.count(c) ? batch.at(c) : kEmpty;
        std::vector<std::string> lines;
        for (std::size_t d = 0; d < st.lexicon.size(); ++d) {
            const bool in_prev = p.evidence.count(d) != 0;
            const bool in_batch = b.evidence.count(d) != 0;
            if (!in_batch) {
                if (full && in_prev) {
                    for (const auto* l : p.lines.at(d)) lines.push_back(l->text);
                }
                continue;
            }
            DimensionEvidence combined = b.evidence.at(d);
            if (in_prev) {
                const auto& pe = p.evidence.at(d);
                combined.counts[0] += pe.counts[0];
                combined.counts[1] += pe.counts[1];
            }
            if (!(combined.share() > st.options.decision_threshold && combined.total() >= st.options.min_support)) {
                continue;
            }
            const int m = combined.majority();
            const NoteLine* kept = nullptr;
            if (in_prev) {
                for (const auto* l : p.lines.at(d)) {
                    if (l->polarity == m) {
                        kept = l;
                        break;
                    }
                }
            }
            lines.push_back(kept ? kept->text : grammar.rule_line(c, d, m, combined.counts[m], combined.total()));
        }
        if (lines.empty()) lines.push_back(grammar.no_rule_line(c, 0, 0));
        out.insert(out.end(), lines.begin(), lines.end());
    }
    std::string reply = join(out, "\n");

    if (*momentum == "partial") {
        const auto it = sections.find("Required opening");
        if (it == sections.end()) throw Refusal{};
        const auto& prefix = it->second;
        if (!starts_with_words(reply, prefix, std::numeric_limits<std::size_t>::max())) {
            reply = prefix + "\n" + reply;
        }
    }
    return reply;
}

std::string do_merge(std::string_view text, const OracleState& st) {
    const auto sections = split_sections(text);
    const NoteGrammar grammar(st.lexicon, st.labels);
    std::vector<NoteLine> parsed;
    for (const auto& [name, body] : sections) {
        if (name.rfind("Notes for ", 0) != 0) continue;
        auto lines = grammar.parse(body);
        parsed.insert(parsed.end(), std::make_move_iterator(lines.begin()), std::make_move_iterator(lines.end()));
    }
    if (parsed.empty()) throw Refusal{};
    const auto grouped = group_by_class(parsed);
    std::vector<std::string> out;
    for (const auto& [c, cn] : grouped) {
        if (cn.evidence.empty()) {
            out.push_back(cn.no_rule.front()->text);
            continue;
        }
        for (const auto& [d, ev] : cn.evidence) {
            const auto& lines = cn.lines.at(d);
            if (lines.size() == 1) {
                out.push_back(lines.front()->text);
            } else {
                const int m = ev.majority();
                out.push_back(grammar.rule_line(c, d, m, ev.counts[m], ev.total()));
            }
        }
    }
    return join(out, "\n");
}

}  // namespace

std::string oracle_guess(std::string_view question, const OracleState& state) {
    const auto& names = state.labels.labels();
    const auto h = Fnv1a{}.update_u64(state.options.seed).update("guess").update(question).digest();
    return names[h % names.size()];
}

ChatResponse oracle_chat(const ChatRequest& request, const OracleState& state) {
    ChatResponse resp;
    try {
        const auto& text = request.final_user_text();
        const auto first_nl = text.find('\n');
        const std::string_view first = std::string_view(text).substr(0, first_nl);
        static constexpr std::string_view kTag = "## TASK: ";
        if (first.rfind(kTag, 0) != 0) throw Refusal{};
        const auto tag = parse_task_tag(first.substr(kTag.size()));
        if (!tag) throw Refusal{};
        switch (*tag) {
            case TaskTag::Inference: resp.text = do_inference(text, state); break;
            case TaskTag::Baseline: resp.text = do_baseline(text, state); break;
            case TaskTag::Induction: resp.text = do_induction(text, state); break;
            case TaskTag::Accumulate: resp.text = do_accumulate(text, state); break;
            case TaskTag::Revise: resp.text = do_revise(text, state); break;
            case TaskTag::Merge: resp.text = do_merge(text, state); break;
        }
    } catch (const Refusal&) {
        resp.text = std::string(kOracleRefusal);
    } catch (const PreconditionError&) {
        resp.text = std::string(kOracleRefusal);
    }
    return resp;
}

}  // namespace iml
