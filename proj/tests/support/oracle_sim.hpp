// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

// Stand-alone model of the learning loop under the scripted oracle. It works
// on feature bits and support counts directly and never builds or parses a
// prompt, so it is an independent check on the real loop.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace simulator {

struct Item {
    std::vector<int> bits;
    int label = 0;          // class index, bits[0] * 2 + bits[1]
    std::string question;   // only used for the guess hash
};

struct Settings {
    std::size_t batch = 320;
    std::size_t minibatch = 32;
    std::size_t accumulation = 320;
    std::size_t steps = 10;
    bool full_momentum = true;
    double threshold = 0.8;
    std::uint64_t min_support = 8;
    std::uint64_t oracle_seed = 0;
    std::size_t dims = 10;
};

struct Rule {
    int pol = 0;
    std::uint64_t k = 0;
    std::uint64_t n = 0;
};

// Empty rules means "no rule"; no_rule_n is the total that line reports.
struct Note {
    std::map<std::size_t, Rule> rules;
    std::uint64_t no_rule_n = 0;
};

struct Evidence {
    std::array<std::uint64_t, 2> c{0, 0};
    void add(const Rule& r) {
        c[r.pol] += r.k;
        c[1 - r.pol] += r.n - r.k;
    }
    std::uint64_t total() const { return c[0] + c[1]; }
    int major() const { return c[1] > c[0] ? 1 : 0; }
};

inline std::uint64_t fnv(std::uint64_t seed, const std::string& salt, const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    auto eat = [&](unsigned char b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    for (int i = 0; i < 8; ++i) eat(static_cast<unsigned char>(seed >> (8 * i)));
    for (unsigned char ch : salt) eat(ch);
    for (unsigned char ch : text) eat(ch);
    return h;
}

inline int answer(const Item& item, const std::array<Note, 4>& notes, std::uint64_t seed) {
    int best = -1;
    std::size_t best_size = 0;
    for (int c = 0; c < 4; ++c) {
        const auto& rules = notes[c].rules;
        if (rules.empty()) continue;
        bool ok = true;
        for (const auto& [d, r] : rules) ok = ok && item.bits[d] == r.pol;
        if (ok && rules.size() > best_size) {
            best = c;
            best_size = rules.size();
        }
    }
    if (best >= 0) return best;
    return static_cast<int>(fnv(seed, "guess", item.question) % 4);
}

inline Note induce(const std::vector<const Item*>& items, const std::vector<int>& answers, int cls, std::size_t dims) {
    std::vector<std::array<std::uint64_t, 2>> counts(dims, {0, 0});
    std::uint64_t support = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (answers[i] != cls || items[i]->label != cls) continue;
        ++support;
        for (std::size_t d = 0; d < dims; ++d) ++counts[d][items[i]->bits[d]];
    }
    Note n;
    if (support == 0) {
        n.no_rule_n = items.size();
        return n;
    }
    for (std::size_t d = 0; d < dims; ++d) {
        const int p = counts[d][1] > counts[d][0] ? 1 : 0;
        n.rules[d] = {p, counts[d][p], support};
    }
    return n;
}

inline Note fold(const Note& a, const Note& b) {
    std::map<std::size_t, Evidence> ev;
    for (const auto* n : {&a, &b}) {
        for (const auto& [d, r] : n->rules) ev[d].add(r);
    }
    Note out;
    if (ev.empty()) {
        out.no_rule_n = (a.rules.empty() ? a.no_rule_n : 0) + (b.rules.empty() ? b.no_rule_n : 0);
        return out;
    }
    for (const auto& [d, e] : ev) {
        const int m = e.major();
        out.rules[d] = {m, e.c[m], e.total()};
    }
    return out;
}

inline Note revise(const Note& prev, const Note& batch, const Settings& s) {
    Note out;
    for (std::size_t d = 0; d < s.dims; ++d) {
        const auto pb = batch.rules.find(d);
        const auto pp = prev.rules.find(d);
        if (pb == batch.rules.end()) {
            if (s.full_momentum && pp != prev.rules.end()) out.rules[d] = pp->second;
            continue;
        }
        Evidence e;
        e.add(pb->second);
        if (pp != prev.rules.end()) e.add(pp->second);
        const int m = e.major();
        const double share = e.total() ? static_cast<double>(e.c[m]) / static_cast<double>(e.total()) : 0.0;
        if (!(share > s.threshold && e.total() >= s.min_support)) continue;
        if (pp != prev.rules.end() && pp->second.pol == m) {
            out.rules[d] = pp->second;
        } else {
            out.rules[d] = {m, e.c[m], e.total()};
        }
    }
    return out;
}

struct Outcome {
    std::vector<std::size_t> correct;   // per step
    std::vector<std::size_t> revisions; // per step
    std::array<Note, 4> final_notes;
};

inline Outcome run(const std::vector<Item>& data, const Settings& s) {
    Outcome out;
    std::array<Note, 4> notes;
    std::array<Note, 4> acc;
    bool acc_empty = true;
    std::size_t acc_count = 0;
    for (std::size_t step = 0; step < s.steps; ++step) {
        std::vector<const Item*> batch;
        std::vector<int> answers;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < s.batch; ++i) {
            const auto& item = data[(step * s.batch + i) % data.size()];
            batch.push_back(&item);
            answers.push_back(answer(item, notes, s.oracle_seed));
            correct += answers.back() == item.label ? 1 : 0;
        }
        out.correct.push_back(correct);
        std::size_t revs = 0;
        std::size_t cursor = 0;
        while (cursor < batch.size()) {
            const auto chunk = std::min({s.minibatch, s.accumulation - acc_count, batch.size() - cursor});
            std::vector<const Item*> items(batch.begin() + cursor, batch.begin() + cursor + chunk);
            std::vector<int> ans(answers.begin() + cursor, answers.begin() + cursor + chunk);
            for (int c = 0; c < 4; ++c) {
                const auto mb = induce(items, ans, c, s.dims);
                acc[c] = acc_empty ? mb : fold(acc[c], mb);
            }
            acc_empty = false;
            cursor += chunk;
            acc_count += chunk;
            if (acc_count == s.accumulation) {
                for (int c = 0; c < 4; ++c) notes[c] = revise(notes[c], acc[c], s);
                acc = {};
                acc_empty = true;
                acc_count = 0;
                ++revs;
            }
        }
        out.revisions.push_back(revs);
    }
    out.final_notes = notes;
    return out;
}

}  // namespace simulator
