// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include "iml/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "iml/common.hpp"
#include "json.hpp"

namespace iml {

using ojson = nlohmann::ordered_json;

Lexicon::Lexicon(std::vector<DimensionSpec> dimensions) : dims_(std::move(dimensions)) {
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const auto& spec = dims_[d];
        if (spec.name.empty()) throw ConfigError("lexicon: dimension " + std::to_string(d) + " has no name");
        for (int p = 0; p < 2; ++p) {
            const auto& words = spec.words(p);
            if (words.empty()) {
                throw ConfigError("lexicon: dimension '" + spec.name + "' has an empty polarity list");
            }
            for (const auto& w : words) {
                if (w.empty() || casefold(w) != w || alpha_tokens(w) != std::vector<std::string>{w}) {
                    throw ConfigError("lexicon: '" + w + "' must be a single lower-case word");
                }
                if (!index_.emplace(w, WordSense{d, p}).second) {
                    throw ConfigError("lexicon: adjective '" + w + "' appears more than once");
                }
            }
        }
    }
}

std::optional<WordSense> Lexicon::lookup(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Lexicon::dimension_index(std::string_view name) const {
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        if (dims_[d].name == name) return d;
    }
    return std::nullopt;
}

std::string Lexicon::to_text() const {
    std::string out = "# lexicon: <dimension>: <polarity-0 words> | <polarity-1 words>\n";
    for (const auto& d : dims_) {
        out += d.name + ": " + join(d.polarity0, " ") + " | " + join(d.polarity1, " ") + "\n";
    }
    return out;
}

Lexicon Lexicon::from_text(std::string_view text) {
    std::vector<DimensionSpec> dims;
    for (const auto& raw : split_lines(text)) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto colon = line.find(':');
        const auto bar = line.find('|');
        if (colon == std::string::npos || bar == std::string::npos || bar < colon) {
            throw ConfigError("lexicon: malformed line '" + line + "'");
        }
        DimensionSpec spec;
        spec.name = trim(line.substr(0, colon));
        spec.polarity0 = split_whitespace(std::string_view(line).substr(colon + 1, bar - colon - 1));
        spec.polarity1 = split_whitespace(std::string_view(line).substr(bar + 1));
        dims.push_back(std::move(spec));
    }
    return Lexicon(std::move(dims));
}

std::string Lexicon::hash() const { return fnv1a_hex(to_text()); }

Lexicon build_default_lexicon() {
    return Lexicon({
        {"size", {"huge", "giant", "massive", "enormous"}, {"tiny", "small", "minute", "petite"}},
        {"color", {"red", "crimson", "scarlet", "ruby"}, {"blue", "azure", "navy", "cobalt"}},
        {"speed", {"fast", "swift", "quick", "rapid"}, {"slow", "sluggish", "leisurely", "plodding"}},
        {"habitat", {"aquatic", "marine", "oceanic", "swimming"},
         {"terrestrial", "landbound", "grounded", "earthbound"}},
        {"diet", {"carnivorous", "predatory", "hunting", "ravenous"},
         {"herbivorous", "vegetarian", "grazing", "foraging"}},
        {"skin", {"scaly", "armored", "plated", "spiny"}, {"furry", "fluffy", "woolly", "hairy"}},
        {"sound", {"loud", "noisy", "roaring", "booming"}, {"quiet", "silent", "hushed", "muted"}},
        {"activity-time", {"nocturnal", "nightly", "moonlit", "dusky"},
         {"diurnal", "daytime", "sunlit", "morning"}},
        {"sociality", {"social", "gregarious", "herding", "communal"},
         {"solitary", "lonely", "reclusive", "isolated"}},
        {"temperament", {"aggressive", "fierce", "hostile", "savage"}, {"gentle", "docile", "calm", "timid"}},
    });
}

LabelMap::LabelMap() : LabelMap({"Creature A", "Creature B", "Creature C", "Creature D"}) {}

LabelMap::LabelMap(std::array<std::string, 4> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        if (trim(l).empty()) throw ConfigError("label map: empty label");
        if (!seen.insert(normalize_label(l)).second) throw ConfigError("label map: duplicate label '" + l + "'");
    }
}

std::optional<std::size_t> LabelMap::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return i;
    }
    return std::nullopt;
}

const std::string_view kDefaultQuestionTemplate =
    "A creature is described as follows. It is {0} in size, {1} in color, {2} in speed, "
    "{3} in habitat, {4} in diet, {5} in skin, {6} in sound, {7} in activity time, "
    "{8} in sociality, and {9} in temperament. Which creature is it? Choose from: {classes}.";

std::string render_question(const std::vector<std::string>& words, std::string_view tmpl,
                            const std::vector<std::string>& class_names) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (trim(words[i]).empty()) throw PreconditionError("render_question: word " + std::to_string(i) + " is empty");
    }
    std::string out;
    std::set<std::size_t> used;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out.push_back(tmpl[i++]);
            continue;
        }
        const auto close = tmpl.find('}', i);
        if (close == std::string_view::npos) throw PreconditionError("render_question: unterminated slot");
        const auto slot = tmpl.substr(i + 1, close - i - 1);
        if (slot == "classes") {
            out += join(class_names, ", ");
        } else {
            std::size_t idx = 0;
            for (char c : slot) {
                if (c < '0' || c > '9') throw PreconditionError("render_question: bad slot '" + std::string(slot) + "'");
                idx = idx * 10 + static_cast<std::size_t>(c - '0');
            }
            if (slot.empty() || idx >= words.size()) {
                throw PreconditionError("render_question: slot {" + std::string(slot) + "} has no word");
            }
            used.insert(idx);
            out += words[idx];
        }
        i = close + 1;
    }
    if (used.size() != words.size()) {
        throw PreconditionError("render_question: template has " + std::to_string(used.size()) + " slots for " +
                                std::to_string(words.size()) + " words");
    }
    return out;
}

Bits row_bits(std::uint32_t row, std::size_t n_dimensions) {
    Bits bits(n_dimensions);
    for (std::size_t i = 0; i < n_dimensions; ++i) {
        bits[i] = static_cast<std::uint8_t>((row >> (n_dimensions - 1 - i)) & 1U);
    }
    return bits;
}

std::string oracle_label(const Bits& bits, const LabelMap& label_map) {
    if (bits.size() < 2) throw PreconditionError("oracle_label: need at least two bits");
    return label_map(bits[0], bits[1]);
}

namespace {

std::string bits_string(const Bits& bits) {
    std::string s;
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

std::vector<std::string> class_names(const LabelMap& m) { return {m.labels().begin(), m.labels().end()}; }

}  // namespace

Dataset generate_dataset(const GenConfig& config, const Lexicon& lexicon, const LabelMap& label_map) {
    if (config.n_classes != 4) throw ConfigError("generate_dataset: only 4 classes (two deciding bits) are supported");
    if (config.n_dimensions != lexicon.size()) {
        throw ConfigError("generate_dataset: lexicon has " + std::to_string(lexicon.size()) + " dimensions, config wants " +
                          std::to_string(config.n_dimensions));
    }
    if (config.n_dimensions < 2 || config.n_dimensions > 24) throw ConfigError("generate_dataset: n_dimensions out of range");
    if (config.combos_per_entry < 1) throw ConfigError("generate_dataset: combos_per_entry must be >= 1");
    const std::uint32_t n_rows = 1U << config.n_dimensions;
    const std::size_t per_class_rows = n_rows / config.n_classes;
    const std::size_t entries = config.effective_entries_per_class();
    if (entries < 1 || entries > per_class_rows) {
        throw ConfigError("generate_dataset: entries_per_class must be in [1, " + std::to_string(per_class_rows) + "]");
    }

    Rng rng(config.seed);
    Dataset ds;
    ds.seed = config.seed;
    ds.config = config;
    ds.lexicon_hash = lexicon.hash();

    const auto names = class_names(label_map);
    std::vector<Sample> samples;
    const std::uint32_t class_shift = static_cast<std::uint32_t>(config.n_dimensions - 2);
    for (std::uint32_t cls = 0; cls < 4; ++cls) {
        std::vector<std::uint32_t> rows;
        for (std::uint32_t r = 0; r < n_rows; ++r) {
            if ((r >> class_shift) == cls) rows.push_back(r);
        }
        rng.shuffle(rows);
        if (config.paper_literal_mode) {
            // Take rows with their distractor complements so every distractor stays balanced per class.
            const std::uint32_t mask = (1U << class_shift) - 1;
            std::set<std::uint32_t> chosen;
            std::vector<std::uint32_t> ordered;
            for (const auto r : rows) {
                if (ordered.size() + 2 > entries) break;
                if (chosen.count(r)) continue;
                chosen.insert(r);
                chosen.insert(r ^ mask);
                ordered.push_back(r);
                ordered.push_back(r ^ mask);
            }
            for (const auto r : rows) {
                if (!chosen.count(r)) ordered.push_back(r);
            }
            rows = std::move(ordered);
        }
        ds.used_entries.insert(ds.used_entries.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(entries));
        ds.heldout_entries.insert(ds.heldout_entries.end(), rows.begin() + static_cast<std::ptrdiff_t>(entries),
                                  rows.end());
        for (std::size_t k = 0; k < entries; ++k) {
            const auto row = rows[k];
            const Bits bits = row_bits(row, config.n_dimensions);
            double capacity = 1.0;
            for (std::size_t d = 0; d < config.n_dimensions; ++d) {
                capacity *= static_cast<double>(lexicon[d].words(bits[d]).size());
            }
            if (capacity < static_cast<double>(config.combos_per_entry)) {
                throw GenerationError("generate_dataset: row " + bits_string(bits) + " admits only " +
                                      std::to_string(static_cast<long long>(capacity)) + " distinct word combinations");
            }
            std::set<std::vector<std::string>> drawn;
            std::size_t attempts = 0;
            while (drawn.size() < config.combos_per_entry) {
                if (++attempts > 1000 * config.combos_per_entry) {
                    throw GenerationError("generate_dataset: could not draw distinct combinations for row " +
                                          bits_string(bits));
                }
                std::vector<std::string> words(config.n_dimensions);
                for (std::size_t d = 0; d < config.n_dimensions; ++d) {
                    const auto& list = lexicon[d].words(bits[d]);
                    words[d] = list[rng.below(list.size())];
                }
                if (!drawn.insert(words).second) continue;
                Sample s;
                s.bits = bits;
                s.question = render_question(words, kDefaultQuestionTemplate, names);
                s.words = std::move(words);
                s.label = oracle_label(bits, label_map);
                samples.push_back(std::move(s));
            }
        }
    }
    std::sort(ds.heldout_entries.begin(), ds.heldout_entries.end());
    rng.shuffle(samples);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].id = i;
    ds.samples = std::move(samples);
    return ds;
}

std::optional<Bits> recover_bits(std::string_view question, const Lexicon& lexicon) {
    Bits bits(lexicon.size(), 0);
    std::vector<int> hits(lexicon.size(), 0);
    for (const auto& tok : alpha_tokens(question)) {
        if (const auto sense = lexicon.lookup(tok)) {
            bits[sense->dimension] = static_cast<std::uint8_t>(sense->polarity);
            ++hits[sense->dimension];
        }
    }
    for (int h : hits) {
        if (h != 1) return std::nullopt;
    }
    return bits;
}

DatasetReport verify_dataset(const Dataset& dataset, const Lexicon& lexicon, const LabelMap& label_map) {
    DatasetReport rep;
    const auto& samples = dataset.samples;
    const std::size_t n = samples.size();
    for (const auto& l : label_map.labels()) rep.class_counts[l] = 0;
    if (n == 0) {
        rep.failures.push_back("dataset is empty");
        return rep;
    }

    std::set<std::vector<std::string>> seen;
    std::size_t correct = 0;
    for (const auto& s : samples) {
        ++rep.class_counts[s.label];
        if (!seen.insert(s.words).second) ++rep.duplicate_word_vectors;
        if (oracle_label(s.bits, label_map) == s.label) ++correct;
        const auto rec = recover_bits(s.question, lexicon);
        bool ok = rec && *rec == s.bits;
        if (ok) {
            const auto toks = alpha_tokens(s.question);
            for (const auto& w : s.words) {
                if (std::count(toks.begin(), toks.end(), w) != 1) ok = false;
            }
        }
        if (!ok) ++rep.roundtrip_failures;
    }
    rep.oracle_accuracy = static_cast<double>(correct) / static_cast<double>(n);

    // Exact count-based statistics per distractor dimension.
    const std::size_t dims = samples.front().bits.size();
    for (std::size_t d = 2; d < dims; ++d) {
        std::map<std::string, std::array<std::size_t, 2>> joint;
        std::array<std::size_t, 2> marginal{0, 0};
        for (const auto& s : samples) {
            ++joint[s.label][s.bits[d]];
            ++marginal[s.bits[d]];
        }
        double mi = 0.0;
        std::array<std::size_t, 2> best{0, 0};
        for (const auto& [label, counts] : joint) {
            const double py = static_cast<double>(counts[0] + counts[1]) / static_cast<double>(n);
            for (int x = 0; x < 2; ++x) {
                best[x] = std::max(best[x], counts[x]);
                if (counts[x] == 0) continue;
                const double pxy = static_cast<double>(counts[x]) / static_cast<double>(n);
                const double px = static_cast<double>(marginal[x]) / static_cast<double>(n);
                mi += pxy * std::log2(pxy / (px * py));
            }
        }
        rep.distractor_mi_bits[d] = mi;
        rep.distractor_lone_accuracy[d] = static_cast<double>(best[0] + best[1]) / static_cast<double>(n);
    }

    std::set<std::size_t> distinct_counts;
    for (const auto& [_, c] : rep.class_counts) distinct_counts.insert(c);
    if (distinct_counts.size() != 1) rep.failures.push_back("class counts are unbalanced");
    if (rep.duplicate_word_vectors) rep.failures.push_back("duplicate word vectors present");
    if (rep.oracle_accuracy != 1.0) rep.failures.push_back("oracle accuracy below 1.0");
    if (rep.roundtrip_failures) rep.failures.push_back("feature bits not recoverable from some questions");
    const double chance = 1.0 / static_cast<double>(label_map.labels().size());
    for (const auto& [d, mi] : rep.distractor_mi_bits) {
        if (mi > 0.01) rep.failures.push_back("distractor " + std::to_string(d) + " mutual information above 0.01 bits");
        if (rep.distractor_lone_accuracy[d] > chance * 1.3) {
            rep.failures.push_back("distractor " + std::to_string(d) + " predicts the label alone");
        }
    }
    return rep;
}

std::string DatasetReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(6);
    os << "status: " << (ok() ? "ok" : "FAILED") << "\n";
    for (const auto& [label, c] : class_counts) os << "class_count[" << label << "]: " << c << "\n";
    os << "duplicate_word_vectors: " << duplicate_word_vectors << "\n";
    os << "oracle_accuracy: " << oracle_accuracy << "\n";
    os << "roundtrip_failures: " << roundtrip_failures << "\n";
    for (const auto& [d, mi] : distractor_mi_bits) {
        os << "distractor[" << d << "]: mi_bits=" << mi << " lone_accuracy=" << distractor_lone_accuracy.at(d) << "\n";
    }
    for (const auto& f : failures) os << "failure: " << f << "\n";
    return os.str();
}

namespace {

ojson config_json(const GenConfig& c) {
    ojson j;
    j["n_dimensions"] = c.n_dimensions;
    j["n_classes"] = c.n_classes;
    j["combos_per_entry"] = c.combos_per_entry;
    j["entries_per_class"] = c.entries_per_class;
    j["paper_literal_mode"] = c.paper_literal_mode;
    j["seed"] = c.seed;
    return j;
}

GenConfig config_from_json(const ojson& j) {
    GenConfig c;
    c.n_dimensions = j.at("n_dimensions").get<std::size_t>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.combos_per_entry = j.at("combos_per_entry").get<std::size_t>();
    c.entries_per_class = j.at("entries_per_class").get<std::size_t>();
    c.paper_literal_mode = j.at("paper_literal_mode").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& ds) {
    std::string out;
    ojson header;
    header["record"] = "header";
    header["format"] = "iml-dataset/1";
    header["seed"] = ds.seed;
    header["config"] = config_json(ds.config);
    header["lexicon_hash"] = ds.lexicon_hash;
    header["used_entries"] = ds.used_entries;
    header["heldout_entries"] = ds.heldout_entries;
    out += header.dump() + "\n";
    for (const auto& s : ds.samples) {
        ojson j;
        j["id"] = s.id;
        j["bits"] = bits_string(s.bits);
        j["words"] = s.words;
        j["question"] = s.question;
        j["label"] = s.label;
        out += j.dump() + "\n";
    }
    return out;
}

Dataset dataset_from_jsonl(std::string_view text) {
    Dataset ds;
    bool have_header = false;
    std::size_t lineno = 0;
    for (const auto& line : split_lines(text)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (j.value("record", "") != "header") throw IoError("dataset: first record must be the header");
                ds.seed = j.at("seed").get<std::uint64_t>();
                ds.config = config_from_json(j.at("config"));
                ds.lexicon_hash = j.at("lexicon_hash").get<std::string>();
                ds.used_entries = j.at("used_entries").get<std::vector<std::uint32_t>>();
                ds.heldout_entries = j.at("heldout_entries").get<std::vector<std::uint32_t>>();
                have_header = true;
                continue;
            }
            Sample s;
            s.id = j.at("id").get<std::uint64_t>();
            for (char c : j.at("bits").get<std::string>()) {
                if (c != '0' && c != '1') throw IoError("dataset line " + std::to_string(lineno) + ": bad bits");
                s.bits.push_back(static_cast<std::uint8_t>(c - '0'));
            }
            s.words = j.at("words").get<std::vector<std::string>>();
            s.question = j.at("question").get<std::string>();
            s.label = j.at("label").get<std::string>();
            ds.samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw IoError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw IoError("dataset: missing header record");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].id != i) throw IoError("dataset: sample ids must be contiguous from 0");
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << dataset_to_jsonl(dataset);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return dataset_from_jsonl(ss.str());
}

std::string dataset_hash(const Dataset& dataset) { return fnv1a_hex(dataset_to_jsonl(dataset)); }

}  // namespace iml
