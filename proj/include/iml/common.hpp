// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iml {

// Error hierarchy. The CLI maps each family onto a distinct exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct PreconditionError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct GenerationError : Error {
    using Error::Error;
};

/// 64-bit FNV-1a. Used for dataset, lexicon, template and request hashes.
class Fnv1a {
  public:
    Fnv1a& update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& update_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            const char byte = static_cast<char>((v >> (8 * i)) & 0xff);
            update(std::string_view(&byte, 1));
        }
        return *this;
    }
    [[nodiscard]] std::uint64_t digest() const { return state_; }
    [[nodiscard]] std::string hex() const;

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view bytes);

/// Seeded generator with a portable draw and shuffle. std::uniform_int_distribution
/// and std::shuffle are implementation-defined, so datasets would differ between
/// standard libraries without this.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

// Text helpers.
std::string trim(std::string_view s);
std::string casefold(std::string_view s);
/// Trims, collapses internal whitespace runs to one space, and case-folds.
std::string normalize_label(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
/// Lower-cased alphabetic tokens; every non-letter is a separator.
std::vector<std::string> alpha_tokens(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);
bool starts_with_words(std::string_view text, std::string_view prefix_text, std::size_t word_count);
/// Exact leading substring of `text` that spans its first `word_count` words.
std::string leading_words(std::string_view text, std::size_t word_count);

}  // namespace iml
