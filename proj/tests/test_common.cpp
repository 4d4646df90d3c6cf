// Copyright 2026 The imlearn Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "iml/common.hpp"

using namespace iml;

TEST_SUITE("common") {
    TEST_CASE("fnv1a matches published vectors") {
        CHECK(Fnv1a{}.digest() == 0xcbf29ce484222325ULL);
        CHECK(Fnv1a{}.update("a").digest() == 0xaf63dc4c8601ec8cULL);
        CHECK(Fnv1a{}.update("foobar").digest() == 0x85944171f73967e8ULL);
        CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    }

    TEST_CASE("rng is seeded and bounded") {
        Rng a(42), b(42), c(43);
        std::vector<std::uint64_t> xa, xb, xc;
        for (int i = 0; i < 64; ++i) {
            xa.push_back(a.below(1000));
            xb.push_back(b.below(1000));
            xc.push_back(c.below(1000));
        }
        CHECK(xa == xb);
        CHECK(xa != xc);
        for (const auto v : xa) CHECK(v < 1000);
        CHECK_THROWS_AS(a.below(0), PreconditionError);

        std::vector<int> items{0, 1, 2, 3, 4, 5, 6, 7};
        Rng r(5);
        r.shuffle(items);
        CHECK(std::set<int>(items.begin(), items.end()).size() == 8);
    }

    TEST_CASE("text helpers") {
        CHECK(trim("  a b \n") == "a b");
        CHECK(casefold("Creature A") == "creature a");
        CHECK(normalize_label("  Creature \t  a ") == "creature a");
        CHECK(split_whitespace(" a  b\tc\n") == std::vector<std::string>{"a", "b", "c"});
        CHECK(split_lines("x\r\ny\n") == std::vector<std::string>{"x", "y"});
        CHECK(alpha_tokens("Huge, red; (size=huge)") == std::vector<std::string>{"huge", "red", "size", "huge"});
        const std::vector<std::string> parts{"a", "b"};
        CHECK(join(parts, ", ") == "a, b");
    }

    TEST_CASE("leading words keep the original spacing") {
        CHECK(leading_words("one two\nthree four", 3) == "one two\nthree");
        CHECK(leading_words("  one two", 1) == "  one");
        CHECK(leading_words("one", 5) == "one");
        CHECK(starts_with_words("one two\nthree four", "one two three", 3));
        CHECK(starts_with_words("one   two three", "one two", 2));
        CHECK_FALSE(starts_with_words("one three", "one two", 2));
        CHECK_FALSE(starts_with_words("one", "one two", 2));
    }
}
