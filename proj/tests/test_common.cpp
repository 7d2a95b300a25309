#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "larp/common.hpp"

#include <random>

using namespace larp;

TEST_CASE("fnv1a is deterministic and input-sensitive") {
    CHECK(fnv1a("abc") == fnv1a("abc"));
    CHECK(fnv1a("abc") != fnv1a("abd"));
    CHECK(fnv1a("") == 1469598103934665603ULL);
}

TEST_CASE("to_lower and trim") {
    CHECK(to_lower("AbC") == "abc");
    CHECK(trim("  x y  ") == "x y");
    CHECK(trim("\t\n ") == "");
    CHECK(trim("") == "");
}

TEST_CASE("split keeps empty fields") {
    auto parts = split("a\t\tb", '\t');
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == "a");
    CHECK(parts[1] == "");
    CHECK(parts[2] == "b");
}

TEST_CASE("split_lines handles trailing newline") {
    auto lines = split_lines("a\nb\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "a");
    CHECK(lines[1] == "b");
}

TEST_CASE("words_of lowercases and splits on non-alphanumerics") {
    auto words = words_of("Red, apple-tree!");
    REQUIRE(words.size() == 3);
    CHECK(words[0] == "red");
    CHECK(words[1] == "apple");
    CHECK(words[2] == "tree");
}

TEST_CASE("escape_line round-trips newline, tab and backslash") {
    std::mt19937_64 rng(42);
    const std::string alphabet = "ab\\\n\tz ";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        int len = static_cast<int>(rng() % 20);
        for (int j = 0; j < len; ++j) s += alphabet[rng() % alphabet.size()];
        std::string escaped = escape_line(s);
        CHECK(escaped.find('\n') == std::string::npos);
        CHECK(escaped.find('\t') == std::string::npos);
        CHECK(unescape_line(escaped) == s);
    }
}

TEST_CASE("hex_u64 is fixed-width and invertible") {
    CHECK(hex_u64(0) == "0000000000000000");
    CHECK(hex_u64(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(hex_u64(~0ULL) == "ffffffffffffffff");
}
