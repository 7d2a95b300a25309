#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace larp {

// Game-clock tick. All time in the runtime is tick-based; there is no
// wall-clock dependency anywhere on the deterministic path.
using Tick = std::int64_t;

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 1469598103934665603ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);

// Tokenizes on non-alphanumeric boundaries, lowercased.
std::vector<std::string> words_of(std::string_view s);

// Backslash escaping for single-line record formats: \n \t \\.
std::string escape_line(std::string_view s);
std::string unescape_line(std::string_view s);

std::string hex_u64(std::uint64_t v);

}  // namespace larp
