#pragma once

#include <string_view>
#include <vector>

namespace larp {

inline constexpr int kEmbeddingDim = 256;

// Deterministic text embedding: hashed character trigrams of the lowercased
// text, bucketed into a fixed-length vector and L2-normalized. Empty or
// whitespace-only text maps to the all-zero vector.
std::vector<float> embed(std::string_view text);

// Cosine similarity; zero if either vector has zero norm.
double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace larp
