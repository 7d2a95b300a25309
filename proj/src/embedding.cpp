#include "larp/embedding.hpp"

#include <cmath>

#include "larp/common.hpp"

namespace larp {

std::vector<float> embed(std::string_view text) {
    std::vector<float> vec(kEmbeddingDim, 0.0f);
    std::string lowered = to_lower(trim(text));
    if (lowered.empty()) return vec;

    auto bump = [&vec](std::string_view gram) {
        vec[fnv1a(gram) % kEmbeddingDim] += 1.0f;
    };
    if (lowered.size() < 3) {
        bump(lowered);
    } else {
        for (size_t i = 0; i + 3 <= lowered.size(); ++i) {
            bump(std::string_view(lowered).substr(i, 3));
        }
    }

    double norm2 = 0.0;
    for (float v : vec) norm2 += static_cast<double>(v) * v;
    const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    for (float& v : vec) v *= inv;
    return vec;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace larp
