#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "larp/common.hpp"
#include "larp/embedding.hpp"
#include "larp/errors.hpp"

namespace larp {

enum class MemoryKind { episodic_nl, episodic_qa, semantic_fact };
enum class Provenance { observed, reflected, reconstructed };

std::string to_string(MemoryKind k);
std::string to_string(Provenance p);
MemoryKind memory_kind_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

struct MemoryRecord {
    std::int64_t id = 0;
    std::string character_id;
    MemoryKind kind = MemoryKind::episodic_nl;
    std::string content;   // for episodic_qa this is the answer
    std::string question;  // episodic_qa only
    std::vector<float> embedding;
    double importance = 0.5;  // λ, in [0,1]
    std::int64_t retrieval_count = 0;  // N
    Tick created_at = 0;
    Tick last_retrieved_at = 0;
    Provenance provenance = Provenance::observed;
    std::int64_t distortion_count = 0;
    std::optional<std::int64_t> parent_id;

    bool operator==(const MemoryRecord&) const = default;
};

enum class RetrievalMode { deterministic_threshold, stochastic };

struct DecayParams {
    double alpha = 1.0;      // importance scaling, > 0
    double beta = 1.0;       // time scaling, ≥ 0
    double psi = 1.0;        // per-character forgetting rate, ≥ 0
    RetrievalMode retrieval_mode = RetrievalMode::deterministic_threshold;
    double threshold = 1.0;  // σ*, deterministic mode
    std::uint64_t rng_seed = 0;
};

// Wickelgren power-law forgetting: σ = α·λ·N·(1+β·t)^(−ψ), t measured since
// the last retrieval, clamped to [0,1].
double decay_probability(const MemoryRecord& record, Tick now, const DecayParams& params);

struct ScoredRecord {
    MemoryRecord record;
    double score = 0.0;
};

// Append-only long-term store for one character population. Forgetting never
// deletes records; it only filters retrieval results.
class LtmStore {
public:
    struct StoreRequest {
        std::string character_id;
        MemoryKind kind = MemoryKind::episodic_nl;
        std::string content;
        std::string question;  // episodic_qa only
        double importance = 0.5;
        Tick created_at = 0;
        Provenance provenance = Provenance::observed;
        std::int64_t distortion_count = 0;
        std::optional<std::int64_t> parent_id;
    };

    std::int64_t store(const StoreRequest& req);

    const MemoryRecord& get(std::int64_t id) const;
    bool contains(std::int64_t id) const;
    size_t size() const { return records_.size(); }

    MemoryRecord touch(std::int64_t id, Tick now);

    std::vector<ScoredRecord> vector_search(const std::vector<float>& query,
                                            const std::string& character_id,
                                            const std::set<MemoryKind>& kinds, size_t k) const;
    std::vector<ScoredRecord> keyword_search(const std::vector<std::string>& keywords,
                                             const std::string& character_id, size_t k) const;
    std::vector<ScoredRecord> qa_search(const std::string& question,
                                        const std::string& character_id, size_t k) const;

    std::vector<const MemoryRecord*> records_for(const std::string& character_id) const;
    const std::vector<MemoryRecord>& all_records() const { return records_; }

    void save(const std::string& path) const;
    static LtmStore load(const std::string& path);

    std::string serialize() const;
    static LtmStore deserialize(const std::string& text);

    bool operator==(const LtmStore& other) const { return records_ == other.records_; }

private:
    std::vector<MemoryRecord> records_;
    std::int64_t next_id_ = 1;
};

// Drops records whose forgetting probability σ fires: deterministic mode
// drops σ ≥ σ*, stochastic mode drops with probability σ (seeded generator).
// Input order is preserved for survivors.
std::vector<MemoryRecord> forget_filter(const std::vector<MemoryRecord>& records, Tick now,
                                        const DecayParams& params);

}  // namespace larp
