#pragma once

#include <optional>
#include <string>
#include <vector>

#include "larp/llm_bridge.hpp"
#include "larp/logicql.hpp"
#include "larp/ltm_store.hpp"
#include "larp/persona.hpp"
#include "larp/prompts.hpp"
#include "larp/simworld.hpp"
#include "larp/working_memory.hpp"

namespace larp {

struct SelfAskQuestion {
    std::string text;
    int index = 0;
};

struct RetrievalBundle {
    SelfAskQuestion question;
    std::vector<logicql::QueryResult> logic_results;
    std::vector<ScoredRecord> keyword_results;
    std::vector<ScoredRecord> qa_results;
    std::vector<MemoryRecord> surviving;  // post-forgetting merged episodic records
    std::string logic_query_text;
    bool logic_parse_failed = false;
};

struct RecallResult {
    std::string answer;
    std::vector<std::int64_t> supporting_record_ids;
    int iterations = 1;
    std::string terminated_by;  // final_answer | iteration_cap
    std::vector<RetrievalBundle> bundles;
};

// Per-entry reflection classification. Every entry present at trigger time
// lands in exactly one bucket.
struct ReflectionOutcome {
    WorkingMemoryEntry entry;
    std::string classification;  // filtered | stored_episodic | stored_semantic_ok | stored_semantic_dropped
    std::string detail;
};

struct ReflectionReport {
    std::vector<ReflectionOutcome> outcomes;
    std::vector<std::int64_t> stored_episodic_ids;
    std::vector<std::string> asserted_facts;
    std::vector<std::string> dropped_facts;
};

struct MemoryProcessingConfig {
    double ineffective_salience = 0.2;  // s_min
    int max_questions = 5;              // Q_max
    int max_iterations = 3;             // I_max
    size_t retrieval_k = 5;
};

// The encoding–storage–recall engine: observations into working memory,
// threshold-triggered reflection into long-term stores, and the compound
// recall control flow (self-ask, three retrieval channels, forgetting,
// chain-of-thought answering, reconstruction).
class MemoryProcessor {
public:
    MemoryProcessor(LlmBridge& bridge, const PromptLibrary& prompts, LtmStore& ltm,
                    logicql::KnowledgeBase& kb, WorkingMemory& wm, Persona persona,
                    MemoryProcessingConfig config = {});

    std::vector<WorkingMemoryEntry> encode_observation(const Observation& observation);

    std::vector<std::int64_t> generate_qa_pairs(const std::string& content, Tick now);

    ReflectionReport reflect(Tick now);

    std::vector<SelfAskQuestion> self_ask(const std::string& context);

    RetrievalBundle compound_retrieve(const SelfAskQuestion& question, Tick now);

    RecallResult recall_loop(const Observation& observation, Tick now);

    std::optional<std::int64_t> reconstruct_memory(const MemoryRecord& record,
                                                   const std::string& answer_context, Tick now);

    const MemoryProcessingConfig& config() const { return config_; }

private:
    double score_importance(const std::string& item_text);

    LlmBridge& bridge_;
    const PromptLibrary& prompts_;
    LtmStore& ltm_;
    logicql::KnowledgeBase& kb_;
    WorkingMemory& wm_;
    Persona persona_;
    MemoryProcessingConfig config_;
};

// Parses "Q: ... / A: ..." line pairs.
std::vector<std::pair<std::string, std::string>> parse_qa_pairs(const std::string& reply);

// Parses numbered question lines ("Q1: ...", "1. ...", "1) ...").
std::vector<std::string> parse_numbered_lines(const std::string& reply);

}  // namespace larp
