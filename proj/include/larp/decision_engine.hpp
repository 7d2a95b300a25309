#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "larp/llm_bridge.hpp"
#include "larp/persona.hpp"
#include "larp/prompts.hpp"
#include "larp/simworld.hpp"
#include "larp/working_memory.hpp"

namespace larp {

struct UnitDescriptor {
    std::string id;
    std::string kind;  // "pure" | "llm"
    std::string role_tag;  // llm kind only
    std::vector<std::string> reads;
    std::vector<std::string> writes;
    bool enabled = true;
};

struct UnitContext {
    const Observation& observation;
    std::vector<WorkingMemoryEntry> snapshot;
    const Persona& persona;
    LlmBridge& bridge;
    const PromptLibrary& prompts;
};

// A unit returns the (key, value) pairs it writes into working memory.
using UnitBehavior =
    std::function<std::vector<std::pair<std::string, std::string>>(const UnitContext&)>;

struct Decision {
    std::string kind;  // "task_plan" | "dialogue"
    std::vector<std::string> tasks;
    std::string utterance;
    std::vector<std::pair<std::string, std::vector<std::string>>> trace;  // (unit id, keys written)
};

struct ConflictVerdict {
    std::string status;  // "pass" | "reject" | "rewrite"
    std::string reason;
    std::string rewritten;
};

struct DecisionEngineConfig {
    bool llm_unit_order = false;  // false: static configured order
    std::vector<std::string> static_order;  // defaults to registration order
    double unit_write_salience = 0.5;
};

// Ordered, extensible cluster of processing units reading and updating
// working memory, with order chosen by the assistant policy and a conflict
// post-check on the final output.
class DecisionEngine {
public:
    DecisionEngine(LlmBridge& bridge, const PromptLibrary& prompts,
                   DecisionEngineConfig config = {});

    void register_unit(const UnitDescriptor& descriptor, UnitBehavior behavior);
    void set_enabled(const std::string& id, bool enabled);
    std::vector<UnitDescriptor> units() const;

    // LLM mode asks for a comma-separated permutation of the enabled ids and
    // falls back to the static order when the reply is not a permutation.
    std::vector<std::string> order_units(const std::string& observation_digest);

    Decision run_pipeline(const Observation& observation, const Persona& persona,
                          WorkingMemory& wm, Tick now);

    ConflictVerdict check_conflict(const Decision& decision, const Persona& persona);

    // Applies the verdict: pass keeps the decision, rewrite substitutes the
    // utterance, reject is returned unchanged for the caller's retry policy.
    static Decision apply_verdict(Decision decision, const ConflictVerdict& verdict);

private:
    std::vector<std::string> enabled_ids() const;

    LlmBridge& bridge_;
    const PromptLibrary& prompts_;
    DecisionEngineConfig config_;
    std::vector<std::pair<UnitDescriptor, UnitBehavior>> units_;
};

// Parses the format unit's output: "TASKS:" + numbered lines, or "SAY: ...".
Decision parse_decision(const std::string& format_output);

std::string render_decision(const Decision& decision);

// Fixed-wordlist valence scorer in [-1, 1] used by the built-in `affect`
// unit; deterministic, no model call.
double lexicon_valence(const std::string& text);

}  // namespace larp
