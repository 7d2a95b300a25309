#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "larp/action_space.hpp"
#include "larp/decision_engine.hpp"
#include "larp/memory_processing.hpp"
#include "larp/scenario.hpp"

namespace larp {

// One NPC's full cognitive state: working memory, long-term store, semantic
// knowledge base, skill library and the processors that operate on them.
class Agent {
public:
    Agent(const CharacterSpec& spec, LlmBridge& bridge, const PromptLibrary& prompts,
          World& world, TrainingPairLog& training_log);

    // observe → encode → (reflect?) → recall → decision pipeline → conflict
    // check → environment interaction. Appends human-readable lines to `out`.
    void take_turn(std::vector<std::string>& out);

    const Persona& persona() const { return persona_; }
    WorkingMemory& working_memory() { return wm_; }
    LtmStore& ltm() { return ltm_; }
    logicql::KnowledgeBase& kb() { return kb_; }
    SkillLibrary& skills() { return skills_; }
    MemoryProcessor& memory() { return *processor_; }
    DecisionEngine& decisions() { return *engine_; }

    std::string inspect(const std::string& store) const;

private:
    Persona persona_;
    World& world_;
    WorkingMemory wm_;
    LtmStore ltm_;
    logicql::KnowledgeBase kb_;
    SkillLibrary skills_;
    std::unique_ptr<MemoryProcessor> processor_;
    std::unique_ptr<DecisionEngine> engine_;
    std::unique_ptr<InteractionLoop> interaction_;
};

// Drives a scenario: one world, one bridge, NPC agents in character-id order.
class Runtime {
public:
    explicit Runtime(const ScenarioFile& scenario,
                     const std::string& training_log_path = "");

    // Executes the scenario's scripted turns; returns the transcript lines.
    std::vector<std::string> run_all();

    // One turn: injected player events, then every NPC's cognitive turn.
    std::vector<std::string> run_turn(const std::vector<PlayerEvent>& events);

    World& world() { return world_; }
    LlmBridge& bridge() { return *bridge_; }
    Agent& agent(const std::string& character_id);
    std::vector<std::string> agent_ids() const;
    const std::string& player_character() const { return player_character_; }

    void save_bundle(const std::string& path) const;
    void load_bundle(const std::string& path);

private:
    World world_;
    std::unique_ptr<LlmBridge> bridge_;
    PromptLibrary prompts_;
    TrainingPairLog training_log_;
    std::vector<std::unique_ptr<Agent>> agents_;  // character-id order
    std::vector<ScenarioTurn> scripted_turns_;
    std::string player_character_;
};

// Batch entry point: runs the scenario, writes transcript.txt and
// final.bundle into out_dir. Returns the transcript text.
std::string run_scenario(const std::string& scenario_path, const std::string& out_dir);

// Interactive REPL over the given streams (stdin/stdout in the CLI).
int repl(const std::string& scenario_path, std::istream& in, std::ostream& out);

// Stand-alone bundle inspection for the CLI.
std::string inspect_bundle(const std::string& bundle_path, const std::string& character_id,
                           const std::string& store);

}  // namespace larp
