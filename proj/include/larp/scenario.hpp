#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "larp/decision_engine.hpp"
#include "larp/llm_bridge.hpp"
#include "larp/memory_processing.hpp"
#include "larp/persona.hpp"
#include "larp/simworld.hpp"
#include "larp/working_memory.hpp"

namespace larp {

struct CharacterSpec {
    Persona persona;
    WorkingMemoryConfig working_memory;
    MemoryProcessingConfig memory;
    std::string semantic_facts;  // logicql program text
    std::vector<std::string> episodic_memories;
    DecisionEngineConfig units;
    std::vector<std::string> disabled_units;
};

struct PlayerEvent {
    std::string character;
    std::string api;
    std::map<std::string, std::string> args;
};

struct ScenarioTurn {
    std::vector<PlayerEvent> player_events;
};

struct ScenarioFile {
    std::uint64_t seed = 0;
    std::string player_character;
    World world;
    std::vector<CharacterSpec> characters;
    BackendConfig backend;
    std::vector<ScenarioTurn> run;
    std::string base_dir;  // directory of the scenario file, for relative paths
};

// Parses and fully validates a scenario before any execution; unknown keys
// are rejected.
ScenarioFile parse_scenario(const std::string& json_text, const std::string& base_dir = ".");
ScenarioFile load_scenario(const std::string& path);

}  // namespace larp
