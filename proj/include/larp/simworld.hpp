#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "larp/common.hpp"
#include "larp/errors.hpp"

namespace larp {

enum class ParamType { string, integer, entity_ref };

struct ApiParam {
    std::string name;
    ParamType type = ParamType::string;
};

struct ApiSpec {
    std::string name;
    std::vector<ApiParam> params;
    std::string precondition;  // human-readable description
    bool is_public = true;
    bool mutating = true;  // predicates are non-mutating
    std::string owner;     // personal APIs only
};

enum class EntityKind { character, item };

struct Entity {
    std::string id;
    EntityKind kind = EntityKind::item;
    std::string location;  // empty while held
    std::string holder;    // holding entity id, empty when on the ground
    std::map<std::string, std::string> attributes;

    bool operator==(const Entity&) const = default;
};

enum class ObservationItemKind { entity_seen, utterance_heard, event };

struct ObservationItem {
    ObservationItemKind kind = ObservationItemKind::entity_seen;
    std::string subject;
    std::string detail;
};

struct Observation {
    std::string character_id;
    Tick tick = 0;
    std::vector<ObservationItem> items;

    std::string digest() const;
    std::string render() const;
};

struct ActionOutcome {
    std::string api;
    std::map<std::string, std::string> args;
    bool success = false;
    std::string message;
    Tick tick = 0;
};

struct WorldEvent {
    Tick tick = 0;
    std::string location;
    std::string actor;
    std::string kind;  // "say", "move", ...
    std::string text;
};

// Fixed v1 public action surface: 7 mutating actions + 3 predicates.
const std::vector<ApiSpec>& public_api_registry();

// Deterministic text world. Value-semantic: snapshot() is a copy and clones
// never touch the original.
class World {
public:
    void add_location(const std::string& name);
    void add_adjacency(const std::string& a, const std::string& b);
    void add_entity(const Entity& entity);

    Tick clock() const { return clock_; }
    void advance_clock() { ++clock_; }

    bool has_location(const std::string& name) const;
    bool adjacent(const std::string& a, const std::string& b) const;
    const Entity& entity(const std::string& id) const;
    bool has_entity(const std::string& id) const;
    std::vector<const Entity*> entities_at(const std::string& location) const;
    std::vector<const Entity*> inventory_of(const std::string& holder) const;
    std::vector<std::string> character_ids() const;
    const std::vector<WorldEvent>& event_log() const { return events_; }

    ActionOutcome step(const std::string& character_id, const std::string& api,
                       const std::map<std::string, std::string>& args);

    // Evaluates a predicate API (has/at/sees) without mutating anything.
    bool predicate(const std::string& character_id, const std::string& api,
                   const std::map<std::string, std::string>& args) const;

    Observation observe(const std::string& character_id);

    World snapshot() const;
    void restore(const World& snap) { *this = snap; }

    std::uint64_t state_hash() const;

    std::string serialize() const;
    static World deserialize(const std::string& text);

private:
    Entity& mutable_entity(const std::string& id);
    ActionOutcome fail(const std::string& api, const std::map<std::string, std::string>& args,
                       const std::string& message) const;
    ActionOutcome ok(const std::string& api, const std::map<std::string, std::string>& args,
                     const std::string& message);
    void log_event(const std::string& location, const std::string& actor, const std::string& kind,
                   const std::string& text);

    Tick clock_ = 0;
    std::set<std::string> locations_;
    std::set<std::pair<std::string, std::string>> adjacency_;  // stored symmetric
    std::map<std::string, Entity> entities_;
    std::vector<WorldEvent> events_;
    std::map<std::string, size_t> last_observed_event_;  // per character
};

}  // namespace larp
