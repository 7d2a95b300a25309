#include "larp/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace larp {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& context) {
    if (!obj.is_object()) throw ScenarioParseError(context + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key))
            throw ScenarioParseError("unknown key '" + key + "' in " + context);
    }
}

World parse_world(const json& w) {
    require_keys(w, {"locations", "adjacency", "entities"}, "world");
    World world;
    if (!w.contains("locations")) throw ScenarioParseError("world needs 'locations'");
    for (const auto& loc : w.at("locations")) world.add_location(loc.get<std::string>());
    if (w.contains("adjacency")) {
        for (const auto& pair : w.at("adjacency")) {
            if (!pair.is_array() || pair.size() != 2)
                throw ScenarioParseError("adjacency entries must be [a, b] pairs");
            std::string a = pair[0].get<std::string>();
            std::string b = pair[1].get<std::string>();
            if (!world.has_location(a) || !world.has_location(b))
                throw ScenarioParseError("adjacency references unknown location");
            world.add_adjacency(a, b);
        }
    }
    if (w.contains("entities")) {
        for (const auto& e : w.at("entities")) {
            require_keys(e, {"id", "kind", "location", "inventory", "attributes"},
                         "world entity");
            Entity entity;
            entity.id = e.at("id").get<std::string>();
            std::string kind = e.value("kind", "item");
            if (kind == "character") entity.kind = EntityKind::character;
            else if (kind == "item") entity.kind = EntityKind::item;
            else throw ScenarioParseError("entity kind must be 'character' or 'item'");
            entity.location = e.at("location").get<std::string>();
            if (!world.has_location(entity.location))
                throw ScenarioParseError("entity '" + entity.id + "' placed at unknown location");
            if (e.contains("attributes")) {
                for (const auto& [k, v] : e.at("attributes").items())
                    entity.attributes[k] = v.get<std::string>();
            }
            world.add_entity(entity);
            if (e.contains("inventory")) {
                for (const auto& item : e.at("inventory")) {
                    Entity held;
                    held.id = item.get<std::string>();
                    held.kind = EntityKind::item;
                    held.holder = entity.id;
                    world.add_entity(held);
                }
            }
        }
    }
    return world;
}

DecayParams parse_decay(const json& d) {
    require_keys(d, {"alpha", "beta", "psi", "mode", "threshold", "seed"}, "decay");
    DecayParams params;
    params.alpha = d.value("alpha", 1.0);
    params.beta = d.value("beta", 1.0);
    params.psi = d.value("psi", 1.0);
    params.threshold = d.value("threshold", 1.0);
    params.rng_seed = d.value("seed", 0ULL);
    std::string mode = d.value("mode", "deterministic");
    if (mode == "deterministic") params.retrieval_mode = RetrievalMode::deterministic_threshold;
    else if (mode == "stochastic") params.retrieval_mode = RetrievalMode::stochastic;
    else throw ScenarioParseError("decay mode must be 'deterministic' or 'stochastic'");
    if (params.alpha <= 0 || params.beta < 0 || params.psi < 0)
        throw ScenarioParseError("decay params out of range");
    return params;
}

CharacterSpec parse_character(const json& c) {
    require_keys(c,
                 {"character_id", "name", "background", "traits", "language_style",
                  "relationships", "worldview", "decay", "working_memory", "memory",
                  "semantic_facts", "episodic_memories", "units"},
                 "character");
    CharacterSpec spec;
    spec.persona.character_id = c.at("character_id").get<std::string>();
    spec.persona.name = c.value("name", spec.persona.character_id);
    spec.persona.background = c.value("background", "");
    if (c.contains("traits"))
        for (const auto& t : c.at("traits")) spec.persona.traits.push_back(t.get<std::string>());
    spec.persona.language_style = c.value("language_style", "");
    if (c.contains("relationships")) {
        for (const auto& r : c.at("relationships")) {
            if (!r.is_array() || r.size() != 2)
                throw ScenarioParseError("relationships must be [other_id, descriptor] pairs");
            spec.persona.relationships.emplace_back(r[0].get<std::string>(),
                                                    r[1].get<std::string>());
        }
    }
    if (c.contains("worldview"))
        for (const auto& w : c.at("worldview"))
            spec.persona.worldview.push_back(w.get<std::string>());
    if (c.contains("decay")) spec.persona.decay = parse_decay(c.at("decay"));

    if (c.contains("working_memory")) {
        const json& wm = c.at("working_memory");
        require_keys(wm, {"capacity", "ttl", "reflection_threshold"}, "working_memory");
        spec.working_memory.capacity = wm.value("capacity", 7);
        spec.working_memory.ttl = wm.value("ttl", 30);
        spec.working_memory.reflection_threshold =
            wm.value("reflection_threshold", spec.working_memory.capacity);
        if (spec.working_memory.capacity < 1 || spec.working_memory.reflection_threshold < 1)
            throw ScenarioParseError("working_memory capacity/threshold must be ≥ 1");
    }
    if (c.contains("memory")) {
        const json& m = c.at("memory");
        require_keys(m, {"s_min", "max_questions", "max_iterations", "retrieval_k"}, "memory");
        spec.memory.ineffective_salience = m.value("s_min", 0.2);
        spec.memory.max_questions = m.value("max_questions", 5);
        spec.memory.max_iterations = m.value("max_iterations", 3);
        spec.memory.retrieval_k = m.value("retrieval_k", 5);
    }
    spec.semantic_facts = c.value("semantic_facts", "");
    if (!spec.semantic_facts.empty()) {
        try {
            logicql::parse_program(spec.semantic_facts);
        } catch (const ParseError& e) {
            throw ScenarioParseError("semantic_facts for '" + spec.persona.character_id +
                                     "' do not parse: " + e.what());
        }
    }
    if (c.contains("episodic_memories"))
        for (const auto& m : c.at("episodic_memories"))
            spec.episodic_memories.push_back(m.get<std::string>());
    if (c.contains("units")) {
        const json& u = c.at("units");
        require_keys(u, {"llm_order", "static_order", "disabled"}, "units");
        spec.units.llm_unit_order = u.value("llm_order", false);
        if (u.contains("static_order"))
            for (const auto& id : u.at("static_order"))
                spec.units.static_order.push_back(id.get<std::string>());
        if (u.contains("disabled"))
            for (const auto& id : u.at("disabled"))
                spec.disabled_units.push_back(id.get<std::string>());
    }
    return spec;
}

BackendConfig parse_backend(const json& b, const std::string& base_dir) {
    require_keys(b, {"kind", "transcript", "endpoint", "auth_token", "role_models",
                     "timeout_ms", "max_retries"},
                 "backend");
    BackendConfig config;
    std::string kind = b.value("kind", "scripted");
    if (kind == "scripted") {
        config.kind = BackendKind::scripted;
        if (!b.contains("transcript"))
            throw ScenarioParseError("scripted backend requires 'transcript'");
        std::filesystem::path p = b.at("transcript").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        config.transcript_path = p.string();
    } else if (kind == "http") {
        config.kind = BackendKind::http;
        if (!b.contains("endpoint")) throw ScenarioParseError("http backend requires 'endpoint'");
        config.endpoint = b.at("endpoint").get<std::string>();
        config.auth_token = b.value("auth_token", "");
    } else {
        throw ScenarioParseError("backend kind must be 'scripted' or 'http'");
    }
    if (b.contains("role_models"))
        for (const auto& [role, model] : b.at("role_models").items())
            config.role_models[role] = model.get<std::string>();
    config.timeout_ms = b.value("timeout_ms", 30000);
    config.max_retries = b.value("max_retries", 2);
    return config;
}

std::vector<ScenarioTurn> parse_run(const json& r) {
    std::vector<ScenarioTurn> turns;
    for (const auto& turn : r) {
        require_keys(turn, {"player"}, "run turn");
        ScenarioTurn t;
        if (turn.contains("player")) {
            for (const auto& ev : turn.at("player")) {
                require_keys(ev, {"character", "api", "args"}, "player event");
                PlayerEvent event;
                event.character = ev.at("character").get<std::string>();
                event.api = ev.at("api").get<std::string>();
                if (ev.contains("args"))
                    for (const auto& [k, v] : ev.at("args").items())
                        event.args[k] = v.is_string() ? v.get<std::string>() : v.dump();
                t.player_events.push_back(std::move(event));
            }
        }
        turns.push_back(std::move(t));
    }
    return turns;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& json_text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ScenarioParseError(std::string("scenario is not valid JSON: ") + e.what());
    }
    require_keys(doc, {"format", "seed", "player_character", "world", "characters", "backend",
                       "run"},
                 "scenario");
    if (doc.value("format", "") != "larp-scenario/1")
        throw ScenarioParseError("scenario 'format' must be \"larp-scenario/1\"");
    if (!doc.contains("world")) throw ScenarioParseError("scenario needs a 'world' section");
    if (!doc.contains("backend")) throw ScenarioParseError("scenario needs a 'backend' section");

    ScenarioFile scenario;
    scenario.base_dir = base_dir;
    scenario.seed = doc.value("seed", 0ULL);
    scenario.player_character = doc.value("player_character", "");
    scenario.world = parse_world(doc.at("world"));
    if (doc.contains("characters"))
        for (const auto& c : doc.at("characters"))
            scenario.characters.push_back(parse_character(c));
    scenario.backend = parse_backend(doc.at("backend"), base_dir);
    if (doc.contains("run")) scenario.run = parse_run(doc.at("run"));

    std::set<std::string> seen_ids;
    for (const CharacterSpec& spec : scenario.characters) {
        if (!seen_ids.insert(spec.persona.character_id).second)
            throw ScenarioParseError("duplicate character_id '" + spec.persona.character_id + "'");
        if (!scenario.world.has_entity(spec.persona.character_id))
            throw ScenarioParseError("character '" + spec.persona.character_id +
                                     "' has no world entity");
    }
    if (!scenario.player_character.empty() &&
        !scenario.world.has_entity(scenario.player_character))
        throw ScenarioParseError("player_character '" + scenario.player_character +
                                 "' has no world entity");
    return scenario;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open scenario '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::filesystem::path p(path);
    return parse_scenario(buf.str(), p.has_parent_path() ? p.parent_path().string() : ".");
}

}  // namespace larp
