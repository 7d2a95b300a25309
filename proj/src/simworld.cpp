#include "larp/simworld.hpp"

#include <algorithm>
#include <sstream>

namespace larp {

namespace {

std::string args_to_string(const std::map<std::string, std::string>& args) {
    std::string out;
    for (const auto& [k, v] : args) {
        if (!out.empty()) out += ", ";
        out += k + "=\"" + v + "\"";
    }
    return out;
}

}  // namespace

std::string Observation::digest() const {
    std::string blob = character_id + "@" + std::to_string(tick);
    for (const ObservationItem& item : items) {
        blob += "|" + std::to_string(static_cast<int>(item.kind)) + ":" + item.subject + ":" +
                item.detail;
    }
    return hex_u64(fnv1a(blob));
}

std::string Observation::render() const {
    std::string out = "tick " + std::to_string(tick) + ", observer " + character_id + "\n";
    for (const ObservationItem& item : items) {
        switch (item.kind) {
            case ObservationItemKind::entity_seen: out += "seen: "; break;
            case ObservationItemKind::utterance_heard: out += "heard: "; break;
            case ObservationItemKind::event: out += "event: "; break;
        }
        out += item.subject + " — " + item.detail + "\n";
    }
    return out;
}

const std::vector<ApiSpec>& public_api_registry() {
    static const std::vector<ApiSpec> registry = {
        {"move", {{"to", ParamType::string}}, "destination adjacent to current location", true, true, ""},
        {"say", {{"text", ParamType::string}}, "none; heard by co-located characters", true, true, ""},
        {"pick_up", {{"item", ParamType::string}}, "item on the ground at current location", true, true, ""},
        {"drop", {{"item", ParamType::string}}, "item held by the actor", true, true, ""},
        {"give",
         {{"item", ParamType::string}, {"to", ParamType::entity_ref}},
         "item held; recipient co-located",
         true, true, ""},
        {"use",
         {{"item", ParamType::string}, {"on", ParamType::string}},
         "item held; target co-located or the current location",
         true, true, ""},
        {"wait", {}, "none", true, true, ""},
        {"has", {{"item", ParamType::string}}, "predicate: actor holds the item", true, false, ""},
        {"at", {{"location", ParamType::string}}, "predicate: actor is at the location", true, false, ""},
        {"sees", {{"entity", ParamType::entity_ref}}, "predicate: entity co-located with actor", true,
         false, ""},
    };
    return registry;
}

void World::add_location(const std::string& name) { locations_.insert(name); }

void World::add_adjacency(const std::string& a, const std::string& b) {
    adjacency_.insert({a, b});
    adjacency_.insert({b, a});
}

void World::add_entity(const Entity& entity) { entities_[entity.id] = entity; }

bool World::has_location(const std::string& name) const { return locations_.contains(name); }

bool World::adjacent(const std::string& a, const std::string& b) const {
    return adjacency_.contains({a, b});
}

const Entity& World::entity(const std::string& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw UnknownCharacter("no entity '" + id + "'");
    return it->second;
}

Entity& World::mutable_entity(const std::string& id) {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw UnknownCharacter("no entity '" + id + "'");
    return it->second;
}

bool World::has_entity(const std::string& id) const { return entities_.contains(id); }

std::vector<const Entity*> World::entities_at(const std::string& location) const {
    std::vector<const Entity*> out;
    for (const auto& [_, e] : entities_)
        if (e.holder.empty() && e.location == location) out.push_back(&e);
    return out;
}

std::vector<const Entity*> World::inventory_of(const std::string& holder) const {
    std::vector<const Entity*> out;
    for (const auto& [_, e] : entities_)
        if (e.holder == holder) out.push_back(&e);
    return out;
}

std::vector<std::string> World::character_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, e] : entities_)
        if (e.kind == EntityKind::character) out.push_back(id);
    return out;
}

ActionOutcome World::fail(const std::string& api, const std::map<std::string, std::string>& args,
                          const std::string& message) const {
    return {api, args, false, message, clock_};
}

ActionOutcome World::ok(const std::string& api, const std::map<std::string, std::string>& args,
                        const std::string& message) {
    advance_clock();
    return {api, args, true, message, clock_};
}

void World::log_event(const std::string& location, const std::string& actor,
                      const std::string& kind, const std::string& text) {
    events_.push_back({clock_, location, actor, kind, text});
}

bool World::predicate(const std::string& character_id, const std::string& api,
                      const std::map<std::string, std::string>& args) const {
    const Entity& actor = entity(character_id);
    if (api == "has") {
        auto it = args.find("item");
        if (it == args.end()) return false;
        for (const Entity* e : inventory_of(character_id))
            if (e->id == it->second) return true;
        return false;
    }
    if (api == "at") {
        auto it = args.find("location");
        return it != args.end() && actor.location == it->second;
    }
    if (api == "sees") {
        auto it = args.find("entity");
        if (it == args.end()) return false;
        for (const Entity* e : entities_at(actor.location))
            if (e->id == it->second && e->id != character_id) return true;
        return false;
    }
    throw Error("unknown predicate '" + api + "'");
}

ActionOutcome World::step(const std::string& character_id, const std::string& api,
                          const std::map<std::string, std::string>& args) {
    if (!has_entity(character_id))
        return fail(api, args, "unknown character '" + character_id + "'");
    Entity& actor = mutable_entity(character_id);
    auto arg = [&](const std::string& name) -> std::string {
        auto it = args.find(name);
        return it == args.end() ? std::string() : it->second;
    };

    if (api == "move") {
        const std::string to = arg("to");
        if (!has_location(to)) return fail(api, args, "no such location '" + to + "'");
        if (!adjacent(actor.location, to))
            return fail(api, args, "'" + to + "' is not adjacent to '" + actor.location + "'");
        const std::string from = actor.location;
        actor.location = to;
        auto out = ok(api, args, character_id + " moved from " + from + " to " + to);
        log_event(to, character_id, "move", "arrived from " + from);
        return out;
    }
    if (api == "say") {
        const std::string text = arg("text");
        auto out = ok(api, args, character_id + " says: " + text);
        log_event(actor.location, character_id, "say", text);
        return out;
    }
    if (api == "pick_up") {
        const std::string item = arg("item");
        if (!has_entity(item)) return fail(api, args, "no such item '" + item + "'");
        Entity& target = mutable_entity(item);
        if (!target.holder.empty() || target.location != actor.location)
            return fail(api, args, "'" + item + "' is not on the ground here");
        target.holder = character_id;
        target.location.clear();
        auto out = ok(api, args, character_id + " picked up " + item);
        log_event(actor.location, character_id, "pick_up", item);
        return out;
    }
    if (api == "drop") {
        const std::string item = arg("item");
        if (!has_entity(item) || entity(item).holder != character_id)
            return fail(api, args, "'" + item + "' is not held by " + character_id);
        Entity& target = mutable_entity(item);
        target.holder.clear();
        target.location = actor.location;
        auto out = ok(api, args, character_id + " dropped " + item);
        log_event(actor.location, character_id, "drop", item);
        return out;
    }
    if (api == "give") {
        const std::string item = arg("item");
        const std::string to = arg("to");
        if (!has_entity(item) || entity(item).holder != character_id)
            return fail(api, args, "'" + item + "' is not held by " + character_id);
        if (!has_entity(to)) return fail(api, args, "no such character '" + to + "'");
        const Entity& recipient = entity(to);
        if (recipient.kind != EntityKind::character || recipient.location != actor.location)
            return fail(api, args, "'" + to + "' is not a co-located character");
        mutable_entity(item).holder = to;
        auto out = ok(api, args, character_id + " gave " + item + " to " + to);
        log_event(actor.location, character_id, "give", item + " -> " + to);
        return out;
    }
    if (api == "use") {
        const std::string item = arg("item");
        const std::string on = arg("on");
        if (!has_entity(item) || entity(item).holder != character_id)
            return fail(api, args, "'" + item + "' is not held by " + character_id);
        bool target_here = on == actor.location;
        if (!target_here) {
            for (const Entity* e : entities_at(actor.location))
                if (e->id == on) target_here = true;
        }
        if (!target_here) return fail(api, args, "'" + on + "' is not here");
        auto out = ok(api, args, character_id + " used " + item + " on " + on);
        log_event(actor.location, character_id, "use", item + " on " + on);
        return out;
    }
    if (api == "wait") {
        return ok(api, args, character_id + " waits");
    }
    if (api == "has" || api == "at" || api == "sees") {
        bool holds = predicate(character_id, api, args);
        // Predicates never advance the clock.
        return {api, args, holds, holds ? "true" : "false", clock_};
    }
    return fail(api, args, "unknown api '" + api + "' (" + args_to_string(args) + ")");
}

Observation World::observe(const std::string& character_id) {
    const Entity& actor = entity(character_id);
    if (actor.kind != EntityKind::character)
        throw UnknownCharacter("'" + character_id + "' is not a character");
    Observation obs;
    obs.character_id = character_id;
    obs.tick = clock_;
    for (const Entity* e : entities_at(actor.location)) {
        if (e->id == character_id) continue;
        std::string detail = (e->kind == EntityKind::character ? "character at " : "item at ") +
                             actor.location;
        obs.items.push_back({ObservationItemKind::entity_seen, e->id, detail});
    }
    size_t start = last_observed_event_.count(character_id) ? last_observed_event_[character_id] : 0;
    for (size_t i = start; i < events_.size(); ++i) {
        const WorldEvent& ev = events_[i];
        if (ev.location != actor.location || ev.actor == character_id) continue;
        if (ev.kind == "say")
            obs.items.push_back({ObservationItemKind::utterance_heard, ev.actor, ev.text});
        else
            obs.items.push_back({ObservationItemKind::event, ev.actor, ev.kind + ": " + ev.text});
    }
    last_observed_event_[character_id] = events_.size();
    return obs;
}

World World::snapshot() const { return *this; }

std::uint64_t World::state_hash() const { return fnv1a(serialize()); }

std::string World::serialize() const {
    std::ostringstream out;
    out << "LARPWORLD 1\n";
    out << "clock=" << clock_ << "\n";
    for (const std::string& loc : locations_) out << "loc\t" << escape_line(loc) << "\n";
    for (const auto& [a, b] : adjacency_)
        if (a < b) out << "adj\t" << escape_line(a) << "\t" << escape_line(b) << "\n";
    for (const auto& [_, e] : entities_) {
        out << "ent\t" << escape_line(e.id) << "\t"
            << (e.kind == EntityKind::character ? "character" : "item") << "\t"
            << escape_line(e.location) << "\t" << escape_line(e.holder);
        for (const auto& [k, v] : e.attributes)
            out << "\t" << escape_line(k) << "=" << escape_line(v);
        out << "\n";
    }
    for (const WorldEvent& ev : events_)
        out << "event\t" << ev.tick << "\t" << escape_line(ev.location) << "\t"
            << escape_line(ev.actor) << "\t" << escape_line(ev.kind) << "\t" << escape_line(ev.text)
            << "\n";
    for (const auto& [ch, idx] : last_observed_event_)
        out << "seenidx\t" << escape_line(ch) << "\t" << idx << "\n";
    return out.str();
}

World World::deserialize(const std::string& text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "LARPWORLD 1")
        throw CorruptSnapshot("missing or mismatched world snapshot header");
    World w;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.rfind("clock=", 0) == 0) {
            w.clock_ = std::stoll(line.substr(6));
            continue;
        }
        auto fields = split(line, '\t');
        if (fields[0] == "loc" && fields.size() == 2) {
            w.locations_.insert(unescape_line(fields[1]));
        } else if (fields[0] == "adj" && fields.size() == 3) {
            w.add_adjacency(unescape_line(fields[1]), unescape_line(fields[2]));
        } else if (fields[0] == "ent" && fields.size() >= 5) {
            Entity e;
            e.id = unescape_line(fields[1]);
            e.kind = fields[2] == "character" ? EntityKind::character : EntityKind::item;
            e.location = unescape_line(fields[3]);
            e.holder = unescape_line(fields[4]);
            for (size_t j = 5; j < fields.size(); ++j) {
                auto eq = fields[j].find('=');
                if (eq == std::string::npos) throw CorruptSnapshot("bad attribute field");
                e.attributes[unescape_line(fields[j].substr(0, eq))] =
                    unescape_line(fields[j].substr(eq + 1));
            }
            w.entities_[e.id] = e;
        } else if (fields[0] == "event" && fields.size() == 6) {
            w.events_.push_back({std::stoll(fields[1]), unescape_line(fields[2]),
                                 unescape_line(fields[3]), unescape_line(fields[4]),
                                 unescape_line(fields[5])});
        } else if (fields[0] == "seenidx" && fields.size() == 3) {
            w.last_observed_event_[unescape_line(fields[1])] = std::stoull(fields[2]);
        } else {
            throw CorruptSnapshot("unrecognized world snapshot line: " + line);
        }
    }
    return w;
}

}  // namespace larp
