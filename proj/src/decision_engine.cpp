#include "larp/decision_engine.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "larp/action_space.hpp"
#include "larp/memory_processing.hpp"

namespace larp {

namespace {

const std::set<std::string>& positive_words() {
    static const std::set<std::string> words = {
        "good", "great", "happy",  "friend", "kind",  "safe", "warm", "help",
        "thank", "love", "peace",  "calm",   "bright", "well", "glad", "welcome"};
    return words;
}

const std::set<std::string>& negative_words() {
    static const std::set<std::string> words = {
        "bad",   "angry", "enemy", "danger", "threat", "fear", "dark",  "hurt",
        "attack", "hate",  "war",   "cold",   "sad",    "dead", "wound", "steal"};
    return words;
}

std::string observation_text(const Observation& obs) {
    std::string out;
    for (const ObservationItem& item : obs.items) out += item.subject + " " + item.detail + " ";
    return out;
}

}  // namespace

double lexicon_valence(const std::string& text) {
    int pos = 0, neg = 0;
    for (const std::string& w : words_of(text)) {
        if (positive_words().contains(w)) ++pos;
        if (negative_words().contains(w)) ++neg;
    }
    if (pos + neg == 0) return 0.0;
    return static_cast<double>(pos - neg) / static_cast<double>(pos + neg);
}

Decision parse_decision(const std::string& format_output) {
    std::string text = trim(format_output);
    if (text.rfind("SAY:", 0) == 0) {
        Decision d;
        d.kind = "dialogue";
        d.utterance = trim(text.substr(4));
        if (!d.utterance.empty()) return d;
    }
    if (text.rfind("TASKS:", 0) == 0) {
        Decision d;
        d.kind = "task_plan";
        d.tasks = parse_numbered_lines(text.substr(6));
        if (!d.tasks.empty()) return d;
    }
    throw MalformedFinalOutput("format unit output matches neither TASKS: nor SAY: form: \"" +
                               text + "\"");
}

std::string render_decision(const Decision& decision) {
    if (decision.kind == "dialogue") return "SAY: " + decision.utterance;
    std::string out = "TASKS:";
    for (size_t i = 0; i < decision.tasks.size(); ++i)
        out += "\n" + std::to_string(i + 1) + ". " + decision.tasks[i];
    return out;
}

DecisionEngine::DecisionEngine(LlmBridge& bridge, const PromptLibrary& prompts,
                               DecisionEngineConfig config)
    : bridge_(bridge), prompts_(prompts), config_(std::move(config)) {
    register_unit({"affect", "pure", "", {}, {"affect"}, true},
                  [](const UnitContext& ctx) -> std::vector<std::pair<std::string, std::string>> {
                      double v = lexicon_valence(observation_text(ctx.observation));
                      std::ostringstream out;
                      out.precision(3);
                      out << std::fixed << v;
                      return {{"affect", out.str()}};
                  });
    register_unit({"intent", "llm", "intent", {}, {"intent"}, true},
                  [](const UnitContext& ctx) -> std::vector<std::pair<std::string, std::string>> {
                      ChatRequest req;
                      req.role_tag = "intent";
                      req.messages = {
                          {Speaker::user,
                           ctx.prompts.render("intent",
                                              {{"persona", ctx.persona.summary()},
                                               {"snapshot", render_snapshot(ctx.snapshot)},
                                               {"observation", ctx.observation.render()}})}};
                      return {{"intent", ctx.bridge.complete(req).text}};
                  });
    register_unit({"format", "llm", "format", {}, {"decision_raw"}, true},
                  [](const UnitContext& ctx) -> std::vector<std::pair<std::string, std::string>> {
                      ChatRequest req;
                      req.role_tag = "format";
                      req.messages = {
                          {Speaker::user,
                           ctx.prompts.render("format",
                                              {{"persona", ctx.persona.summary()},
                                               {"snapshot", render_snapshot(ctx.snapshot)},
                                               {"observation", ctx.observation.render()}})}};
                      return {{"decision_raw", ctx.bridge.complete(req).text}};
                  });
}

void DecisionEngine::register_unit(const UnitDescriptor& descriptor, UnitBehavior behavior) {
    for (const auto& [d, _] : units_)
        if (d.id == descriptor.id)
            throw DuplicateUnitId("unit '" + descriptor.id + "' already registered");
    units_.emplace_back(descriptor, std::move(behavior));
}

void DecisionEngine::set_enabled(const std::string& id, bool enabled) {
    for (auto& [d, _] : units_)
        if (d.id == id) d.enabled = enabled;
}

std::vector<UnitDescriptor> DecisionEngine::units() const {
    std::vector<UnitDescriptor> out;
    for (const auto& [d, _] : units_) out.push_back(d);
    return out;
}

std::vector<std::string> DecisionEngine::enabled_ids() const {
    std::vector<std::string> configured =
        config_.static_order.empty() ? std::vector<std::string>{} : config_.static_order;
    std::vector<std::string> out;
    if (!configured.empty()) {
        for (const std::string& id : configured)
            for (const auto& [d, _] : units_)
                if (d.id == id && d.enabled) out.push_back(id);
        // Enabled units missing from the configured order run last, in
        // registration order.
        for (const auto& [d, _] : units_)
            if (d.enabled && std::find(out.begin(), out.end(), d.id) == out.end())
                out.push_back(d.id);
    } else {
        for (const auto& [d, _] : units_)
            if (d.enabled) out.push_back(d.id);
    }
    return out;
}

std::vector<std::string> DecisionEngine::order_units(const std::string& observation_digest) {
    std::vector<std::string> fallback = enabled_ids();
    if (!config_.llm_unit_order) return fallback;

    std::string listing;
    for (const std::string& id : fallback) {
        if (!listing.empty()) listing += ",";
        listing += id;
    }
    ChatRequest req;
    req.role_tag = "unit_order";
    req.messages = {{Speaker::user, prompts_.render("unit_order", {{"units", listing},
                                                                   {"digest", observation_digest}})}};
    std::vector<std::string> proposed;
    for (const std::string& id : split(bridge_.complete(req).text, ',')) {
        std::string t = trim(id);
        if (!t.empty()) proposed.push_back(t);
    }
    // The reply must be a permutation of the enabled set; anything else
    // falls back to the configured order.
    std::multiset<std::string> a(proposed.begin(), proposed.end());
    std::multiset<std::string> b(fallback.begin(), fallback.end());
    if (a != b) return fallback;
    return proposed;
}

Decision DecisionEngine::run_pipeline(const Observation& observation, const Persona& persona,
                                      WorkingMemory& wm, Tick now) {
    Decision decision;
    std::string format_output;
    bool saw_format = false;

    for (const std::string& id : order_units(observation.digest())) {
        const UnitBehavior* behavior = nullptr;
        for (const auto& [d, b] : units_)
            if (d.id == id) behavior = &b;
        if (!behavior) continue;

        UnitContext ctx{observation, wm.snapshot(), persona, bridge_, prompts_};
        auto writes = (*behavior)(ctx);
        std::vector<std::string> written_keys;
        for (const auto& [key, value] : writes) {
            wm.put({key, value, "unit:" + id, now, config_.unit_write_salience});
            written_keys.push_back(key);
            if (id == "format" || key == "decision_raw") {
                format_output = value;
                saw_format = true;
            }
        }
        decision.trace.emplace_back(id, std::move(written_keys));
    }

    if (!saw_format)
        throw MalformedFinalOutput("pipeline executed without a format unit output");
    Decision parsed = parse_decision(format_output);
    parsed.trace = std::move(decision.trace);
    return parsed;
}

ConflictVerdict DecisionEngine::check_conflict(const Decision& decision, const Persona& persona) {
    ChatRequest req;
    req.role_tag = "conflict";
    req.messages = {{Speaker::user,
                     prompts_.render("conflict", {{"persona", persona.summary()},
                                                  {"worldview", persona.worldview_summary()},
                                                  {"decision", render_decision(decision)}})}};
    std::string reply = trim(bridge_.complete(req).text);
    if (reply == "PASS") return {"pass", "", ""};
    if (reply.rfind("REJECT:", 0) == 0) return {"reject", trim(reply.substr(7)), ""};
    if (reply.rfind("REWRITE:", 0) == 0) {
        std::string text = trim(reply.substr(8));
        if (!text.empty()) return {"rewrite", "", text};
    }
    // UnparseableVerdict: fail open with a pass (configurable policy lives
    // with the caller).
    return {"pass", "unparseable verdict treated as pass: " + reply, ""};
}

Decision DecisionEngine::apply_verdict(Decision decision, const ConflictVerdict& verdict) {
    if (verdict.status == "rewrite") {
        decision.kind = "dialogue";
        decision.tasks.clear();
        decision.utterance = verdict.rewritten;
    }
    return decision;
}

}  // namespace larp
