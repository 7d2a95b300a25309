#include "larp/runtime.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace larp {

namespace {

std::string hex_double_bits(double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    return hex_u64(bits);
}

double double_from_hex_bits(const std::string& hex) {
    if (hex.size() != 16) throw CorruptSnapshot("bad double width in bundle");
    std::uint64_t bits = 0;
    for (char c : hex) {
        bits <<= 4;
        if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw CorruptSnapshot("bad hex digit in bundle");
    }
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::string serialize_wm(const WorkingMemory& wm) {
    std::string out = "LARPWM 1\n";
    for (const WorkingMemoryEntry& e : wm.snapshot()) {
        out += escape_line(e.key) + "\t" + escape_line(e.value) + "\t" + escape_line(e.producer) +
               "\t" + std::to_string(e.created_at) + "\t" + hex_double_bits(e.salience) + "\n";
    }
    return out;
}

void restore_wm(WorkingMemory& wm, const std::string& text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "LARPWM 1")
        throw CorruptSnapshot("missing or mismatched working-memory header");
    WorkingMemory fresh(wm.config());
    for (size_t i = 1; i < lines.size(); ++i) {
        auto fields = split(lines[i], '\t');
        if (fields.size() != 5) throw CorruptSnapshot("bad working-memory entry");
        fresh.put({unescape_line(fields[0]), unescape_line(fields[1]), unescape_line(fields[2]),
                   std::stoll(fields[3]), double_from_hex_bits(fields[4])});
    }
    wm = std::move(fresh);
}

constexpr const char* kBundleMagic = "LARPBUNDLE 1";

std::string pack_bundle(const std::vector<std::pair<std::string, std::string>>& sections) {
    std::string out = std::string(kBundleMagic) + "\n";
    for (const auto& [name, bytes] : sections) {
        out += "SECTION " + name + " " + std::to_string(bytes.size()) + "\n";
        out += bytes;
        out += "\n";
    }
    out += "checksum=" + hex_u64(fnv1a(out)) + "\n";
    return out;
}

std::vector<std::pair<std::string, std::string>> unpack_bundle(const std::string& text) {
    const std::string tail_marker = "\nchecksum=";
    auto tail = text.rfind(tail_marker);
    if (tail == std::string::npos) throw CorruptSnapshot("bundle missing checksum");
    std::string body = text.substr(0, tail + 1);
    std::string expected = trim(text.substr(tail + tail_marker.size()));
    if (hex_u64(fnv1a(body)) != expected) throw CorruptSnapshot("bundle checksum mismatch");

    size_t pos = 0;
    auto read_line = [&]() {
        auto nl = body.find('\n', pos);
        if (nl == std::string::npos) throw CorruptSnapshot("truncated bundle");
        std::string line = body.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    std::string magic = read_line();
    if (magic != kBundleMagic)
        throw CorruptSnapshot("bundle version mismatch: got '" + magic + "', expected '" +
                              kBundleMagic + "'");
    std::vector<std::pair<std::string, std::string>> sections;
    while (pos < body.size()) {
        std::string header = read_line();
        if (header.rfind("SECTION ", 0) != 0) throw CorruptSnapshot("bad bundle section header");
        auto space = header.rfind(' ');
        std::string name = header.substr(8, space - 8);
        size_t len = std::stoull(header.substr(space + 1));
        if (pos + len + 1 > body.size()) throw CorruptSnapshot("truncated bundle section");
        sections.emplace_back(name, body.substr(pos, len));
        pos += len + 1;  // payload + trailing newline
    }
    return sections;
}

std::string render_args(const std::map<std::string, std::string>& args) {
    std::string out;
    for (const auto& [k, v] : args) {
        if (!out.empty()) out += ", ";
        out += k + "=\"" + v + "\"";
    }
    return out;
}

}  // namespace

Agent::Agent(const CharacterSpec& spec, LlmBridge& bridge, const PromptLibrary& prompts,
             World& world, TrainingPairLog& training_log)
    : persona_(spec.persona), world_(world), wm_(spec.working_memory) {
    if (!spec.semantic_facts.empty())
        for (const logicql::Clause& c : logicql::parse_program(spec.semantic_facts))
            kb_.assert_clause(c);
    for (const std::string& memory : spec.episodic_memories) {
        LtmStore::StoreRequest req;
        req.character_id = persona_.character_id;
        req.kind = MemoryKind::episodic_nl;
        req.content = memory;
        req.created_at = 0;
        req.provenance = Provenance::observed;
        ltm_.store(req);
    }
    processor_ = std::make_unique<MemoryProcessor>(bridge, prompts, ltm_, kb_, wm_, persona_,
                                                   spec.memory);
    engine_ = std::make_unique<DecisionEngine>(bridge, prompts, spec.units);
    for (const std::string& id : spec.disabled_units) engine_->set_enabled(id, false);
    interaction_ = std::make_unique<InteractionLoop>(bridge, world_, skills_, training_log,
                                                     prompts);
}

void Agent::take_turn(std::vector<std::string>& out) {
    const std::string& id = persona_.character_id;
    Tick now = world_.clock();
    auto tag = [&]() { return "[t=" + std::to_string(world_.clock()) + "] " + id + " "; };

    Observation obs = world_.observe(id);
    wm_.expire(now);
    processor_->encode_observation(obs);

    if (wm_.should_reflect()) {
        ReflectionReport report = processor_->reflect(now);
        int filtered = 0, episodic = 0, semantic_ok = 0, semantic_dropped = 0;
        for (const ReflectionOutcome& o : report.outcomes) {
            if (o.classification == "filtered") ++filtered;
            else if (o.classification == "stored_episodic") ++episodic;
            else if (o.classification == "stored_semantic_ok") ++semantic_ok;
            else ++semantic_dropped;
        }
        out.push_back(tag() + "reflect: filtered=" + std::to_string(filtered) +
                      " episodic=" + std::to_string(episodic) + " semantic_ok=" +
                      std::to_string(semantic_ok) + " semantic_dropped=" +
                      std::to_string(semantic_dropped));
    }

    RecallResult recall = processor_->recall_loop(obs, now);
    double salience = 0.5;
    for (std::int64_t rec_id : recall.supporting_record_ids)
        salience = std::max(salience, ltm_.get(rec_id).importance);
    wm_.put({"recall", recall.answer, "recall", now, salience});
    out.push_back(tag() + "recall (" + std::to_string(recall.iterations) + " iter, " +
                  recall.terminated_by + "): " + recall.answer);

    Decision decision = engine_->run_pipeline(obs, persona_, wm_, now);
    ConflictVerdict verdict = engine_->check_conflict(decision, persona_);
    out.push_back(tag() + "conflict: " + verdict.status +
                  (verdict.reason.empty() ? "" : " (" + verdict.reason + ")"));
    if (verdict.status == "reject") {
        // One re-run, then the safe fallback utterance.
        decision = engine_->run_pipeline(obs, persona_, wm_, now);
        verdict = engine_->check_conflict(decision, persona_);
        out.push_back(tag() + "conflict (retry): " + verdict.status +
                      (verdict.reason.empty() ? "" : " (" + verdict.reason + ")"));
        if (verdict.status == "reject") {
            decision.kind = "dialogue";
            decision.tasks.clear();
            decision.utterance = "…";
            verdict = {"pass", "", ""};
        }
    }
    decision = DecisionEngine::apply_verdict(std::move(decision), verdict);

    if (decision.kind == "dialogue") {
        ActionOutcome outcome = world_.step(id, "say", {{"text", decision.utterance}});
        out.push_back(tag() + "say: \"" + decision.utterance + "\"");
        (void)outcome;
    } else {
        for (const std::string& task : decision.tasks) {
            out.push_back(tag() + "task: " + task);
            TaskRunResult result = interaction_->run_task(task, wm_, persona_);
            for (const SubtaskResult& sub : result.subtasks) {
                out.push_back(tag() + "subtask \"" + sub.subtask + "\" " + sub.status +
                              " attempts=" + std::to_string(sub.generation_attempts));
                for (const ActionOutcome& o : sub.outcomes)
                    out.push_back(tag() + "action " + o.api + "(" + render_args(o.args) + ") -> " +
                                  (o.success ? "ok" : "fail") + ": " + o.message);
                if (!sub.failure_message.empty())
                    out.push_back(tag() + "subtask failed: " + sub.failure_message);
            }
            if (!result.success) break;
        }
    }
}

std::string Agent::inspect(const std::string& store) const {
    std::ostringstream out;
    if (store == "wm") {
        for (const WorkingMemoryEntry& e : wm_.snapshot())
            out << e.key << " (salience " << e.salience << ", t=" << e.created_at
                << ", " << e.producer << "): " << e.value << "\n";
    } else if (store == "ltm") {
        for (const MemoryRecord& r : ltm_.all_records()) {
            out << "#" << r.id << " " << to_string(r.kind) << " [" << to_string(r.provenance)
                << ", λ=" << r.importance << ", N=" << r.retrieval_count << "] ";
            if (r.kind == MemoryKind::episodic_qa) out << r.question << " -> ";
            out << r.content << "\n";
        }
    } else if (store == "kb") {
        out << logicql::pretty_print(kb_.clauses());
    } else if (store == "skills") {
        for (const SkillEntry& e : skills_.entries())
            out << "\"" << e.task_description << "\" ok=" << e.success_count
                << " fail=" << e.failure_count << "\n" << e.script_text << "\n";
    } else {
        throw Error("unknown store '" + store + "' (expected wm|ltm|kb|skills)");
    }
    return out.str();
}

Runtime::Runtime(const ScenarioFile& scenario, const std::string& training_log_path)
    : world_(scenario.world),
      training_log_(training_log_path),
      scripted_turns_(scenario.run),
      player_character_(scenario.player_character) {
    bridge_ = std::make_unique<LlmBridge>(scenario.backend);
    std::vector<CharacterSpec> specs = scenario.characters;
    std::sort(specs.begin(), specs.end(), [](const CharacterSpec& a, const CharacterSpec& b) {
        return a.persona.character_id < b.persona.character_id;
    });
    for (const CharacterSpec& spec : specs)
        agents_.push_back(std::make_unique<Agent>(spec, *bridge_, prompts_, world_, training_log_));
}

Agent& Runtime::agent(const std::string& character_id) {
    for (auto& a : agents_)
        if (a->persona().character_id == character_id) return *a;
    throw UnknownCharacter("no agent '" + character_id + "'");
}

std::vector<std::string> Runtime::agent_ids() const {
    std::vector<std::string> out;
    for (const auto& a : agents_) out.push_back(a->persona().character_id);
    return out;
}

std::vector<std::string> Runtime::run_turn(const std::vector<PlayerEvent>& events) {
    std::vector<std::string> lines;
    for (const PlayerEvent& ev : events) {
        ActionOutcome outcome = world_.step(ev.character, ev.api, ev.args);
        lines.push_back("[t=" + std::to_string(world_.clock()) + "] player " + ev.character +
                        " " + ev.api + "(" + render_args(ev.args) + ") -> " +
                        (outcome.success ? "ok" : "fail") + ": " + outcome.message);
    }
    for (auto& agent : agents_) agent->take_turn(lines);
    world_.advance_clock();  // time passes even on idle turns
    return lines;
}

std::vector<std::string> Runtime::run_all() {
    std::vector<std::string> lines;
    for (const ScenarioTurn& turn : scripted_turns_) {
        auto turn_lines = run_turn(turn.player_events);
        lines.insert(lines.end(), turn_lines.begin(), turn_lines.end());
    }
    return lines;
}

void Runtime::save_bundle(const std::string& path) const {
    std::vector<std::pair<std::string, std::string>> sections;
    sections.emplace_back("world", world_.serialize());
    if (auto* scripted = dynamic_cast<const ScriptedBackend*>(bridge_->backend()))
        sections.emplace_back("bridge", scripted->consumed_state());
    for (const auto& agent : agents_) {
        const std::string& id = agent->persona().character_id;
        Agent& a = *agent;
        sections.emplace_back("ltm:" + id, a.ltm().serialize());
        sections.emplace_back("kb:" + id, logicql::pretty_print(a.kb().clauses()));
        sections.emplace_back("skills:" + id, a.skills().serialize());
        sections.emplace_back("wm:" + id, serialize_wm(a.working_memory()));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open bundle '" + path + "' for writing");
    out << pack_bundle(sections);
    if (!out) throw IoFailure("write to bundle '" + path + "' failed");
}

void Runtime::load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open bundle '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    for (const auto& [name, bytes] : unpack_bundle(buf.str())) {
        if (name == "world") {
            world_ = World::deserialize(bytes);
            continue;
        }
        if (name == "bridge") {
            if (auto* scripted = dynamic_cast<ScriptedBackend*>(bridge_->backend()))
                scripted->set_consumed_state(bytes);
            continue;
        }
        auto colon = name.find(':');
        if (colon == std::string::npos) throw CorruptSnapshot("bad bundle section '" + name + "'");
        std::string kind = name.substr(0, colon);
        Agent& a = agent(name.substr(colon + 1));
        if (kind == "ltm") {
            a.ltm() = LtmStore::deserialize(bytes);
        } else if (kind == "kb") {
            a.kb() = logicql::KnowledgeBase(logicql::parse_program(bytes));
        } else if (kind == "skills") {
            a.skills() = SkillLibrary::deserialize(bytes);
        } else if (kind == "wm") {
            restore_wm(a.working_memory(), bytes);
        } else {
            throw CorruptSnapshot("unknown bundle section kind '" + kind + "'");
        }
    }
}

std::string run_scenario(const std::string& scenario_path, const std::string& out_dir) {
    ScenarioFile scenario = load_scenario(scenario_path);
    std::filesystem::create_directories(out_dir);
    Runtime runtime(scenario, (std::filesystem::path(out_dir) / "training_pairs.log").string());
    std::vector<std::string> lines = runtime.run_all();
    std::string transcript;
    for (const std::string& line : lines) transcript += line + "\n";
    {
        std::ofstream out(std::filesystem::path(out_dir) / "transcript.txt", std::ios::binary);
        if (!out) throw IoFailure("cannot write transcript");
        out << transcript;
    }
    runtime.save_bundle((std::filesystem::path(out_dir) / "final.bundle").string());
    return transcript;
}

namespace {

const char* kReplUsage =
    "commands: say <text> | do <api>(<arg>=\"<v>\", ...) | wait | "
    "inspect <npc> <wm|ltm|kb|skills> | save <path> | load <path> | quit\n";

}  // namespace

int repl(const std::string& scenario_path, std::istream& in, std::ostream& out) {
    ScenarioFile scenario = load_scenario(scenario_path);
    Runtime runtime(scenario);
    const std::string player =
        scenario.player_character.empty() ? "player" : scenario.player_character;
    out << "scenario loaded; you are '" << player << "'\n" << kReplUsage;

    std::string line;
    while (std::getline(in, line)) {
        std::string cmd = trim(line);
        if (cmd.empty()) continue;
        try {
            if (cmd == "quit") break;
            if (cmd == "wait") {
                for (const std::string& l : runtime.run_turn({{player, "wait", {}}}))
                    out << l << "\n";
                continue;
            }
            if (cmd.rfind("say ", 0) == 0) {
                for (const std::string& l :
                     runtime.run_turn({{player, "say", {{"text", trim(cmd.substr(4))}}}}))
                    out << l << "\n";
                continue;
            }
            if (cmd.rfind("do ", 0) == 0) {
                SkillScript script = parse_script("seq { call " + trim(cmd.substr(3)) + " }");
                if (script.children.size() != 1 ||
                    script.children[0].kind != ScriptNode::Kind::call) {
                    out << kReplUsage;
                    continue;
                }
                std::map<std::string, std::string> args;
                for (const ScriptArg& a : script.children[0].args) args[a.name] = a.value;
                for (const std::string& l :
                     runtime.run_turn({{player, script.children[0].api, args}}))
                    out << l << "\n";
                continue;
            }
            if (cmd.rfind("inspect ", 0) == 0) {
                auto parts = split(trim(cmd.substr(8)), ' ');
                if (parts.size() != 2) {
                    out << kReplUsage;
                    continue;
                }
                out << runtime.agent(parts[0]).inspect(parts[1]);
                continue;
            }
            if (cmd.rfind("save ", 0) == 0) {
                runtime.save_bundle(trim(cmd.substr(5)));
                out << "saved\n";
                continue;
            }
            if (cmd.rfind("load ", 0) == 0) {
                runtime.load_bundle(trim(cmd.substr(5)));
                out << "loaded\n";
                continue;
            }
            out << kReplUsage;
        } catch (const Error& e) {
            out << "error: " << e.what() << "\n";
        }
    }
    return 0;
}

std::string inspect_bundle(const std::string& bundle_path, const std::string& character_id,
                           const std::string& store) {
    std::ifstream in(bundle_path, std::ios::binary);
    if (!in) throw IoFailure("cannot open bundle '" + bundle_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    for (const auto& [name, bytes] : unpack_bundle(buf.str())) {
        if (name != store + ":" + character_id) continue;
        if (store == "kb") return bytes;
        if (store == "ltm") {
            LtmStore ltm = LtmStore::deserialize(bytes);
            std::ostringstream out;
            for (const MemoryRecord& r : ltm.all_records()) {
                out << "#" << r.id << " " << to_string(r.kind) << " ";
                if (r.kind == MemoryKind::episodic_qa) out << r.question << " -> ";
                out << r.content << "\n";
            }
            return out.str();
        }
        if (store == "skills" || store == "wm") return bytes;
    }
    throw Error("bundle has no section '" + store + ":" + character_id + "'");
}

}  // namespace larp
