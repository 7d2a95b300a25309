#include "larp/action_space.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "larp/embedding.hpp"

namespace larp {

std::optional<SkillEntry> SkillLibrary::lookup(const std::string& task, double threshold) const {
    const std::vector<float> query = embed(task);
    const SkillEntry* best = nullptr;
    double best_sim = 0.0;
    for (const SkillEntry& e : entries_) {
        double sim = cosine(query, e.key);
        if (sim < threshold) continue;
        if (!best || sim > best_sim ||
            (sim == best_sim && (e.success_count > best->success_count ||
                                 (e.success_count == best->success_count &&
                                  e.created_at > best->created_at)))) {
            best = &e;
            best_sim = sim;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

SkillEntry& SkillLibrary::add(const std::string& task, const std::string& script_text,
                              Tick created_at) {
    entries_.push_back({task, embed(task), script_text, created_at, 0, 0});
    return entries_.back();
}

void SkillLibrary::record_success(const std::string& task_description) {
    for (SkillEntry& e : entries_)
        if (e.task_description == task_description) e.success_count += 1;
}

void SkillLibrary::record_failure(const std::string& task_description) {
    for (SkillEntry& e : entries_)
        if (e.task_description == task_description) e.failure_count += 1;
}

std::string SkillLibrary::serialize() const {
    std::ostringstream out;
    out << "LARPSKILLS 1\n";
    for (const SkillEntry& e : entries_) {
        out << "task=" << escape_line(e.task_description) << "\tscript="
            << escape_line(e.script_text) << "\tcreated=" << e.created_at
            << "\tok=" << e.success_count << "\tfail=" << e.failure_count << "\n";
    }
    return out.str();
}

SkillLibrary SkillLibrary::deserialize(const std::string& text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "LARPSKILLS 1")
        throw CorruptSnapshot("missing or mismatched skill library header");
    SkillLibrary lib;
    for (size_t i = 1; i < lines.size(); ++i) {
        auto fields = split(lines[i], '\t');
        if (fields.size() != 5) throw CorruptSnapshot("bad skill entry field count");
        auto value = [&](size_t idx, const std::string& tag) {
            const std::string& f = fields[idx];
            if (f.rfind(tag + "=", 0) != 0) throw CorruptSnapshot("expected field '" + tag + "'");
            return f.substr(tag.size() + 1);
        };
        SkillEntry e;
        e.task_description = unescape_line(value(0, "task"));
        e.script_text = unescape_line(value(1, "script"));
        e.created_at = std::stoll(value(2, "created"));
        e.success_count = std::stoll(value(3, "ok"));
        e.failure_count = std::stoll(value(4, "fail"));
        e.key = embed(e.task_description);
        lib.entries_.push_back(std::move(e));
    }
    return lib;
}

void TrainingPairLog::append(const TrainingPair& pair) {
    records_.push_back(pair);
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoFailure("cannot append to training log '" + path_ + "'");
    out << pair.tick << "\t" << pair.role << "\t" << escape_line(pair.task) << "\t"
        << escape_line(pair.prompt_text) << "\t" << escape_line(pair.generated_script_text) << "\t"
        << pair.outcome << "\n";
    if (!out) throw IoFailure("write to training log '" + path_ + "' failed");
}

std::vector<TrainingPair> TrainingPairLog::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open training log '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::vector<TrainingPair> out;
    int line_no = 0;
    for (const std::string& line : split_lines(buf.str())) {
        ++line_no;
        auto fields = split(line, '\t');
        if (fields.size() != 6)
            throw ParseError("training log record needs 6 fields", line_no, 1);
        out.push_back({std::stoll(fields[0]), fields[1], unescape_line(fields[2]),
                       unescape_line(fields[3]), unescape_line(fields[4]), fields[5]});
    }
    return out;
}

std::string render_snapshot(const std::vector<WorkingMemoryEntry>& snapshot) {
    std::string out;
    for (const WorkingMemoryEntry& e : snapshot) out += e.key + ": " + e.value + "\n";
    return out;
}

std::string render_api_listing(const std::vector<ApiSpec>& specs) {
    std::string out;
    for (const ApiSpec& s : specs) {
        out += s.name + "(";
        for (size_t i = 0; i < s.params.size(); ++i) {
            if (i) out += ", ";
            out += s.params[i].name + ": ";
            switch (s.params[i].type) {
                case ParamType::string: out += "string"; break;
                case ParamType::integer: out += "integer"; break;
                case ParamType::entity_ref: out += "entity_ref"; break;
            }
        }
        out += ")";
        if (!s.mutating) out += " [predicate]";
        if (!s.is_public) out += " [personal]";
        if (!s.precondition.empty()) out += " — requires: " + s.precondition;
        out += "\n";
    }
    return out;
}

InteractionLoop::InteractionLoop(LlmBridge& bridge, World& world, SkillLibrary& library,
                                 TrainingPairLog& log, const PromptLibrary& prompts,
                                 InteractionConfig config)
    : bridge_(bridge), world_(world), library_(library), log_(log), prompts_(prompts),
      config_(config) {}

std::vector<ApiSpec> InteractionLoop::api_listing(const Persona& persona) const {
    std::vector<ApiSpec> specs = public_api_registry();
    for (const SkillEntry& e : library_.entries()) {
        ApiSpec spec;
        spec.name = e.task_description;
        spec.is_public = false;
        spec.owner = persona.character_id;
        spec.precondition = "cached skill";
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<std::string> InteractionLoop::decompose_task(
    const std::string& task, const std::vector<WorkingMemoryEntry>& snapshot,
    const Persona& persona) {
    ChatRequest req;
    req.role_tag = "decompose";
    req.messages = {{Speaker::system, "persona: " + persona.summary()},
                    {Speaker::user, prompts_.render("decompose", {{"task", task},
                                                                  {"snapshot", render_snapshot(snapshot)}})}};
    std::string reply = bridge_.complete(req).text;
    if (trim(reply) == "ATOMIC") return {task};
    std::vector<std::string> subtasks;
    for (const std::string& line : split_lines(reply)) {
        std::string t = trim(line);
        size_t i = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i == 0 || i >= t.size() || (t[i] != '.' && t[i] != ')')) continue;
        std::string body = trim(t.substr(i + 1));
        if (!body.empty()) subtasks.push_back(body);
    }
    if (subtasks.empty()) return {task};  // EmptyDecomposition: treat as atomic
    return subtasks;
}

std::string InteractionLoop::generate_script(const std::string& task,
                                             const std::vector<ApiSpec>& api_specs,
                                             const std::vector<WorkingMemoryEntry>& snapshot,
                                             const Persona& persona) {
    ChatRequest req;
    req.role_tag = "codegen";
    req.messages = {{Speaker::system, "persona: " + persona.summary()},
                    {Speaker::user,
                     prompts_.render("codegen", {{"task", task},
                                                 {"apis", render_api_listing(api_specs)},
                                                 {"snapshot", render_snapshot(snapshot)}})}};
    return bridge_.complete(req).text;
}

std::string InteractionLoop::reflect_on_failure(const std::string& task,
                                                const std::string& failed_script,
                                                const std::string& failure_message,
                                                const std::vector<ApiSpec>& api_specs) {
    ChatRequest req;
    req.role_tag = "reflect_code";
    req.messages = {{Speaker::user,
                     prompts_.render("reflect_code", {{"task", task},
                                                      {"failure", failure_message},
                                                      {"script", failed_script},
                                                      {"apis", render_api_listing(api_specs)}})}};
    return bridge_.complete(req).text;
}

SubtaskResult InteractionLoop::run_subtask(const std::string& subtask, WorkingMemory& wm,
                                           const Persona& persona) {
    SubtaskResult result;
    result.subtask = subtask;
    const std::vector<ApiSpec> specs = public_api_registry();

    if (auto cached = library_.lookup(subtask, config_.skill_threshold)) {
        SkillScript script = parse_script(cached->script_text);
        VerificationReport report = verify(script, specs, world_.snapshot(), persona.character_id);
        if (report.passed()) {
            ExecutionResult exec = execute_script(script, world_, persona.character_id);
            result.outcomes = exec.outcomes;
            if (exec.success) {
                library_.record_success(cached->task_description);
                result.status = "cached_hit";
                return result;
            }
            library_.record_failure(cached->task_description);
        }
        // Cached script no longer valid in the current world: regenerate.
    }

    std::string last_failure;
    std::string script_text;
    std::string prompt_text;
    for (int attempt = 1; attempt <= config_.max_generation_attempts; ++attempt) {
        result.generation_attempts = attempt;
        const auto snapshot = wm.snapshot();
        const auto listing = api_listing(persona);
        std::string role;
        if (attempt == 1) {
            role = "codegen";
            prompt_text = prompts_.render("codegen", {{"task", subtask},
                                                      {"apis", render_api_listing(listing)},
                                                      {"snapshot", render_snapshot(snapshot)}});
            script_text = generate_script(subtask, listing, snapshot, persona);
        } else {
            role = "reflect_code";
            prompt_text = prompts_.render("reflect_code", {{"task", subtask},
                                                           {"failure", last_failure},
                                                           {"script", script_text},
                                                           {"apis", render_api_listing(listing)}});
            script_text = reflect_on_failure(subtask, script_text, last_failure, listing);
        }

        VerificationReport report =
            verify_text(script_text, specs, world_.snapshot(), persona.character_id);
        if (!report.passed()) {
            last_failure = report.message;
            log_.append({world_.clock(), role, subtask, prompt_text, script_text,
                         report.failure_stage + "_failed"});
            continue;
        }

        SkillScript script = parse_script(script_text);
        ExecutionResult exec = execute_script(script, world_, persona.character_id);
        result.outcomes.insert(result.outcomes.end(), exec.outcomes.begin(), exec.outcomes.end());
        if (exec.success) {
            log_.append({world_.clock(), role, subtask, prompt_text, script_text, "verified_ok"});
            SkillEntry& entry = library_.add(subtask, script_text, world_.clock());
            entry.success_count = 1;
            result.status = "generated";
            return result;
        }
        // Live world diverged from the verified snapshot.
        last_failure = "world desync at call '" + exec.outcomes.back().api +
                       "': " + exec.outcomes.back().message;
        log_.append({world_.clock(), role, subtask, prompt_text, script_text, "desync"});
    }

    result.status = "failed";
    result.failure_message = last_failure;
    wm.put({"task_failed", subtask + ": " + last_failure, "recall", world_.clock(), 1.0});
    return result;
}

TaskRunResult InteractionLoop::run_task(const std::string& task, WorkingMemory& wm,
                                        const Persona& persona) {
    TaskRunResult result;
    const auto subtasks = decompose_task(task, wm.snapshot(), persona);
    for (const std::string& subtask : subtasks) {
        SubtaskResult sub = run_subtask(subtask, wm, persona);
        const bool failed = sub.status == "failed";
        result.subtasks.push_back(std::move(sub));
        if (failed) {
            // Sequence-sensitive: a failed subtask halts its successors.
            result.success = false;
            break;
        }
    }
    return result;
}

}  // namespace larp
