#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "larp/llm_bridge.hpp"
#include "larp/persona.hpp"
#include "larp/prompts.hpp"
#include "larp/skill_dsl.hpp"
#include "larp/working_memory.hpp"

namespace larp {

struct SkillEntry {
    std::string task_description;
    std::vector<float> key;  // embed(task_description)
    std::string script_text;
    Tick created_at = 0;
    std::int64_t success_count = 0;
    std::int64_t failure_count = 0;
};

// Per-character (Task, API) cache. Entries only hold scripts that executed
// successfully at least once.
class SkillLibrary {
public:
    // Best entry with cosine(embed(task), key) ≥ threshold; ties broken by
    // higher success_count, then newer entry.
    std::optional<SkillEntry> lookup(const std::string& task, double threshold = 0.85) const;

    SkillEntry& add(const std::string& task, const std::string& script_text, Tick created_at);
    void record_success(const std::string& task_description);
    void record_failure(const std::string& task_description);

    const std::vector<SkillEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    std::string serialize() const;
    static SkillLibrary deserialize(const std::string& text);

private:
    std::vector<SkillEntry> entries_;
};

struct TrainingPair {
    Tick tick = 0;
    std::string role;  // codegen | reflect_code
    std::string task;
    std::string prompt_text;
    std::string generated_script_text;
    std::string outcome;  // verified_ok | parse_failed | schema_failed | dry_run_failed | desync
};

// Append-only training-pair log; one structured line per generation round.
class TrainingPairLog {
public:
    TrainingPairLog() = default;
    explicit TrainingPairLog(std::string path) : path_(std::move(path)) {}

    void append(const TrainingPair& pair);
    const std::vector<TrainingPair>& records() const { return records_; }

    static std::vector<TrainingPair> parse_file(const std::string& path);

private:
    std::string path_;
    std::vector<TrainingPair> records_;
};

struct SubtaskResult {
    std::string subtask;
    std::string status;  // cached_hit | generated | failed
    int generation_attempts = 0;
    std::vector<ActionOutcome> outcomes;
    std::string failure_message;
};

struct TaskRunResult {
    std::vector<SubtaskResult> subtasks;
    bool success = true;
};

struct InteractionConfig {
    double skill_threshold = 0.85;
    int max_generation_attempts = 3;  // generate→verify cycles per subtask
};

// The environment-interaction loop: decomposition, skill lookup, codegen,
// verify, execute, failure reflection, caching and training-pair logging.
class InteractionLoop {
public:
    InteractionLoop(LlmBridge& bridge, World& world, SkillLibrary& library, TrainingPairLog& log,
                    const PromptLibrary& prompts, InteractionConfig config = {});

    std::vector<std::string> decompose_task(const std::string& task,
                                            const std::vector<WorkingMemoryEntry>& snapshot,
                                            const Persona& persona);

    std::string generate_script(const std::string& task, const std::vector<ApiSpec>& api_specs,
                                const std::vector<WorkingMemoryEntry>& snapshot,
                                const Persona& persona);

    std::string reflect_on_failure(const std::string& task, const std::string& failed_script,
                                   const std::string& failure_message,
                                   const std::vector<ApiSpec>& api_specs);

    // Full loop for one (possibly compound) task. Working memory receives a
    // "task_failed" key when a subtask exhausts its retries; later subtasks
    // are then skipped (strict ordering).
    TaskRunResult run_task(const std::string& task, WorkingMemory& wm, const Persona& persona);

    // Public registry plus the character's personal (cached) skills, for
    // prompt listings.
    std::vector<ApiSpec> api_listing(const Persona& persona) const;

private:
    SubtaskResult run_subtask(const std::string& subtask, WorkingMemory& wm,
                              const Persona& persona);

    LlmBridge& bridge_;
    World& world_;
    SkillLibrary& library_;
    TrainingPairLog& log_;
    const PromptLibrary& prompts_;
    InteractionConfig config_;
};

std::string render_snapshot(const std::vector<WorkingMemoryEntry>& snapshot);
std::string render_api_listing(const std::vector<ApiSpec>& specs);

}  // namespace larp
