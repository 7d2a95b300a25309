#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "larp/errors.hpp"
#include "larp/simworld.hpp"

namespace larp {

// Bounded action DSL:
//   script  := "seq" "{" stmt* "}"
//   stmt    := call | if | repeat
//   call    := "call" IDENT "(" [arg ("," arg)*] ")"
//   arg     := IDENT "=" (STRING | INTEGER)
//   if      := "if" IDENT "(" args ")" "{" stmt* "}" ["else" "{" stmt* "}"]
//   repeat  := "repeat" INTEGER "{" stmt* "}"
// Bounds: nesting depth ≤ 8, call nodes ≤ 64, repeat counts literal and ≤ 32.

inline constexpr int kMaxScriptDepth = 8;
inline constexpr int kMaxScriptCalls = 64;
inline constexpr int kMaxRepeatCount = 32;

struct ScriptArg {
    std::string name;
    std::string value;
    bool is_integer = false;
};

struct ScriptNode {
    enum class Kind { seq, call, branch, repeat };
    Kind kind = Kind::seq;

    // call / branch condition
    std::string api;
    std::vector<ScriptArg> args;

    // seq / repeat body / branch then-branch
    std::vector<ScriptNode> children;
    // branch only
    std::vector<ScriptNode> else_children;

    int repeat_count = 0;
};

using SkillScript = ScriptNode;

SkillScript parse_script(const std::string& text);
std::string pretty_print_script(const SkillScript& script);

struct VerificationReport {
    bool parse_ok = false;
    bool schema_ok = false;
    bool dry_run_ok = false;
    std::string failure_stage = "none";  // none | parse | schema | dry_run
    std::string message;

    bool passed() const { return parse_ok && schema_ok && dry_run_ok; }
};

// Schema stage: every call and condition names a known API with exact arity
// and argument types. Dry-run stage: execute against a cloned world snapshot;
// the first failing call is pinpointed.
VerificationReport verify(const SkillScript& script, const std::vector<ApiSpec>& api_specs,
                          const World& world_snapshot, const std::string& character_id);
VerificationReport verify_text(const std::string& text, const std::vector<ApiSpec>& api_specs,
                               const World& world_snapshot, const std::string& character_id);

struct ExecutionResult {
    std::vector<ActionOutcome> outcomes;
    int skipped_calls = 0;
    bool success = true;
};

// Applies calls to the given world in AST order; conditions are evaluated at
// execution time. Halts at the first failed outcome and counts the remainder
// as skipped.
ExecutionResult execute_script(const SkillScript& script, World& world,
                               const std::string& character_id);

}  // namespace larp
