#include "larp/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "larp/errors.hpp"
#include "larp/llm_bridge.hpp"

namespace larp {

namespace {

std::map<std::string, std::string> default_templates() {
    return {
        {"self_ask",
         "You are {{persona}}. Given the observation below, pose numbered questions "
         "(Q1:, Q2:, ...) about what you observe, your personality and your past "
         "experiences.\n\nObservation:\n{{context}}"},
        {"logic_gen",
         "You are {{persona}}. Produce one logic query of the form pred(args)? that would "
         "answer this question from your rules and facts.\n\nQuestion: {{question}}"},
        {"keyword_extract",
         "Extract the most relevant keywords from this question, comma-separated.\n\n"
         "Question: {{question}}"},
        {"cot_answer",
         "You are {{persona}}. Reason step by step over the retrieved memories and answer "
         "the questions. If you can give a final answer, start the line with FINAL:.\n\n"
         "Questions and retrieved memories:\n{{bundles}}"},
        {"reconstruct",
         "You are {{persona}}. Rewrite this memory in light of what you believe, keeping "
         "it one sentence.\n\nMemory: {{memory}}\nContext: {{context}}"},
        {"importance",
         "Rate the importance of this observation for {{persona}} on a 0-10 scale. Reply "
         "with the number only.\n\nObservation item: {{item}}"},
        {"unit_order",
         "Order these decision units for the current situation. Reply with a "
         "comma-separated permutation of the ids.\n\nUnits: {{units}}\nObservation digest: "
         "{{digest}}"},
        {"intent",
         "You are {{persona}}. State the actor's intent in one short phrase.\n\n"
         "Working memory:\n{{snapshot}}\nObservation:\n{{observation}}"},
        {"format",
         "You are {{persona}}. Produce the final decision. Reply either with\n"
         "TASKS:\n1. <task>\n2. <task>\nor with\nSAY: <utterance>\n\n"
         "Working memory:\n{{snapshot}}\nObservation:\n{{observation}}"},
        {"decompose",
         "Break this task into strictly ordered subtasks, numbered 1., 2., ... Reply "
         "ATOMIC if it cannot be decomposed.\n\nTask: {{task}}\nWorking memory:\n{{snapshot}}"},
        {"codegen",
         "Write a script in the action DSL (seq { call api(arg=\"v\") ... }) for this task. "
         "Available APIs:\n{{apis}}\n\nTask: {{task}}\nWorking memory:\n{{snapshot}}"},
        {"reflect_code",
         "The previous script failed verification. Fix it.\n\nTask: {{task}}\nFailure: "
         "{{failure}}\nPrevious script:\n{{script}}\nAvailable APIs:\n{{apis}}"},
        {"conflict",
         "Check this decision against the character's persona and worldview. Reply PASS, "
         "REJECT: <reason>, or REWRITE: <text>.\n\nPersona: {{persona}}\nWorldview: "
         "{{worldview}}\nDecision: {{decision}}"},
        {"qa_gen",
         "Generate question-answer pairs covering this memory, one pair as\nQ: <question>\n"
         "A: <answer>\n\nMemory: {{content}}"},
        {"reflect_memory",
         "Consolidate these working-memory entries (numbered). Emit lines\n"
         "MEM[<n>]: <memory sentence>  and/or  FACT[<n>]: <logic fact>.\n\n"
         "Entries:\n{{entries}}"},
    };
}

}  // namespace

PromptLibrary::PromptLibrary() : templates_(default_templates()) {}

void PromptLibrary::load_directory(const std::string& dir) {
    for (const std::string& role : known_role_tags()) {
        std::filesystem::path p = std::filesystem::path(dir) / (role + ".txt");
        if (!std::filesystem::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoFailure("cannot read prompt template '" + p.string() + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        templates_[role] = buf.str();
    }
}

const std::string& PromptLibrary::raw(const std::string& role_tag) const {
    auto it = templates_.find(role_tag);
    if (it == templates_.end()) throw Error("no prompt template for role '" + role_tag + "'");
    return it->second;
}

std::string PromptLibrary::render(const std::string& role_tag,
                                  const std::map<std::string, std::string>& vars) const {
    std::string out = raw(role_tag);
    for (const auto& [name, value] : vars) {
        const std::string needle = "{{" + name + "}}";
        size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace larp
