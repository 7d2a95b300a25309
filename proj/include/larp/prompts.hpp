#pragma once

#include <map>
#include <string>

namespace larp {

// Versioned prompt templates, one per pipeline role. Built-in defaults are
// compiled in; a prompts directory with <role>.txt files overrides them.
// Placeholders use {{name}} syntax.
class PromptLibrary {
public:
    PromptLibrary();

    void load_directory(const std::string& dir);

    std::string render(const std::string& role_tag,
                       const std::map<std::string, std::string>& vars) const;

    const std::string& raw(const std::string& role_tag) const;

private:
    std::map<std::string, std::string> templates_;
};

}  // namespace larp
