#include "larp/persona.hpp"

namespace larp {

std::string Persona::summary() const {
    std::string out = name.empty() ? character_id : name;
    if (!background.empty()) out += ", " + background;
    if (!traits.empty()) {
        out += " (traits:";
        for (const std::string& t : traits) out += " " + t;
        out += ")";
    }
    if (!language_style.empty()) out += "; speaks " + language_style;
    return out;
}

std::string Persona::worldview_summary() const {
    std::string out;
    for (const std::string& w : worldview) {
        if (!out.empty()) out += "; ";
        out += w;
    }
    for (const auto& [other, descriptor] : relationships) {
        if (!out.empty()) out += "; ";
        out += other + ": " + descriptor;
    }
    return out;
}

}  // namespace larp
