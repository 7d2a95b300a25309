#pragma once

#include <string>
#include <utility>
#include <vector>

#include "larp/ltm_store.hpp"

namespace larp {

struct Persona {
    std::string character_id;
    std::string name;
    std::string background;
    std::vector<std::string> traits;
    std::string language_style;
    std::vector<std::pair<std::string, std::string>> relationships;  // (other id, descriptor)
    std::vector<std::string> worldview;
    DecayParams decay;

    std::string summary() const;
    std::string worldview_summary() const;
};

}  // namespace larp
