#pragma once

#include <stdexcept>
#include <string>

namespace larp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// llm-bridge
struct TranscriptExhausted : Error { using Error::Error; };
struct BackendUnreachable : Error { using Error::Error; };
struct BackendRejected : Error { using Error::Error; };
struct TimeoutError : Error { using Error::Error; };

// ltm-store
struct InvalidRecord : Error { using Error::Error; };
struct UnknownId : Error { using Error::Error; };

// logicql / parsers
struct ParseError : Error {
    ParseError(std::string msg, int line, int column)
        : Error(std::move(msg) + " at line " + std::to_string(line) + ", column " +
                std::to_string(column)),
          line(line),
          column(column) {}
    int line;
    int column;
};
struct TooManyProbabilisticFacts : Error { using Error::Error; };
struct ArityConflict : Error { using Error::Error; };

// decision-engine
struct DuplicateUnitId : Error { using Error::Error; };
struct MalformedFinalOutput : Error { using Error::Error; };

// action-space
struct BoundsExceeded : Error { using Error::Error; };
struct RetriesExhausted : Error { using Error::Error; };
struct WorldDesync : Error { using Error::Error; };

// simworld
struct UnknownCharacter : Error { using Error::Error; };

// persistence / cli
struct IoFailure : Error { using Error::Error; };
struct CorruptSnapshot : Error { using Error::Error; };
struct ScenarioParseError : Error { using Error::Error; };

}  // namespace larp
