#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "larp/errors.hpp"

namespace larp {

enum class Speaker { system, user, assistant };

struct ChatMessage {
    Speaker speaker = Speaker::user;
    std::string text;
};

struct ChatRequest {
    std::string role_tag;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    std::optional<int> seed;
};

struct ChatResponse {
    std::string text;
    std::string backend_id;
    int prompt_tokens = 0;
    int response_tokens = 0;
};

// Pipeline roles; one key per stage so different configured models can serve
// different stages (the model-cluster routing map).
bool is_known_role_tag(const std::string& tag);
const std::vector<std::string>& known_role_tags();

enum class BackendKind { scripted, http };

struct BackendConfig {
    BackendKind kind = BackendKind::scripted;
    std::map<std::string, std::string> role_models;  // role_tag -> model name
    std::string endpoint;       // http only
    std::string auth_token;     // http only
    std::string transcript_path;  // scripted only
    int timeout_ms = 30000;
    int max_retries = 2;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request, const std::string& model) = 0;
};

// One scripted transcript entry. Entries are consumed in file order among
// those whose role_tag matches and whose (optional) substring matches the
// last user message. Sticky entries match repeatedly and are only picked when
// no consumable entry matches.
struct TranscriptEntry {
    std::string role_tag;
    std::string match;  // substring over the last user message; empty = any
    std::string reply;
    bool sticky = false;
};

std::vector<TranscriptEntry> parse_transcript(const std::string& text);
std::vector<TranscriptEntry> load_transcript(const std::string& path);

class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(std::vector<TranscriptEntry> entries);
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

    ChatResponse complete(const ChatRequest& request, const std::string& model) override;

    size_t remaining() const;

    // Consumption bitmap ('0'/'1' per entry) so a resumed session replays the
    // transcript from the same position.
    std::string consumed_state() const;
    void set_consumed_state(const std::string& state);

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptEntry> entries_;
    std::vector<bool> consumed_;
};

// Chat-completion-style HTTP client with exponential-backoff retries.
class HttpBackend : public LlmBackend {
public:
    HttpBackend(std::string endpoint, std::string auth_token, int timeout_ms, int max_retries);

    ChatResponse complete(const ChatRequest& request, const std::string& model) override;

private:
    std::string endpoint_;
    std::string auth_token_;
    int timeout_ms_;
    int max_retries_;
};

// Backend-agnostic access point with per-role routing and call accounting.
// The only module that performs network I/O.
class LlmBridge {
public:
    explicit LlmBridge(const BackendConfig& config);
    LlmBridge(std::unique_ptr<LlmBackend> backend, std::map<std::string, std::string> role_models);

    ChatResponse complete(const ChatRequest& request);

    std::int64_t call_count(const std::string& role_tag) const;
    std::int64_t total_calls() const;

    LlmBackend* backend() { return backend_.get(); }
    const LlmBackend* backend() const { return backend_.get(); }

private:
    std::string model_for(const std::string& role_tag) const;

    std::unique_ptr<LlmBackend> backend_;
    std::map<std::string, std::string> role_models_;
    mutable std::mutex mutex_;
    std::map<std::string, std::int64_t> call_counts_;
};

}  // namespace larp
