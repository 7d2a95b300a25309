#include "larp/llm_bridge.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "larp/common.hpp"

namespace larp {

namespace {

const std::vector<std::string> kRoleTags = {
    "self_ask",  "logic_gen", "keyword_extract", "cot_answer", "reconstruct",
    "importance", "unit_order", "intent",         "format",     "decompose",
    "codegen",   "reflect_code", "conflict",      "qa_gen",     "reflect_memory"};

int approx_tokens(const std::string& text) {
    return static_cast<int>(words_of(text).size());
}

std::string last_user_message(const ChatRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->speaker == Speaker::user) return it->text;
    }
    return {};
}

}  // namespace

bool is_known_role_tag(const std::string& tag) {
    return std::find(kRoleTags.begin(), kRoleTags.end(), tag) != kRoleTags.end();
}

const std::vector<std::string>& known_role_tags() { return kRoleTags; }

std::vector<TranscriptEntry> parse_transcript(const std::string& text) {
    std::vector<TranscriptEntry> entries;
    int line_no = 0;
    for (const std::string& raw : split_lines(text)) {
        ++line_no;
        if (raw.empty() || raw[0] == '#') continue;
        auto fields = split(raw, '\t');
        if (fields.size() != 4)
            throw ParseError("transcript entry needs 4 tab-separated fields "
                             "(role_tag, match, flags, reply)", line_no, 1);
        TranscriptEntry e;
        e.role_tag = trim(fields[0]);
        e.match = unescape_line(fields[1]);
        std::string flags = trim(fields[2]);
        e.reply = unescape_line(fields[3]);
        if (!is_known_role_tag(e.role_tag))
            throw ParseError("unknown role_tag '" + e.role_tag + "'", line_no, 1);
        if (flags == "sticky") e.sticky = true;
        else if (!flags.empty())
            throw ParseError("unknown flag '" + flags + "'", line_no, 1);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<TranscriptEntry> load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open transcript '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_transcript(buf.str());
}

ScriptedBackend::ScriptedBackend(std::vector<TranscriptEntry> entries)
    : entries_(std::move(entries)), consumed_(entries_.size(), false) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    return std::make_unique<ScriptedBackend>(load_transcript(path));
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request, const std::string& model) {
    std::lock_guard lock(mutex_);
    const std::string user = last_user_message(request);
    auto matches = [&](const TranscriptEntry& e) {
        return e.role_tag == request.role_tag &&
               (e.match.empty() || user.find(e.match) != std::string::npos);
    };
    int pick = -1;
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (!entries_[i].sticky && !consumed_[i] && matches(entries_[i])) {
            pick = static_cast<int>(i);
            break;
        }
    }
    if (pick < 0) {
        for (size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].sticky && matches(entries_[i])) {
                pick = static_cast<int>(i);
                break;
            }
        }
    }
    if (pick < 0)
        throw TranscriptExhausted("no transcript entry left for role '" + request.role_tag +
                                  "' (last user message: \"" + user + "\")");
    if (!entries_[static_cast<size_t>(pick)].sticky) consumed_[static_cast<size_t>(pick)] = true;

    ChatResponse resp;
    resp.text = entries_[static_cast<size_t>(pick)].reply;
    resp.backend_id = "scripted:" + model;
    for (const ChatMessage& m : request.messages) resp.prompt_tokens += approx_tokens(m.text);
    resp.response_tokens = approx_tokens(resp.text);
    return resp;
}

std::string ScriptedBackend::consumed_state() const {
    std::lock_guard lock(mutex_);
    std::string out(consumed_.size(), '0');
    for (size_t i = 0; i < consumed_.size(); ++i)
        if (consumed_[i]) out[i] = '1';
    return out;
}

void ScriptedBackend::set_consumed_state(const std::string& state) {
    std::lock_guard lock(mutex_);
    if (state.size() != consumed_.size())
        throw CorruptSnapshot("transcript consumption state does not match the loaded transcript");
    for (size_t i = 0; i < consumed_.size(); ++i) {
        if (state[i] != '0' && state[i] != '1')
            throw CorruptSnapshot("bad transcript consumption state");
        consumed_[i] = state[i] == '1';
    }
}

size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mutex_);
    size_t n = 0;
    for (size_t i = 0; i < entries_.size(); ++i)
        if (!entries_[i].sticky && !consumed_[i]) ++n;
    return n;
}

HttpBackend::HttpBackend(std::string endpoint, std::string auth_token, int timeout_ms,
                         int max_retries)
    : endpoint_(std::move(endpoint)),
      auth_token_(std::move(auth_token)),
      timeout_ms_(timeout_ms),
      max_retries_(max_retries) {}

ChatResponse HttpBackend::complete(const ChatRequest& request, const std::string& model) {
    // Split "scheme://host[:port]/path" into client base and request path.
    auto path_start = endpoint_.find('/', endpoint_.find("//") + 2);
    std::string base = path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

    nlohmann::json body;
    body["model"] = model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request.seed) body["seed"] = *request.seed;
    body["messages"] = nlohmann::json::array();
    for (const ChatMessage& m : request.messages) {
        const char* role = m.speaker == Speaker::system ? "system"
                           : m.speaker == Speaker::assistant ? "assistant" : "user";
        body["messages"].push_back({{"role", role}, {"content", m.text}});
    }
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
        }
        httplib::Client client(base);
        client.set_connection_timeout(0, timeout_ms_ * 1000);
        client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        httplib::Headers headers;
        if (!auth_token_.empty()) headers.emplace("Authorization", "Bearer " + auth_token_);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // transport failure: retry
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            auto json = nlohmann::json::parse(res->body);
            ChatResponse resp;
            resp.text = json.at("choices").at(0).at("message").at("content").get<std::string>();
            resp.backend_id = "http:" + model;
            if (json.contains("usage")) {
                resp.prompt_tokens = json["usage"].value("prompt_tokens", 0);
                resp.response_tokens = json["usage"].value("completion_tokens", 0);
            }
            return resp;
        } catch (const nlohmann::json::exception& e) {
            throw BackendRejected(std::string("malformed chat-completion response: ") + e.what());
        }
    }
    if (last_error.rfind("HTTP ", 0) == 0)
        throw BackendRejected("backend rejected request after retries: " + last_error);
    throw BackendUnreachable("backend unreachable after retries: " + last_error);
}

LlmBridge::LlmBridge(const BackendConfig& config) : role_models_(config.role_models) {
    if (config.kind == BackendKind::scripted) {
        if (config.transcript_path.empty())
            throw Error("scripted backend requires a transcript path");
        backend_ = ScriptedBackend::from_file(config.transcript_path);
    } else {
        if (config.endpoint.empty()) throw Error("http backend requires an endpoint");
        backend_ = std::make_unique<HttpBackend>(config.endpoint, config.auth_token,
                                                 config.timeout_ms, config.max_retries);
    }
}

LlmBridge::LlmBridge(std::unique_ptr<LlmBackend> backend,
                     std::map<std::string, std::string> role_models)
    : backend_(std::move(backend)), role_models_(std::move(role_models)) {}

std::string LlmBridge::model_for(const std::string& role_tag) const {
    auto it = role_models_.find(role_tag);
    return it == role_models_.end() ? "default" : it->second;
}

ChatResponse LlmBridge::complete(const ChatRequest& request) {
    if (!is_known_role_tag(request.role_tag))
        throw Error("unknown role_tag '" + request.role_tag + "'");
    if (request.messages.empty()) throw Error("chat request needs at least one message");
    ChatResponse resp = backend_->complete(request, model_for(request.role_tag));
    {
        std::lock_guard lock(mutex_);
        call_counts_[request.role_tag] += 1;
    }
    return resp;
}

std::int64_t LlmBridge::call_count(const std::string& role_tag) const {
    std::lock_guard lock(mutex_);
    auto it = call_counts_.find(role_tag);
    return it == call_counts_.end() ? 0 : it->second;
}

std::int64_t LlmBridge::total_calls() const {
    std::lock_guard lock(mutex_);
    std::int64_t total = 0;
    for (const auto& [_, n] : call_counts_) total += n;
    return total;
}

}  // namespace larp
