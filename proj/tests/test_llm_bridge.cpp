#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "larp/llm_bridge.hpp"

#include <memory>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "larp/errors.hpp"

using namespace larp;

namespace {

ChatRequest request(const std::string& role_tag, const std::string& user_text) {
    ChatRequest req;
    req.role_tag = role_tag;
    req.messages = {{Speaker::system, "sys"}, {Speaker::user, user_text}};
    return req;
}

}  // namespace

TEST_CASE("transcript parsing: fields, escapes, comments, blanks") {
    std::string text =
        "# comment\n"
        "\n"
        "codegen\tfetch water\t\tline one\\nline two\\ttabbed\\\\slash\n"
        "importance\t\tsticky\t5\n";
    auto entries = parse_transcript(text);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].role_tag == "codegen");
    CHECK(entries[0].match == "fetch water");
    CHECK_FALSE(entries[0].sticky);
    CHECK(entries[0].reply == "line one\nline two\ttabbed\\slash");
    CHECK(entries[1].role_tag == "importance");
    CHECK(entries[1].match == "");
    CHECK(entries[1].sticky);
}

TEST_CASE("transcript parsing rejects malformed lines") {
    CHECK_THROWS_AS(parse_transcript("codegen\tonly three fields\t\n"), ParseError);
    CHECK_THROWS_AS(parse_transcript("not_a_role\t\t\treply\n"), ParseError);
    CHECK_THROWS_AS(parse_transcript("codegen\t\tbadflag\treply\n"), ParseError);
    try {
        parse_transcript("codegen\t\t\tok\nbroken line\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
    }
}

TEST_CASE("the role tag set is closed and has 15 entries") {
    CHECK(known_role_tags().size() == 15);
    for (const std::string& tag : known_role_tags()) CHECK(is_known_role_tag(tag));
    CHECK_FALSE(is_known_role_tag("codegen2"));
    CHECK_FALSE(is_known_role_tag(""));
}

TEST_CASE("scripted backend consumes matching entries in file order") {
    auto entries = parse_transcript(
        "codegen\t\t\tfirst\n"
        "codegen\t\t\tsecond\n");
    ScriptedBackend backend(entries);
    CHECK(backend.remaining() == 2);
    CHECK(backend.complete(request("codegen", "x"), "m").text == "first");
    CHECK(backend.complete(request("codegen", "x"), "m").text == "second");
    CHECK(backend.remaining() == 0);
    CHECK_THROWS_AS(backend.complete(request("codegen", "x"), "m"), TranscriptExhausted);
}

TEST_CASE("match substrings select against the last user message") {
    auto entries = parse_transcript(
        "codegen\tgo north\t\tnorth plan\n"
        "codegen\tgo south\t\tsouth plan\n");
    ScriptedBackend backend(entries);
    CHECK(backend.complete(request("codegen", "please go south now"), "m").text == "south plan");
    CHECK(backend.complete(request("codegen", "please go north now"), "m").text == "north plan");
    CHECK_THROWS_AS(backend.complete(request("codegen", "go east"), "m"), TranscriptExhausted);
}

TEST_CASE("only the last user message is matched, not earlier turns") {
    auto entries = parse_transcript("codegen\tapple\t\tgot apple\n");
    ScriptedBackend backend(entries);
    ChatRequest req;
    req.role_tag = "codegen";
    req.messages = {{Speaker::user, "apple"}, {Speaker::assistant, "ok"}, {Speaker::user, "pear"}};
    CHECK_THROWS_AS(backend.complete(req, "m"), TranscriptExhausted);
    req.messages.push_back({Speaker::user, "apple pie"});
    CHECK(backend.complete(req, "m").text == "got apple");
}

TEST_CASE("sticky entries never exhaust and yield to consumable matches") {
    auto entries = parse_transcript(
        "importance\t\tsticky\t5\n"
        "importance\turgent\t\t9\n");
    ScriptedBackend backend(entries);
    // The consumable entry wins even though the sticky one comes first.
    CHECK(backend.complete(request("importance", "urgent news"), "m").text == "9");
    // Once consumed, the sticky fallback serves every later call.
    for (int i = 0; i < 5; ++i)
        CHECK(backend.complete(request("importance", "urgent news"), "m").text == "5");
    CHECK(backend.remaining() == 0);
}

TEST_CASE("token accounting approximates by word count") {
    ScriptedBackend backend(parse_transcript("codegen\t\t\tone two three\n"));
    auto resp = backend.complete(request("codegen", "four five"), "m");
    CHECK(resp.response_tokens == 3);
    CHECK(resp.prompt_tokens == 3);  // "sys" + "four five"
    CHECK(resp.backend_id == "scripted:m");
}

TEST_CASE("consumed_state round-trips and validates") {
    auto entries = parse_transcript(
        "codegen\t\t\ta\n"
        "codegen\t\t\tb\n"
        "importance\t\tsticky\t5\n");
    ScriptedBackend backend(entries);
    backend.complete(request("codegen", "x"), "m");
    std::string state = backend.consumed_state();
    CHECK(state == "100");

    ScriptedBackend fresh(entries);
    fresh.set_consumed_state(state);
    CHECK(fresh.complete(request("codegen", "x"), "m").text == "b");

    ScriptedBackend other(entries);
    CHECK_THROWS_AS(other.set_consumed_state("10"), CorruptSnapshot);
    CHECK_THROWS_AS(other.set_consumed_state("1x0"), CorruptSnapshot);
}

TEST_CASE("bridge validates requests and counts calls per role") {
    auto entries = parse_transcript(
        "codegen\t\t\tplan\n"
        "importance\t\tsticky\t5\n");
    LlmBridge bridge(std::make_unique<ScriptedBackend>(entries),
                     {{"codegen", "coder"}});
    auto resp = bridge.complete(request("codegen", "x"));
    CHECK(resp.backend_id == "scripted:coder");        // routed model
    CHECK(bridge.complete(request("importance", "x")).backend_id == "scripted:default");

    CHECK(bridge.call_count("codegen") == 1);
    CHECK(bridge.call_count("importance") == 1);
    CHECK(bridge.call_count("intent") == 0);
    CHECK(bridge.total_calls() == 2);

    CHECK_THROWS_AS(bridge.complete(request("bogus_role", "x")), Error);
    ChatRequest empty;
    empty.role_tag = "codegen";
    CHECK_THROWS_AS(bridge.complete(empty), Error);
    CHECK(bridge.total_calls() == 2);  // failed calls are not counted
}

TEST_CASE("scripted runs are deterministic across identical call sequences") {
    auto entries = parse_transcript(
        "self_ask\t\t\tQ1: where?\n"
        "cot_answer\t\tsticky\tFINAL: here.\n"
        "self_ask\t\t\tQ1: when?\n");
    auto run = [&]() {
        ScriptedBackend backend(entries);
        std::string out;
        out += backend.complete(request("self_ask", "a"), "m").text + "|";
        out += backend.complete(request("cot_answer", "b"), "m").text + "|";
        out += backend.complete(request("self_ask", "c"), "m").text;
        return out;
    };
    CHECK(run() == run());
    CHECK(run() == "Q1: where?|FINAL: here.|Q1: when?");
}

TEST_CASE("http backend speaks the chat-completion wire format") {
    httplib::Server server;
    nlohmann::json seen;
    std::string seen_auth;
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auto it = req.headers.find("Authorization");
        seen_auth = it == req.headers.end() ? "" : it->second;
        nlohmann::json reply = {
            {"choices", {{{"message", {{"content", "hello from server"}}}}}},
            {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 4}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "tok", 2000, 0);
    ChatRequest req = request("intent", "what next?");
    req.temperature = 0.25;
    req.seed = 7;
    auto resp = backend.complete(req, "big-model");

    CHECK(resp.text == "hello from server");
    CHECK(resp.backend_id == "http:big-model");
    CHECK(resp.prompt_tokens == 11);
    CHECK(resp.response_tokens == 4);
    CHECK(seen_auth == "Bearer tok");
    CHECK(seen["model"] == "big-model");
    CHECK(seen["temperature"] == 0.25);
    CHECK(seen["seed"] == 7);
    REQUIRE(seen["messages"].size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][1]["role"] == "user");
    CHECK(seen["messages"][1]["content"] == "what next?");

    server.stop();
    worker.join();
}

TEST_CASE("http backend retries transient failures then succeeds") {
    httplib::Server server;
    int hits = 0;
    server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        if (hits == 1) {
            res.status = 503;
            return;
        }
        nlohmann::json reply = {{"choices", {{{"message", {{"content", "ok"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/chat", "", 2000, 2);
    auto resp = backend.complete(request("intent", "x"), "m");
    CHECK(resp.text == "ok");
    CHECK(hits == 2);

    server.stop();
    worker.join();
}

TEST_CASE("http backend reports persistent rejection and malformed bodies") {
    httplib::Server server;
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    server.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nope\": true}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpBackend bad(base + "/bad", "", 2000, 1);
    CHECK_THROWS_AS(bad.complete(request("intent", "x"), "m"), BackendRejected);
    HttpBackend garbled(base + "/garbled", "", 2000, 0);
    CHECK_THROWS_AS(garbled.complete(request("intent", "x"), "m"), BackendRejected);

    server.stop();
    worker.join();

    HttpBackend unreachable("http://127.0.0.1:1/none", "", 200, 0);
    CHECK_THROWS_AS(unreachable.complete(request("intent", "x"), "m"), BackendUnreachable);
}
