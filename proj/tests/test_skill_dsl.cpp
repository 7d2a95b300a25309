#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "larp/skill_dsl.hpp"

#include <string>

using namespace larp;

namespace {

World fixture() {
    World w;
    w.add_location("forge");
    w.add_location("square");
    w.add_location("well");
    w.add_adjacency("forge", "square");
    w.add_adjacency("square", "well");
    w.add_entity({"ann", EntityKind::character, "forge", "", {}});
    w.add_entity({"bucket", EntityKind::item, "forge", "", {}});
    return w;
}

// Reference call counter: walks the AST independently of the executor,
// multiplying repeat bodies by their literal count.
int oracle_calls(const ScriptNode& n) {
    if (n.kind == ScriptNode::Kind::call) return 1;
    int total = 0;
    for (const ScriptNode& c : n.children) total += oracle_calls(c);
    if (n.kind == ScriptNode::Kind::repeat) return total * n.repeat_count;
    for (const ScriptNode& c : n.else_children) total += oracle_calls(c);
    return total;
}

}  // namespace

TEST_CASE("parses calls, branches and repeats into the expected tree") {
    auto script = parse_script(
        "seq {\n"
        "  call move(to=\"square\")\n"
        "  if has(item=\"bucket\") { call drop(item=\"bucket\") } else { call wait() }\n"
        "  repeat 3 { call wait() }\n"
        "}\n");
    REQUIRE(script.kind == ScriptNode::Kind::seq);
    REQUIRE(script.children.size() == 3);
    CHECK(script.children[0].kind == ScriptNode::Kind::call);
    CHECK(script.children[0].api == "move");
    REQUIRE(script.children[0].args.size() == 1);
    CHECK(script.children[0].args[0].name == "to");
    CHECK(script.children[0].args[0].value == "square");
    CHECK_FALSE(script.children[0].args[0].is_integer);
    CHECK(script.children[1].kind == ScriptNode::Kind::branch);
    CHECK(script.children[1].api == "has");
    REQUIRE(script.children[1].children.size() == 1);
    REQUIRE(script.children[1].else_children.size() == 1);
    CHECK(script.children[2].kind == ScriptNode::Kind::repeat);
    CHECK(script.children[2].repeat_count == 3);
}

TEST_CASE("integer arguments and escapes parse") {
    auto script = parse_script("seq { call say(text=\"he said \\\"hi\\\"\") }");
    CHECK(script.children[0].args[0].value == "he said \"hi\"");
    script = parse_script("seq { call say(text=-5) }");
    CHECK(script.children[0].args[0].is_integer);
    CHECK(script.children[0].args[0].value == "-5");
}

TEST_CASE("malformed scripts raise parse errors") {
    CHECK_THROWS_AS(parse_script(""), ParseError);
    CHECK_THROWS_AS(parse_script("call wait()"), ParseError);        // missing seq wrapper
    CHECK_THROWS_AS(parse_script("seq { call wait() "), ParseError); // unbalanced brace
    CHECK_THROWS_AS(parse_script("seq { wait() }"), ParseError);     // bare call
    CHECK_THROWS_AS(parse_script("seq { call move(to=square) }"), ParseError);  // bare ident value
    CHECK_THROWS_AS(parse_script("seq { call say(text=\"open) }"), ParseError); // unterminated
    CHECK_THROWS_AS(parse_script("seq { repeat n { call wait() } }"), ParseError);
    CHECK_THROWS_AS(parse_script("seq { call wait() } trailing"), ParseError);
    CHECK_THROWS_AS(parse_script("seq { call wait() @ }"), ParseError);
}

TEST_CASE("parse errors carry line and column positions") {
    try {
        parse_script("seq {\n  wait()\n}");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("bounds: depth, call count and repeat literal are enforced") {
    // Depth 9 of nested repeats exceeds the limit of 8.
    std::string deep = "seq { ";
    for (int i = 0; i < 8; ++i) deep += "repeat 1 { ";
    deep += "call wait() ";
    for (int i = 0; i < 8; ++i) deep += "} ";
    deep += "}";
    CHECK_THROWS_AS(parse_script(deep), BoundsExceeded);

    // Exactly 8 levels including the root seq is fine.
    std::string ok = "seq { ";
    for (int i = 0; i < 7; ++i) ok += "repeat 1 { ";
    ok += "call wait() ";
    for (int i = 0; i < 7; ++i) ok += "} ";
    ok += "}";
    CHECK_NOTHROW(parse_script(ok));

    std::string many = "seq { ";
    for (int i = 0; i < 65; ++i) many += "call wait() ";
    many += "}";
    CHECK_THROWS_AS(parse_script(many), BoundsExceeded);
    std::string exactly = "seq { ";
    for (int i = 0; i < 64; ++i) exactly += "call wait() ";
    exactly += "}";
    CHECK_NOTHROW(parse_script(exactly));

    CHECK_THROWS_AS(parse_script("seq { repeat 33 { call wait() } }"), BoundsExceeded);
    CHECK_NOTHROW(parse_script("seq { repeat 32 { call wait() } }"));
    CHECK_THROWS_AS(parse_script("seq { repeat -1 { call wait() } }"), BoundsExceeded);
}

TEST_CASE("pretty_print and parse are mutually inverse") {
    const char* sources[] = {
        "seq { }",
        "seq { call wait() }",
        "seq { call move(to=\"square\") call say(text=\"hi there\") }",
        "seq { if at(location=\"forge\") { call wait() } else { call move(to=\"square\") } }",
        "seq { repeat 2 { if has(item=\"bucket\") { call drop(item=\"bucket\") } } }",
    };
    for (const char* src : sources) {
        std::string printed = pretty_print_script(parse_script(src));
        CHECK(pretty_print_script(parse_script(printed)) == printed);
    }
}

TEST_CASE("schema stage rejects unknown apis, bad arity, names and types") {
    World w = fixture();
    const auto& specs = public_api_registry();
    auto check = [&](const std::string& src) {
        return verify_text(src, specs, w, "ann");
    };

    auto r = check("seq { call teleport(to=\"square\") }");
    CHECK(r.failure_stage == "schema");
    CHECK(r.message == "unknown api 'teleport'");
    CHECK_FALSE(r.passed());

    r = check("seq { call move() }");
    CHECK(r.failure_stage == "schema");
    CHECK(r.message.find("expects 1 argument") != std::string::npos);

    r = check("seq { call move(dest=\"square\") }");
    CHECK(r.failure_stage == "schema");
    CHECK(r.message.find("must be 'to'") != std::string::npos);

    r = check("seq { call move(to=7) }");
    CHECK(r.failure_stage == "schema");
    CHECK(r.message.find("wrong type") != std::string::npos);

    // Conditions must be predicates; mutating apis are rejected there.
    r = check("seq { if move(to=\"square\") { call wait() } }");
    CHECK(r.failure_stage == "schema");
    CHECK(r.message.find("predicate") != std::string::npos);

    // Schema errors hide inside else branches too.
    r = check("seq { if at(location=\"forge\") { call wait() } else { call bogus() } }");
    CHECK(r.failure_stage == "schema");
}

TEST_CASE("verify stages are monotone: parse, then schema, then dry-run") {
    World w = fixture();
    const auto& specs = public_api_registry();

    auto r = verify_text("seq { oops", specs, w, "ann");
    CHECK(r.failure_stage == "parse");
    CHECK_FALSE(r.parse_ok);
    CHECK_FALSE(r.schema_ok);
    CHECK_FALSE(r.dry_run_ok);

    r = verify_text("seq { call bogus() }", specs, w, "ann");
    CHECK(r.failure_stage == "schema");
    CHECK(r.parse_ok);
    CHECK_FALSE(r.schema_ok);

    r = verify_text("seq { call move(to=\"well\") }", specs, w, "ann");  // not adjacent
    CHECK(r.failure_stage == "dry_run");
    CHECK(r.parse_ok);
    CHECK(r.schema_ok);
    CHECK_FALSE(r.dry_run_ok);
    CHECK(r.message.find("move") != std::string::npos);
    CHECK(r.message.find("not adjacent") != std::string::npos);

    r = verify_text("seq { call move(to=\"square\") call move(to=\"well\") }", specs, w, "ann");
    CHECK(r.passed());
    CHECK(r.failure_stage == "none");
}

TEST_CASE("verify dry-runs against a clone and never mutates the live world") {
    World w = fixture();
    auto h = w.state_hash();
    auto r = verify_text("seq { call pick_up(item=\"bucket\") call move(to=\"square\") }",
                         public_api_registry(), w, "ann");
    CHECK(r.passed());
    CHECK(w.state_hash() == h);
    CHECK(w.entity("bucket").location == "forge");
}

TEST_CASE("execute halts at the first failure and counts skipped calls") {
    World w = fixture();
    auto script = parse_script(
        "seq { call pick_up(item=\"bucket\") call move(to=\"well\") call wait() call wait() }");
    auto result = execute_script(script, w, "ann");
    CHECK_FALSE(result.success);
    REQUIRE(result.outcomes.size() == 2);
    CHECK(result.outcomes[0].success);
    CHECK_FALSE(result.outcomes[1].success);
    CHECK(result.skipped_calls == 2);
    // The successful prefix was applied for real.
    CHECK(w.entity("bucket").holder == "ann");
    CHECK(w.clock() == 1);
}

TEST_CASE("execute takes the branch that holds at execution time") {
    World w = fixture();
    auto script = parse_script(
        "seq {"
        "  if has(item=\"bucket\") { call drop(item=\"bucket\") }"
        "  else { call pick_up(item=\"bucket\") }"
        "  if has(item=\"bucket\") { call say(text=\"got it\") }"
        "}");
    auto result = execute_script(script, w, "ann");
    CHECK(result.success);
    REQUIRE(result.outcomes.size() == 2);
    CHECK(result.outcomes[0].api == "pick_up");  // else branch ran first
    CHECK(result.outcomes[1].api == "say");      // then the condition held
    CHECK(result.outcomes[1].args.at("text") == "got it");
}

TEST_CASE("repeat bodies execute the literal number of times") {
    World w = fixture();
    auto script = parse_script("seq { repeat 5 { call wait() } }");
    auto result = execute_script(script, w, "ann");
    CHECK(result.success);
    CHECK(result.outcomes.size() == 5);
    CHECK(w.clock() == 5);

    World w2 = fixture();
    auto zero = execute_script(parse_script("seq { repeat 0 { call wait() } }"), w2, "ann");
    CHECK(zero.success);
    CHECK(zero.outcomes.empty());
    CHECK(w2.clock() == 0);
}

TEST_CASE("skipped accounting agrees with an independent call counter") {
    World w = fixture();
    auto script = parse_script(
        "seq { repeat 4 { call wait() } call move(to=\"castle_nowhere\") repeat 3 { call wait() } }");
    // "castle_nowhere" passes schema (any string) but fails at execution.
    CHECK(oracle_calls(script) == 8);
    auto result = execute_script(script, w, "ann");
    CHECK_FALSE(result.success);
    CHECK(result.outcomes.size() == 5);  // 4 waits plus the failing move
    CHECK(result.skipped_calls == oracle_calls(script) - 5);
}
