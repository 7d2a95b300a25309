#include "larp/skill_dsl.hpp"

#include <cctype>

namespace larp {

namespace {

struct Token {
    enum class Kind { ident, integer, string, lbrace, rbrace, lparen, rparen, comma, eq, end };
    Kind kind;
    std::string text;
    int line;
    int column;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
        int line = line_, col = col_;
        if (pos_ >= src_.size()) return {Token::Kind::end, "", line, col};
        char c = src_[pos_];
        switch (c) {
            case '{': advance(); return {Token::Kind::lbrace, "{", line, col};
            case '}': advance(); return {Token::Kind::rbrace, "}", line, col};
            case '(': advance(); return {Token::Kind::lparen, "(", line, col};
            case ')': advance(); return {Token::Kind::rparen, ")", line, col};
            case ',': advance(); return {Token::Kind::comma, ",", line, col};
            case '=': advance(); return {Token::Kind::eq, "=", line, col};
            default: break;
        }
        if (c == '"') {
            advance();
            std::string out;
            while (pos_ < src_.size() && src_[pos_] != '"') {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
                out.push_back(src_[pos_]);
                advance();
            }
            if (pos_ >= src_.size()) throw ParseError("unterminated string", line, col);
            advance();
            return {Token::Kind::string, out, line, col};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::string out;
            if (c == '-') { out.push_back(c); advance(); }
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                out.push_back(src_[pos_]);
                advance();
            }
            return {Token::Kind::integer, out, line, col};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string out;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                out.push_back(src_[pos_]);
                advance();
            }
            return {Token::Kind::ident, out, line, col};
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }

private:
    void advance() {
        if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
        ++pos_;
    }
    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lexer_(src) { cur_ = lexer_.next(); }

    SkillScript script() {
        expect_ident("seq");
        SkillScript root;
        root.kind = ScriptNode::Kind::seq;
        root.children = block(1);
        expect(Token::Kind::end, "end of script");
        if (call_count_ > kMaxScriptCalls)
            throw BoundsExceeded("script has " + std::to_string(call_count_) +
                                 " calls; limit is " + std::to_string(kMaxScriptCalls));
        return root;
    }

private:
    std::vector<ScriptNode> block(int depth) {
        if (depth > kMaxScriptDepth)
            throw BoundsExceeded("nesting depth exceeds " + std::to_string(kMaxScriptDepth));
        expect(Token::Kind::lbrace, "'{'");
        std::vector<ScriptNode> out;
        while (cur_.kind != Token::Kind::rbrace) out.push_back(stmt(depth));
        expect(Token::Kind::rbrace, "'}'");
        return out;
    }

    ScriptNode stmt(int depth) {
        Token t = cur_;
        if (t.kind != Token::Kind::ident)
            throw ParseError("expected statement, got '" + t.text + "'", t.line, t.column);
        if (t.text == "call") {
            consume();
            ScriptNode node;
            node.kind = ScriptNode::Kind::call;
            call_like(node);
            ++call_count_;
            return node;
        }
        if (t.text == "if") {
            consume();
            ScriptNode node;
            node.kind = ScriptNode::Kind::branch;
            call_like(node);
            node.children = block(depth + 1);
            if (cur_.kind == Token::Kind::ident && cur_.text == "else") {
                consume();
                node.else_children = block(depth + 1);
            }
            return node;
        }
        if (t.text == "repeat") {
            consume();
            Token count = cur_;
            if (count.kind != Token::Kind::integer)
                throw ParseError("repeat count must be a literal integer, got '" + count.text + "'",
                                 count.line, count.column);
            consume();
            ScriptNode node;
            node.kind = ScriptNode::Kind::repeat;
            node.repeat_count = std::stoi(count.text);
            if (node.repeat_count < 0 || node.repeat_count > kMaxRepeatCount)
                throw BoundsExceeded("repeat count " + count.text + " outside [0," +
                                     std::to_string(kMaxRepeatCount) + "]");
            node.children = block(depth + 1);
            return node;
        }
        throw ParseError("expected 'call', 'if' or 'repeat', got '" + t.text + "'", t.line,
                         t.column);
    }

    void call_like(ScriptNode& node) {
        Token name = cur_;
        expect(Token::Kind::ident, "api name");
        node.api = name.text;
        expect(Token::Kind::lparen, "'('");
        if (cur_.kind != Token::Kind::rparen) {
            node.args.push_back(arg());
            while (cur_.kind == Token::Kind::comma) {
                consume();
                node.args.push_back(arg());
            }
        }
        expect(Token::Kind::rparen, "')'");
    }

    ScriptArg arg() {
        Token name = cur_;
        expect(Token::Kind::ident, "argument name");
        expect(Token::Kind::eq, "'='");
        Token value = cur_;
        if (value.kind == Token::Kind::string) {
            consume();
            return {name.text, value.text, false};
        }
        if (value.kind == Token::Kind::integer) {
            consume();
            return {name.text, value.text, true};
        }
        throw ParseError("argument value must be a string or integer literal", value.line,
                         value.column);
    }

    void consume() { cur_ = lexer_.next(); }
    void expect(Token::Kind kind, const std::string& what) {
        if (cur_.kind != kind)
            throw ParseError("expected " + what + ", got '" + cur_.text + "'", cur_.line,
                             cur_.column);
        consume();
    }
    void expect_ident(const std::string& word) {
        if (cur_.kind != Token::Kind::ident || cur_.text != word)
            throw ParseError("expected '" + word + "', got '" + cur_.text + "'", cur_.line,
                             cur_.column);
        consume();
    }

    Lexer lexer_;
    Token cur_;
    int call_count_ = 0;
};

std::string print_args(const ScriptNode& node) {
    std::string out = node.api + "(";
    for (size_t i = 0; i < node.args.size(); ++i) {
        if (i) out += ", ";
        out += node.args[i].name + "=";
        if (node.args[i].is_integer) out += node.args[i].value;
        else out += "\"" + node.args[i].value + "\"";
    }
    out += ")";
    return out;
}

void print_node(const ScriptNode& node, std::string& out, int indent) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    switch (node.kind) {
        case ScriptNode::Kind::seq:
            out += pad + "seq {\n";
            for (const ScriptNode& c : node.children) print_node(c, out, indent + 1);
            out += pad + "}\n";
            break;
        case ScriptNode::Kind::call:
            out += pad + "call " + print_args(node) + "\n";
            break;
        case ScriptNode::Kind::branch:
            out += pad + "if " + print_args(node) + " {\n";
            for (const ScriptNode& c : node.children) print_node(c, out, indent + 1);
            out += pad + "}";
            if (!node.else_children.empty()) {
                out += " else {\n";
                for (const ScriptNode& c : node.else_children) print_node(c, out, indent + 1);
                out += pad + "}";
            }
            out += "\n";
            break;
        case ScriptNode::Kind::repeat:
            out += pad + "repeat " + std::to_string(node.repeat_count) + " {\n";
            for (const ScriptNode& c : node.children) print_node(c, out, indent + 1);
            out += pad + "}\n";
            break;
    }
}

const ApiSpec* find_spec(const std::vector<ApiSpec>& specs, const std::string& name) {
    for (const ApiSpec& s : specs)
        if (s.name == name) return &s;
    return nullptr;
}

bool check_schema(const ScriptNode& node, const std::vector<ApiSpec>& specs, std::string& message,
                  bool is_condition) {
    if (node.kind == ScriptNode::Kind::call || node.kind == ScriptNode::Kind::branch) {
        const ApiSpec* spec = find_spec(specs, node.api);
        if (!spec) {
            message = "unknown api '" + node.api + "'";
            return false;
        }
        if (is_condition || node.kind == ScriptNode::Kind::branch) {
            if (spec->mutating) {
                message = "condition '" + node.api + "' must be a predicate api";
                return false;
            }
        }
        if (node.args.size() != spec->params.size()) {
            message = "'" + node.api + "' expects " + std::to_string(spec->params.size()) +
                      " argument(s), got " + std::to_string(node.args.size());
            return false;
        }
        for (size_t i = 0; i < node.args.size(); ++i) {
            const ApiParam& p = spec->params[i];
            const ScriptArg& a = node.args[i];
            if (a.name != p.name) {
                message = "'" + node.api + "' argument " + std::to_string(i + 1) + " must be '" +
                          p.name + "', got '" + a.name + "'";
                return false;
            }
            const bool want_int = p.type == ParamType::integer;
            if (want_int != a.is_integer) {
                message = "'" + node.api + "' argument '" + a.name + "' has wrong type";
                return false;
            }
        }
    }
    for (const ScriptNode& c : node.children)
        if (!check_schema(c, specs, message, false)) return false;
    for (const ScriptNode& c : node.else_children)
        if (!check_schema(c, specs, message, false)) return false;
    return true;
}

std::map<std::string, std::string> to_arg_map(const ScriptNode& node) {
    std::map<std::string, std::string> out;
    for (const ScriptArg& a : node.args) out[a.name] = a.value;
    return out;
}

int count_calls(const ScriptNode& node) {
    int n = node.kind == ScriptNode::Kind::call ? 1 : 0;
    if (node.kind == ScriptNode::Kind::repeat) {
        int body = 0;
        for (const ScriptNode& c : node.children) body += count_calls(c);
        return body * node.repeat_count;
    }
    for (const ScriptNode& c : node.children) n += count_calls(c);
    for (const ScriptNode& c : node.else_children) n += count_calls(c);
    return n;
}

bool run_node(const ScriptNode& node, World& world, const std::string& character_id,
              ExecutionResult& result) {
    switch (node.kind) {
        case ScriptNode::Kind::seq: {
            for (const ScriptNode& c : node.children)
                if (!run_node(c, world, character_id, result)) return false;
            return true;
        }
        case ScriptNode::Kind::call: {
            ActionOutcome outcome = world.step(character_id, node.api, to_arg_map(node));
            result.outcomes.push_back(outcome);
            if (!outcome.success) {
                result.success = false;
                return false;
            }
            return true;
        }
        case ScriptNode::Kind::branch: {
            const bool holds = world.predicate(character_id, node.api, to_arg_map(node));
            const auto& branch = holds ? node.children : node.else_children;
            for (const ScriptNode& c : branch)
                if (!run_node(c, world, character_id, result)) return false;
            return true;
        }
        case ScriptNode::Kind::repeat: {
            for (int i = 0; i < node.repeat_count; ++i)
                for (const ScriptNode& c : node.children)
                    if (!run_node(c, world, character_id, result)) return false;
            return true;
        }
    }
    return true;
}

}  // namespace

SkillScript parse_script(const std::string& text) { return Parser(text).script(); }

std::string pretty_print_script(const SkillScript& script) {
    std::string out;
    print_node(script, out, 0);
    return out;
}

VerificationReport verify(const SkillScript& script, const std::vector<ApiSpec>& api_specs,
                          const World& world_snapshot, const std::string& character_id) {
    VerificationReport report;
    report.parse_ok = true;
    std::string message;
    if (!check_schema(script, api_specs, message, false)) {
        report.failure_stage = "schema";
        report.message = message;
        return report;
    }
    report.schema_ok = true;

    World clone = world_snapshot.snapshot();
    ExecutionResult dry = execute_script(script, clone, character_id);
    if (!dry.success) {
        report.failure_stage = "dry_run";
        const ActionOutcome& bad = dry.outcomes.back();
        report.message = "dry-run failed at call '" + bad.api + "': " + bad.message;
        return report;
    }
    report.dry_run_ok = true;
    return report;
}

VerificationReport verify_text(const std::string& text, const std::vector<ApiSpec>& api_specs,
                               const World& world_snapshot, const std::string& character_id) {
    SkillScript script;
    try {
        script = parse_script(text);
    } catch (const Error& e) {
        VerificationReport report;
        report.failure_stage = "parse";
        report.message = e.what();
        return report;
    }
    return verify(script, api_specs, world_snapshot, character_id);
}

ExecutionResult execute_script(const SkillScript& script, World& world,
                               const std::string& character_id) {
    ExecutionResult result;
    run_node(script, world, character_id, result);
    if (!result.success) {
        // Remaining statically reachable calls were never attempted.
        int attempted = static_cast<int>(result.outcomes.size());
        result.skipped_calls = std::max(0, count_calls(script) - attempted);
    }
    return result;
}

}  // namespace larp
