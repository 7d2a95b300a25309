#include "larp/logicql.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace larp::logicql {

bool Atom::is_ground() const {
    return std::none_of(args.begin(), args.end(), [](const Term& t) { return t.is_variable(); });
}

namespace {

struct Token {
    enum class Kind {
        ident_lower, ident_upper, integer, real, string,
        lparen, rparen, comma, dot, question, implies, prob_sep, end
    };
    Kind kind;
    std::string text;
    int line;
    int column;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws_and_comments();
        int line = line_, col = col_;
        if (pos_ >= src_.size()) return {Token::Kind::end, "", line, col};
        char c = src_[pos_];
        if (c == '(') { advance(); return {Token::Kind::lparen, "(", line, col}; }
        if (c == ')') { advance(); return {Token::Kind::rparen, ")", line, col}; }
        if (c == ',') { advance(); return {Token::Kind::comma, ",", line, col}; }
        if (c == '?') { advance(); return {Token::Kind::question, "?", line, col}; }
        if (c == ':') {
            if (peek(1) == '-') { advance(); advance(); return {Token::Kind::implies, ":-", line, col}; }
            if (peek(1) == ':') { advance(); advance(); return {Token::Kind::prob_sep, "::", line, col}; }
            throw ParseError("unexpected ':'", line, col);
        }
        if (c == '"') return lex_string(line, col);
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(line, col);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(line, col);
        if (c == '.') { advance(); return {Token::Kind::dot, ".", line, col}; }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }

private:
    char peek(size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }
    void advance() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
            ++pos_;
        }
    }
    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) { advance(); continue; }
            if (c == '%') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                continue;
            }
            break;
        }
    }
    Token lex_string(int line, int col) {
        advance();  // opening quote
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != '"') {
            if (src_[pos_] == '\n') throw ParseError("unterminated string", line, col);
            out.push_back(src_[pos_]);
            advance();
        }
        if (pos_ >= src_.size()) throw ParseError("unterminated string", line, col);
        advance();  // closing quote
        return {Token::Kind::string, out, line, col};
    }
    Token lex_number(int line, int col) {
        std::string out;
        while (std::isdigit(static_cast<unsigned char>(peek()))) { out.push_back(peek()); advance(); }
        // A dot only belongs to the number when followed by a digit; a bare
        // dot terminates the clause.
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            out.push_back('.');
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) { out.push_back(peek()); advance(); }
            return {Token::Kind::real, out, line, col};
        }
        return {Token::Kind::integer, out, line, col};
    }
    Token lex_ident(int line, int col) {
        std::string out;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
            out.push_back(peek());
            advance();
        }
        bool upper = std::isupper(static_cast<unsigned char>(out[0])) || out[0] == '_';
        return {upper ? Token::Kind::ident_upper : Token::Kind::ident_lower, out, line, col};
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lexer_(src) { cur_ = lexer_.next(); }

    std::vector<Clause> program() {
        std::vector<Clause> out;
        while (cur_.kind != Token::Kind::end) out.push_back(clause());
        return out;
    }

    Atom query() {
        Atom a = atom();
        expect(Token::Kind::question, "'?'");
        expect(Token::Kind::end, "end of input");
        return a;
    }

private:
    Clause clause() {
        Clause c;
        if (cur_.kind == Token::Kind::real || cur_.kind == Token::Kind::integer) {
            // Only a probability annotation may start a clause with a number.
            double p = std::stod(cur_.text);
            Token num = cur_;
            consume();
            expect(Token::Kind::prob_sep, "'::'");
            if (!(p > 0.0 && p <= 1.0))
                throw ParseError("probability must be in (0,1]", num.line, num.column);
            c.probability = p;
            c.probabilistic = true;
        }
        c.head = atom();
        if (cur_.kind == Token::Kind::implies) {
            if (c.probabilistic)
                throw ParseError("probabilistic clauses must be facts", cur_.line, cur_.column);
            consume();
            c.body.push_back(atom());
            while (cur_.kind == Token::Kind::comma) {
                consume();
                c.body.push_back(atom());
            }
        }
        Token dot = cur_;
        expect(Token::Kind::dot, "'.'");
        if (c.is_fact() && !c.head.is_ground())
            throw ParseError("facts must be ground", dot.line, dot.column);
        return c;
    }

    Atom atom() {
        Token name = cur_;
        expect(Token::Kind::ident_lower, "predicate name");
        Atom a;
        a.predicate = name.text;
        if (cur_.kind == Token::Kind::lparen) {
            consume();
            a.args.push_back(term());
            while (cur_.kind == Token::Kind::comma) {
                consume();
                a.args.push_back(term());
            }
            expect(Token::Kind::rparen, "')'");
        }
        return a;
    }

    Term term() {
        Token t = cur_;
        switch (t.kind) {
            case Token::Kind::ident_lower: consume(); return {Term::Kind::constant_ident, t.text};
            case Token::Kind::ident_upper: consume(); return {Term::Kind::variable, t.text};
            case Token::Kind::integer: consume(); return {Term::Kind::constant_int, t.text};
            case Token::Kind::string: consume(); return {Term::Kind::constant_string, t.text};
            default:
                throw ParseError("expected term, got '" + t.text + "'", t.line, t.column);
        }
    }

    void consume() { cur_ = lexer_.next(); }
    void expect(Token::Kind kind, const std::string& what) {
        if (cur_.kind != kind)
            throw ParseError("expected " + what + ", got '" + cur_.text + "'", cur_.line,
                             cur_.column);
        consume();
    }

    Lexer lexer_;
    Token cur_;
};

using FactSet = std::set<Atom>;
using Substitution = std::map<std::string, Term>;

bool match_atom(const Atom& pattern, const Atom& fact, Substitution& subst) {
    if (pattern.predicate != fact.predicate || pattern.args.size() != fact.args.size())
        return false;
    Substitution local = subst;
    for (size_t i = 0; i < pattern.args.size(); ++i) {
        const Term& p = pattern.args[i];
        const Term& f = fact.args[i];
        if (p.is_variable()) {
            auto it = local.find(p.text);
            if (it == local.end()) local.emplace(p.text, f);
            else if (!(it->second == f)) return false;
        } else if (!(p == f)) {
            return false;
        }
    }
    subst = std::move(local);
    return true;
}

Atom apply_subst(const Atom& a, const Substitution& subst) {
    Atom out = a;
    for (Term& t : out.args) {
        if (t.is_variable()) {
            auto it = subst.find(t.text);
            if (it != subst.end()) t = it->second;
        }
    }
    return out;
}

// Matches body atoms left to right against the fact set, collecting every
// consistent substitution.
void join_body(const std::vector<Atom>& body, size_t idx, const FactSet& facts,
               Substitution subst, std::vector<Substitution>& out) {
    if (idx == body.size()) {
        out.push_back(std::move(subst));
        return;
    }
    for (const Atom& fact : facts) {
        Substitution next = subst;
        if (match_atom(body[idx], fact, next)) {
            join_body(body, idx + 1, facts, std::move(next), out);
        }
    }
}

// Bottom-up least fixpoint of a deterministic program.
FactSet fixpoint(const std::vector<const Clause*>& rules, FactSet facts) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Clause* rule : rules) {
            std::vector<Substitution> substs;
            join_body(rule->body, 0, facts, {}, substs);
            for (const Substitution& s : substs) {
                Atom derived = apply_subst(rule->head, s);
                if (derived.is_ground() && facts.insert(derived).second) changed = true;
            }
        }
    }
    return facts;
}

}  // namespace

std::vector<Clause> parse_program(const std::string& text) {
    return Parser(text).program();
}

Atom parse_query(const std::string& text) {
    return Parser(text).query();
}

std::string pretty_print(const Term& t) {
    switch (t.kind) {
        case Term::Kind::constant_string: return "\"" + t.text + "\"";
        default: return t.text;
    }
}

std::string pretty_print(const Atom& a) {
    std::string out = a.predicate;
    if (!a.args.empty()) {
        out += "(";
        for (size_t i = 0; i < a.args.size(); ++i) {
            if (i) out += ",";
            out += pretty_print(a.args[i]);
        }
        out += ")";
    }
    return out;
}

std::string pretty_print(const Clause& c) {
    std::string out;
    if (c.probabilistic) {
        std::string p = std::to_string(c.probability);
        while (p.size() > 3 && p.back() == '0') p.pop_back();
        out += p + "::";
    }
    out += pretty_print(c.head);
    if (!c.body.empty()) {
        out += " :- ";
        for (size_t i = 0; i < c.body.size(); ++i) {
            if (i) out += ", ";
            out += pretty_print(c.body[i]);
        }
    }
    out += ".";
    return out;
}

std::string pretty_print(const std::vector<Clause>& program) {
    std::string out;
    for (const Clause& c : program) {
        out += pretty_print(c);
        out += "\n";
    }
    return out;
}

KnowledgeBase::KnowledgeBase(std::vector<Clause> clauses) {
    for (const Clause& c : clauses) assert_clause(c);
}

void KnowledgeBase::check_arity(const Atom& atom) {
    auto [it, inserted] = arities_.try_emplace(atom.predicate, atom.args.size());
    if (!inserted && it->second != atom.args.size())
        throw ArityConflict("predicate '" + atom.predicate + "' used with arity " +
                            std::to_string(atom.args.size()) + " but previously " +
                            std::to_string(it->second));
}

void KnowledgeBase::assert_clause(const Clause& clause) {
    check_arity(clause.head);
    for (const Atom& a : clause.body) check_arity(a);
    if (std::find(clauses_.begin(), clauses_.end(), clause) != clauses_.end()) return;
    clauses_.push_back(clause);
}

void KnowledgeBase::retract_fact(const Atom& atom) {
    std::erase_if(clauses_, [&](const Clause& c) { return c.is_fact() && c.head == atom; });
}

std::vector<QueryResult> KnowledgeBase::evaluate(const Atom& query,
                                                 int max_probabilistic_facts) const {
    std::vector<const Clause*> rules;
    std::vector<const Clause*> det_facts;
    std::vector<const Clause*> prob_facts;
    for (const Clause& c : clauses_) {
        if (c.probabilistic) prob_facts.push_back(&c);
        else if (c.is_fact()) det_facts.push_back(&c);
        else rules.push_back(&c);
    }
    const size_t p = prob_facts.size();
    if (static_cast<int>(p) > max_probabilistic_facts)
        throw TooManyProbabilisticFacts("knowledge base has " + std::to_string(p) +
                                        " probabilistic facts; limit is " +
                                        std::to_string(max_probabilistic_facts));

    std::map<Substitution, double> accum;
    for (std::uint64_t world = 0; world < (1ULL << p); ++world) {
        double weight = 1.0;
        FactSet facts;
        for (const Clause* f : det_facts) facts.insert(f->head);
        for (size_t i = 0; i < p; ++i) {
            if (world & (1ULL << i)) {
                weight *= prob_facts[i]->probability;
                facts.insert(prob_facts[i]->head);
            } else {
                weight *= 1.0 - prob_facts[i]->probability;
            }
        }
        if (weight == 0.0) continue;
        FactSet model = fixpoint(rules, std::move(facts));

        std::set<Substitution> seen;
        for (const Atom& fact : model) {
            Substitution subst;
            if (match_atom(query, fact, subst)) seen.insert(std::move(subst));
        }
        for (const Substitution& s : seen) accum[s] += weight;
    }

    std::vector<QueryResult> results;
    results.reserve(accum.size());
    for (auto& [bindings, prob] : accum) results.push_back({bindings, prob});
    std::stable_sort(results.begin(), results.end(), [](const QueryResult& a, const QueryResult& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.bindings < b.bindings;
    });
    return results;
}

}  // namespace larp::logicql
