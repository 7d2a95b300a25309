#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "larp/errors.hpp"

namespace larp::logicql {

// Terms are function-free: constants (lowercase identifier, quoted string, or
// integer) and variables (uppercase-initial identifier).
struct Term {
    enum class Kind { constant_ident, constant_string, constant_int, variable };
    Kind kind = Kind::constant_ident;
    std::string text;  // identifier / string contents / decimal digits / var name

    bool is_variable() const { return kind == Kind::variable; }
    bool operator==(const Term&) const = default;
    auto operator<=>(const Term&) const = default;
};

struct Atom {
    std::string predicate;
    std::vector<Term> args;

    bool is_ground() const;
    bool operator==(const Atom&) const = default;
    auto operator<=>(const Atom&) const = default;
};

// `p > 0 && p < 1` facts are probabilistic; probability is only legal on
// facts (empty body) and facts must be ground.
struct Clause {
    Atom head;
    std::vector<Atom> body;
    double probability = 1.0;
    bool probabilistic = false;

    bool is_fact() const { return body.empty(); }
    bool operator==(const Clause&) const = default;
};

struct QueryResult {
    std::map<std::string, Term> bindings;
    double probability = 1.0;
};

std::vector<Clause> parse_program(const std::string& text);
Atom parse_query(const std::string& text);

std::string pretty_print(const Term& t);
std::string pretty_print(const Atom& a);
std::string pretty_print(const Clause& c);
std::string pretty_print(const std::vector<Clause>& program);

class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::vector<Clause> clauses);

    // Appends unless an exact duplicate already exists. Throws ArityConflict
    // when the predicate was previously used with a different arity.
    void assert_clause(const Clause& clause);

    // Removes every fact whose head equals the given ground atom exactly.
    // Absent facts are a no-op.
    void retract_fact(const Atom& atom);

    const std::vector<Clause>& clauses() const { return clauses_; }

    // Exact evaluation: enumerates all truth assignments of the probabilistic
    // facts, runs a bottom-up fixpoint of the deterministic program in each
    // world, and sums world weights per satisfying binding. Results sorted by
    // probability desc, then lexicographic bindings.
    std::vector<QueryResult> evaluate(const Atom& query, int max_probabilistic_facts = 20) const;

private:
    void check_arity(const Atom& atom);

    std::vector<Clause> clauses_;
    std::map<std::string, size_t> arities_;
};

}  // namespace larp::logicql
