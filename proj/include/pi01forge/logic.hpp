#pragma once

#include "pi01forge/numeric.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pi01forge::logic {

// Terms of first-order arithmetic over {+, *, 0, 1}.
enum class TermKind { Variable, Zero, One, Plus, Times };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
    TermKind kind;
    int var = -1;   // Variable
    TermPtr lhs;    // Plus/Times
    TermPtr rhs;
};

TermPtr t_var(int id);
TermPtr t_zero();
TermPtr t_one();
TermPtr t_plus(TermPtr a, TermPtr b);
TermPtr t_times(TermPtr a, TermPtr b);
TermPtr t_nat(std::uint64_t n); // 0, 1, 1+1, (1+1)+1, ... as a left chain

// Formulas over atomic =, < with connectives and (bounded) quantifiers.  Bounded
// quantifier semantics are strict: (forall y < t) ranges over y = 0, ..., t-1.
enum class FormulaKind {
    Eq, Lt, Not, And, Or, Implies,
    Forall, Exists, BoundedForall, BoundedExists
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    FormulaKind kind;
    TermPtr a, b;     // Eq/Lt operands
    FormulaPtr f, g;  // Not/quantifiers use f; binary connectives use f, g
    int var = -1;     // quantifier binder
    TermPtr bound;    // bounded quantifier upper bound (exclusive)
};

FormulaPtr f_eq(TermPtr a, TermPtr b);
FormulaPtr f_lt(TermPtr a, TermPtr b);
FormulaPtr f_not(FormulaPtr f);
FormulaPtr f_and(FormulaPtr f, FormulaPtr g);
FormulaPtr f_or(FormulaPtr f, FormulaPtr g);
FormulaPtr f_implies(FormulaPtr f, FormulaPtr g);
FormulaPtr f_forall(int var, FormulaPtr body);
FormulaPtr f_exists(int var, FormulaPtr body);
FormulaPtr f_bounded_forall(int var, TermPtr bound, FormulaPtr body);
FormulaPtr f_bounded_exists(int var, TermPtr bound, FormulaPtr body);

bool equal_term(const TermPtr& a, const TermPtr& b);
bool equal_formula(const FormulaPtr& a, const FormulaPtr& b);

// A universal sentence: (forall v_0)...(forall v_{m-1}) matrix, where the matrix
// contains only bounded quantifiers and its free variables are exactly the prefix.
struct Pi01Sentence {
    std::vector<int> prefix; // binder ids, outermost first
    FormulaPtr matrix;
    std::size_t arity() const { return prefix.size(); }
};

struct GoedelCode {
    Int value;
    int scheme_version = 1;
};

// Parser accepts ASCII keywords (forall/exists, !, &, |, ->) and the UTF-8 symbols
// the canonical printer emits.  Errors: NotWellFormed.
FormulaPtr parse_formula(const std::string& src);

// Canonical rendering: binders renamed x, x1, x2, ... in order of appearance;
// every quantifier body parenthesized; binary connectives fully parenthesized;
// term parentheses minimal under * > + with left association.
std::string print_canonical(const FormulaPtr& f);
std::string print_canonical(const Pi01Sentence& s);

// Splits a leading unbounded-universal prefix and verifies the rest is Delta-0.
// Errors: NotPi01.
Pi01Sentence classify_pi01(const FormulaPtr& f);
FormulaPtr sentence_formula(const Pi01Sentence& s); // rebuilds the prefixed formula

// Goedel numbering: canonical symbol sequence s_1..s_k packed as
// prod_i prime_i^{s_i}.  Errors: NotACode (bad packing), NotWellFormed (symbols
// do not parse).
GoedelCode encode(const Pi01Sentence& s);
FormulaPtr decode(const GoedelCode& code);
std::vector<int> canonical_symbols(const Pi01Sentence& s); // symbol numbers

// Evaluation of Delta-0 formulas/terms over the naturals.  env[i] is the value of
// variable i; an unset slot hit during evaluation raises UnassignedVariable.
using Env = std::vector<std::optional<Int>>;
Int eval_term(const TermPtr& t, const Env& env);
bool eval_delta0(const FormulaPtr& f, const Env& env);

// j-th element of N^arity in the iterated-pairing order (low coordinate fastest).
std::vector<Int> enumerate_tuple(std::size_t arity, const Int& index);

struct PrefixCheck {
    bool all_true = true;
    std::optional<Int> first_false; // least tuple index violating the matrix
};
// Evaluates the matrix on tuples 0..upto (inclusive); stops at the first failure.
PrefixCheck check_prefix(const Pi01Sentence& s, const Int& upto);

// sigma(n) <= H_n + exp(H_n) * ln(H_n), decided with exact sigma/H_n and interval
// enclosures of exp/ln.  Verdict Undetermined only if allow_undetermined; otherwise
// an unresolved comparison at the term cap raises PrecisionExhausted.
enum class Verdict { Holds, Fails, Undetermined };

struct DivisorBoundReport {
    Int n;
    Int sigma;
    Rat h_n;
    RatInterval rhs;
    Verdict verdict = Verdict::Undetermined;
    unsigned terms_used = 0;
};

DivisorBoundReport lagarias_rh_term(std::uint64_t n, unsigned max_terms = 1 << 14,
                                    bool allow_undetermined = false);

} // namespace pi01forge::logic
