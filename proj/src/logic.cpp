#include "pi01forge/logic.hpp"
#include "pi01forge/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>

namespace pi01forge::logic {

// ---------------------------------------------------------------------------
// AST construction and structural equality
// ---------------------------------------------------------------------------

namespace {
TermPtr make_term(Term t) { return std::make_shared<const Term>(std::move(t)); }
FormulaPtr make_formula(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
} // namespace

TermPtr t_var(int id) { return make_term({TermKind::Variable, id, nullptr, nullptr}); }
TermPtr t_zero() { return make_term({TermKind::Zero, -1, nullptr, nullptr}); }
TermPtr t_one() { return make_term({TermKind::One, -1, nullptr, nullptr}); }
TermPtr t_plus(TermPtr a, TermPtr b) {
    return make_term({TermKind::Plus, -1, std::move(a), std::move(b)});
}
TermPtr t_times(TermPtr a, TermPtr b) {
    return make_term({TermKind::Times, -1, std::move(a), std::move(b)});
}

TermPtr t_nat(std::uint64_t n) {
    if (n == 0) return t_zero();
    TermPtr acc = t_one();
    for (std::uint64_t i = 1; i < n; ++i) acc = t_plus(std::move(acc), t_one());
    return acc;
}

FormulaPtr f_eq(TermPtr a, TermPtr b) {
    Formula f;
    f.kind = FormulaKind::Eq;
    f.a = std::move(a);
    f.b = std::move(b);
    return make_formula(std::move(f));
}
FormulaPtr f_lt(TermPtr a, TermPtr b) {
    Formula f;
    f.kind = FormulaKind::Lt;
    f.a = std::move(a);
    f.b = std::move(b);
    return make_formula(std::move(f));
}
FormulaPtr f_not(FormulaPtr inner) {
    Formula f;
    f.kind = FormulaKind::Not;
    f.f = std::move(inner);
    return make_formula(std::move(f));
}
namespace {
FormulaPtr binary(FormulaKind k, FormulaPtr a, FormulaPtr b) {
    Formula f;
    f.kind = k;
    f.f = std::move(a);
    f.g = std::move(b);
    return make_formula(std::move(f));
}
} // namespace
FormulaPtr f_and(FormulaPtr f, FormulaPtr g) { return binary(FormulaKind::And, std::move(f), std::move(g)); }
FormulaPtr f_or(FormulaPtr f, FormulaPtr g) { return binary(FormulaKind::Or, std::move(f), std::move(g)); }
FormulaPtr f_implies(FormulaPtr f, FormulaPtr g) { return binary(FormulaKind::Implies, std::move(f), std::move(g)); }

FormulaPtr f_forall(int var, FormulaPtr body) {
    Formula f;
    f.kind = FormulaKind::Forall;
    f.var = var;
    f.f = std::move(body);
    return make_formula(std::move(f));
}
FormulaPtr f_exists(int var, FormulaPtr body) {
    Formula f;
    f.kind = FormulaKind::Exists;
    f.var = var;
    f.f = std::move(body);
    return make_formula(std::move(f));
}
FormulaPtr f_bounded_forall(int var, TermPtr bound, FormulaPtr body) {
    Formula f;
    f.kind = FormulaKind::BoundedForall;
    f.var = var;
    f.bound = std::move(bound);
    f.f = std::move(body);
    return make_formula(std::move(f));
}
FormulaPtr f_bounded_exists(int var, TermPtr bound, FormulaPtr body) {
    Formula f;
    f.kind = FormulaKind::BoundedExists;
    f.var = var;
    f.bound = std::move(bound);
    f.f = std::move(body);
    return make_formula(std::move(f));
}

bool equal_term(const TermPtr& a, const TermPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case TermKind::Variable: return a->var == b->var;
    case TermKind::Zero:
    case TermKind::One: return true;
    case TermKind::Plus:
    case TermKind::Times:
        return equal_term(a->lhs, b->lhs) && equal_term(a->rhs, b->rhs);
    }
    return false;
}

bool equal_formula(const FormulaPtr& a, const FormulaPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case FormulaKind::Eq:
    case FormulaKind::Lt:
        return equal_term(a->a, b->a) && equal_term(a->b, b->b);
    case FormulaKind::Not:
        return equal_formula(a->f, b->f);
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Implies:
        return equal_formula(a->f, b->f) && equal_formula(a->g, b->g);
    case FormulaKind::Forall:
    case FormulaKind::Exists:
        return a->var == b->var && equal_formula(a->f, b->f);
    case FormulaKind::BoundedForall:
    case FormulaKind::BoundedExists:
        return a->var == b->var && equal_term(a->bound, b->bound) &&
               equal_formula(a->f, b->f);
    }
    return false;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
    Forall, Exists, LParen, RParen, Eq, Lt, Plus, Times,
    Not, And, Or, Implies, Comma, Number, Ident, End
};

struct Token {
    Tok kind;
    std::string text;
    std::uint64_t number = 0;
    std::size_t pos = 0;
};

[[noreturn]] void bad_syntax(const std::string& msg, std::size_t pos) {
    fail("NotWellFormed", msg + " (at offset " + std::to_string(pos) + ")");
}

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto starts = [&](const char* s) {
        std::size_t len = std::char_traits<char>::length(s);
        return src.compare(i, len, s) == 0;
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') { ++i; continue; }
        std::size_t start = i;
        if (starts("\xE2\x88\x80")) { out.push_back({Tok::Forall, "forall", 0, start}); i += 3; continue; }
        if (starts("\xE2\x88\x83")) { out.push_back({Tok::Exists, "exists", 0, start}); i += 3; continue; }
        if (starts("\xC2\xAC"))     { out.push_back({Tok::Not, "!", 0, start}); i += 2; continue; }
        if (starts("\xE2\x88\xA7")) { out.push_back({Tok::And, "&", 0, start}); i += 3; continue; }
        if (starts("\xE2\x88\xA8")) { out.push_back({Tok::Or, "|", 0, start}); i += 3; continue; }
        if (starts("\xE2\x86\x92")) { out.push_back({Tok::Implies, "->", 0, start}); i += 3; continue; }
        if (starts("->")) { out.push_back({Tok::Implies, "->", 0, start}); i += 2; continue; }
        if (c == '(') { out.push_back({Tok::LParen, "(", 0, start}); ++i; continue; }
        if (c == ')') { out.push_back({Tok::RParen, ")", 0, start}); ++i; continue; }
        if (c == '=') { out.push_back({Tok::Eq, "=", 0, start}); ++i; continue; }
        if (c == '<') { out.push_back({Tok::Lt, "<", 0, start}); ++i; continue; }
        if (c == '+') { out.push_back({Tok::Plus, "+", 0, start}); ++i; continue; }
        if (c == '*') { out.push_back({Tok::Times, "*", 0, start}); ++i; continue; }
        if (c == ',') { out.push_back({Tok::Comma, ",", 0, start}); ++i; continue; }
        if (c == '!') { out.push_back({Tok::Not, "!", 0, start}); ++i; continue; }
        if (c == '&') { ++i; if (i < src.size() && src[i] == '&') ++i; out.push_back({Tok::And, "&", 0, start}); continue; }
        if (c == '|') { ++i; if (i < src.size() && src[i] == '|') ++i; out.push_back({Tok::Or, "|", 0, start}); continue; }
        if (c >= '0' && c <= '9') {
            std::uint64_t v = 0;
            while (i < src.size() && src[i] >= '0' && src[i] <= '9') {
                if (v > (UINT64_MAX - 9) / 10) bad_syntax("numeral too large", start);
                v = v * 10 + static_cast<std::uint64_t>(src[i] - '0');
                ++i;
            }
            out.push_back({Tok::Number, src.substr(start, i - start), v, start});
            continue;
        }
        auto is_ident_start = [](char ch) {
            return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || ch == '_';
        };
        auto is_ident_char = [&](char ch) {
            return is_ident_start(ch) || (ch >= '0' && ch <= '9');
        };
        if (is_ident_start(c)) {
            while (i < src.size() && is_ident_char(src[i])) ++i;
            std::string word = src.substr(start, i - start);
            if (word == "forall") out.push_back({Tok::Forall, word, 0, start});
            else if (word == "exists") out.push_back({Tok::Exists, word, 0, start});
            else out.push_back({Tok::Ident, word, 0, start});
            continue;
        }
        bad_syntax("unexpected character '" + std::string(1, c) + "'", start);
    }
    out.push_back({Tok::End, "", 0, src.size()});
    return out;
}

// ---------------------------------------------------------------------------
// Parser: recursive descent; quantifiers take maximal scope; '(' is resolved by
// backtracking between bounded-quantifier header, formula group, and term.
// ---------------------------------------------------------------------------

class Parser {
public:
    explicit Parser(const std::string& src) : toks_(lex(src)) {}

    FormulaPtr parse() {
        FormulaPtr f = formula();
        expect(Tok::End, "trailing input after formula");
        return f;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::map<std::string, int>> scopes_;
    int next_id_ = 0;

    const Token& peek() const { return toks_[pos_]; }
    Token take() { return toks_[pos_++]; }
    bool accept(Tok k) {
        if (peek().kind == k) { ++pos_; return true; }
        return false;
    }
    void expect(Tok k, const std::string& what) {
        if (!accept(k)) bad_syntax("expected " + what, peek().pos);
    }

    struct Snapshot {
        std::size_t pos;
        std::size_t scope_depth;
        int next_id;
    };
    Snapshot mark() const { return {pos_, scopes_.size(), next_id_}; }
    void restore(const Snapshot& s) {
        pos_ = s.pos;
        scopes_.resize(s.scope_depth);
        next_id_ = s.next_id;
    }

    int lookup(const std::string& name, std::size_t at) {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto hit = it->find(name);
            if (hit != it->end()) return hit->second;
        }
        bad_syntax("unbound variable '" + name + "'", at);
    }

    int bind(const std::string& name) {
        scopes_.push_back({{name, next_id_}});
        return next_id_++;
    }
    void unbind(std::size_t count) { scopes_.resize(scopes_.size() - count); }

    FormulaPtr formula() { return implies_chain(); }

    FormulaPtr implies_chain() {
        FormulaPtr lhs = or_chain();
        if (accept(Tok::Implies)) return f_implies(std::move(lhs), implies_chain());
        return lhs;
    }

    FormulaPtr or_chain() {
        FormulaPtr acc = and_chain();
        while (accept(Tok::Or)) acc = f_or(std::move(acc), and_chain());
        return acc;
    }

    FormulaPtr and_chain() {
        FormulaPtr acc = unary();
        while (accept(Tok::And)) acc = f_and(std::move(acc), unary());
        return acc;
    }

    FormulaPtr unary() {
        if (accept(Tok::Not)) return f_not(unary());
        if (peek().kind == Tok::Forall || peek().kind == Tok::Exists)
            return quantified(take().kind == Tok::Forall);
        if (peek().kind == Tok::LParen) {
            Snapshot s = mark();
            // (forall v, w < t) header?  Probe consumes tokens, so rewind first.
            bool bounded = bounded_header_ahead();
            restore(s);
            if (bounded) return bounded_quantified();
            // Parenthesized formula?
            ++pos_; // consume '('
            try {
                FormulaPtr inner = formula();
                if (accept(Tok::RParen)) return inner;
            } catch (const Error&) {
                // fall through to term atom
            }
            restore(s);
        }
        return atom();
    }

    bool bounded_header_ahead() {
        if (!accept(Tok::LParen)) return false;
        if (peek().kind != Tok::Forall && peek().kind != Tok::Exists) return false;
        ++pos_;
        if (peek().kind != Tok::Ident) return false;
        ++pos_;
        while (accept(Tok::Comma)) {
            if (peek().kind != Tok::Ident) return false;
            ++pos_;
        }
        return peek().kind == Tok::Lt;
    }

    FormulaPtr quantified(bool universal) {
        std::vector<std::string> names;
        if (peek().kind != Tok::Ident) bad_syntax("expected variable after quantifier", peek().pos);
        names.push_back(take().text);
        while (accept(Tok::Comma)) {
            if (peek().kind != Tok::Ident) bad_syntax("expected variable after ','", peek().pos);
            names.push_back(take().text);
        }
        if (accept(Tok::Lt)) {
            TermPtr bound = sum(); // bound term sees only outer scopes
            return close_binders(names, bound, universal, /*tight=*/false);
        }
        std::vector<int> ids;
        ids.reserve(names.size());
        for (const auto& n : names) ids.push_back(bind(n));
        FormulaPtr body = formula();
        unbind(names.size());
        for (std::size_t k = ids.size(); k-- > 0;) {
            body = universal ? f_forall(ids[k], std::move(body))
                             : f_exists(ids[k], std::move(body));
        }
        return body;
    }

    FormulaPtr bounded_quantified() {
        expect(Tok::LParen, "'('");
        bool universal = take().kind == Tok::Forall;
        std::vector<std::string> names;
        names.push_back(take().text);
        while (accept(Tok::Comma)) names.push_back(take().text);
        expect(Tok::Lt, "'<'");
        TermPtr bound = sum();
        expect(Tok::RParen, "')' closing bounded quantifier");
        // Header form "(Q v < t)(...)" scopes over the next unary formula only,
        // so "(exists d < x)(2*d=x) -> ..." keeps the implication outside.
        return close_binders(names, bound, universal, /*tight=*/true);
    }

    FormulaPtr close_binders(const std::vector<std::string>& names, const TermPtr& bound,
                             bool universal, bool tight) {
        std::vector<int> ids;
        ids.reserve(names.size());
        for (const auto& n : names) ids.push_back(bind(n));
        FormulaPtr body = tight ? unary() : formula();
        unbind(names.size());
        for (std::size_t k = ids.size(); k-- > 0;) {
            body = universal ? f_bounded_forall(ids[k], bound, std::move(body))
                             : f_bounded_exists(ids[k], bound, std::move(body));
        }
        return body;
    }

    FormulaPtr atom() {
        TermPtr lhs = sum();
        if (accept(Tok::Eq)) return f_eq(std::move(lhs), sum());
        if (accept(Tok::Lt)) return f_lt(std::move(lhs), sum());
        bad_syntax("expected '=' or '<' after term", peek().pos);
    }

    TermPtr sum() {
        TermPtr acc = product();
        while (accept(Tok::Plus)) acc = t_plus(std::move(acc), product());
        return acc;
    }

    TermPtr product() {
        TermPtr acc = factor();
        while (accept(Tok::Times)) acc = t_times(std::move(acc), factor());
        return acc;
    }

    TermPtr factor() {
        if (peek().kind == Tok::Number) {
            Token t = take();
            return t_nat(t.number);
        }
        if (peek().kind == Tok::Ident) {
            Token t = take();
            return t_var(lookup(t.text, t.pos));
        }
        if (accept(Tok::LParen)) {
            TermPtr inner = sum();
            expect(Tok::RParen, "')' closing term");
            return inner;
        }
        bad_syntax("expected term", peek().pos);
    }
};

} // namespace

FormulaPtr parse_formula(const std::string& src) {
    Parser p(src);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Canonical symbol emission (shared by printing and encoding)
// ---------------------------------------------------------------------------

namespace {

// Symbol numbers: x=1 0=2 forall=3 *=4 ==5 (=6 )=7 1=8 +=9 <=10 not=11 and=12
// or=13 implies=14 exists=15 comma=16 digits 0..9 = 17..26.
enum Sym : int {
    S_x = 1, S_zero = 2, S_forall = 3, S_times = 4, S_eq = 5, S_lpar = 6,
    S_rpar = 7, S_one = 8, S_plus = 9, S_lt = 10, S_not = 11, S_and = 12,
    S_or = 13, S_implies = 14, S_exists = 15, S_comma = 16, S_digit0 = 17
};

const char* sym_text(int s) {
    switch (s) {
    case S_x: return "x";
    case S_zero: return "0";
    case S_forall: return "\xE2\x88\x80";
    case S_times: return "*";
    case S_eq: return "=";
    case S_lpar: return "(";
    case S_rpar: return ")";
    case S_one: return "1";
    case S_plus: return "+";
    case S_lt: return "<";
    case S_not: return "\xC2\xAC";
    case S_and: return "\xE2\x88\xA7";
    case S_or: return "\xE2\x88\xA8";
    case S_implies: return "\xE2\x86\x92";
    case S_exists: return "\xE2\x88\x83";
    case S_comma: return ",";
    default:
        if (s >= S_digit0 && s <= S_digit0 + 9) {
            static const char digits[10][2] = {"0","1","2","3","4","5","6","7","8","9"};
            return digits[s - S_digit0];
        }
        fail("NotACode", "no symbol numbered " + std::to_string(s));
    }
}

class Emitter {
public:
    std::vector<int> syms;

    void emit(int s) { syms.push_back(s); }

    void var(int id) {
        int canonical = rename(id);
        emit(S_x);
        if (canonical > 0) {
            for (char c : std::to_string(canonical)) emit(S_digit0 + (c - '0'));
        }
    }

    void term(const TermPtr& t, int parent_prec, bool right_child) {
        switch (t->kind) {
        case TermKind::Variable: var(t->var); return;
        case TermKind::Zero: emit(S_zero); return;
        case TermKind::One: emit(S_one); return;
        case TermKind::Plus:
        case TermKind::Times: {
            int prec = (t->kind == TermKind::Plus) ? 1 : 2;
            int op = (t->kind == TermKind::Plus) ? S_plus : S_times;
            bool parens = prec < parent_prec || (prec == parent_prec && right_child);
            if (parens) emit(S_lpar);
            term(t->lhs, prec, false);
            emit(op);
            term(t->rhs, prec, true);
            if (parens) emit(S_rpar);
            return;
        }
        }
    }

    void formula(const FormulaPtr& f) {
        switch (f->kind) {
        case FormulaKind::Eq:
        case FormulaKind::Lt:
            term(f->a, 0, false);
            emit(f->kind == FormulaKind::Eq ? S_eq : S_lt);
            term(f->b, 0, false);
            return;
        case FormulaKind::Not:
            emit(S_not);
            emit(S_lpar);
            formula(f->f);
            emit(S_rpar);
            return;
        case FormulaKind::And:
        case FormulaKind::Or:
        case FormulaKind::Implies: {
            int op = f->kind == FormulaKind::And ? S_and
                   : f->kind == FormulaKind::Or ? S_or : S_implies;
            emit(S_lpar);
            formula(f->f);
            emit(op);
            formula(f->g);
            emit(S_rpar);
            return;
        }
        case FormulaKind::Forall:
        case FormulaKind::Exists:
            emit(f->kind == FormulaKind::Forall ? S_forall : S_exists);
            var(f->var);
            emit(S_lpar);
            formula(f->f);
            emit(S_rpar);
            return;
        case FormulaKind::BoundedForall:
        case FormulaKind::BoundedExists:
            emit(S_lpar);
            emit(f->kind == FormulaKind::BoundedForall ? S_forall : S_exists);
            // Bound term is emitted after the binder name textually, but it can
            // only mention outer variables, which were renamed earlier anyway.
            var(f->var);
            emit(S_lt);
            term(f->bound, 0, false);
            emit(S_rpar);
            emit(S_lpar);
            formula(f->f);
            emit(S_rpar);
            return;
        }
    }

    std::string text() const {
        std::string out;
        for (int s : syms) out += sym_text(s);
        return out;
    }

private:
    std::map<int, int> rename_;

    int rename(int id) {
        auto [it, fresh] = rename_.try_emplace(id, static_cast<int>(rename_.size()));
        (void)fresh;
        return it->second;
    }
};

} // namespace

std::string print_canonical(const FormulaPtr& f) {
    Emitter e;
    e.formula(f);
    return e.text();
}

FormulaPtr sentence_formula(const Pi01Sentence& s) {
    FormulaPtr f = s.matrix;
    for (std::size_t k = s.prefix.size(); k-- > 0;) f = f_forall(s.prefix[k], f);
    return f;
}

std::string print_canonical(const Pi01Sentence& s) {
    return print_canonical(sentence_formula(s));
}

std::vector<int> canonical_symbols(const Pi01Sentence& s) {
    Emitter e;
    e.formula(sentence_formula(s));
    return e.syms;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

void require_delta0(const FormulaPtr& f, std::vector<int>& bound_vars) {
    auto var_known = [&](int id) {
        for (int v : bound_vars)
            if (v == id) return true;
        return false;
    };
    std::function<void(const TermPtr&)> check_term = [&](const TermPtr& t) {
        switch (t->kind) {
        case TermKind::Variable:
            if (!var_known(t->var))
                fail("NotPi01", "matrix uses a variable outside the prefix");
            return;
        case TermKind::Zero:
        case TermKind::One: return;
        case TermKind::Plus:
        case TermKind::Times:
            check_term(t->lhs);
            check_term(t->rhs);
            return;
        }
    };
    switch (f->kind) {
    case FormulaKind::Eq:
    case FormulaKind::Lt:
        check_term(f->a);
        check_term(f->b);
        return;
    case FormulaKind::Not:
        require_delta0(f->f, bound_vars);
        return;
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Implies:
        require_delta0(f->f, bound_vars);
        require_delta0(f->g, bound_vars);
        return;
    case FormulaKind::BoundedForall:
    case FormulaKind::BoundedExists:
        check_term(f->bound);
        bound_vars.push_back(f->var);
        require_delta0(f->f, bound_vars);
        bound_vars.pop_back();
        return;
    case FormulaKind::Forall:
        fail("NotPi01", "unbounded universal quantifier inside the matrix");
    case FormulaKind::Exists:
        fail("NotPi01", "unbounded existential quantifier inside the matrix");
    }
}

} // namespace

Pi01Sentence classify_pi01(const FormulaPtr& f) {
    Pi01Sentence s;
    FormulaPtr cur = f;
    while (cur->kind == FormulaKind::Forall) {
        s.prefix.push_back(cur->var);
        cur = cur->f;
    }
    s.matrix = cur;
    std::vector<int> bound_vars = s.prefix;
    require_delta0(s.matrix, bound_vars);
    return s;
}

// ---------------------------------------------------------------------------
// Goedel numbering
// ---------------------------------------------------------------------------

GoedelCode encode(const Pi01Sentence& s) {
    std::vector<int> syms = canonical_symbols(s);
    std::vector<std::uint64_t> primes = primes_first(syms.size());
    Int code = 1;
    for (std::size_t i = 0; i < syms.size(); ++i) {
        code *= pow_int(Int(primes[i]), static_cast<std::uint64_t>(syms[i]));
    }
    return {code, 1};
}

FormulaPtr decode(const GoedelCode& code) {
    if (code.scheme_version != 1)
        fail("NotACode", "unknown scheme version " + std::to_string(code.scheme_version));
    if (code.value < 2) fail("NotACode", "code must be at least 2");
    Int rest = code.value;
    std::string text;
    std::size_t prime_index = 0;
    std::vector<std::uint64_t> primes = primes_first(64);
    while (rest > 1) {
        if (prime_index >= primes.size()) {
            primes = primes_first(primes.size() * 2);
        }
        Int p(primes[prime_index]);
        int exponent = 0;
        while (rest % p == 0) {
            rest /= p;
            ++exponent;
        }
        if (exponent == 0)
            fail("NotACode", "gap in the exponent sequence at prime " + p.str());
        if (exponent > S_digit0 + 9)
            fail("NotACode", "no symbol numbered " + std::to_string(exponent));
        text += sym_text(exponent);
        ++prime_index;
    }
    return parse_formula(text);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Int eval_term(const TermPtr& t, const Env& env) {
    switch (t->kind) {
    case TermKind::Variable: {
        int id = t->var;
        if (id < 0 || static_cast<std::size_t>(id) >= env.size() || !env[id])
            fail("UnassignedVariable", "variable #" + std::to_string(id) + " has no value");
        return *env[id];
    }
    case TermKind::Zero: return 0;
    case TermKind::One: return 1;
    case TermKind::Plus: return eval_term(t->lhs, env) + eval_term(t->rhs, env);
    case TermKind::Times: return eval_term(t->lhs, env) * eval_term(t->rhs, env);
    }
    fail("NotWellFormed", "corrupt term");
}

bool eval_delta0(const FormulaPtr& f, const Env& env) {
    switch (f->kind) {
    case FormulaKind::Eq: return eval_term(f->a, env) == eval_term(f->b, env);
    case FormulaKind::Lt: return eval_term(f->a, env) < eval_term(f->b, env);
    case FormulaKind::Not: return !eval_delta0(f->f, env);
    case FormulaKind::And: return eval_delta0(f->f, env) && eval_delta0(f->g, env);
    case FormulaKind::Or: return eval_delta0(f->f, env) || eval_delta0(f->g, env);
    case FormulaKind::Implies: return !eval_delta0(f->f, env) || eval_delta0(f->g, env);
    case FormulaKind::BoundedForall:
    case FormulaKind::BoundedExists: {
        if (f->var < 0) fail("NotWellFormed", "bounded quantifier without binder id");
        Int limit = eval_term(f->bound, env);
        bool universal = f->kind == FormulaKind::BoundedForall;
        Env inner = env;
        if (static_cast<std::size_t>(f->var) >= inner.size())
            inner.resize(f->var + 1);
        for (Int y = 0; y < limit; ++y) {
            inner[f->var] = y;
            bool v = eval_delta0(f->f, inner);
            if (universal && !v) return false;
            if (!universal && v) return true;
        }
        return universal;
    }
    case FormulaKind::Forall:
    case FormulaKind::Exists:
        fail("NotPi01", "eval_delta0 cannot evaluate unbounded quantifiers");
    }
    fail("NotWellFormed", "corrupt formula");
}

// ---------------------------------------------------------------------------
// Tuple enumeration (iterated Cantor pairing, low coordinate fastest)
// ---------------------------------------------------------------------------

namespace {

// Inverse Cantor pairing: index i on diagonal d = a+b, with a increasing within
// the diagonal; returns (a, b).
std::pair<Int, Int> unpair(const Int& i) {
    Int disc = 8 * i + 1;
    Int d = (boost::multiprecision::sqrt(disc) - 1) / 2;
    Int tri = d * (d + 1) / 2;
    while (tri > i) {
        --d;
        tri = d * (d + 1) / 2;
    }
    while ((d + 1) * (d + 2) / 2 <= i) {
        ++d;
        tri = d * (d + 1) / 2;
    }
    Int a = i - tri;
    return {a, d - a};
}

} // namespace

std::vector<Int> enumerate_tuple(std::size_t arity, const Int& index) {
    if (arity == 0) return {};
    if (arity == 1) return {index};
    auto [a, rest] = unpair(index);
    std::vector<Int> out;
    out.reserve(arity);
    out.push_back(a);
    std::vector<Int> tail = enumerate_tuple(arity - 1, rest);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

PrefixCheck check_prefix(const Pi01Sentence& s, const Int& upto) {
    PrefixCheck result;
    int max_var = -1;
    for (int v : s.prefix) max_var = std::max(max_var, v);
    for (Int j = 0; j <= upto; ++j) {
        std::vector<Int> tuple = enumerate_tuple(s.arity(), j);
        Env env(static_cast<std::size_t>(max_var + 1));
        for (std::size_t t = 0; t < s.prefix.size(); ++t) env[s.prefix[t]] = tuple[t];
        if (!eval_delta0(s.matrix, env)) {
            result.all_true = false;
            result.first_false = j;
            return result;
        }
        if (s.arity() == 0) break; // single empty tuple
    }
    return result;
}

// ---------------------------------------------------------------------------
// Divisor-sum inequality
// ---------------------------------------------------------------------------

DivisorBoundReport lagarias_rh_term(std::uint64_t n, unsigned max_terms,
                                    bool allow_undetermined) {
    if (n == 0) fail("BadNumber", "term index starts at 1");
    DivisorBoundReport rep;
    rep.n = n;
    rep.sigma = divisor_sigma(Int(n));
    rep.h_n = harmonic(n);
    Rat sigma_rat(rep.sigma);
    for (unsigned terms = 8; terms <= max_terms; terms *= 2) {
        RatInterval rhs = RatInterval(rep.h_n) +
                          exp_interval(rep.h_n, terms) * ln_interval(rep.h_n, terms);
        rep.rhs = rhs;
        rep.terms_used = terms;
        if (sigma_rat <= rhs.lo) {
            rep.verdict = Verdict::Holds;
            return rep;
        }
        if (sigma_rat > rhs.hi) {
            rep.verdict = Verdict::Fails;
            return rep;
        }
    }
    if (allow_undetermined) {
        rep.verdict = Verdict::Undetermined;
        return rep;
    }
    fail("PrecisionExhausted",
         "sigma(" + std::to_string(n) + ") vs bound unresolved at " +
             std::to_string(max_terms) + " series terms (interval width " +
             rat_to_string(rep.rhs.width()) + ")");
}

} // namespace pi01forge::logic
