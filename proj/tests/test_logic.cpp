#include <doctest.h>

#include "pi01forge/error.hpp"
#include "pi01forge/logic.hpp"

#include <string>

using namespace pi01forge;
using namespace pi01forge::logic;

namespace {

template <typename F>
std::string error_kind(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

// Forward Cantor pairing, used as an independent inverse for enumerate_tuple.
Int cantor_pair(const Int& a, const Int& b) {
    Int d = a + b;
    return d * (d + 1) / 2 + a;
}

Int tuple_index(const std::vector<Int>& tuple) {
    Int idx = tuple.back();
    for (std::size_t k = tuple.size() - 1; k-- > 0;) idx = cantor_pair(tuple[k], idx);
    return idx;
}

// (forall Y < V)((exists Z < V)(Y*Z=V) -> Y=1), i.e. "V has no proper factorization
// with both factors below V except via 1" — the bounded primality predicate.
std::string pri(const std::string& v, const std::string& y, const std::string& z) {
    return "(forall " + y + " < " + v + ")((exists " + z + " < " + v + ")(" +
           y + "*" + z + "=" + v + ") -> " + y + "=1)";
}

std::string goldbach_sentence() {
    return "forall x ((exists d < x)(2*d=x) -> (exists p,q < x)(" +
           pri("p", "a", "b") + " & " + pri("q", "c", "e") + " & x=p+q))";
}

} // namespace

TEST_CASE("classic universal sentence round-trips through the 7-symbol code") {
    FormulaPtr f = parse_formula("\xE2\x88\x80x(x*0=0)");
    Pi01Sentence s = classify_pi01(f);
    CHECK(s.arity() == 1);
    CHECK(print_canonical(s) == "\xE2\x88\x80x(x*0=0)");

    std::vector<int> expected_syms = {3, 1, 6, 1, 4, 2, 5, 2, 7};
    CHECK(canonical_symbols(s) == expected_syms);

    // Independent oracle: pack the hand-checked exponents over the primes.
    std::vector<std::uint64_t> primes = primes_first(expected_syms.size());
    Int expected = 1;
    for (std::size_t i = 0; i < expected_syms.size(); ++i)
        expected *= pow_int(Int(primes[i]), expected_syms[i]);

    GoedelCode code = encode(s);
    CHECK(code.scheme_version == 1);
    CHECK(code.value == expected);
    CHECK(code.value.str().size() == 32);

    FormulaPtr back = decode(code);
    CHECK(print_canonical(back) == print_canonical(s));
}

TEST_CASE("encoding is invariant under renaming of bound variables") {
    Pi01Sentence a = classify_pi01(parse_formula("forall w (w*0=0)"));
    Pi01Sentence b = classify_pi01(parse_formula("forall x (x*0=0)"));
    CHECK(encode(a).value == encode(b).value);
}

TEST_CASE("decode rejects bad packings") {
    CHECK(error_kind([] { decode({Int(7), 1}); }) == "NotACode");   // gap at prime 2,3
    CHECK(error_kind([] { decode({Int(1), 1}); }) == "NotACode");
    CHECK(error_kind([] { decode({Int(0), 1}); }) == "NotACode");
    // 2^2 * 3^1 = "0x": valid symbols, not a formula.
    CHECK(error_kind([] { decode({Int(12), 1}); }) == "NotWellFormed");
    // 2^30: exponent beyond the symbol table.
    CHECK(error_kind([] { decode({Int(1) << 30, 1}); }) == "NotACode");
    CHECK(error_kind([] { decode({Int(4), 2}); }) == "NotACode");   // unknown scheme
}

TEST_CASE("parser accepts ASCII and symbol forms, rejects malformed input") {
    CHECK(print_canonical(parse_formula("forall x (x * 0 = 0)")) == "\xE2\x88\x80x(x*0=0)");
    CHECK(error_kind([] { parse_formula("forall x (x=)"); }) == "NotWellFormed");
    CHECK(error_kind([] { parse_formula("x=0"); }) == "NotWellFormed"); // unbound x
    CHECK(error_kind([] { parse_formula("forall x (x=0) )"); }) == "NotWellFormed");

    // Numeral sugar expands to 1+1+... chains.
    CHECK(print_canonical(parse_formula("forall x (3*x=x+x+x)")) ==
          "\xE2\x88\x80x((1+1+1)*x=x+x+x)");
}

TEST_CASE("canonical printing round-trips structurally") {
    const char* samples[] = {
        "forall x (x*0=0)",
        "forall x, y (x+y=y+x)",
        "forall x ((exists d < x)(2*d=x) -> !(x=1))",
        "forall x ((forall y < x+1)(y<x | y=x))",
        "forall x (x=0 | 0<x & !(x<0))",
        "forall x (x=x -> x+1=x+1 -> 0=0)",
    };
    for (const char* src : samples) {
        FormulaPtr f = parse_formula(src);
        std::string canon = print_canonical(f);
        FormulaPtr again = parse_formula(canon);
        CHECK_MESSAGE(print_canonical(again) == canon, "sample: ", src);
    }
}

TEST_CASE("classification accepts bounded matrices and rejects unbounded ones") {
    Pi01Sentence g = classify_pi01(parse_formula(goldbach_sentence()));
    CHECK(g.arity() == 1);

    CHECK(error_kind([] {
        classify_pi01(parse_formula("forall x exists y (x<y)"));
    }) == "NotPi01");
    CHECK(error_kind([] {
        classify_pi01(parse_formula("forall x forall y (x+y=y+x) ")); // fine
    }) == "");
    // A forall nested under a connective is part of the matrix, so it is rejected.
    CHECK(error_kind([] {
        classify_pi01(parse_formula("forall x (x=0 | forall y (y=y))"));
    }) == "NotPi01");
}

TEST_CASE("bounded quantifier semantics are strict") {
    // (forall y < 0)(...) is vacuously true, (exists y < 0)(...) is false.
    Pi01Sentence s1 = classify_pi01(parse_formula("forall x ((forall y < 0)(y=1))"));
    Pi01Sentence s2 = classify_pi01(parse_formula("forall x ((exists y < 0)(y=y))"));
    Env env{Int(9)};
    CHECK(eval_delta0(s1.matrix, env));
    CHECK(!eval_delta0(s2.matrix, env));

    // y < x means y in [0, x): x itself is excluded.
    Pi01Sentence s3 = classify_pi01(parse_formula("forall x ((forall y < x)(y<x))"));
    CHECK(check_prefix(s3, 50).all_true);
}

TEST_CASE("evaluation reports unassigned variables") {
    Pi01Sentence s = classify_pi01(parse_formula("forall x (x=x)"));
    CHECK(error_kind([&] { eval_delta0(s.matrix, Env{}); }) == "UnassignedVariable");
}

TEST_CASE("goldbach-style matrix is true on an initial segment") {
    Pi01Sentence g = classify_pi01(parse_formula(goldbach_sentence()));
    PrefixCheck pc = check_prefix(g, 60);
    CHECK(pc.all_true);
}

TEST_CASE("a false sentence reports its first counterexample index") {
    // "Every even number is twice a bounded-prime": fails first at x = 8 = 4+4.
    std::string src = "forall x ((exists d < x)(2*d=x) -> (exists p < x)(" +
                      pri("p", "a", "b") + " & x=p+p))";
    Pi01Sentence s = classify_pi01(parse_formula(src));
    PrefixCheck pc = check_prefix(s, 100);
    CHECK(!pc.all_true);
    REQUIRE(pc.first_false.has_value());
    CHECK(*pc.first_false == 8);

    Pi01Sentence simple = classify_pi01(parse_formula("forall x (x<5)"));
    PrefixCheck pc2 = check_prefix(simple, 100);
    REQUIRE(pc2.first_false.has_value());
    CHECK(*pc2.first_false == 5);
}

TEST_CASE("tuple enumeration matches the pairing inverse and the pinned anchors") {
    CHECK(enumerate_tuple(2, 0) == std::vector<Int>{0, 0});
    CHECK(enumerate_tuple(2, 4) == std::vector<Int>{1, 1});
    CHECK(enumerate_tuple(1, 5) == std::vector<Int>{5});
    CHECK(enumerate_tuple(0, 0).empty());

    for (std::size_t arity : {2u, 3u, 4u}) {
        for (int i = 0; i < 200; ++i) {
            std::vector<Int> t = enumerate_tuple(arity, i);
            REQUIRE(t.size() == arity);
            CHECK(tuple_index(t) == i);
        }
    }
}

TEST_CASE("divisor sigma and harmonic numbers are exact") {
    // Brute-force oracle for sigma.
    for (int n = 1; n <= 300; ++n) {
        Int brute = 0;
        for (int d = 1; d <= n; ++d)
            if (n % d == 0) brute += d;
        CHECK(divisor_sigma(n) == brute);
    }
    CHECK(harmonic(3) == Rat(11, 6));
    CHECK(harmonic(4) == Rat(25, 12));
}

TEST_CASE("interval enclosures trap the classical constants") {
    // References are 19-digit truncations, so compare with a 1e-15 collar; the
    // enclosures themselves are far tighter than that.
    const Rat eps(1, Int("1000000000000000"));
    auto near = [&](const RatInterval& iv, const Rat& ref) {
        return iv.lo <= ref + eps && ref - eps <= iv.hi && iv.width() < eps;
    };

    CHECK(near(exp_interval(Rat(1), 30), Rat("27182818284590452354/10000000000000000000")));
    CHECK(near(ln_interval(Rat(2), 40), Rat("6931471805599453094/10000000000000000000")));
    CHECK(near(exp_interval(Rat(-3, 2), 30), Rat("2231301601484298289/10000000000000000000")));

    // Functional inversion: exp maps the ln(2) enclosure onto one containing 2.
    RatInterval l2 = ln_interval(Rat(2), 40);
    CHECK(exp_interval(l2.lo, 40).lo <= Rat(2));
    CHECK(Rat(2) <= exp_interval(l2.hi, 40).hi);

    // Additivity: ln 2 + ln 3 lands inside the ln 6 enclosure (up to widening).
    RatInterval l3 = ln_interval(Rat(3), 40);
    RatInterval l6 = ln_interval(Rat(6), 40);
    RatInterval sum = l2 + l3;
    CHECK(sum.lo <= l6.hi);
    CHECK(l6.lo <= sum.hi);
}

TEST_CASE("divisor-sum inequality verdicts on known terms") {
    for (std::uint64_t n : {1ull, 2ull, 12ull, 60ull, 120ull}) {
        DivisorBoundReport rep = lagarias_rh_term(n);
        CHECK(rep.verdict == Verdict::Holds);
        // Sanity: the enclosure really contains sigma only when the margin is thin;
        // for these n the bound strictly exceeds sigma.
        CHECK(Rat(rep.sigma) <= rep.rhs.hi);
    }
    // n = 1 is the exact-equality case: sigma(1) = 1 = H_1 + e^{H_1} ln(H_1).
    DivisorBoundReport one = lagarias_rh_term(1);
    CHECK(one.rhs.lo == Rat(1));
    CHECK(one.rhs.hi == Rat(1));

    CHECK(error_kind([] { lagarias_rh_term(12, 4); }) == "PrecisionExhausted");
    DivisorBoundReport und = lagarias_rh_term(12, 4, true);
    CHECK(und.verdict == Verdict::Undetermined);
}
