#include <doctest.h>

#include "pi01forge/circular.hpp"
#include "pi01forge/error.hpp"
#include "pi01forge/odometer_words.hpp"
#include "pi01forge/symbolic.hpp"

#include <random>
#include <string>
#include <vector>

using namespace pi01forge;
using namespace pi01forge::symbolic;

namespace {

using u32 = std::uint32_t;
using u64 = std::uint64_t;

template <typename F>
std::string error_kind(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

template <typename F>
std::string error_message(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

// Three-stage tower over the uniquely readable pair {"0001", "0011"}: stage 2
// stacks six stage-1 blocks per word (three of each), so the odometer radices
// are (4, 6) and stage-2 letters span 24 characters.
std::vector<words::WordStage> quad_tower() {
    std::vector<words::WordStage> t;
    t.push_back(words::init_stage0());

    words::WordStage s1;
    s1.n = 1;
    s1.K = 4;
    s1.blocks = {{0, 0, 0, 1}, {0, 0, 1, 1}};
    s1.letters = {"0001", "0011"};
    t.push_back(s1);

    words::WordStage s2;
    s2.n = 2;
    s2.K = 24;
    s2.blocks = {{0, 0, 0, 1, 1, 1}, {0, 0, 1, 0, 1, 1}};
    for (const auto& blocks : s2.blocks) {
        std::string w;
        for (u32 id : blocks) w += s1.letters[id];
        s2.letters.push_back(w);
    }
    t.push_back(s2);
    return t;
}

// One-stage circular tower: the bare alphabet as q = 1 circular words.
std::vector<circular::CircStage> circ0_tower() {
    circular::CircStage st;
    st.n = 0;
    st.q = 1;
    st.p = 0;
    st.letters = {"0", "1"};
    return {st};
}

// Tower for the reversal isomorphism: stage 1 carries a two-class partition
// with the swap involution, stage 2 the words whose class words to test.
std::vector<words::WordStage> eta_tower(const std::vector<std::vector<u32>>& stage2_blocks,
                                        const std::vector<u32>& action = {1, 0}) {
    std::vector<words::WordStage> t;
    t.push_back(words::init_stage0());

    words::WordStage s1;
    s1.n = 1;
    s1.K = 2;
    s1.blocks = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    s1.letters = {"00", "01", "10", "11"};
    s1.levels = {{0, 0, 1, 1}};
    s1.level_counts = {2};
    s1.actions = {action};
    t.push_back(s1);

    words::WordStage s2;
    s2.n = 2;
    s2.K = 2 * stage2_blocks.front().size();
    s2.blocks = stage2_blocks;
    t.push_back(s2);
    return t;
}

} // namespace

TEST_CASE("window literals parse and validate") {
    const Window w = window_from_literal("-3:0100101");
    CHECK(w.offset == -3);
    CHECK(w.letters == "0100101");

    const Window z = window_from_literal("0:01");
    CHECK(z.offset == 0);
    CHECK(z.letters == "01");

    CHECK(error_kind([] { window_from_literal("abc"); }) == "PreconditionViolated");
    CHECK(error_kind([] { window_from_literal("x:01"); }) == "PreconditionViolated");
    CHECK(error_kind([] { window_from_literal("12abc:01"); }) == "PreconditionViolated");
    // Origin outside the window: positive offset, or size smaller than -offset.
    CHECK(error_kind([] { window_from_literal("1:01"); }) == "PreconditionViolated");
    CHECK(error_kind([] { window_from_literal("-5:0101"); }) == "PreconditionViolated");
}

TEST_CASE("principal subword scan over odometer stages") {
    const auto t = quad_tower();

    const auto p = principal_subword(window_from_literal("0:0001"), t[1]);
    CHECK(p.a == 0);
    CHECK(p.b == 4);
    CHECK(p.word == 0);

    // A wider window pins the block through the origin, one step in.
    const auto q = principal_subword(Window{-1, "00010001", ""}, t[1]);
    CHECK(q.a == -1);
    CHECK(q.b == 3);
    CHECK(q.word == 0);

    // Stage 0 blocks are single letters: the origin letter itself.
    const auto r = principal_subword(Window{-2, "0101", ""}, t[0]);
    CHECK(r.a == 0);
    CHECK(r.b == 1);
    CHECK(r.word == 0);

    // Too little context: no full block fits, or none covers the origin.
    CHECK(error_kind([&] { principal_subword(Window{0, "001", ""}, t[1]); }) == "NotParseable");
    CHECK(error_kind([&] { principal_subword(Window{-4, "0001", ""}, t[1]); }) == "NotParseable");

    // A stage without unique readability admits two alignments.
    words::WordStage bad;
    bad.n = 1;
    bad.K = 2;
    bad.letters = {"00", "01"};
    CHECK(error_kind([&] { principal_subword(Window{-1, "0000", ""}, bad); }) == "AmbiguousParse");

    words::WordStage dry;
    dry.n = 1;
    dry.K = 4;
    dry.blocks = {{0, 0, 0, 1}};
    CHECK(error_kind([&] { principal_subword(Window{0, "0001", ""}, dry); }) ==
          "PreconditionViolated");
}

TEST_CASE("principal subword scan over circular stages") {
    circular::CircStage st;
    st.n = 1;
    st.q = 12;
    st.p = 1;
    st.letters = {"b0b0b0b1b1b1", "b0b0b1b0b1b1"};

    // The origin sits on an interior spacer letter; the parse still returns
    // the enclosing block.
    const auto p = principal_subword(Window{-2, st.letters[0], ""}, st);
    CHECK(p.a == -2);
    CHECK(p.b == 10);
    CHECK(p.word == 0);

    circular::CircStage off = st;
    off.q = 5;
    CHECK(error_kind([&] { principal_subword(Window{0, "b0b0b0b1b1b1", ""}, off); }) ==
          "PreconditionViolated");
}

TEST_CASE("odometer coordinate digits against mixed-radix shifts") {
    const auto t = quad_tower();
    const std::vector<u64> radices = {4, 6};
    const std::string& W0 = t[2].letters[0];
    const std::string& W1 = t[2].letters[1];
    REQUIRE(words::check_unique_readability({W0, W1}));

    CHECK(odometer_coordinate(Window{0, W0, ""}, t, 2) == std::vector<u32>{0, 0});
    CHECK(odometer_coordinate(Window{-1, W0, ""}, t, 2) == std::vector<u32>{1, 0});
    CHECK(odometer_coordinate(Window{-1, W0, ""}, t, 1) == std::vector<u32>{1});
    CHECK(odometer_coordinate(Window{0, W0, ""}, t, 0).empty());

    // Sliding a window across a concatenation advances the coordinate by the
    // slide: position t reads digits add(0, t, (4, 6)).
    const std::string s = W1 + W0 + W1;
    const std::vector<u32> zeros = {0, 0};
    for (long long t0 = 0; t0 < 24; ++t0) {
        const Window win{-24, s.substr(static_cast<std::size_t>(t0), 48), ""};
        CHECK(odometer_coordinate(win, t, 2) == odometer_add(zeros, t0, radices));
    }

    CHECK(error_kind([&] { odometer_coordinate(Window{0, "001", ""}, t, 2); }) == "NotParseable");
    CHECK(error_kind([&] { odometer_coordinate(Window{0, W0, ""}, t, 3); }) ==
          "PreconditionViolated");
}

TEST_CASE("odometer coordinate rejects inconsistent towers") {
    const auto t = quad_tower();
    const std::string& W0 = t[2].letters[0];

    // Letters start with word 1 but the block table claims word 0.
    auto lying = t;
    lying[2].letters = {"0011" "0001" "0001" "0001" "0001" "0001"};
    lying[2].blocks = {{0, 0, 0, 0, 0, 0}};
    CHECK(error_message([&] { odometer_coordinate(Window{0, lying[2].letters[0], ""}, lying, 2); })
              .find("not block 0") != std::string::npos);

    // A two-letter pad shifts the stage-1 grid off the stage-2 grid.
    auto padded = t;
    padded[2].K = 26;
    padded[2].letters = {"00" + W0};
    padded[2].blocks = {{0, 0, 0, 1, 1, 1}};
    CHECK(error_kind([&] { odometer_coordinate(Window{-2, "00" + W0, ""}, padded, 2); }) ==
          "NotParseable");

    // A block table narrower than the letters overflows the digit range.
    auto narrow = t;
    narrow[2].blocks = {{0, 0, 1, 1}};
    CHECK(error_kind([&] { odometer_coordinate(Window{-20, W0, ""}, narrow, 2); }) ==
          "NotParseable");
}

TEST_CASE("odometer addition is mixed-radix with dropped carry") {
    const std::vector<u64> r23 = {2, 3};
    CHECK(odometer_add({0, 0}, 1, r23) == std::vector<u32>{1, 0});
    CHECK(odometer_add({1, 0}, 1, r23) == std::vector<u32>{0, 1});
    CHECK(odometer_add({1, 2}, 1, r23) == std::vector<u32>{0, 0}); // wraps mod 6
    CHECK(odometer_add({0, 0}, -1, r23) == std::vector<u32>{1, 2});
    CHECK(odometer_add({0, 1}, -2, r23) == std::vector<u32>{0, 0});
    CHECK(odometer_neg({0, 0}, r23) == std::vector<u32>{0, 0});
    CHECK(odometer_neg({1, 0}, r23) == std::vector<u32>{1, 2});

    // Value oracle in radices (3, 4, 5): place values 1, 3, 12, modulus 60.
    const std::vector<u64> r345 = {3, 4, 5};
    const auto val = [](const std::vector<u32>& d) -> long long {
        return d[0] + 3LL * d[1] + 12LL * d[2];
    };
    std::mt19937_64 rng(20260814);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<u32> d = {static_cast<u32>(rng() % 3), static_cast<u32>(rng() % 4),
                                    static_cast<u32>(rng() % 5)};
        const long long j = static_cast<long long>(rng() % 2001) - 1000;
        const long long expect = ((val(d) + j) % 60 + 60) % 60;
        CHECK(val(odometer_add(d, j, r345)) == expect);
        CHECK(val(odometer_neg(d, r345)) == (60 - val(d)) % 60);
    }

    CHECK(error_kind([&] { odometer_add({0}, 1, r23); }) == "PreconditionViolated");
    CHECK(error_kind([&] { odometer_add({5}, 1, {3}); }) == "PreconditionViolated");
    CHECK(error_kind([&] { odometer_add({0}, 1, {0}); }) == "PreconditionViolated");
    CHECK(error_kind([&] { odometer_add({0}, 1, {u64(1) << 33}); }) == "CapacityExceeded");
    CHECK(error_kind([&] { odometer_neg({3}, {3}); }) == "PreconditionViolated");
}

TEST_CASE("empirical distributions over odometer and circular parses") {
    const auto t = quad_tower();

    const auto d0 = emp_dist("0101", 0, t);
    CHECK(d0.level == 0);
    CHECK(d0.weights.at(0) == Rat(1, 2));
    CHECK(d0.weights.at(1) == Rat(1, 2));

    const auto d1 = emp_dist("00010011", 1, t);
    CHECK(d1.weights.at(0) == Rat(1, 2));
    CHECK(d1.weights.at(1) == Rat(1, 2));
    CHECK(emp_dist("0001", 1, t).weights.at(0) == 1);
    CHECK(emp_dist(t[2].letters[0], 1, t).weights.at(0) == Rat(1, 2));

    CHECK(error_kind([&] { emp_dist("010", 1, t); }) == "NotParseable");
    CHECK(error_kind([&] { emp_dist("0111", 1, t); }) == "NotParseable");
    CHECK(error_kind([&] { emp_dist("0121", 0, t); }) == "NotParseable");
    CHECK(error_kind([&] { emp_dist("0001", 3, t); }) == "PreconditionViolated");

    words::WordStage dry;
    dry.n = 1;
    dry.K = 4;
    dry.blocks = {{0, 0, 0, 1}};
    const std::vector<words::WordStage> bare = {words::init_stage0(), dry};
    CHECK(error_kind([&] { emp_dist("0001", 1, bare); }) == "PreconditionViolated");

    // Circular parses skip spacer letters between blocks.
    const auto circ = circ0_tower();
    const auto c0 = emp_dist("b0b1", 0, circ);
    CHECK(c0.weights.at(0) == Rat(1, 2));
    CHECK(c0.weights.at(1) == Rat(1, 2));
    CHECK(variation_distance(c0, d0) == 0);

    std::vector<circular::CircStage> circ1 = circ0_tower();
    circular::CircStage s1;
    s1.n = 1;
    s1.q = 4;
    s1.p = 1;
    s1.letters = {"b0b1", "b1b0"};
    circ1.push_back(s1);
    // The leading spacer at position 5 is skipped only after the block-first
    // probe fails there.
    const auto c1 = emp_dist("eb0b1bb1b0", 1, circ1);
    CHECK(c1.weights.at(0) == Rat(1, 2));
    CHECK(c1.weights.at(1) == Rat(1, 2));

    CHECK(error_kind([&] { emp_dist("bbb", 0, circ); }) == "NotParseable");
    CHECK(error_kind([&] { emp_dist("b0z", 0, circ); }) == "NotParseable");
}

TEST_CASE("variation distance and tail clustering") {
    const auto t = quad_tower();
    const auto u = emp_dist("00010011", 1, t);
    const auto a = emp_dist("0001", 1, t);
    const auto b = emp_dist("0011", 1, t);

    CHECK(variation_distance(u, u) == 0);
    CHECK(variation_distance(a, b) == 1);
    CHECK(variation_distance(u, a) == Rat(1, 2));
    CHECK(variation_distance(a, u) == Rat(1, 2));

    EmpiricalDist other;
    other.level = 2;
    CHECK(error_kind([&] { variation_distance(u, other); }) == "PreconditionViolated");

    std::size_t from = 99;
    CHECK(generic_check({"0001", "0001"}, 1, Rat(1, 1000), t, &from));
    CHECK(from == 0);
    CHECK(generic_check({"00010011", "00110001", "0001001100010011"}, 1, Rat(1, 1000), t, &from));
    CHECK(from == 0);

    // A delta followed by a uniform tail clusters from the second entry.
    CHECK(generic_check({"0011", "00010011", "00110001"}, 1, Rat(1, 4), t, &from));
    CHECK(from == 1);

    // Alternating deltas never cluster below distance 1.
    CHECK_FALSE(generic_check({"0001", "0011", "0001", "0011"}, 1, Rat(1, 4), t, &from));
    CHECK(from == 3);
    CHECK(generic_check({"0001", "0011", "0001", "0011"}, 1, Rat(3, 2), t, &from));
    CHECK(from == 0);

    CHECK(generic_check({"b0b1", "eb1b0b"}, 0, Rat(1, 1000), circ0_tower()));
    CHECK(error_kind([&] { generic_check({"0001"}, 1, Rat(1), t); }) == "PreconditionViolated");
}

TEST_CASE("reversal isomorphism through the level involution") {
    // Class words over classes A = {00, 01}, B = {10, 11} with the swap action.
    const auto t = eta_tower({{0, 1, 2, 3}, {2, 3, 0, 1}});
    const std::vector<u32> cw = {0, 0, 1, 1};
    const auto img = eta_g_apply(t, 2, 1, cw);
    CHECK(img == std::vector<u32>{1, 1, 0, 0});

    // eta composed with reversal is an involution on the collection.
    const std::vector<u32> rimg(img.rbegin(), img.rend());
    const auto img2 = eta_g_apply(t, 2, 1, rimg);
    CHECK(std::vector<u32>(img2.rbegin(), img2.rend()) == cw);

    // Trivial action: the image is the input, closure still required.
    const auto tid = eta_tower({{0, 1, 2, 3}, {2, 3, 0, 1}}, {});
    CHECK(eta_g_apply(tid, 2, 1, cw) == cw);

    // [A, A, B] maps to [B, B, A], which reads reversed as [A, B, B].
    const auto t3 = eta_tower({{0, 0, 2}, {0, 2, 2}});
    CHECK(eta_g_apply(t3, 2, 1, {0, 0, 1}) == std::vector<u32>{1, 1, 0});

    // The image of [A, A, B] reads reversed as [A, B, B], absent here.
    const auto tbad = eta_tower({{0, 0, 2}, {2, 0, 0}});
    CHECK(error_kind([&] { eta_g_apply(tbad, 2, 1, {0, 0, 1}); }) == "ClosureViolated");

    CHECK(error_kind([&] { eta_g_apply(t, 2, 1, {0, 1, 0, 1}); }) == "PreconditionViolated");
    CHECK(error_kind([&] { eta_g_apply(t, 2, 1, {0, 0, 1, 2}); }) == "PreconditionViolated");
    CHECK(error_kind([&] { eta_g_apply(t, 2, 2, cw); }) == "PreconditionViolated");
    CHECK(error_kind([&] { eta_g_apply(t, 0, 1, cw); }) == "PreconditionViolated");
    CHECK(error_kind([&] { eta_g_apply(t, 1, 1, {0, 0}); }) == "PreconditionViolated");
    CHECK(error_kind([&] { eta_g_apply(t, 3, 1, cw); }) == "PreconditionViolated");

    auto tskew = eta_tower({{0, 1, 2, 3}, {2, 3, 0, 1}}, {1, 1});
    CHECK(error_kind([&] { eta_g_apply(tskew, 2, 1, cw); }) == "PreconditionViolated");
    auto tshort = eta_tower({{0, 1, 2, 3}, {2, 3, 0, 1}}, {0});
    CHECK(error_kind([&] { eta_g_apply(tshort, 2, 1, cw); }) == "PreconditionViolated");
}

TEST_CASE("prime pool certificates for odometer radix sequences") {
    const auto v = [](std::initializer_list<int> xs) {
        std::vector<Int> out;
        for (int x : xs) out.push_back(x);
        return out;
    };

    const auto d1 = kronecker_prime_sets(v({2, 2, 2}), v({3, 3, 3}), true, true);
    CHECK(d1.distinct);
    CHECK(d1.witness == 2);

    const auto d2 = kronecker_prime_sets(v({10, 2, 2}), v({14, 2, 2}), true, true);
    CHECK(d2.distinct);
    CHECK(d2.witness == 5);

    // The separating prime only needs the *other* side closed.
    const auto d3 = kronecker_prime_sets(v({2, 3}), v({2}), false, true);
    CHECK(d3.distinct);
    CHECK(d3.witness == 3);
    const auto d4 = kronecker_prime_sets(v({194}), v({2}), false, true);
    CHECK(d4.distinct);
    CHECK(d4.witness == 97);
    const auto d5 = kronecker_prime_sets(v({1}), v({2}), true, true);
    CHECK(d5.distinct);
    CHECK(d5.witness == 2);

    // Equal pools certify non-distinctness only when both sides are closed.
    const auto same = kronecker_prime_sets(v({6, 2}), v({2, 3}), true, true);
    CHECK_FALSE(same.distinct);
    CHECK(same.witness == 0);

    CHECK(error_kind([&] { kronecker_prime_sets(v({2}), v({2}), false, false); }) ==
          "Undeterminable");
    CHECK(error_kind([&] { kronecker_prime_sets(v({2}), v({2}), true, false); }) ==
          "Undeterminable");
    CHECK(error_message([&] { kronecker_prime_sets(v({2, 3}), v({2}), false, false); })
              .find("not closed") != std::string::npos);
    CHECK(error_kind([&] { kronecker_prime_sets(v({}), v({2}), true, true); }) ==
          "PreconditionViolated");
    CHECK(error_kind([&] { kronecker_prime_sets(v({0}), v({2}), true, true); }) ==
          "PreconditionViolated");
}
