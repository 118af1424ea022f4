#include <doctest.h>

#include "pi01forge/error.hpp"
#include "pi01forge/logic.hpp"
#include "pi01forge/odometer_words.hpp"
#include "pi01forge/schedule.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace pi01forge;
using namespace pi01forge::words;

namespace {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using Wd = std::vector<u32>;

template <typename F>
std::string error_kind(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

// Independent re-implementations of the word maps, used as oracles.
Wd oracle_rev(const Wd& w) { return Wd(w.rbegin(), w.rend()); }

Wd oracle_skew(const std::vector<u32>& g, const Wd& w) {
    Wd out(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = g[w[w.size() - 1 - j]];
    return out;
}

Wd oracle_diag(const std::vector<u32>& g, const Wd& w) {
    Wd out(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = g[w[j]];
    return out;
}

schedule::Schedule toy_schedule() {
    schedule::ScheduleOptions o;
    o.strict = false;
    o.overrides = {{"e_0", "1"},    {"e_1", "1"},    {"e_2", "1"},
                   {"kmax_0", "4"}, {"kmax_1", "4"}, {"kmax_2", "4"},
                   {"eps_0", "1/2"}, {"eps_1", "1/2"}, {"eps_2", "1/2"}};
    return schedule::make_schedule(o, 3);
}

// Three refinement stages over the binary letters at the smallest admissible
// profile: split 2, kmax 4, lengths 32/64/128, word counts 4/8/16.
const std::vector<WordStage>& toy_tower() {
    static const std::vector<WordStage> tower = [] {
        const schedule::Schedule sched = toy_schedule();
        std::vector<WordStage> t{init_stage0()};
        for (unsigned i = 0; i < 3; ++i)
            t.push_back(build_stage(t, sched.stages[i], 0x9e3779b97f4a7c15ull + i, true));
        return t;
    }();
    return tower;
}

std::vector<u32> block_histogram(const Wd& w, u32 alphabet) {
    std::vector<u32> h(alphabet, 0);
    for (u32 x : w) ++h[x];
    return h;
}

} // namespace

TEST_CASE("stage 0 is the two binary letters") {
    const WordStage st = init_stage0();
    CHECK(st.n == 0);
    CHECK(st.K == 1);
    CHECK(st.word_count() == 2);
    CHECK(st.letters[0] == "0");
    CHECK(st.letters[1] == "1");
    CHECK(st.levels.empty());
    CHECK_FALSE(st.omega_hit.has_value());
}

TEST_CASE("skew map reverses and relabels; applying it twice restores the word") {
    // Trivial relabeling: plain reversal.
    CHECK(skew_diagonal_apply({0, 1}, {0, 1}) == Wd{1, 0});
    // Letter swap composed with reversal.
    CHECK(skew_diagonal_apply({1, 0}, {0, 0, 1}) == Wd{0, 1, 1});
    // An involution applied twice is the identity on every word.
    const Wd w{2, 0, 3, 1, 1, 2};
    const std::vector<u32> inv{1, 0, 3, 2};
    CHECK(skew_diagonal_apply(inv, skew_diagonal_apply(inv, w)) == w);
    // Malformed maps are rejected.
    CHECK(error_kind([] { skew_diagonal_apply({1, 2, 0}, {0}); }) == "PreconditionViolated");
    CHECK(error_kind([] { skew_diagonal_apply({0, 1}, {5}); }) == "PreconditionViolated");
}

TEST_CASE("unique readability of equal-length word lists") {
    std::string note;
    CHECK(check_unique_readability({"0"}, &note));
    CHECK(check_unique_readability({"0", "1"}, &note));
    CHECK(check_unique_readability({"0001", "0011"}, &note));
    // Periodic complements fail: "10" sits astride "01"+"01".
    CHECK_FALSE(check_unique_readability({"01", "10"}, &note));
    // "00" reads inside "00"+"0...": shared borders break readability.
    CHECK_FALSE(check_unique_readability({"00", "01"}, &note));
    // The classic failure: "0110" occurs one letter into "0011"+"0011".
    CHECK_FALSE(check_unique_readability({"0011", "0110"}, &note));
    CHECK(note.find("offset 1") != std::string::npos);
    CHECK(error_kind([] { check_unique_readability({"01", "0"}); }) == "PreconditionViolated");
}

TEST_CASE("substitution search: one class-word over a single two-letter class") {
    const Wd carrier(64, 0);
    const SubstitutionResult res = substitution_search({carrier}, {2}, 2, Rat(1, 2), Rat(1, 2),
                                                       64, false, false, 20260814);
    REQUIRE(res.instances.size() == 1);
    REQUIRE(res.instances[0].size() == 2);
    const Wd& a = res.instances[0][0];
    const Wd& b = res.instances[0][1];
    // A self-reversed class-word carries a reversal-paired instance pair.
    CHECK(oracle_rev(a) == b);
    CHECK(a != b);
    // Balanced instances: each fine letter exactly half the positions.
    CHECK(block_histogram(a, 2) == std::vector<u32>{32, 32});
    CHECK(block_histogram(b, 2) == std::vector<u32>{32, 32});
    CHECK(res.worst_deviation < Rat(1, 2));
    CHECK(res.attempts >= 1);

    // Determinism: the same seed reproduces the instances; a different seed
    // explores a different sample.
    const SubstitutionResult again = substitution_search({carrier}, {2}, 2, Rat(1, 2), Rat(1, 2),
                                                         64, false, false, 20260814);
    CHECK(again.instances == res.instances);
    const SubstitutionResult other = substitution_search({carrier}, {2}, 2, Rat(1, 2), Rat(1, 2),
                                                         64, false, false, 20260815);
    CHECK(other.instances != res.instances);
}

TEST_CASE("substitution search: transports close a four-word orbit") {
    // Two coarse classes of two letters each; the canonical coarse swap and
    // the fine involution that swaps the classes slotwise.
    const std::vector<u32> g{1, 0};
    const std::vector<u32> h{2, 3, 0, 1};
    const Wd w1{0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0};
    const std::vector<Wd> carriers{w1, oracle_rev(w1), oracle_skew(g, w1), oracle_diag(g, w1)};
    CHECK(std::set<Wd>(carriers.begin(), carriers.end()).size() == 4);

    const SubstitutionResult res =
        substitution_search(carriers, {2, 2}, 2, Rat(1), Rat(1), 16, true, true, 7);
    REQUIRE(res.instances.size() == 4);
    std::set<Wd> all;
    for (u32 c = 0; c < 4; ++c) {
        REQUIRE(res.instances[c].size() == 2);
        for (const Wd& inst : res.instances[c]) {
            all.insert(inst);
            // Every instance reads its class-word: position classes match.
            for (std::size_t j = 0; j < inst.size(); ++j)
                CHECK(inst[j] / 2 == carriers[c][j]);
        }
    }
    CHECK(all.size() == 8);
    // The output is closed under reversal and under the fine skew map.
    for (const Wd& inst : all) {
        CHECK(all.count(oracle_rev(inst)) == 1);
        CHECK(all.count(oracle_skew(h, inst)) == 1);
        // Freeness: no instance is fixed by the skew map.
        CHECK(oracle_skew(h, inst) != inst);
    }
}

TEST_CASE("substitution search rejects malformed or impossible requests") {
    const Wd c8(8, 0);
    CHECK(error_kind([&] {
              substitution_search({c8}, {2}, 3, Rat(1, 2), Rat(1, 2), 8, false, false, 1);
          }) == "PreconditionViolated"); // odd instance count
    CHECK(error_kind([&] {
              substitution_search({c8}, {2}, 2, Rat(1, 2), Rat(1, 2), 8, false, true, 1);
          }) == "PreconditionViolated"); // fine involution without a coarse one
    CHECK(error_kind([&] {
              substitution_search({Wd{0, 1}}, {1, 1}, 2, Rat(1, 2), Rat(1, 2), 2, false, false, 1);
          }) == "PreconditionViolated"); // not closed under reversal
    CHECK(error_kind([&] {
              substitution_search({c8}, {1}, 2, Rat(1, 2), Rat(1, 2), 8, false, false, 1);
          }) == "SearchExhausted"); // a singleton class admits one instance only
    BuildOptions tiny;
    tiny.cell_ceiling = 4;
    CHECK(error_kind([&] {
              substitution_search({c8}, {2}, 2, Rat(1, 2), Rat(1, 2), 8, false, false, 1, tiny);
          }) == "CapacityExceeded");
}

TEST_CASE("toy tower: sizes, letters, and the split tree") {
    const auto& t = toy_tower();
    REQUIRE(t.size() == 4);

    CHECK(t[1].word_count() == 4);
    CHECK(t[2].word_count() == 8);
    CHECK(t[3].word_count() == 16);
    CHECK(t[1].K == 32);
    CHECK(t[2].K == 32 * 64);
    CHECK(t[3].K == u64(32) * 64 * 128);
    for (unsigned m = 1; m <= 3; ++m) {
        CHECK(t[m].split == 2);
        CHECK(t[m].n == m);
        CHECK_FALSE(t[m].omega_hit.has_value());
        // Letters fit under the default ceiling at this scale.
        REQUIRE(t[m].letters.size() == t[m].word_count());
        CHECK(t[m].letters[0].size() == t[m].K);
    }

    // Every word uses each previous-stage word exactly kmax^2 = 16 times.
    for (unsigned m = 1; m <= 3; ++m) {
        const u32 s_prev = static_cast<u32>(t[m - 1].word_count());
        for (const auto& w : t[m].blocks) {
            const auto h = block_histogram(w, s_prev);
            for (u32 x = 0; x < s_prev; ++x) CHECK(h[x] == 16);
        }
    }

    // Finest-class siblings share the long initial stem and differ in the
    // short final region.
    for (unsigned m = 1; m <= 3; ++m) {
        const std::size_t k = t[m].blocks[0].size();
        const std::size_t tail = 4 * t[m - 1].word_count(); // kmax * s
        const std::size_t stem = k - tail;
        for (std::size_t w = 0; w < t[m].word_count(); w += 2) {
            const auto& a = t[m].blocks[w];
            const auto& b = t[m].blocks[w + 1];
            CHECK(std::equal(a.begin(), a.begin() + stem, b.begin()));
            CHECK_FALSE(std::equal(a.begin() + stem, a.end(), b.begin() + stem));
        }
    }

    // Partition levels are the digits of the word index, coarsest first.
    for (unsigned m = 1; m <= 3; ++m) {
        REQUIRE(t[m].levels.size() == m);
        for (unsigned i = 1; i <= m; ++i) {
            CHECK(t[m].level_counts[i - 1] == (u32(1) << i));
            const u32 shift = m + 1 - i;
            for (u32 w = 0; w < t[m].word_count(); ++w)
                CHECK(t[m].levels[i - 1][w] == (w >> shift));
        }
    }

    // Letters are the concatenation of the letters of the blocks.
    const std::string& w0 = t[3].letters[0];
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(w0.compare(j * t[2].K, t[2].K, t[2].letters[t[3].blocks[0][j]]) == 0);
    CHECK(letter_at(t, 3, 5, 0) == t[3].letters[5][0]);
    CHECK(letter_at(t, 3, 5, 12345) == t[3].letters[5][12345]);
    CHECK(word_letters(t, 2, 3) == t[2].letters[3]);
}

TEST_CASE("toy tower: the level actions are free involutions subordinate to the tree") {
    const auto& t = toy_tower();
    // Stage 1 has the single finest action swapping the two stem classes.
    REQUIRE(t[1].actions.size() == 1);
    CHECK(t[1].actions[0] == std::vector<u32>{1, 0});
    REQUIRE(t[1].revmap.size() == 1);
    CHECK(t[1].revmap[0] == std::vector<u32>{0, 1});

    for (unsigned m = 2; m <= 3; ++m) {
        REQUIRE(t[m].actions.size() == m);
        for (unsigned i = 1; i <= m; ++i) {
            const auto& act = t[m].actions[i - 1];
            REQUIRE(act.size() == t[m].level_counts[i - 1]);
            for (u32 c = 0; c < act.size(); ++c) {
                CHECK(act[c] != c);          // free
                CHECK(act[act[c]] == c);     // involutive
                if (i >= 2) {
                    // Subordinate: the action commutes with passing to the
                    // parent class (index division by the split).
                    CHECK(act[c] / 2 == t[m].actions[i - 2][c / 2]);
                }
            }
        }
        // Reversal pairings exist at every level; the finest one is the
        // identity because finest class-words are constant.
        REQUIRE(t[m].revmap.size() == m);
        CHECK(t[m].revmap[m - 1].size() == t[m].level_counts[m - 1]);
        for (u32 c = 0; c < t[m].revmap[m - 1].size(); ++c) CHECK(t[m].revmap[m - 1][c] == c);
    }
}

TEST_CASE("toy tower: prefix agreement within finest classes") {
    const auto& t = toy_tower();
    for (unsigned m = 1; m <= 3; ++m) {
        const SpecReport rep = check_Q4(t, m, Rat(1, 3));
        CHECK(rep.pass);
        // The shared stems pin the disagreement into the final quarter.
        CHECK(rep.worst_deviation <= Rat(1, 4));
        CHECK(rep.worst_deviation > Rat(0));
    }
    // Hand towers: words agreeing on 9 of 10 letters pass at 1/5...
    std::vector<WordStage> hand{init_stage0()};
    WordStage h1;
    h1.n = 1;
    h1.K = 10;
    h1.split = 2;
    h1.letters = {"0000000000", "0000000001"};
    h1.levels = {{0, 0}};
    h1.level_counts = {1};
    hand.push_back(h1);
    SpecReport rep = check_Q4(hand, 1, Rat(1, 5));
    CHECK(rep.pass);
    CHECK(rep.worst_deviation == Rat(1, 10));
    // ... words disagreeing at the first letter do not.
    hand[1].letters = {"1000000000", "0000000001"};
    rep = check_Q4(hand, 1, Rat(1, 5));
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_deviation == Rat(1));
}

TEST_CASE("toy tower: partition shape holds and corruption is caught") {
    const auto& t = toy_tower();
    for (unsigned m = 1; m <= 3; ++m) CHECK(check_Q6(t, m).pass);

    // Moving one word into a foreign finest class breaks the uniform split.
    std::vector<WordStage> bad = t;
    bad[3].levels.back()[1] = 1;
    CHECK_FALSE(check_Q6(bad, 3).pass);

    // A wrong class count at any level is reported.
    std::vector<WordStage> bad2 = t;
    bad2[3].level_counts[0] = 3;
    const SpecReport rep = check_Q6(bad2, 3);
    CHECK_FALSE(rep.pass);
    CHECK(rep.counterexample.find("expected 2") != std::string::npos);
}

TEST_CASE("toy tower: shifted and aligned block statistics") {
    const auto& t = toy_tower();
    for (unsigned n = 0; n <= 2; ++n) {
        const SpecReport j10 = check_J10_1(t, n, Rat(1, 2));
        CHECK(j10.pass);
        CHECK(j10.worst_deviation > Rat(0));
        const SpecReport j11 = check_J11(t, n, Rat(1, 2));
        CHECK(j11.pass);
        const SpecReport j111 = check_J11_1(t, n, Rat(1, 2));
        CHECK(j111.pass);
    }
    // Forcing the sampled path keeps the verdict and announces itself.
    BuildOptions sampled;
    sampled.scan_ceiling = 1;
    const SpecReport rep = check_J10_1(t, 2, Rat(1, 2), sampled);
    CHECK(rep.pass);
    CHECK(rep.counterexample.find("sampled") != std::string::npos);
}

TEST_CASE("shifted statistics flag constant words exactly") {
    // Two constant words over the binary stage: every window shows one pair
    // only, deviating by exactly 3/4 from the uniform 1/4.
    std::vector<WordStage> hand{init_stage0()};
    WordStage h1;
    h1.n = 1;
    h1.K = 8;
    h1.split = 2;
    h1.blocks = {Wd(8, 0), Wd(8, 1)};
    hand.push_back(h1);
    const SpecReport rep = check_J10_1(hand, 0, Rat(1, 2));
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_deviation == Rat(3, 4));
}

TEST_CASE("toy tower: unique readability at every stage") {
    const auto& t = toy_tower();
    CHECK(check_unique_readability(t, 1).pass);
    CHECK(check_unique_readability(t, 2).pass);
    // Stage 3 through the aligned block scan (letters above the ceiling):
    // sound because stage 2 has no interior occurrence.
    BuildOptions small;
    small.letter_ceiling = u64(1) << 20;
    const SpecReport rep = check_unique_readability(t, 3, small);
    CHECK(rep.pass);
    CHECK(rep.counterexample.find("aligned") != std::string::npos);
}

TEST_CASE("stage builder validates its inputs") {
    const schedule::Schedule sched = toy_schedule();
    std::vector<WordStage> t{init_stage0()};
    // Schedule row and tower top must agree on the stage index.
    CHECK(error_kind([&] { build_stage(t, sched.stages[1], 1, true); }) ==
          "PreconditionViolated");
    // Once the action has gone trivial it cannot reopen.
    t.push_back(build_stage(t, sched.stages[0], 99, false));
    CHECK(t[1].actions[0].empty());
    CHECK(t[1].omega_hit == 1);
    CHECK(error_kind([&] { build_stage(t, sched.stages[1], 99, true); }) ==
          "PreconditionViolated");
}

TEST_CASE("stage builder is deterministic in the seed") {
    const schedule::Schedule sched = toy_schedule();
    std::vector<WordStage> t{init_stage0()};
    const WordStage a = build_stage(t, sched.stages[0], 424242, true);
    const WordStage b = build_stage(t, sched.stages[0], 424242, true);
    const WordStage c = build_stage(t, sched.stages[0], 424243, true);
    CHECK(a.blocks == b.blocks);
    CHECK(a.actions == b.actions);
    CHECK(a.blocks != c.blocks);
}

TEST_CASE("sentence-driven towers honor the refutation stage") {
    const schedule::Schedule sched = toy_schedule();
    const logic::Pi01Sentence truth = logic::classify_pi01(logic::parse_formula("forall x (x=x)"));
    const logic::Pi01Sentence lie =
        logic::classify_pi01(logic::parse_formula("forall x (x=x+1)"));

    const RphiResult good = run_Rphi(truth, 2, sched, 555);
    CHECK_FALSE(good.omega_hit.has_value());
    REQUIRE(good.stages.size() == 3);
    CHECK_FALSE(good.stages[1].actions[0].empty());
    CHECK_FALSE(good.stages[2].actions[0].empty());
    CHECK_FALSE(good.stages[2].actions[1].empty());

    const RphiResult bad = run_Rphi(lie, 2, sched, 555);
    CHECK(bad.omega_hit == 1);
    CHECK(bad.stages[1].omega_hit == 1);
    CHECK(bad.stages[2].omega_hit == 1);
    CHECK(bad.stages[1].actions[0].empty());
    CHECK(bad.stages[2].actions[0].empty());
    CHECK(bad.stages[2].actions[1].empty());

    // The first stage draws the same randomness either way (the refutation
    // only silences the action); later stages transport differently and the
    // words themselves diverge.
    CHECK(good.stages[1].blocks == bad.stages[1].blocks);
    CHECK(good.stages[2].blocks != bad.stages[2].blocks);

    // Determinism per sentence and seed.
    const RphiResult again = run_Rphi(lie, 2, sched, 555);
    CHECK(again.stages[2].blocks == bad.stages[2].blocks);
}

TEST_CASE("aligned statistics of a refuted tower collapse to the uniform base") {
    const schedule::Schedule sched = toy_schedule();
    const logic::Pi01Sentence lie =
        logic::classify_pi01(logic::parse_formula("forall x (x=x+1)"));
    const RphiResult bad = run_Rphi(lie, 2, sched, 4711);

    // With the action trivial from stage 1 on, every pair sits at depth 0 and
    // is measured against 1/s^2; the aligned diagonal of a word with itself
    // then deviates by exactly (s-1)/s^2.
    const SpecReport r01 = check_J11(bad.stages, 0, Rat(1, 2));
    CHECK(r01.pass);
    CHECK(r01.worst_deviation == Rat(1, 4));
    const SpecReport r12 = check_J11(bad.stages, 1, Rat(1, 2));
    CHECK(r12.pass);
    CHECK(r12.worst_deviation == Rat(3, 16));
}
