#pragma once

#include "pi01forge/logic.hpp"
#include "pi01forge/numeric.hpp"
#include "pi01forge/schedule.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pi01forge::words {

// One stage of the word tower.  Stage 0 is the binary alphabet; stage n+1
// words are k_n-sequences of stage-n words, stored as index sequences
// (`blocks`) so letter strings stay implicit until they fit the ceiling.
//
// Partition level i (1 <= i <= n) assigns each word a class id in
// [0, level_counts[i-1]).  `actions[i-1]` is the free involution on level-i
// classes (an empty vector marks the trivial action) and `revmap[i-1]` pairs
// each level-i class with the class whose class-word reads in reverse; at the
// finest level the class-words are constant, so the pairing is the identity.
struct WordStage {
    unsigned n = 0;
    std::uint64_t K = 1;     // letters per word
    std::uint32_t split = 2; // subclasses per class and words per finest class

    std::vector<std::vector<std::uint32_t>> blocks; // [word][j] -> stage n-1 word
    std::vector<std::string> letters;               // materialized when small

    std::vector<std::vector<std::uint32_t>> levels; // [i-1][word] -> level-i class
    std::vector<std::uint32_t> level_counts;        // [i-1] -> number of classes
    std::vector<std::vector<std::uint32_t>> actions; // [i-1] involution; {} = trivial
    std::vector<std::vector<std::uint32_t>> revmap;  // [i-1] reversal pairing

    std::optional<unsigned> omega_hit; // first stage whose action went trivial

    std::size_t word_count() const { return blocks.empty() ? letters.size() : blocks.size(); }
};

// Verdict of one combinatorial check.  `worst_deviation` and the witness are
// filled in even when the check passes; pass means worst_deviation < threshold.
struct SpecReport {
    std::string spec_id; // Q4, Q6, J10.1, J11, J11.1, UR
    Rat worst_deviation;
    Rat threshold;
    bool pass = false;
    std::string counterexample;
};

// Size and effort ceilings for builders and checkers.
struct BuildOptions {
    std::uint64_t letter_ceiling = std::uint64_t(1) << 24;      // materialize letters below this
    std::uint64_t cell_ceiling = std::uint64_t(1) << 26;        // positions x alphabet guard
    std::uint64_t enumeration_ceiling = std::uint64_t(1) << 20; // systematic fallback cap
    std::uint64_t scan_ceiling = std::uint64_t(1) << 31;        // exhaustive/sampled switch
    std::uint64_t sample_size = 4096;                           // sampled windows per report
    std::uint32_t retry_budget = 64;                            // attempts per search
};

// Result of one substitution search: `instances[c][q]` is the q-th instance of
// input class-word c (exactly E per class-word), each a k-sequence over the
// refined alphabet {0, ..., class_count*class_size - 1} where symbol q*C + t
// lies in coarse class q.  When requested, the output set is closed under the
// canonical free involutions
//   G (coarse classes):  q <-> q xor 1,
//   H (refined symbols): q*C + t <-> (q xor 1)*C + t,
// H acting on words by reverse-then-apply and reversal acting letterwise.
struct SubstitutionResult {
    std::vector<std::vector<std::vector<std::uint32_t>>> instances;
    Rat worst_deviation;
    std::uint64_t attempts = 0;
};

SubstitutionResult substitution_search(const std::vector<std::vector<std::uint32_t>>& classes,
                                       const std::vector<std::uint32_t>& class_sizes,
                                       std::uint32_t E, const Rat& eps_a, const Rat& eps_b,
                                       std::uint64_t k, bool G_free, bool H_free,
                                       std::uint64_t seed, const BuildOptions& opts = {});

// Stage 0: the two one-letter words "0" and "1" in a single class.
WordStage init_stage0();

// Builds stage n+1 on top of tower.back() (stage n) from the completed stage-n
// schedule row: k_n = kmax^2 s_n positions are filled by n class-refinement
// passes followed by a stem segment of (kmax^2 - kmax) s_n blocks (shared
// within each finest class) and a tail segment of kmax s_n blocks chosen with
// complementary letter quotas, so every stage-n word occurs exactly kmax^2
// times in every stage-(n+1) word.  `omega_open` decides whether the new
// finest-level action is a free involution (paired through the previous level)
// or trivial; word construction itself is unaffected by lower trivial levels
// only through the transports they no longer force.
WordStage build_stage(const std::vector<WordStage>& tower, const schedule::StageParams& params,
                      std::uint64_t seed, bool omega_open, const BuildOptions& opts = {});

// Prefix agreement within finest classes: worst over same-class pairs of
// 1 - lcp/K_m, measured in letters through the block tree.
SpecReport check_Q4(const std::vector<WordStage>& tower, unsigned m, const Rat& eps);

// Partition-tree shape: each level refines the previous one and splits every
// class into exactly `split` subclasses, with `split` words per finest class.
SpecReport check_Q6(const std::vector<WordStage>& tower, unsigned m);

// Shifted block-pair statistics between stages n and n+1: for every parity
// combination, shift t in [1, (1-eps) k), and window length j0 in
// [eps k, k - t], the block pairs (u[t+j], v[j]) for j < j0 are eps-close to
// uniform over parity-matched stage-n pairs.
SpecReport check_J10_1(const std::vector<WordStage>& tower, unsigned n, const Rat& eps,
                       const BuildOptions& opts = {});

// Aligned full-overlap block-pair statistics conditioned on the deepest level
// at which the two words' classes are transport-related: matched pairs carry
// frequency 1/(Q_s C_s^2) up to eps.
SpecReport check_J11(const std::vector<WordStage>& tower, unsigned n, const Rat& eps);

// Initial and final windows for word pairs with no level-1 transport relation:
// pair frequencies are eps-close to uniform over parity-matched stage-n pairs.
SpecReport check_J11_1(const std::vector<WordStage>& tower, unsigned n, const Rat& eps);

// No word may occur inside the concatenation of two words except flush at
// either end.  The string form scans all offsets directly.
bool check_unique_readability(const std::vector<std::string>& words,
                              std::string* witness = nullptr);

// Tower form: direct scan when the letters fit the ceiling; otherwise reduces
// stage m to aligned block-sequence scans, which is sound once stage m-1 has
// no interior occurrences.
SpecReport check_unique_readability(const std::vector<WordStage>& tower, unsigned m,
                                    const BuildOptions& opts = {});

// Reverse the word, then apply the involution letterwise.
std::vector<std::uint32_t> skew_diagonal_apply(const std::vector<std::uint32_t>& involution,
                                               const std::vector<std::uint32_t>& class_word);

struct RphiResult {
    std::vector<WordStage> stages; // stages[0..n]
    std::optional<unsigned> omega_hit;
};

// Builds n stages above stage 0, asking the sentence's bounded prefix check
// before each stage: while every tuple so far satisfies the matrix the new
// finest-level action is free; at the first failure (and ever after) it is
// trivial and omega_hit records that stage.
RphiResult run_Rphi(const logic::Pi01Sentence& sentence, unsigned n,
                    const schedule::Schedule& sched, std::uint64_t seed,
                    const BuildOptions& opts = {});

// Letter access through the block tree, without materialization.
char letter_at(const std::vector<WordStage>& tower, unsigned m, std::uint32_t word,
               std::uint64_t pos);
std::string word_letters(const std::vector<WordStage>& tower, unsigned m, std::uint32_t word);

} // namespace pi01forge::words
