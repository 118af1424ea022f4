#pragma once

#include "pi01forge/circular.hpp"
#include "pi01forge/numeric.hpp"
#include "pi01forge/odometer_words.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pi01forge::symbolic {

// A finite window onto a bi-infinite symbolic point: letters[i] is the symbol
// at position offset + i, and the origin lies within [offset, offset + size].
// The literal form is "offset:letters", e.g. "-3:0100101".
struct Window {
    long long offset = 0;
    std::string letters;
    std::string alphabet; // informational tag, e.g. "binary" or "circular"
};

Window window_from_literal(const std::string& literal);

// The principal stage-n block of the window's point: the unique occurrence of
// a stage word on [a, b) with a <= 0 < b, found by scanning every alignment
// that fits inside the window.  No alignment matches -> NotParseable (the
// window is too short, or the origin sits on a spacer run between blocks);
// several alignments match -> AmbiguousParse (impossible for windows cut from
// a genuine concatenation of a uniquely readable collection).
struct PrincipalParse {
    long long a = 0;
    long long b = 0;
    std::uint32_t word = 0;
};

PrincipalParse principal_subword(const Window& win, const words::WordStage& stage);
PrincipalParse principal_subword(const Window& win, const circular::CircStage& stage);

// Odometer coordinate of the window's point through stage n: digits d_m with
// a_m = a_{m+1} + d_m * K_m for the principal-block starts a_0, ..., a_n, each
// cross-checked against the block structure (the principal m-block must be
// block d_m of the principal (m+1)-block).  The digits are the little-endian
// mixed-radix expansion of -a_n in the radices k_0, ..., k_{n-1}.
std::vector<std::uint32_t> odometer_coordinate(const Window& win,
                                               const std::vector<words::WordStage>& tower,
                                               unsigned n);

// Little-endian mixed-radix addition of the integer j (of either sign) with
// carries to the right; the final carry is dropped, so arithmetic is modulo
// the product of the radices.  odometer_neg is the group inverse.
std::vector<std::uint32_t> odometer_add(const std::vector<std::uint32_t>& digits, long long j,
                                        const std::vector<std::uint64_t>& radices);
std::vector<std::uint32_t> odometer_neg(const std::vector<std::uint32_t>& digits,
                                        const std::vector<std::uint64_t>& radices);

// Exact empirical distribution of stage-`level` words inside a finite string:
// weight(w) = occurrences of w / total blocks parsed.
struct EmpiricalDist {
    unsigned level = 0;
    std::map<std::uint32_t, Rat> weights;
};

// Parses `w` into stage-k blocks and counts them.  The odometer overload
// expects a plain concatenation of stage-k words; the circular overload also
// consumes the spacer letters b and e interleaved between block occurrences.
EmpiricalDist emp_dist(const std::string& w, unsigned k,
                       const std::vector<words::WordStage>& tower);
EmpiricalDist emp_dist(const std::string& w, unsigned k,
                       const std::vector<circular::CircStage>& tower);

// Variation distance: half the L1 distance over the union of supports.
Rat variation_distance(const EmpiricalDist& a, const EmpiricalDist& b);

// Whether the tail of the sequence is an eps-cluster in variation distance at
// level k: reports (via stable_from) the least N with all pairwise distances
// beyond N strictly below eps, and returns true iff that tail holds at least
// two entries.
bool generic_check(const std::vector<std::string>& seq, unsigned k, const Rat& eps,
                   const std::vector<words::WordStage>& tower,
                   std::size_t* stable_from = nullptr);
bool generic_check(const std::vector<std::string>& seq, unsigned k, const Rat& eps,
                   const std::vector<circular::CircStage>& tower,
                   std::size_t* stable_from = nullptr);

// The word-level reversal isomorphism: maps a class word of stage m (its
// blocks classified at partition level `level` of stage m-1) letterwise
// through the level's free involution g (trivial action = identity).  The
// input must be the class word of some stage-m word; the image must read as
// a reversed class word of the collection, else ClosureViolated.
std::vector<std::uint32_t> eta_g_apply(const std::vector<words::WordStage>& tower, unsigned m,
                                       unsigned level,
                                       const std::vector<std::uint32_t>& class_word);

// Certificate-level comparison of odometer radix sequences by their pools of
// prime divisors.  A prime separates the sequences only when the side missing
// it is declared closed (its prefix exhibits every prime the full sequence
// will ever use).  Equal pools with both sides closed certify non-distinct;
// anything else is Undeterminable.
struct PrimePoolVerdict {
    bool distinct = false;
    Int witness = 0; // smallest certified separating prime; 0 when none
};

PrimePoolVerdict kronecker_prime_sets(const std::vector<Int>& a, const std::vector<Int>& b,
                                      bool a_closed, bool b_closed);

} // namespace pi01forge::symbolic
