#pragma once

#include "pi01forge/numeric.hpp"
#include "pi01forge/odometer_words.hpp"
#include "pi01forge/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pi01forge::symbolic {
struct Window;
}

namespace pi01forge::circular {

using words::BuildOptions;
using words::WordStage;

// One stage of a circular construction sequence: the image of a word stage
// under the spacer-inserting lift.  Stage 0 is the bare alphabet (q = 1,
// p = 0); stage n+1 words arise by feeding k_n stage-n words through the
// C-operator with parameters (p_n, q_n, l_n), which makes every word exactly
// q_{n+1} = k_n * l_n * q_n^2 letters long over the alphabet extended by the
// spacer symbols b and e.
//
// `prewords` keeps the k_n-tuples of previous-stage word ids that generated
// each word, so the combinatorics survive even when q outgrows the letter
// ceiling and `letters` stays empty.  Every word of a stage carries the same
// number of spacer letters; that shared count is `be_count`.
struct CircStage {
    unsigned n = 0;
    Int q = 1;            // letters per word
    Int p = 0;            // rotation numerator paired with q
    std::uint64_t k = 0;  // previous-stage words per word (0 at stage 0)
    std::uint64_t l = 0;  // repetition parameter used to build this stage (0 at stage 0)
    Int be_count = 0;     // spacer letters per word (identical across the stage)

    std::vector<std::string> letters;                    // materialized when small
    std::vector<std::vector<std::uint32_t>> prewords;    // [word][j] -> stage n-1 word

    std::size_t word_count() const { return prewords.empty() ? letters.size() : prewords.size(); }
};

// Unique 0 <= j < q with j*p == i (mod q); the spacer-length schedule of the
// C-operator.  The q = 1 edge yields 0 for any p.
Int j_index(const Int& i, const Int& p, const Int& q);

// The C-operator: concatenates, for i = 0..q-1 and j = 0..k-1 (k = number of
// input words), the group  b^(q - j_i) . w_j^(l-1) . e^(j_i).  Every input
// must have length exactly q; the output has length k*l*q^2.
std::string c_operator(const std::vector<std::string>& words, const Int& p, const Int& q,
                       std::uint64_t l, const BuildOptions& opts = {});

// Lifts odometer stage `odo.n` onto the already lifted stages 0..odo.n-1.
// With `lifted` empty the input must be stage 0 and the lift is the identity
// on the alphabet (`params` is ignored).  Otherwise `params` must be the
// completed schedule row odo.n - 1, whose (q_n, p_n) must match the last
// lifted stage and whose (k_n, l_n) drive the C-operator.
//
// The lift re-verifies what makes it a construction step: prewords are
// uniquely readable as words over the previous stage's ids, every previous
// word occurs equally often in every preword (strong uniformity), and -- when
// letters fit the ceiling -- the materialized words are pairwise distinct, of
// length q_{n+1}, and carry exactly the predicted number of spacer letters
// (fresh spacers are k*q^2 per word, a 1/l fraction of the length).
CircStage lift_stage(const WordStage& odo, const std::vector<CircStage>& lifted,
                     const schedule::StageParams& params, const BuildOptions& opts = {});

// Letterwise factor map onto the spacer skeleton: b and e survive, every
// other letter becomes '*'.  Same-stage words project to the same skeleton.
std::string project_to_Kalpha(const std::string& w);

// Rotation-factor coordinate of the point behind `win` at stage n: with the
// principal stage-n block starting a >= 0 positions left of the origin, the
// coordinate is a * p_n / q_n mod 1.
Rat rotation_coordinate(const symbolic::Window& win, const std::vector<CircStage>& circ,
                        unsigned n);

} // namespace pi01forge::circular
