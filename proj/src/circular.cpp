#include "pi01forge/circular.hpp"

#include "pi01forge/error.hpp"
#include "pi01forge/symbolic.hpp"

#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pi01forge::circular {
namespace {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

[[noreturn]] void capacity(const std::string& msg) { fail("CapacityExceeded", msg); }
[[noreturn]] void precondition(const std::string& msg) { fail("PreconditionViolated", msg); }
[[noreturn]] void internal_invariant(const std::string& msg) { fail("InternalInvariant", msg); }

u64 to_u64(const Int& v, const char* what) {
    if (v < 0 || v > Int(std::numeric_limits<i64>::max()))
        capacity(std::string(what) + " out of machine range: " + v.str());
    return static_cast<u64>(v.convert_to<i64>());
}

// Least nonnegative inverse of p modulo q (q >= 2, gcd(p, q) = 1) by the
// extended Euclidean algorithm.
Int mod_inverse(const Int& p, const Int& q) {
    Int r0 = q, r1 = ((p % q) + q) % q;
    Int t0 = 0, t1 = 1;
    while (r1 != 0) {
        const Int quot = r0 / r1;
        Int r2 = r0 - quot * r1;
        Int t2 = t0 - quot * t1;
        r0 = r1;
        r1 = r2;
        t0 = t1;
        t1 = t2;
    }
    if (r0 != 1)
        fail("NotCoprime", "j_index: gcd(" + p.str() + ", " + q.str() + ") = " + r0.str());
    return ((t0 % q) + q) % q;
}

// Checks that the prewords are uniquely readable as words over the previous
// stage's ids: no preword may occur at an interior offset of any two-preword
// concatenation.  All prewords share length k, so offsets 0 and k are the
// plain blocks and everything strictly between is forbidden.
void check_preword_readability(const std::vector<std::vector<u32>>& prewords, u64 k) {
    for (std::size_t ui = 0; ui < prewords.size(); ++ui) {
        for (std::size_t vi = 0; vi < prewords.size(); ++vi) {
            const std::vector<u32>& u = prewords[ui];
            const std::vector<u32>& v = prewords[vi];
            for (std::size_t wi = 0; wi < prewords.size(); ++wi) {
                const std::vector<u32>& w = prewords[wi];
                for (u64 b = 1; b < k; ++b) {
                    bool match = true;
                    for (u64 j = 0; j < k && match; ++j) {
                        const u32 c = (b + j < k) ? u[b + j] : v[b + j - k];
                        if (c != w[j]) match = false;
                    }
                    if (match) {
                        std::ostringstream os;
                        os << "lift_stage: preword " << wi << " occurs at offset " << b
                           << " inside prewords " << ui << "+" << vi
                           << "; the tuples are not uniquely readable";
                        precondition(os.str());
                    }
                }
            }
        }
    }
}

} // namespace

Int j_index(const Int& i, const Int& p, const Int& q) {
    if (q < 1) precondition("j_index: q must be positive");
    if (i < 0 || i >= q) precondition("j_index: index " + i.str() + " outside [0, " + q.str() + ")");
    if (q == 1) return 0;
    const Int inv = mod_inverse(p, q);
    return (inv * i) % q;
}

std::string c_operator(const std::vector<std::string>& words, const Int& p, const Int& q,
                       std::uint64_t l, const BuildOptions& opts) {
    if (words.empty()) precondition("c_operator: needs at least one word");
    if (l < 1) precondition("c_operator: l must be positive");
    if (q < 1) precondition("c_operator: q must be positive");
    for (std::size_t j = 0; j < words.size(); ++j) {
        if (Int(words[j].size()) != q)
            fail("LengthMismatch", "c_operator: word " + std::to_string(j) + " has length " +
                                       std::to_string(words[j].size()) + ", expected q = " +
                                       q.str());
    }
    const u64 k = words.size();
    const Int out_len = Int(k) * Int(l) * q * q;
    if (out_len > Int(opts.letter_ceiling))
        capacity("c_operator: output length " + out_len.str() + " exceeds the letter ceiling");

    const u64 qm = to_u64(q, "c_operator: q");
    // j_i = p^{-1} * i mod q; computing the inverse once keeps the loop linear.
    const Int inv = (qm == 1) ? Int(0) : mod_inverse(p, q);

    std::string out;
    out.reserve(to_u64(out_len, "c_operator: output length"));
    for (u64 i = 0; i < qm; ++i) {
        const u64 ji = to_u64((inv * i) % q, "c_operator: j_i");
        for (u64 j = 0; j < k; ++j) {
            out.append(qm - ji, 'b');
            for (u64 rep = 0; rep + 1 < l; ++rep) out += words[j];
            out.append(ji, 'e');
        }
    }
    if (Int(out.size()) != out_len)
        internal_invariant("c_operator: output length disagrees with k*l*q^2");
    return out;
}

CircStage lift_stage(const WordStage& odo, const std::vector<CircStage>& lifted,
                     const schedule::StageParams& params, const BuildOptions& opts) {
    // Base of the tower: the identity lift of the alphabet.
    if (lifted.empty()) {
        if (odo.n != 0 || odo.letters.empty() || odo.K != 1)
            precondition("lift_stage: with no lifted stages the input must be stage 0");
        CircStage base;
        base.n = 0;
        base.q = 1;
        base.p = 0;
        base.letters = odo.letters;
        return base;
    }

    const CircStage& prev = lifted.back();
    if (odo.n != lifted.size() || prev.n + 1 != odo.n)
        precondition("lift_stage: input stage " + std::to_string(odo.n) +
                     " does not sit on top of the " + std::to_string(lifted.size()) +
                     " lifted stages");
    if (!params.complete || params.n + 1 != odo.n)
        precondition("lift_stage: schedule row " + std::to_string(params.n) +
                     " is not the completed row for stage " + std::to_string(odo.n - 1));
    if (params.q_n != prev.q || params.p_n != prev.p)
        fail("LengthMismatch", "lift_stage: schedule row carries q = " + params.q_n.str() +
                                   ", p = " + params.p_n.str() + " but the lifted stage has q = " +
                                   prev.q.str() + ", p = " + prev.p.str());
    if (odo.blocks.empty()) precondition("lift_stage: odometer stage carries no block data");

    const u64 k = to_u64(params.k_n, "lift_stage: k");
    const u64 l = to_u64(params.l_n, "lift_stage: l");
    if (k < 1) precondition("lift_stage: k must be positive");
    if (l < 2)
        precondition("lift_stage: l = " + std::to_string(l) +
                     " collapses the operator output; the lift needs l >= 2 to stay injective");

    const std::size_t prev_count = prev.word_count();
    if (prev_count == 0) precondition("lift_stage: previous stage is empty");

    CircStage st;
    st.n = odo.n;
    st.k = k;
    st.l = l;
    st.q = Int(k) * Int(l) * prev.q * prev.q;
    st.p = Int(k) * Int(l) * prev.p * prev.q + 1;
    st.prewords = odo.blocks;

    for (std::size_t w = 0; w < st.prewords.size(); ++w) {
        if (st.prewords[w].size() != k)
            fail("LengthMismatch", "lift_stage: preword " + std::to_string(w) + " has " +
                                       std::to_string(st.prewords[w].size()) +
                                       " blocks, schedule row says k = " + std::to_string(k));
        for (u32 id : st.prewords[w])
            if (id >= prev_count)
                precondition("lift_stage: preword references word " + std::to_string(id) +
                             " beyond the previous stage");
    }

    // Distinct prewords are what the bijectivity of the lift rides on.
    {
        std::set<std::vector<u32>> seen;
        for (std::size_t w = 0; w < st.prewords.size(); ++w)
            if (!seen.insert(st.prewords[w]).second)
                precondition("lift_stage: preword " + std::to_string(w) +
                             " duplicates an earlier one; the lift cannot be injective");
    }

    // Strong uniformity: every previous word occurs equally often in every
    // preword.  This is also what propagates "every word occurs" upward.
    if (k % prev_count != 0)
        precondition("lift_stage: k = " + std::to_string(k) + " is not a multiple of the " +
                     std::to_string(prev_count) + " previous words");
    const u64 expect = k / prev_count;
    for (std::size_t w = 0; w < st.prewords.size(); ++w) {
        std::vector<u64> cnt(prev_count, 0);
        for (u32 id : st.prewords[w]) ++cnt[id];
        for (std::size_t u = 0; u < prev_count; ++u) {
            if (cnt[u] != expect) {
                std::ostringstream os;
                os << "lift_stage: preword " << w << " holds word " << u << " " << cnt[u]
                   << " times, strong uniformity demands " << expect;
                precondition(os.str());
            }
        }
    }

    check_preword_readability(st.prewords, k);

    // Spacer bookkeeping.  Fresh spacers are k*q^2 per word -- exactly a 1/l
    // fraction of the new length, under the 1/l + 1/q budget.
    const Int fresh = Int(k) * prev.q * prev.q;
    st.be_count = fresh + prev.q * Int(l - 1) * Int(k) * prev.be_count;
    if (fresh * Int(l) != st.q)
        internal_invariant("lift_stage: fresh spacer count is not a 1/l fraction");
    if (Rat(fresh, st.q) > Rat(Int(1), params.l_n) + Rat(Int(1), prev.q))
        internal_invariant("lift_stage: spacer proportion exceeds 1/l + 1/q");

    // Materialize when the previous stage did and the letters fit.
    const Int footprint = Int(st.prewords.size()) * st.q;
    if (!prev.letters.empty() && footprint <= Int(opts.letter_ceiling)) {
        st.letters.reserve(st.prewords.size());
        std::vector<std::string> inputs(k);
        for (std::size_t w = 0; w < st.prewords.size(); ++w) {
            for (u64 j = 0; j < k; ++j) inputs[j] = prev.letters[st.prewords[w][j]];
            st.letters.push_back(c_operator(inputs, prev.p, prev.q, l, opts));
            if (Int(st.letters.back().size()) != st.q)
                internal_invariant("lift_stage: lifted word length disagrees with q");
        }
        // Injectivity of the lift, verified on the letters themselves.
        std::set<std::string> seen;
        for (std::size_t w = 0; w < st.letters.size(); ++w)
            if (!seen.insert(st.letters[w]).second)
                precondition("lift_stage: lifted words collide at word " + std::to_string(w) +
                             "; the lift is not injective");
        // Exact spacer accounting against the recurrence.
        for (std::size_t w = 0; w < st.letters.size(); ++w) {
            u64 be = 0;
            for (char c : st.letters[w])
                if (c == 'b' || c == 'e') ++be;
            if (Int(be) != st.be_count)
                internal_invariant("lift_stage: word " + std::to_string(w) + " carries " +
                                   std::to_string(be) + " spacers, bookkeeping says " +
                                   st.be_count.str());
        }
    }

    return st;
}

std::string project_to_Kalpha(const std::string& w) {
    std::string out(w);
    for (char& c : out)
        if (c != 'b' && c != 'e') c = '*';
    return out;
}

Rat rotation_coordinate(const symbolic::Window& win, const std::vector<CircStage>& circ,
                        unsigned n) {
    if (n >= circ.size())
        precondition("rotation_coordinate: stage " + std::to_string(n) + " not lifted");
    const CircStage& st = circ[n];
    const symbolic::PrincipalParse parse = symbolic::principal_subword(win, st);
    const Int a = Int(-parse.a); // left distance from the block start to the origin
    return Rat((a * st.p) % st.q, st.q);
}

} // namespace pi01forge::circular
