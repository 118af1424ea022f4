#include "pi01forge/symbolic.hpp"

#include "pi01forge/error.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pi01forge::symbolic {
namespace {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

[[noreturn]] void capacity(const std::string& msg) { fail("CapacityExceeded", msg); }
[[noreturn]] void precondition(const std::string& msg) { fail("PreconditionViolated", msg); }
[[noreturn]] void internal_invariant(const std::string& msg) { fail("InternalInvariant", msg); }
[[noreturn]] void not_parseable(const std::string& msg) { fail("NotParseable", msg); }

void check_window(const Window& win, const char* who) {
    const i64 len = static_cast<i64>(win.letters.size());
    if (win.offset < -len || win.offset > 0)
        precondition(std::string(who) + ": window origin outside [offset, offset + size]");
}

// Scans every alignment of a length-K block that covers the origin and fits
// the window, and demands exactly one hit.
PrincipalParse scan_alignments(const Window& win, const std::vector<std::string>& words,
                               u64 K, unsigned n, const char* who) {
    if (words.empty()) precondition(std::string(who) + ": stage letters not materialized");
    if (K == 0) precondition(std::string(who) + ": stage has zero-length words");
    const i64 len = static_cast<i64>(win.letters.size());
    const i64 kl = static_cast<i64>(K);

    std::vector<PrincipalParse> hits;
    const i64 lo = std::max<i64>(win.offset, -kl + 1);
    const i64 hi = std::min<i64>(0, win.offset + len - kl);
    for (i64 a = lo; a <= hi; ++a) {
        const std::string_view piece(win.letters.data() + (a - win.offset), K);
        for (u32 w = 0; w < words.size(); ++w) {
            if (piece == words[w]) {
                hits.push_back(PrincipalParse{a, a + kl, w});
                break; // words are distinct; no second word matches this alignment
            }
        }
    }
    if (hits.empty())
        not_parseable(std::string(who) + ": no stage-" + std::to_string(n) +
                      " block covering the origin fits the window");
    if (hits.size() > 1) {
        std::ostringstream os;
        os << who << ": stage-" << n << " blocks match at offsets " << hits[0].a << " and "
           << hits[1].a << "; the window is not cut from a uniquely readable concatenation";
        fail("AmbiguousParse", os.str());
    }
    return hits.front();
}

// Word ids keyed by letters, for exact-chunk lookups.
std::map<std::string_view, u32> word_index(const std::vector<std::string>& words) {
    std::map<std::string_view, u32> index;
    for (u32 w = 0; w < words.size(); ++w) index.emplace(words[w], w);
    return index;
}

EmpiricalDist dist_from_counts(unsigned level, const std::map<u32, u64>& counts, u64 total) {
    if (total == 0) internal_invariant("emp_dist: no blocks counted");
    EmpiricalDist dist;
    dist.level = level;
    Rat sum = 0;
    for (const auto& [word, cnt] : counts) {
        dist.weights[word] = Rat(cnt, total);
        sum += dist.weights[word];
    }
    if (sum != 1) internal_invariant("emp_dist: weights do not sum to 1");
    return dist;
}

// Shared tail-cluster logic once the distributions are computed.
bool cluster_tail(const std::vector<EmpiricalDist>& dists, const Rat& eps,
                  std::size_t* stable_from) {
    std::size_t n = dists.size() - 1; // tail of one entry is vacuously clustered
    while (n > 0) {
        bool ok = true;
        for (std::size_t j = n; j < dists.size() && ok; ++j)
            if (variation_distance(dists[n - 1], dists[j]) >= eps) ok = false;
        if (!ok) break;
        --n;
    }
    if (stable_from) *stable_from = n;
    return n + 2 <= dists.size();
}

// Distinct primes dividing v, by trial division.
std::set<Int> prime_divisors(const Int& v) {
    if (v < 1) precondition("kronecker_prime_sets: radices must be positive");
    std::set<Int> pool;
    Int rest = v;
    for (Int d = 2; d * d <= rest; ++d) {
        if (rest % d == 0) {
            pool.insert(d);
            while (rest % d == 0) rest /= d;
        }
    }
    if (rest > 1) pool.insert(rest);
    return pool;
}

} // namespace

Window window_from_literal(const std::string& literal) {
    const std::size_t colon = literal.find(':');
    if (colon == std::string::npos)
        precondition("window literal needs the form \"offset:letters\"");
    Window win;
    try {
        std::size_t used = 0;
        win.offset = std::stoll(literal.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
        precondition("window literal has a malformed offset: " + literal.substr(0, colon));
    }
    win.letters = literal.substr(colon + 1);
    check_window(win, "window_from_literal");
    return win;
}

PrincipalParse principal_subword(const Window& win, const words::WordStage& stage) {
    check_window(win, "principal_subword");
    return scan_alignments(win, stage.letters, stage.K, stage.n, "principal_subword");
}

PrincipalParse principal_subword(const Window& win, const circular::CircStage& stage) {
    check_window(win, "principal_subword");
    if (stage.letters.empty())
        precondition("principal_subword: circular stage letters not materialized");
    if (Int(stage.letters.front().size()) != stage.q)
        precondition("principal_subword: circular stage letters disagree with q");
    return scan_alignments(win, stage.letters, stage.letters.front().size(), stage.n,
                           "principal_subword");
}

std::vector<std::uint32_t> odometer_coordinate(const Window& win,
                                               const std::vector<words::WordStage>& tower,
                                               unsigned n) {
    if (n >= tower.size())
        precondition("odometer_coordinate: stage " + std::to_string(n) + " beyond the tower");
    std::vector<PrincipalParse> parses;
    parses.reserve(n + 1);
    for (unsigned m = 0; m <= n; ++m) parses.push_back(principal_subword(win, tower[m]));

    std::vector<u32> digits(n, 0);
    for (unsigned m = 0; m < n; ++m) {
        if (tower[m + 1].blocks.empty())
            precondition("odometer_coordinate: stage " + std::to_string(m + 1) +
                         " carries no block data");
        const i64 delta = parses[m].a - parses[m + 1].a;
        const i64 Km = static_cast<i64>(tower[m].K);
        const auto& blocks = tower[m + 1].blocks[parses[m + 1].word];
        if (delta < 0 || delta % Km != 0 || delta / Km >= static_cast<i64>(blocks.size()))
            not_parseable("odometer_coordinate: stage-" + std::to_string(m) +
                          " block start is not on the stage-" + std::to_string(m + 1) +
                          " block grid");
        const u32 d = static_cast<u32>(delta / Km);
        if (blocks[d] != parses[m].word)
            not_parseable("odometer_coordinate: stage-" + std::to_string(m) + " parse is not block " +
                          std::to_string(d) + " of the stage-" + std::to_string(m + 1) + " parse");
        digits[m] = d;
    }
    return digits;
}

std::vector<std::uint32_t> odometer_add(const std::vector<std::uint32_t>& digits, long long j,
                                        const std::vector<std::uint64_t>& radices) {
    if (digits.size() != radices.size())
        precondition("odometer_add: digit and radix counts differ");
    for (std::size_t m = 0; m < digits.size(); ++m) {
        if (radices[m] == 0) precondition("odometer_add: zero radix");
        if (radices[m] > std::numeric_limits<u32>::max())
            capacity("odometer_add: radix beyond digit range");
        if (digits[m] >= radices[m]) precondition("odometer_add: digit outside its radix");
    }
    std::vector<u32> out(digits.size(), 0);
    Int carry = j;
    for (std::size_t m = 0; m < digits.size(); ++m) {
        const Int r = radices[m];
        Int t = Int(digits[m]) + carry;
        Int quot = t / r;
        Int rem = t % r;
        if (rem < 0) {
            quot -= 1;
            rem += r;
        }
        out[m] = rem.convert_to<u32>();
        carry = quot;
    }
    return out; // carry past the last digit is dropped: arithmetic mod prod(radices)
}

std::vector<std::uint32_t> odometer_neg(const std::vector<std::uint32_t>& digits,
                                        const std::vector<std::uint64_t>& radices) {
    if (digits.size() != radices.size())
        precondition("odometer_neg: digit and radix counts differ");
    std::vector<u32> complement(digits.size(), 0);
    for (std::size_t m = 0; m < digits.size(); ++m) {
        if (radices[m] == 0) precondition("odometer_neg: zero radix");
        if (digits[m] >= radices[m]) precondition("odometer_neg: digit outside its radix");
        complement[m] = static_cast<u32>(radices[m] - 1 - digits[m]);
    }
    return odometer_add(complement, 1, radices);
}

EmpiricalDist emp_dist(const std::string& w, unsigned k,
                       const std::vector<words::WordStage>& tower) {
    if (k >= tower.size())
        precondition("emp_dist: stage " + std::to_string(k) + " beyond the tower");
    const words::WordStage& st = tower[k];
    if (st.letters.empty()) precondition("emp_dist: stage letters not materialized");
    const u64 K = st.K;
    if (w.size() < K || w.size() % K != 0)
        not_parseable("emp_dist: length " + std::to_string(w.size()) +
                      " is not a positive multiple of the stage-" + std::to_string(k) +
                      " block length " + std::to_string(K));
    const auto index = word_index(st.letters);
    std::map<u32, u64> counts;
    u64 total = 0;
    for (u64 pos = 0; pos < w.size(); pos += K) {
        const auto it = index.find(std::string_view(w).substr(pos, K));
        if (it == index.end())
            not_parseable("emp_dist: chunk at position " + std::to_string(pos) +
                          " is not a stage-" + std::to_string(k) + " word");
        ++counts[it->second];
        ++total;
    }
    return dist_from_counts(k, counts, total);
}

EmpiricalDist emp_dist(const std::string& w, unsigned k,
                       const std::vector<circular::CircStage>& tower) {
    if (k >= tower.size())
        precondition("emp_dist: stage " + std::to_string(k) + " beyond the tower");
    const circular::CircStage& st = tower[k];
    if (st.letters.empty()) precondition("emp_dist: circular stage letters not materialized");
    if (Int(st.letters.front().size()) != st.q)
        precondition("emp_dist: circular stage letters disagree with q");
    const u64 K = st.letters.front().size();
    const auto index = word_index(st.letters);
    std::map<u32, u64> counts;
    u64 total = 0;
    u64 pos = 0;
    while (pos < w.size()) {
        if (pos + K <= w.size()) {
            const auto it = index.find(std::string_view(w).substr(pos, K));
            if (it != index.end()) {
                ++counts[it->second];
                ++total;
                pos += K;
                continue;
            }
        }
        if (w[pos] == 'b' || w[pos] == 'e') {
            ++pos; // spacer run between block occurrences
            continue;
        }
        not_parseable("emp_dist: position " + std::to_string(pos) + " starts neither a stage-" +
                      std::to_string(k) + " block nor a spacer");
    }
    if (total == 0)
        not_parseable("emp_dist: no full stage-" + std::to_string(k) + " block in the input");
    return dist_from_counts(k, counts, total);
}

Rat variation_distance(const EmpiricalDist& a, const EmpiricalDist& b) {
    if (a.level != b.level) precondition("variation_distance: distributions at different levels");
    Rat l1 = 0;
    for (const auto& [word, wa] : a.weights) {
        const auto it = b.weights.find(word);
        const Rat wb = (it == b.weights.end()) ? Rat(0) : it->second;
        l1 += (wa >= wb) ? Rat(wa - wb) : Rat(wb - wa);
    }
    for (const auto& [word, wb] : b.weights)
        if (a.weights.find(word) == a.weights.end()) l1 += wb;
    return l1 / 2;
}

bool generic_check(const std::vector<std::string>& seq, unsigned k, const Rat& eps,
                   const std::vector<words::WordStage>& tower, std::size_t* stable_from) {
    if (seq.size() < 2) precondition("generic_check: needs at least two words");
    std::vector<EmpiricalDist> dists;
    dists.reserve(seq.size());
    for (const auto& w : seq) dists.push_back(emp_dist(w, k, tower));
    return cluster_tail(dists, eps, stable_from);
}

bool generic_check(const std::vector<std::string>& seq, unsigned k, const Rat& eps,
                   const std::vector<circular::CircStage>& tower, std::size_t* stable_from) {
    if (seq.size() < 2) precondition("generic_check: needs at least two words");
    std::vector<EmpiricalDist> dists;
    dists.reserve(seq.size());
    for (const auto& w : seq) dists.push_back(emp_dist(w, k, tower));
    return cluster_tail(dists, eps, stable_from);
}

std::vector<std::uint32_t> eta_g_apply(const std::vector<words::WordStage>& tower, unsigned m,
                                       unsigned level,
                                       const std::vector<std::uint32_t>& class_word) {
    if (m < 1 || m >= tower.size())
        precondition("eta_g_apply: stage " + std::to_string(m) + " beyond the tower");
    const words::WordStage& st = tower[m];
    const words::WordStage& prev = tower[m - 1];
    if (st.blocks.empty()) precondition("eta_g_apply: stage carries no block data");
    if (level < 1 || level > prev.levels.size() || level > prev.level_counts.size())
        precondition("eta_g_apply: stage " + std::to_string(m - 1) + " has no partition level " +
                     std::to_string(level));
    const auto& assignment = prev.levels[level - 1];
    const u32 count = prev.level_counts[level - 1];

    // The class words of the stage: blocks classified at the chosen level.
    std::set<std::vector<u32>> collection;
    for (const auto& blocks : st.blocks) {
        std::vector<u32> cw;
        cw.reserve(blocks.size());
        for (u32 id : blocks) {
            if (id >= assignment.size())
                precondition("eta_g_apply: block id beyond the previous stage");
            cw.push_back(assignment[id]);
        }
        collection.insert(std::move(cw));
    }

    for (u32 c : class_word)
        if (c >= count) precondition("eta_g_apply: class id outside the level");
    if (collection.find(class_word) == collection.end())
        precondition("eta_g_apply: input is not the class word of any stage-" +
                     std::to_string(m) + " word");

    // The level's free involution; an empty (or absent) action is trivial.
    std::vector<u32> g;
    if (level <= prev.actions.size()) g = prev.actions[level - 1];
    if (!g.empty()) {
        if (g.size() != count) precondition("eta_g_apply: action size disagrees with the level");
        for (u32 c = 0; c < count; ++c)
            if (g[c] >= count || g[g[c]] != c)
                precondition("eta_g_apply: action is not an involution on the level");
    }

    std::vector<u32> image;
    image.reserve(class_word.size());
    for (u32 c : class_word) image.push_back(g.empty() ? c : g[c]);

    std::vector<u32> reversed(image.rbegin(), image.rend());
    if (collection.find(reversed) == collection.end())
        fail("ClosureViolated",
             "eta_g_apply: the g-image does not read as a reversed stage-" + std::to_string(m) +
                 " class word");
    return image;
}

PrimePoolVerdict kronecker_prime_sets(const std::vector<Int>& a, const std::vector<Int>& b,
                                      bool a_closed, bool b_closed) {
    if (a.empty() || b.empty()) precondition("kronecker_prime_sets: empty radix prefix");
    std::set<Int> pa, pb;
    for (const Int& v : a) pa.merge(prime_divisors(v));
    for (const Int& v : b) pb.merge(prime_divisors(v));

    // A prime certifies distinctness only when the side missing it can never
    // acquire it, i.e. that side's pool is declared closed.
    std::set<Int> certified;
    for (const Int& p : pa)
        if (pb.find(p) == pb.end() && b_closed) certified.insert(p);
    for (const Int& p : pb)
        if (pa.find(p) == pa.end() && a_closed) certified.insert(p);

    if (!certified.empty()) return PrimePoolVerdict{true, *certified.begin()};
    if (pa == pb) {
        if (a_closed && b_closed) return PrimePoolVerdict{false, 0};
        fail("Undeterminable",
             "kronecker_prime_sets: pools agree on the prefixes and are not both closed");
    }
    fail("Undeterminable",
         "kronecker_prime_sets: a prime separates the prefixes but the short side is not closed");
}

} // namespace pi01forge::symbolic
