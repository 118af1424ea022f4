#include "pi01forge/odometer_words.hpp"

#include "pi01forge/error.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pi01forge::words {
namespace {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;
using Word = std::vector<u32>;

constexpr u32 kNoClass = 0xffffffffu;

[[noreturn]] void capacity(const std::string& msg) { fail("CapacityExceeded", msg); }
[[noreturn]] void precondition(const std::string& msg) { fail("PreconditionViolated", msg); }
[[noreturn]] void internal_invariant(const std::string& msg) { fail("InternalInvariant", msg); }

u64 to_u64(const Int& v, const char* what) {
    if (v < 0 || v > Int(std::numeric_limits<i64>::max()))
        capacity(std::string(what) + " out of machine range: " + v.str());
    return static_cast<u64>(v.convert_to<i64>());
}

// Exact nonnegative fraction with 64-bit parts; comparisons run through
// 128-bit cross products, so deviations are ordered without rounding.
struct Frac {
    i64 num = 0;
    i64 den = 1;
};

bool frac_less(const Frac& a, const Frac& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}

Rat frac_rat(const Frac& f) { return Rat(Int(f.num), Int(f.den)); }

Frac rat_frac(const Rat& r, const char* what) {
    const Int n = numerator(r);
    const Int d = denominator(r);
    if (n < 0) precondition(std::string(what) + " must be nonnegative");
    const Int cap = Int(std::numeric_limits<i64>::max());
    if (n > cap || d > cap) capacity(std::string(what) + " has parts beyond machine range");
    return Frac{n.convert_to<i64>(), d.convert_to<i64>()};
}

// |c/w - 1/b| for a count c over a window of w slots against base 1/b.
Frac dev_uniform(u64 c, u64 w, u64 b) {
    i64 num = static_cast<i64>(c * b) - static_cast<i64>(w);
    if (num < 0) num = -num;
    return Frac{num, static_cast<i64>(w * b)};
}

// floor(r * k) and whether r * k is an integer, for nonnegative r.
u64 floor_mul(const Rat& r, u64 k, bool* integral = nullptr) {
    const Int num = numerator(r) * Int(k);
    const Int den = denominator(r);
    if (integral) *integral = (num % den == 0);
    if (num <= 0) return 0;
    return to_u64(num / den, "window bound");
}

u64 ceil_mul(const Rat& r, u64 k) {
    const Int num = numerator(r) * Int(k);
    const Int den = denominator(r);
    if (num <= 0) return 0;
    return to_u64((num + den - 1) / den, "window bound");
}

u32 draw_u32(std::mt19937_64& rng, u32 n) {
    return std::uniform_int_distribution<u32>(0, n - 1)(rng);
}

Word rev_word(const Word& w) { return Word(w.rbegin(), w.rend()); }

Word apply_letterwise(const std::vector<u32>& f, const Word& w) {
    Word out(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = f[w[j]];
    return out;
}

Word skew_word(const std::vector<u32>& f, const Word& w) {
    const std::size_t k = w.size();
    Word out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = f[w[k - 1 - j]];
    return out;
}

bool is_involution(const std::vector<u32>& f, bool allow_fixed) {
    for (u32 x = 0; x < f.size(); ++x) {
        if (f[x] >= f.size()) return false;
        if (f[f[x]] != x) return false;
        if (!allow_fixed && f[x] == x) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// Epoch-stamped pair histogram with count buckets.  Running maxima/minima of
// pair counts over a growing window come out in O(1) amortized per insertion,
// without clearing the arrays between windows.
// --------------------------------------------------------------------------

class EpochHist {
  public:
    void configure(u64 pair_space, u64 count_cap) {
        if (pair_space > (u64(1) << 22)) capacity("pair histogram space too large");
        cnt_.assign(pair_space, 0);
        cnt_stamp_.assign(pair_space, 0);
        bucket_.assign(count_cap + 2, 0);
        bucket_stamp_.assign(count_cap + 2, 0);
        pair_space_ = pair_space;
    }

    void begin() {
        ++epoch_;
        maxc_ = 0;
        minc_ = 0;
    }

    struct Push {
        bool max_changed = false;
        bool min_advanced = false;
        u32 old_min = 0;
    };

    Push push(u32 pair) {
        Push out;
        const u32 c = get_cnt(pair);
        set_cnt(pair, c + 1);
        set_bucket(c, get_bucket(c) - 1);
        set_bucket(c + 1, get_bucket(c + 1) + 1);
        if (c + 1 > maxc_) {
            maxc_ = c + 1;
            out.max_changed = true;
        }
        if (c == minc_ && get_bucket(minc_) == 0) {
            out.min_advanced = true;
            out.old_min = minc_;
            while (get_bucket(minc_) == 0) ++minc_;
        }
        return out;
    }

    u32 maxc() const { return maxc_; }
    u32 minc() const { return minc_; }
    u32 count(u32 pair) const { return get_cnt(pair); }

    u32 find_with_count(u32 c) const {
        for (u32 p = 0; p < pair_space_; ++p)
            if (get_cnt(p) == c) return p;
        return 0;
    }

  private:
    u32 get_cnt(u32 p) const { return cnt_stamp_[p] == epoch_ ? cnt_[p] : 0; }
    void set_cnt(u32 p, u32 v) {
        cnt_[p] = v;
        cnt_stamp_[p] = epoch_;
    }
    u64 get_bucket(u64 c) const {
        if (bucket_stamp_[c] == epoch_) return bucket_[c];
        return c == 0 ? pair_space_ : 0;
    }
    void set_bucket(u64 c, u64 v) {
        bucket_[c] = v;
        bucket_stamp_[c] = epoch_;
    }

    std::vector<u32> cnt_;
    std::vector<u64> cnt_stamp_;
    std::vector<u64> bucket_;
    std::vector<u64> bucket_stamp_;
    u64 epoch_ = 0;
    u64 pair_space_ = 0;
    u32 maxc_ = 0;
    u32 minc_ = 0;
};

// --------------------------------------------------------------------------
// Substitution collections: class-words over a coarse alphabet, refined into
// instance words over a fine alphabet whose classes are the coarse letters.
// --------------------------------------------------------------------------

struct Collection {
    std::vector<Word> carriers;              // class-words over coarse ids
    std::vector<u32> carrier_rev;            // id of the reversed class-word, or kNoClass
    std::vector<u32> h;                      // fine involution; empty = trivial
    std::vector<u32> fine_class;             // fine letter -> coarse class
    std::vector<std::vector<u32>> class_members; // coarse class -> fine letters
    u32 coarse_count = 1;
    u32 class_size = 1; // uniform class cardinality (0 = ragged, centers only)
    u32 fine_count = 1;
};

struct CheckOutcome {
    bool ok = true;
    Frac worst{0, 1};
    std::string witness = "no deviation recorded";
};

std::vector<u32> compute_rev_pairing(const std::vector<Word>& carriers) {
    std::map<Word, u32> index;
    for (u32 c = 0; c < carriers.size(); ++c) index.emplace(carriers[c], c);
    std::vector<u32> out(carriers.size(), kNoClass);
    for (u32 c = 0; c < carriers.size(); ++c) {
        auto it = index.find(rev_word(carriers[c]));
        if (it != index.end()) out[c] = it->second;
    }
    return out;
}

// Input spacing: shifted coarse-pair statistics between the class-words must
// already be near uniform, and (when demanded) every coarse letter must occur
// exactly k/Q times in every class-word.
CheckOutcome check_input_spacing(const Collection& col, u64 k, const Frac& eps_b,
                                 bool exact_freq) {
    CheckOutcome out;
    const u32 Q = col.coarse_count;
    const u64 base = static_cast<u64>(Q) * Q;
    if (exact_freq) {
        if (k % Q != 0) {
            out.ok = false;
            out.worst = Frac{1, 1};
            out.witness = "class-word length not divisible by class count";
            return out;
        }
        for (u32 c = 0; c < col.carriers.size(); ++c) {
            std::vector<u64> freq(Q, 0);
            for (u32 a : col.carriers[c]) ++freq[a];
            for (u32 a = 0; a < Q; ++a) {
                if (freq[a] != k / Q) {
                    out.ok = false;
                    out.worst = Frac{1, 1};
                    std::ostringstream os;
                    os << "class-word " << c << " carries coarse letter " << a << " " << freq[a]
                       << " times, expected " << (k / Q);
                    out.witness = os.str();
                    return out;
                }
            }
        }
    }
    if (Q == 1) return out; // pair statistics are trivially exact
    const Rat eps_rat = frac_rat(eps_b);
    const u64 imax = floor_mul(Rat(1) - eps_rat, k);
    std::vector<u32> cnt(base, 0);
    for (u32 a = 0; a < col.carriers.size(); ++a) {
        for (u32 b = 0; b < col.carriers.size(); ++b) {
            const Word& w1 = col.carriers[a];
            const Word& w2 = col.carriers[b];
            for (u64 i = 1; i <= imax && i < k; ++i) {
                std::fill(cnt.begin(), cnt.end(), 0);
                const u64 win = k - i;
                for (u64 j = 0; j < win; ++j) ++cnt[w1[i + j] * Q + w2[j]];
                for (u64 p = 0; p < base; ++p) {
                    const Frac dev = dev_uniform(cnt[p], win, base);
                    if (frac_less(out.worst, dev)) {
                        out.worst = dev;
                        std::ostringstream os;
                        os << "class-words (" << a << "," << b << ") shift " << i << " coarse pair ("
                           << (p / Q) << "," << (p % Q) << ") count " << cnt[p] << "/" << win;
                        out.witness = os.str();
                    }
                }
            }
        }
    }
    out.ok = frac_less(out.worst, eps_b);
    return out;
}

// Elements of a collection are the instance words together with the reversed
// words that are not already present; each knows which class-word it reads.
struct Element {
    Word word;
    u32 carrier = 0;
    bool reversed = false;
    u32 class_key = 0; // equal keys <=> equal class-words (reversed ones shifted)
};

// Verifies the statistical conclusions demanded of a substitution output:
//  (freq)   every fine letter close to frequency 1/|X| in every instance;
//  (match)  same-class-word pairs, optionally twisted by the fine involution,
//           concentrate matched-class letter pairs at 1/(Q C^2);
//  (window) every shifted pair of elements is near letter-pair uniform on all
//           admissible windows;
//  (center) different-orbit pairs track their class-word pair statistics.
// The window conclusion is only demanded of class-word passes and the public
// operation (`windows`); the final letter regions are too short for shifted
// windows to carry statistics, and their shifted behaviour is certified on the
// assembled words instead.
CheckOutcome verify_collection(const Collection& col,
                               const std::vector<std::vector<Word>>& children, u64 k,
                               const Frac& eps_a, bool stop_early, bool windows,
                               const BuildOptions& opts) {
    CheckOutcome out;
    const u32 X = col.fine_count;
    const u32 Q = col.coarse_count;
    const u32 C = col.class_size;
    const Rat eps_rat = frac_rat(eps_a);

    std::map<Word, std::size_t> by_word;
    std::vector<Element> els;
    for (u32 c = 0; c < children.size(); ++c) {
        for (const Word& w : children[c]) {
            if (!by_word.emplace(w, els.size()).second)
                internal_invariant("duplicate instance word in collection");
            els.push_back(Element{w, c, false, c});
        }
    }
    const std::size_t fwd_count = els.size();
    for (std::size_t e = 0; e < fwd_count; ++e) {
        Word r = rev_word(els[e].word);
        if (by_word.count(r)) continue;
        const u32 c = els[e].carrier;
        const u32 key = col.carrier_rev[c] != kNoClass
                            ? col.carrier_rev[c]
                            : static_cast<u32>(col.carriers.size()) + c;
        by_word.emplace(r, els.size());
        els.push_back(Element{std::move(r), c, true, key});
    }

    const u64 pair_space = static_cast<u64>(X) * X;
    const u64 work = static_cast<u64>(els.size()) * els.size() * k * k / 2;
    if (work > opts.scan_ceiling * 64) capacity("collection verification too large");

    auto offer = [&](const Frac& dev, auto&& note) -> bool {
        if (frac_less(out.worst, dev)) {
            out.worst = dev;
            out.witness = note();
        }
        if (!frac_less(dev, eps_a)) {
            out.ok = false;
            if (stop_early) return true;
        }
        return false;
    };

    // (freq)
    for (std::size_t e = 0; e < fwd_count; ++e) {
        std::vector<u64> freq(X, 0);
        for (u32 x : els[e].word) ++freq[x];
        for (u32 x = 0; x < X; ++x) {
            const Frac dev = dev_uniform(freq[x], k, X);
            if (offer(dev, [&] {
                    std::ostringstream os;
                    os << "letter " << x << " occurs " << freq[x] << "/" << k << " in instance "
                       << e << " of class-word " << els[e].carrier;
                    return os.str();
                }))
                return out;
        }
    }

    std::vector<u32> cnt(pair_space, 0);
    auto count_pairs = [&](const Word& a, const Word& b) {
        std::fill(cnt.begin(), cnt.end(), 0);
        for (u64 j = 0; j < k; ++j) ++cnt[a[j] * X + b[j]];
    };
    auto h_image = [&](std::size_t e) -> std::size_t {
        auto it = by_word.find(skew_word(col.h, els[e].word));
        if (it == by_word.end()) internal_invariant("collection not closed under the involution");
        return it->second;
    };

    // (match): same class-word, not involution-related, matched-class pairs.
    if (C > 0) {
        const u64 b3 = static_cast<u64>(Q) * C * C;
        for (std::size_t a = 0; a < els.size(); ++a) {
            for (std::size_t b = 0; b < els.size(); ++b) {
                if (a == b || els[a].class_key != els[b].class_key) continue;
                if (!col.h.empty() && (h_image(a) == b)) continue;
                for (int twist = 0; twist < (col.h.empty() ? 1 : 2); ++twist) {
                    const std::size_t tgt = twist ? h_image(b) : b;
                    count_pairs(els[a].word, els[tgt].word);
                    for (u32 q = 0; q < Q; ++q) {
                        for (u32 x : col.class_members[q]) {
                            for (u32 y : col.class_members[q]) {
                                const Frac dev = dev_uniform(cnt[x * X + y], k, b3);
                                if (offer(dev, [&] {
                                        std::ostringstream os;
                                        os << "matched pair (" << x << "," << y
                                           << ") in same-class instances (" << a << "," << tgt
                                           << ") count " << cnt[x * X + y] << "/" << k
                                           << " against 1/" << b3;
                                        return os.str();
                                    }))
                                    return out;
                            }
                        }
                    }
                }
            }
        }
    }

    // (center): different-orbit pairs against their class-word pair rates.
    if (C > 0) {
        std::vector<u32> ccnt(static_cast<u64>(Q) * Q, 0);
        for (std::size_t a = 0; a < els.size(); ++a) {
            for (std::size_t b = 0; b < els.size(); ++b) {
                if (a == b) continue;
                if (!col.h.empty() && h_image(a) == b) continue;
                count_pairs(els[a].word, els[b].word);
                std::fill(ccnt.begin(), ccnt.end(), 0);
                const Word& cwa = col.carriers[els[a].carrier];
                const Word& cwb = col.carriers[els[b].carrier];
                for (u64 j = 0; j < k; ++j) {
                    const u32 qa = els[a].reversed ? cwa[k - 1 - j] : cwa[j];
                    const u32 qb = els[b].reversed ? cwb[k - 1 - j] : cwb[j];
                    ++ccnt[qa * Q + qb];
                }
                for (u32 x = 0; x < X; ++x) {
                    for (u32 y = 0; y < X; ++y) {
                        const u64 cc = ccnt[col.fine_class[x] * Q + col.fine_class[y]];
                        // |cnt/k - cc/(k C^2)|
                        i64 num = static_cast<i64>(cnt[x * X + y]) * C * C - static_cast<i64>(cc);
                        if (num < 0) num = -num;
                        const Frac dev{num, static_cast<i64>(k) * C * C};
                        if (offer(dev, [&] {
                                std::ostringstream os;
                                os << "pair (" << x << "," << y << ") in instances (" << a << ","
                                   << b << ") count " << cnt[x * X + y] << "/" << k
                                   << " against class rate " << cc << "/" << k << " split by "
                                   << (C * C);
                                return os.str();
                            }))
                            return out;
                    }
                }
            }
        }
    }

    // (window): shifted pair statistics on all admissible windows.
    if (windows) {
        bool integral = false;
        const u64 tmax = floor_mul(Rat(1) - eps_rat, k, &integral);
        u64 j0min = ceil_mul(eps_rat / 2, k);
        if (j0min < 1) j0min = 1;
        EpochHist hist;
        hist.configure(pair_space, k);
        for (std::size_t a = 0; a < els.size(); ++a) {
            for (std::size_t b = 0; b < els.size(); ++b) {
                for (u64 t = 1; t <= tmax && t < k; ++t) {
                    const u64 end = k - t;
                    if (end < j0min) continue;
                    hist.begin();
                    const Word& wa = els[a].word;
                    const Word& wb = els[b].word;
                    auto window_note = [&](u32 count, u64 j0, const char* side) {
                        std::ostringstream os;
                        os << side << " pair count " << count << "/" << j0 << " at shift " << t
                           << " between instances (" << a << "," << b << ")";
                        return os.str();
                    };
                    for (u64 j = 0; j < end; ++j) {
                        const auto push = hist.push(wa[t + j] * X + wb[j]);
                        const u64 j0 = j + 1;
                        if (push.min_advanced && j0 - 1 >= j0min) {
                            const Frac dev = dev_uniform(push.old_min, j0 - 1, pair_space);
                            if (offer(dev, [&] { return window_note(push.old_min, j0 - 1, "least-hit"); }))
                                return out;
                        }
                        if (j0 < j0min) continue;
                        if (push.max_changed || j0 == j0min) {
                            const Frac dev = dev_uniform(hist.maxc(), j0, pair_space);
                            if (offer(dev, [&] { return window_note(hist.maxc(), j0, "most-hit"); }))
                                return out;
                        }
                        if (j0 == end) {
                            const Frac dev = dev_uniform(hist.minc(), j0, pair_space);
                            if (offer(dev, [&] { return window_note(hist.minc(), j0, "least-hit"); }))
                                return out;
                        }
                    }
                }
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Instance generation.  The collection-level symmetry group is generated by
// the reversal pairing and, when the fine involution exists, the skew map
// (reverse then apply); orbits are seeded with fresh instances and the rest
// filled by transport, which keeps the output closed and the induced pairing
// on instances free.
// --------------------------------------------------------------------------

struct FreshPlan {
    std::vector<std::vector<u32>> pos_by_class; // positions of each coarse class
};

FreshPlan plan_positions(const Word& cw, u32 coarse_count) {
    FreshPlan plan;
    plan.pos_by_class.assign(coarse_count, {});
    for (u32 j = 0; j < cw.size(); ++j) plan.pos_by_class[cw[j]].push_back(j);
    return plan;
}

// Balanced instance: within every coarse class the members are spread as
// evenly as the position count allows, then shuffled into place.
Word fresh_balanced(const Word& cw, const FreshPlan& plan, const Collection& col,
                    std::mt19937_64& rng) {
    Word out(cw.size(), 0);
    for (u32 q = 0; q < col.coarse_count; ++q) {
        const auto& pos = plan.pos_by_class[q];
        if (pos.empty()) continue;
        const auto& members = col.class_members[q];
        std::vector<u32> order(members);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<u32> fill;
        fill.reserve(pos.size());
        const u64 base = pos.size() / order.size();
        const u64 rem = pos.size() % order.size();
        for (std::size_t m = 0; m < order.size(); ++m)
            for (u64 r = 0; r < base + (m < rem ? 1 : 0); ++r) fill.push_back(order[m]);
        std::shuffle(fill.begin(), fill.end(), rng);
        for (std::size_t i = 0; i < pos.size(); ++i) out[pos[i]] = fill[i];
    }
    return out;
}

// Mirror-symmetric instance (word equal to its reversal), used when a fully
// self-paired class-word must hold fewer instances than its symmetry orbit.
Word fresh_mirrored(const Word& cw, const Collection& col, std::mt19937_64& rng) {
    const u64 k = cw.size();
    Word out(k, kNoClass);
    std::vector<std::vector<u32>> half_pos(col.coarse_count);
    for (u64 j = 0; j < k / 2; ++j) {
        if (cw[j] != cw[k - 1 - j])
            internal_invariant("mirrored instance requested of an asymmetric class-word");
        half_pos[cw[j]].push_back(static_cast<u32>(j));
    }
    for (u32 q = 0; q < col.coarse_count; ++q) {
        const auto& pos = half_pos[q];
        if (pos.empty()) continue;
        const auto& members = col.class_members[q];
        std::vector<u32> order(members);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<u32> fill;
        const u64 base = pos.size() / order.size();
        const u64 rem = pos.size() % order.size();
        for (std::size_t m = 0; m < order.size(); ++m)
            for (u64 r = 0; r < base + (m < rem ? 1 : 0); ++r) fill.push_back(order[m]);
        std::shuffle(fill.begin(), fill.end(), rng);
        for (std::size_t i = 0; i < pos.size(); ++i) {
            out[pos[i]] = fill[i];
            out[k - 1 - pos[i]] = fill[i];
        }
    }
    if (k % 2 == 1) {
        const u32 q = cw[k / 2];
        out[k / 2] = col.class_members[q][draw_u32(rng, static_cast<u32>(col.class_members[q].size()))];
    }
    return out;
}

struct GenOutput {
    std::vector<std::vector<Word>> children;
    std::vector<u32> child_sig; // flat index carrier*E + rank; empty if no involution
    std::vector<u32> child_rev; // flat; kNoClass when the reversed word is absent
};

// One generation attempt; nullopt signals a rejected sample (degenerate
// closure, collision, or fixed point of the induced pairing).
std::optional<GenOutput> generate_attempt(const Collection& col, const std::vector<u32>& S_map,
                                          u32 E, std::mt19937_64& rng) {
    const u32 W = static_cast<u32>(col.carriers.size());
    const bool has_S = !col.h.empty();
    std::vector<std::vector<Word>> children(W);

    enum Op { OpS = 0, OpR = 1, OpD = 2 };
    auto op_carrier = [&](int op, u32 c) -> u32 {
        switch (op) {
        case OpS: return S_map[c];
        case OpR: return col.carrier_rev[c];
        default: return S_map[col.carrier_rev[c]];
        }
    };
    auto op_word = [&](int op, const Word& w) -> Word {
        switch (op) {
        case OpS: return skew_word(col.h, w);
        case OpR: return rev_word(w);
        default: return apply_letterwise(col.h, w);
        }
    };

    for (u32 c = 0; c < W; ++c) {
        if (!children[c].empty()) continue;
        if (col.carrier_rev[c] == kNoClass)
            internal_invariant("generation requires a total reversal pairing");
        std::vector<int> stab;
        if (has_S && op_carrier(OpS, c) == c) stab.push_back(OpS);
        if (op_carrier(OpR, c) == c) stab.push_back(OpR);
        if (has_S && op_carrier(OpD, c) == c) stab.push_back(OpD);
        const u32 stab_order = 1 + static_cast<u32>(stab.size());
        const FreshPlan plan = plan_positions(col.carriers[c], col.coarse_count);

        std::map<Word, bool> chosen;
        std::vector<Word> mine;
        const u32 full = E / stab_order;
        const u32 rem = E % stab_order;
        if (rem != 0 && !(rem == 2 && stab_order == 4)) return std::nullopt;
        u32 inner = 0;
        while (mine.size() < static_cast<std::size_t>(full) * stab_order) {
            if (++inner > 64 * E) return std::nullopt;
            Word f = fresh_balanced(col.carriers[c], plan, col, rng);
            std::vector<Word> closure{f};
            for (int op : stab) closure.push_back(op_word(op, f));
            bool good = true;
            for (std::size_t i = 0; i < closure.size() && good; ++i) {
                if (chosen.count(closure[i])) good = false;
                if (has_S && skew_word(col.h, closure[i]) == closure[i]) good = false;
                for (std::size_t j = 0; j < i && good; ++j)
                    if (closure[i] == closure[j]) good = false;
            }
            if (!good) continue;
            for (Word& w : closure) {
                chosen.emplace(w, true);
                mine.push_back(std::move(w));
            }
        }
        if (rem == 2) {
            // A fully self-paired class-word with fewer slots than its orbit:
            // a mirrored instance collapses reversal, leaving an involution pair.
            u32 inner2 = 0;
            for (;;) {
                if (++inner2 > 64 * E) return std::nullopt;
                Word f = fresh_mirrored(col.carriers[c], col, rng);
                Word g = skew_word(col.h, f);
                if (f == g || chosen.count(f) || chosen.count(g)) continue;
                chosen.emplace(f, true);
                chosen.emplace(g, true);
                mine.push_back(std::move(f));
                mine.push_back(std::move(g));
                break;
            }
        }
        children[c] = std::move(mine);
        // Transport to the rest of the orbit, rank aligned.
        for (int op : {OpS, OpR, OpD}) {
            if ((op == OpS || op == OpD) && !has_S) continue;
            const u32 c2 = op_carrier(op, c);
            if (c2 == c || !children[c2].empty()) continue;
            std::vector<Word> copy;
            copy.reserve(children[c].size());
            for (const Word& w : children[c]) copy.push_back(op_word(op, w));
            children[c2] = std::move(copy);
        }
    }

    // Global sanity: distinct words, induced pairing free, reversal closed.
    std::map<Word, u32> flat;
    for (u32 c = 0; c < W; ++c) {
        if (children[c].size() != E) internal_invariant("orbit transport missed a class-word");
        for (u32 q = 0; q < E; ++q)
            if (!flat.emplace(children[c][q], c * E + q).second) return std::nullopt;
    }
    GenOutput out;
    out.children = std::move(children);
    if (has_S) {
        out.child_sig.assign(static_cast<std::size_t>(W) * E, 0);
        for (const auto& [w, id] : flat) {
            Word img = skew_word(col.h, w);
            if (img == w) return std::nullopt;
            auto it = flat.find(img);
            if (it == flat.end()) internal_invariant("instance set not closed under the skew map");
            out.child_sig[id] = it->second;
        }
    }
    out.child_rev.assign(static_cast<std::size_t>(W) * E, kNoClass);
    for (const auto& [w, id] : flat) {
        auto it = flat.find(rev_word(w));
        if (it != flat.end()) out.child_rev[id] = it->second;
    }
    return out;
}

struct PassResult {
    GenOutput gen;
    Frac worst{0, 1};
    u64 attempts = 0;
};

PassResult run_substitution(const Collection& col, const std::vector<u32>& S_map, u32 E, u64 k,
                            const Frac& eps_a, const Frac& eps_b, bool exact_freq,
                            std::mt19937_64& rng, const BuildOptions& opts, const char* label) {
    {
        const CheckOutcome hyp = check_input_spacing(col, k, eps_b, exact_freq);
        if (!hyp.ok)
            precondition(std::string(label) + ": input spacing hypothesis fails: " + hyp.witness +
                         " (deviation " + frac_rat(hyp.worst).str() + ")");
    }
    Frac best{std::numeric_limits<i64>::max(), 1};
    std::string best_note = "no admissible sample";
    for (u64 attempt = 1; attempt <= opts.retry_budget; ++attempt) {
        auto gen = generate_attempt(col, S_map, E, rng);
        if (!gen) continue;
        CheckOutcome chk = verify_collection(col, gen->children, k, eps_a, true, true, opts);
        if (chk.ok) {
            PassResult out;
            out.gen = std::move(*gen);
            out.worst = chk.worst;
            out.attempts = attempt;
            return out;
        }
        if (frac_less(chk.worst, best)) {
            best = chk.worst;
            best_note = chk.witness;
        }
    }
    fail("SearchExhausted", std::string(label) + ": no instance set admitted after " +
                                std::to_string(opts.retry_budget) + " attempts; best deviation " +
                                (best.num == std::numeric_limits<i64>::max() ? std::string("n/a")
                                                                             : frac_rat(best).str()) +
                                " (" + best_note + ")");
}

// --------------------------------------------------------------------------
// Tower plumbing.
// --------------------------------------------------------------------------

const WordStage& stage_at(const std::vector<WordStage>& tower, unsigned m, const char* who) {
    if (m >= tower.size()) precondition(std::string(who) + ": stage index beyond tower");
    return tower[m];
}

u64 uniform_block_width(const WordStage& st, const char* who) {
    if (st.blocks.empty()) precondition(std::string(who) + ": stage has no block data");
    const std::size_t k = st.blocks.front().size();
    for (const auto& b : st.blocks)
        if (b.size() != k) precondition(std::string(who) + ": ragged block data");
    return k;
}

std::vector<std::vector<u32>> members_of(const std::vector<u32>& assignment, u32 count) {
    std::vector<std::vector<u32>> out(count);
    for (u32 w = 0; w < assignment.size(); ++w) {
        if (assignment[w] >= count) precondition("class assignment out of range");
        out[assignment[w]].push_back(w);
    }
    return out;
}

} // namespace

// --------------------------------------------------------------------------
// Stage 0 and letter access.
// --------------------------------------------------------------------------

WordStage init_stage0() {
    WordStage st;
    st.n = 0;
    st.K = 1;
    st.split = 2;
    st.letters = {"0", "1"};
    return st;
}

char letter_at(const std::vector<WordStage>& tower, unsigned m, std::uint32_t word,
               std::uint64_t pos) {
    const WordStage& st = stage_at(tower, m, "letter_at");
    if (word >= st.word_count()) precondition("letter_at: word index out of range");
    if (pos >= st.K) precondition("letter_at: position beyond word length");
    if (!st.letters.empty()) return st.letters[word][pos];
    if (m == 0) precondition("letter_at: stage 0 must carry letters");
    const WordStage& prev = tower[m - 1];
    return letter_at(tower, m - 1, st.blocks[word][pos / prev.K], pos % prev.K);
}

std::string word_letters(const std::vector<WordStage>& tower, unsigned m, std::uint32_t word) {
    const WordStage& st = stage_at(tower, m, "word_letters");
    if (word >= st.word_count()) precondition("word_letters: word index out of range");
    if (!st.letters.empty()) return st.letters[word];
    if (st.K > (u64(1) << 26)) capacity("word_letters: word too long to materialize");
    std::string out;
    out.reserve(st.K);
    for (u32 b : st.blocks[word]) out += word_letters(tower, m - 1, b);
    return out;
}

std::vector<std::uint32_t> skew_diagonal_apply(const std::vector<std::uint32_t>& involution,
                                               const std::vector<std::uint32_t>& class_word) {
    if (!is_involution(involution, true)) precondition("skew_diagonal_apply: not an involution");
    for (u32 x : class_word)
        if (x >= involution.size()) precondition("skew_diagonal_apply: letter outside the action");
    return skew_word(involution, class_word);
}

// --------------------------------------------------------------------------
// Public substitution search over the canonical involutions.
// --------------------------------------------------------------------------

SubstitutionResult substitution_search(const std::vector<std::vector<std::uint32_t>>& classes,
                                       const std::vector<std::uint32_t>& class_sizes,
                                       std::uint32_t E, const Rat& eps_a, const Rat& eps_b,
                                       std::uint64_t k, bool G_free, bool H_free,
                                       std::uint64_t seed, const BuildOptions& opts) {
    if (E == 0 || E % 2 != 0) precondition("substitution_search: instance count must be even");
    if (classes.empty()) precondition("substitution_search: empty class-word list");
    if (class_sizes.empty()) precondition("substitution_search: empty class list");
    const u32 Q = static_cast<u32>(class_sizes.size());
    const u32 C = class_sizes.front();
    for (u32 s : class_sizes)
        if (s != C || s == 0) precondition("substitution_search: class sizes must be equal and positive");
    if (H_free && !G_free)
        precondition("substitution_search: a free fine involution needs a free coarse one");
    if (G_free && Q % 2 != 0)
        precondition("substitution_search: free coarse involution needs an even class count");
    const u64 X = static_cast<u64>(Q) * C;
    if (k == 0) precondition("substitution_search: empty words");
    if (k * X > opts.cell_ceiling || X > (u64(1) << 20))
        capacity("substitution_search: alphabet times length beyond the ceiling");
    for (const auto& w : classes) {
        if (w.size() != k) precondition("substitution_search: ragged class-words");
        for (u32 a : w)
            if (a >= Q) precondition("substitution_search: class-word letter out of range");
    }
    {
        std::map<Word, bool> uniq;
        for (const auto& w : classes)
            if (!uniq.emplace(w, true).second)
                precondition("substitution_search: duplicate class-words");
    }

    Collection col;
    col.carriers = classes;
    col.coarse_count = Q;
    col.class_size = C;
    col.fine_count = static_cast<u32>(X);
    col.fine_class.resize(X);
    col.class_members.assign(Q, {});
    for (u32 q = 0; q < Q; ++q)
        for (u32 t = 0; t < C; ++t) {
            col.fine_class[q * C + t] = q;
            col.class_members[q].push_back(q * C + t);
        }
    if (H_free) {
        col.h.resize(X);
        for (u32 q = 0; q < Q; ++q)
            for (u32 t = 0; t < C; ++t) col.h[q * C + t] = (q ^ 1u) * C + t;
    }
    col.carrier_rev = compute_rev_pairing(col.carriers);
    for (u32 c = 0; c < col.carriers.size(); ++c)
        if (col.carrier_rev[c] == kNoClass)
            precondition("substitution_search: class-word list not closed under reversal");

    std::vector<u32> S_map;
    if (G_free) {
        std::vector<u32> g(Q);
        for (u32 q = 0; q < Q; ++q) g[q] = q ^ 1u;
        std::map<Word, u32> index;
        for (u32 c = 0; c < col.carriers.size(); ++c) index.emplace(col.carriers[c], c);
        S_map.resize(col.carriers.size());
        for (u32 c = 0; c < col.carriers.size(); ++c) {
            auto it = index.find(skew_word(g, col.carriers[c]));
            if (it == index.end())
                precondition("substitution_search: class-word list not closed under the skew action");
            S_map[c] = it->second;
        }
    } else if (H_free) {
        S_map = col.carrier_rev; // trivial coarse action: the skew map reverses
    }

    // Feasibility floor: every class-word must admit at least E distinct
    // instances; a systematic sweep of the tiny cases reports impossibility
    // without burning the random budget.
    {
        Int room = 1;
        for (u32 q : classes.front()) {
            room *= Int(class_sizes[q]);
            if (room > Int(E)) break;
        }
        if (room < Int(E))
            fail("SearchExhausted",
                 "substitution_search: only " + room.str() +
                     " distinct instances exist per class-word, need " + std::to_string(E) +
                     " (after 1 attempts; best deviation n/a)");
    }

    std::mt19937_64 rng(seed);
    const Frac fa = rat_frac(eps_a, "eps_a");
    const Frac fb = rat_frac(eps_b, "eps_b");
    PassResult res =
        run_substitution(col, S_map, E, k, fa, fb, true, rng, opts, "substitution_search");
    SubstitutionResult out;
    out.instances = std::move(res.gen.children);
    out.worst_deviation = frac_rat(res.worst);
    out.attempts = res.attempts;
    return out;
}

// --------------------------------------------------------------------------
// Stage builder.
// --------------------------------------------------------------------------

WordStage build_stage(const std::vector<WordStage>& tower, const schedule::StageParams& params,
                      std::uint64_t seed, bool omega_open, const BuildOptions& opts) {
    if (tower.empty()) precondition("build_stage: empty tower");
    const WordStage& prev = tower.back();
    const unsigned n = prev.n;
    if (params.n != n) precondition("build_stage: schedule row does not match the top stage");
    if (!params.complete) precondition("build_stage: schedule row is not complete");
    if (params.e_n == 0) precondition("build_stage: split exponent must be positive");
    if (params.kmax_n == 0)
        precondition("build_stage: stage length is not in square-times-count shape");
    if (omega_open && prev.omega_hit)
        precondition("build_stage: cannot reopen the action after it went trivial");

    const u64 s_n = to_u64(params.s_n, "word count");
    const u64 kmax = to_u64(params.kmax_n, "kmax");
    const u64 k = to_u64(params.k_n, "stage length");
    if (prev.word_count() != s_n) precondition("build_stage: tower and schedule disagree on s_n");
    if (kmax < 2 || (kmax & (kmax - 1)) != 0)
        precondition("build_stage: kmax must be a power of two at least 2");
    if (k != kmax * kmax * s_n) precondition("build_stage: k_n != kmax^2 s_n");
    if (params.e_n > 20) capacity("build_stage: split exponent too large");
    const u32 E = u32(1) << params.e_n;

    u64 total = 1;
    for (unsigned i = 0; i < n + 2; ++i) {
        total *= E;
        if (total > (u64(1) << 26)) capacity("build_stage: stage word count beyond the ceiling");
    }
    if (total * k > opts.cell_ceiling) capacity("build_stage: stage block table beyond the ceiling");

    // Previous-stage class structure, one entry per level 0..n.
    std::vector<u32> prevL(n + 1, 1);
    for (unsigned i = 1; i <= n; ++i) {
        if (prev.levels.size() < i || prev.level_counts.size() < i)
            precondition("build_stage: previous stage lacks partition data");
        prevL[i] = prev.level_counts[i - 1];
    }
    // fine ids of level i+1 grouped under level i, and the parent maps
    auto parent_of_level = [&](unsigned i) -> std::vector<u32> {
        // class of level i+1 -> class of level i (i >= 0; level 0 is one class)
        std::vector<u32> par(i + 1 <= n ? prevL[i + 1] : 0, kNoClass);
        for (u32 w = 0; w < s_n; ++w) {
            const u32 f = prev.levels[i + 1 - 1][w];
            const u32 p = (i == 0) ? 0 : prev.levels[i - 1][w];
            if (par[f] == kNoClass)
                par[f] = p;
            else if (par[f] != p)
                precondition("build_stage: previous partitions do not refine");
        }
        return par;
    };

    std::mt19937_64 rng(seed);
    const Frac eps = rat_frac(params.eps_n, "eps_n");

    // Class-refinement passes: cw[i] are the level-i class-words over the
    // previous stage's level-i classes; sig/rvp are the induced pairings.
    std::vector<std::vector<Word>> cw(n + 1);
    std::vector<std::vector<u32>> sig(n + 2), rvp(n + 2);
    cw[0] = {Word(k, 0)};
    rvp[0] = {0};
    Frac worst{0, 1};

    for (unsigned i = 0; i < n; ++i) {
        Collection col;
        col.carriers = cw[i];
        col.carrier_rev = rvp[i];
        col.coarse_count = prevL[i];
        col.fine_count = prevL[i + 1];
        std::vector<u32> par = parent_of_level(i);
        col.fine_class = par;
        col.class_members = members_of(par, prevL[i]);
        col.class_size = static_cast<u32>(prevL[i + 1] / prevL[i]);
        col.h = prev.actions.size() > i ? prev.actions[i] : std::vector<u32>{};
        if (!col.h.empty() && !is_involution(col.h, false))
            precondition("build_stage: previous action is not a free involution");
        if (!col.h.empty() && i >= 1 && sig[i].empty())
            precondition("build_stage: action levels out of order");
        std::vector<u32> S_map;
        if (!col.h.empty()) S_map = sig[i].empty() ? rvp[i] : sig[i];
        PassResult res = run_substitution(col, S_map, E, k, eps, eps, true, rng, opts,
                                          ("class pass " + std::to_string(i)).c_str());
        if (frac_less(worst, res.worst)) worst = res.worst;
        cw[i + 1].reserve(static_cast<std::size_t>(col.carriers.size()) * E);
        for (const auto& group : res.gen.children)
            for (const Word& w : group) cw[i + 1].push_back(w);
        sig[i + 1] = std::move(res.gen.child_sig);
        rvp[i + 1] = std::move(res.gen.child_rev);
        for (u32 c : rvp[i + 1])
            if (c == kNoClass) internal_invariant("class pass lost reversal closure");
    }

    // Letters: stems shared within each finest class on the long initial
    // segment, tails with complementary letter quotas on the short final one.
    const u64 tail_blocks = kmax * s_n;
    const u64 stem_blocks = k - tail_blocks;
    const u64 kmax2 = kmax * kmax;

    Collection lcol;
    lcol.coarse_count = prevL[n];
    lcol.fine_count = static_cast<u32>(s_n);
    lcol.class_size = static_cast<u32>(s_n / prevL[n]);
    lcol.fine_class.resize(s_n);
    for (u32 w = 0; w < s_n; ++w) lcol.fine_class[w] = (n == 0) ? 0 : prev.levels[n - 1][w];
    lcol.class_members = members_of(lcol.fine_class, prevL[n]);

    const std::vector<Word>& carriers = cw[n];
    const u32 Wn = static_cast<u32>(carriers.size());

    // Region collections: the shared initial segments and the quota-bearing
    // final segments of the finest class-words, checked as collections of
    // their own (zero-shift statistics; the shifted statistics of the
    // assembled words are certified by the stage checkers).
    Collection scol = lcol;
    Collection tcol = lcol;
    for (u32 c = 0; c < Wn; ++c) {
        scol.carriers.emplace_back(carriers[c].begin(), carriers[c].begin() + stem_blocks);
        tcol.carriers.emplace_back(carriers[c].begin() + stem_blocks, carriers[c].end());
    }
    scol.carrier_rev = compute_rev_pairing(scol.carriers);
    tcol.carrier_rev = compute_rev_pairing(tcol.carriers);

    std::vector<Word> final_words;
    bool letters_ok = false;
    u64 attempts = 0;
    std::string last_note = "n/a";
    for (u64 attempt = 1; attempt <= opts.retry_budget && !letters_ok; ++attempt) {
        ++attempts;
        std::vector<std::vector<Word>> stems(Wn), tails_flat(Wn);
        bool good = true;
        std::map<Word, bool> stem_seen;
        for (u32 c = 0; c < Wn && good; ++c) {
            const Word& cwd = carriers[c];
            std::vector<std::vector<u32>> tail_pos(prevL[n]);
            std::vector<u64> tail_class_count(prevL[n], 0);
            for (u64 j = stem_blocks; j < k; ++j) {
                tail_pos[cwd[j]].push_back(static_cast<u32>(j - stem_blocks));
                ++tail_class_count[cwd[j]];
            }
            for (u32 a = 0; a < E && good; ++a) {
                // Stem: independent choices within each position's class, kept
                // only if every letter's tail quota stays feasible.
                Word stem(stem_blocks);
                std::vector<u32> cnt(s_n, 0);
                bool stem_ok = false;
                for (u32 tries = 0; tries < 256 && !stem_ok; ++tries) {
                    std::fill(cnt.begin(), cnt.end(), 0);
                    for (u64 j = 0; j < stem_blocks; ++j) {
                        const auto& mem = lcol.class_members[cwd[j]];
                        stem[j] = mem[draw_u32(rng, static_cast<u32>(mem.size()))];
                        ++cnt[stem[j]];
                    }
                    stem_ok = true;
                    for (u32 x = 0; x < s_n && stem_ok; ++x)
                        if (cnt[x] > kmax2) stem_ok = false;
                    if (stem_ok && stem_seen.count(stem)) stem_ok = false;
                }
                if (!stem_ok) {
                    good = false;
                    break;
                }
                stem_seen.emplace(stem, true);
                stems[c].push_back(stem);
                // Tails: per class, the quota multiset shuffled into place.
                std::map<Word, bool> tail_seen;
                for (u32 b = 0; b < E && good; ++b) {
                    Word tail(tail_blocks, kNoClass);
                    for (u32 P = 0; P < prevL[n]; ++P) {
                        std::vector<u32> fill;
                        u64 sum = 0;
                        for (u32 x : lcol.class_members[P]) {
                            const u64 quota = kmax2 - cnt[x];
                            sum += quota;
                            for (u64 r = 0; r < quota; ++r) fill.push_back(x);
                        }
                        if (sum != tail_class_count[P])
                            internal_invariant("tail quota does not match the tail region");
                        std::shuffle(fill.begin(), fill.end(), rng);
                        for (std::size_t i2 = 0; i2 < tail_pos[P].size(); ++i2)
                            tail[tail_pos[P][i2]] = fill[i2];
                    }
                    u32 tries = 0;
                    while (tail_seen.count(tail)) {
                        if (++tries > 64) {
                            good = false;
                            break;
                        }
                        // identical tail for this stem: reshuffle one class
                        for (u32 P = 0; P < prevL[n] && good; ++P) {
                            std::vector<u32> vals;
                            for (u32 p2 : tail_pos[P]) vals.push_back(tail[p2]);
                            std::shuffle(vals.begin(), vals.end(), rng);
                            for (std::size_t i2 = 0; i2 < tail_pos[P].size(); ++i2)
                                tail[tail_pos[P][i2]] = vals[i2];
                        }
                    }
                    if (!good) break;
                    tail_seen.emplace(tail, true);
                    tails_flat[c].push_back(std::move(tail));
                }
            }
        }
        if (!good) {
            last_note = "stem or tail sampling rejected";
            continue;
        }

        // Statistical acceptance of both regions as collections.
        CheckOutcome sres = verify_collection(scol, stems, stem_blocks, eps, true, false, opts);
        if (!sres.ok) {
            last_note = "stem statistics: " + sres.witness;
            continue;
        }
        CheckOutcome tres = verify_collection(tcol, tails_flat, tail_blocks, eps, true, false, opts);
        if (!tres.ok) {
            last_note = "tail statistics: " + tres.witness;
            continue;
        }
        if (frac_less(worst, sres.worst)) worst = sres.worst;
        if (frac_less(worst, tres.worst)) worst = tres.worst;

        // Assemble words: id = (class * E + stem) * E + tail.
        final_words.assign(static_cast<std::size_t>(Wn) * E * E, {});
        for (u32 c = 0; c < Wn; ++c)
            for (u32 a = 0; a < E; ++a)
                for (u32 b = 0; b < E; ++b) {
                    Word w = stems[c][a];
                    const Word& t = tails_flat[c][static_cast<std::size_t>(a) * E + b];
                    w.insert(w.end(), t.begin(), t.end());
                    final_words[(static_cast<std::size_t>(c) * E + a) * E + b] = std::move(w);
                }
        std::map<Word, bool> uniq;
        bool distinct = true;
        for (const Word& w : final_words)
            if (!uniq.emplace(w, true).second) distinct = false;
        if (!distinct) {
            last_note = "assembled words collide";
            continue;
        }
        if (final_words.size() != total)
            internal_invariant("assembled word count disagrees with the split tree");
        if (n == 0) {
            // Base of the parity induction: no stage-1 word may read as the
            // reversal of another; higher stages inherit this through their
            // blocks.
            bool parity_ok = true;
            for (const Word& w : final_words)
                if (uniq.count(rev_word(w))) parity_ok = false;
            if (!parity_ok) {
                last_note = "a stage-1 word equals a reversed word";
                continue;
            }
        }
        letters_ok = true;
    }
    if (!letters_ok)
        fail("SearchExhausted", "build_stage: letters pass exhausted after " +
                                    std::to_string(attempts) + " attempts (" + last_note + ")");

    // Exact occurrence counts: every previous word exactly kmax^2 times.
    for (const Word& w : final_words) {
        std::vector<u64> freq(s_n, 0);
        for (u32 x : w) ++freq[x];
        for (u32 x = 0; x < s_n; ++x)
            if (freq[x] != kmax2) internal_invariant("uniform occurrence counts violated");
    }

    WordStage st;
    st.n = n + 1;
    st.K = k * prev.K;
    st.split = E;
    st.blocks = std::move(final_words);
    st.levels.assign(n + 1, std::vector<u32>(total));
    st.level_counts.assign(n + 1, 0);
    for (unsigned i = 1; i <= n + 1; ++i) {
        u64 cls = 1;
        for (unsigned j = 0; j < i; ++j) cls *= E;
        st.level_counts[i - 1] = static_cast<u32>(cls);
        u64 per = total / cls;
        for (u64 w = 0; w < total; ++w) st.levels[i - 1][w] = static_cast<u32>(w / per);
    }

    st.actions.assign(n + 1, {});
    st.revmap.assign(n + 1, {});
    for (unsigned i = 1; i <= n; ++i) {
        st.actions[i - 1] = sig[i];
        st.revmap[i - 1] = rvp[i];
    }
    {
        const u64 stems_total = total / E;
        std::vector<u32> rid(stems_total);
        for (u64 c = 0; c < stems_total; ++c) rid[c] = static_cast<u32>(c);
        st.revmap[n] = std::move(rid); // finest class-words are constant strings
        if (omega_open) {
            std::vector<u32> act(stems_total);
            if (n == 0) {
                for (u32 j = 0; j < E; ++j) act[j] = (j + E / 2) % E;
            } else {
                for (u64 c = 0; c < stems_total / E; ++c)
                    for (u32 j = 0; j < E; ++j)
                        act[c * E + j] = sig[n][static_cast<u32>(c)] * E + j;
            }
            if (!is_involution(act, false)) internal_invariant("finest action is not free");
            st.actions[n] = std::move(act);
        }
    }
    st.omega_hit = omega_open ? std::optional<unsigned>{}
                              : std::optional<unsigned>{prev.omega_hit ? *prev.omega_hit : n + 1};

    if (static_cast<u64>(st.word_count()) * st.K <= opts.letter_ceiling && !prev.letters.empty()) {
        st.letters.reserve(st.word_count());
        for (const Word& w : st.blocks) {
            std::string s;
            s.reserve(st.K);
            for (u32 b : w) s += prev.letters[b];
            st.letters.push_back(std::move(s));
        }
    }
    return st;
}

// --------------------------------------------------------------------------
// Prefix agreement (Q4) and partition shape (Q6).
// --------------------------------------------------------------------------

namespace {

u64 lcp_letters(const std::vector<WordStage>& tower, unsigned m, u32 a, u32 b) {
    const WordStage& st = tower[m];
    if (a == b) return st.K;
    if (m == 0 || st.blocks.empty()) {
        const std::string& wa = st.letters[a];
        const std::string& wb = st.letters[b];
        u64 j = 0;
        while (j < st.K && wa[j] == wb[j]) ++j;
        return j;
    }
    const u64 Kp = tower[m - 1].K;
    const Word& wa = st.blocks[a];
    const Word& wb = st.blocks[b];
    for (std::size_t j = 0; j < wa.size(); ++j)
        if (wa[j] != wb[j]) return j * Kp + lcp_letters(tower, m - 1, wa[j], wb[j]);
    return st.K;
}

} // namespace

SpecReport check_Q4(const std::vector<WordStage>& tower, unsigned m, const Rat& eps) {
    const WordStage& st = stage_at(tower, m, "check_Q4");
    SpecReport rep;
    rep.spec_id = "Q4";
    rep.threshold = eps;
    rep.worst_deviation = Rat(0);
    rep.pass = true;
    rep.counterexample = "no partition levels; vacuous";
    if (st.levels.empty()) return rep;
    if (st.K > (u64(1) << 62)) capacity("check_Q4: word length beyond machine range");
    const auto members = members_of(st.levels.back(), st.level_counts.back());
    Frac worst{0, 1};
    std::string note = "all same-class pairs agree fully";
    for (u32 cls = 0; cls < members.size(); ++cls) {
        const auto& mem = members[cls];
        for (std::size_t i = 0; i < mem.size(); ++i)
            for (std::size_t j = i + 1; j < mem.size(); ++j) {
                const u64 lcp = lcp_letters(tower, m, mem[i], mem[j]);
                const Frac dev{static_cast<i64>(st.K - lcp), static_cast<i64>(st.K)};
                if (frac_less(worst, dev)) {
                    worst = dev;
                    std::ostringstream os;
                    os << "class " << cls << " words (" << mem[i] << "," << mem[j]
                       << ") agree on " << lcp << "/" << st.K << " letters";
                    note = os.str();
                }
            }
    }
    rep.worst_deviation = frac_rat(worst);
    rep.counterexample = note;
    rep.pass = rep.worst_deviation < eps;
    return rep;
}

SpecReport check_Q6(const std::vector<WordStage>& tower, unsigned m) {
    const WordStage& st = stage_at(tower, m, "check_Q6");
    SpecReport rep;
    rep.spec_id = "Q6";
    rep.threshold = Rat(1);
    rep.worst_deviation = Rat(0);
    rep.pass = true;
    rep.counterexample = "partition tree splits uniformly";
    auto reject = [&](const std::string& why) {
        rep.worst_deviation = Rat(1);
        rep.pass = false;
        rep.counterexample = why;
        return rep;
    };
    if (st.levels.empty()) return rep;
    const std::size_t W = st.word_count();
    if (st.level_counts.size() != st.levels.size()) return reject("level count table mismatch");
    u64 expect = 1;
    for (std::size_t i = 0; i < st.levels.size(); ++i) {
        expect *= st.split;
        if (st.levels[i].size() != W) return reject("partition level does not cover the words");
        if (st.level_counts[i] != expect)
            return reject("level " + std::to_string(i + 1) + " has " +
                          std::to_string(st.level_counts[i]) + " classes, expected " +
                          std::to_string(expect));
        for (u32 c : st.levels[i])
            if (c >= st.level_counts[i]) return reject("class id out of range");
        if (i > 0) {
            // refinement with exactly `split` subclasses per class
            std::vector<u32> parent(st.level_counts[i], kNoClass);
            for (std::size_t w = 0; w < W; ++w) {
                const u32 f = st.levels[i][w];
                const u32 p = st.levels[i - 1][w];
                if (parent[f] == kNoClass)
                    parent[f] = p;
                else if (parent[f] != p)
                    return reject("level " + std::to_string(i + 1) + " does not refine level " +
                                  std::to_string(i));
            }
            std::vector<u32> fan(st.level_counts[i - 1], 0);
            for (u32 f = 0; f < st.level_counts[i]; ++f) {
                if (parent[f] == kNoClass) return reject("empty class in the partition tree");
                ++fan[parent[f]];
            }
            for (u32 p = 0; p < st.level_counts[i - 1]; ++p)
                if (fan[p] != st.split)
                    return reject("class " + std::to_string(p) + " at level " + std::to_string(i) +
                                  " splits into " + std::to_string(fan[p]) + " subclasses, expected " +
                                  std::to_string(st.split));
        }
    }
    std::vector<u32> size(st.level_counts.back(), 0);
    for (std::size_t w = 0; w < W; ++w) ++size[st.levels.back()[w]];
    for (u32 c = 0; c < st.level_counts.back(); ++c)
        if (size[c] != st.split)
            return reject("finest class " + std::to_string(c) + " holds " + std::to_string(size[c]) +
                          " words, expected " + std::to_string(st.split));
    return rep;
}

// --------------------------------------------------------------------------
// Shifted pair statistics (J10.1) and windowed unrelated-pair statistics
// (J11.1); both scan parity-resolved block sequences.
// --------------------------------------------------------------------------

namespace {

std::vector<std::vector<Word>> parity_seqs(const WordStage& st) {
    std::vector<std::vector<Word>> seq(2);
    seq[0] = st.blocks;
    seq[1].reserve(st.blocks.size());
    for (const Word& w : st.blocks) seq[1].push_back(rev_word(w));
    return seq;
}

} // namespace

SpecReport check_J10_1(const std::vector<WordStage>& tower, unsigned n, const Rat& eps,
                       const BuildOptions& opts) {
    const WordStage& prev = stage_at(tower, n, "check_J10_1");
    const WordStage& cur = stage_at(tower, n + 1, "check_J10_1");
    const u64 k = uniform_block_width(cur, "check_J10_1");
    const u64 s = prev.word_count();
    SpecReport rep;
    rep.spec_id = "J10.1";
    rep.threshold = eps;
    rep.worst_deviation = Rat(0);

    bool integral = false;
    u64 tmax = floor_mul(Rat(1) - eps, k, &integral);
    if (integral && tmax > 0) --tmax; // strict upper bound on the shift
    u64 j0min = ceil_mul(eps, k);
    if (j0min < 1) j0min = 1;
    if (tmax < 1 || j0min > k - 1) {
        rep.pass = true;
        rep.counterexample = "no admissible shift/window at this threshold";
        return rep;
    }

    const u64 pair_space = s * s;
    const u64 W = cur.word_count();
    EpochHist hist;
    hist.configure(pair_space, k);
    auto seqs = parity_seqs(cur);

    Frac worst{0, 1};
    std::string note = "no window deviates";
    auto offer = [&](u32 count, u64 j0, u64 t, u32 pu, u32 u, u32 pv, u32 v, const char* side) {
        const Frac dev = dev_uniform(count, j0, pair_space);
        if (frac_less(worst, dev)) {
            worst = dev;
            std::ostringstream os;
            os << side << " pair count " << count << "/" << j0 << " at shift " << t << " between "
               << (pu ? "rev " : "") << "word " << u << " and " << (pv ? "rev " : "") << "word "
               << v;
            note = os.str();
        }
    };
    auto scan = [&](u32 pu, u32 u, u32 pv, u32 v, u64 t) {
        const Word& a = seqs[pu][u];
        const Word& b = seqs[pv][v];
        const u64 end = k - t;
        if (end < j0min) return;
        hist.begin();
        for (u64 j = 0; j < end; ++j) {
            const auto push = hist.push(a[t + j] * static_cast<u32>(s) + b[j]);
            const u64 j0 = j + 1;
            if (push.min_advanced && j0 - 1 >= j0min)
                offer(push.old_min, j0 - 1, t, pu, u, pv, v, "least-hit");
            if (j0 < j0min) continue;
            if (push.max_changed || j0 == j0min) offer(hist.maxc(), j0, t, pu, u, pv, v, "most-hit");
            if (j0 == end) offer(hist.minc(), j0, t, pu, u, pv, v, "least-hit");
        }
    };

    u64 work = 0;
    for (u64 t = 1; t <= tmax; ++t) work += (k - t);
    work *= 4 * W * W;
    if (work <= opts.scan_ceiling) {
        for (u32 pu = 0; pu < 2; ++pu)
            for (u32 u = 0; u < W; ++u)
                for (u32 pv = 0; pv < 2; ++pv)
                    for (u32 v = 0; v < W; ++v)
                        for (u64 t = 1; t <= tmax; ++t) scan(pu, u, pv, v, t);
    } else {
        const u64 sampler_seed = 0x517cc1b727220a95ull ^ (static_cast<u64>(n) << 32);
        std::mt19937_64 srng(sampler_seed);
        for (u64 m2 = 0; m2 < opts.sample_size; ++m2) {
            const u32 pu = static_cast<u32>(srng() & 1);
            const u32 pv = static_cast<u32>(srng() & 1);
            const u32 u = draw_u32(srng, static_cast<u32>(W));
            const u32 v = draw_u32(srng, static_cast<u32>(W));
            const u64 t = 1 + srng() % tmax;
            scan(pu, u, pv, v, t);
        }
        note = "sampled " + std::to_string(opts.sample_size) + " of " + std::to_string(work) +
               " scan units with fixed seed " + std::to_string(sampler_seed) + "; " + note;
    }
    rep.worst_deviation = frac_rat(worst);
    rep.counterexample = note;
    rep.pass = rep.worst_deviation < eps;
    return rep;
}

// --------------------------------------------------------------------------
// Aligned statistics by matching depth (J11) and its depth-0 complement
// (J11.1).  The matching depth of (u, v) is the deepest level at which v's
// class is reached from u's by the stored transports: identity or the level
// action for forward v, reversal pairing or its action twist when v is read
// in reverse; the finest level only ever matches a word with itself.
// --------------------------------------------------------------------------

namespace {

struct Realizer {
    unsigned s = 0;
    bool twisted = false; // true: through the level action; false: identity side
};

std::vector<Realizer> matching_depth(const WordStage& cur, unsigned n, u32 u, u32 v, bool vrev) {
    std::vector<Realizer> out;
    unsigned cap = n + 1;
    if (cur.omega_hit && *cur.omega_hit <= n + 1) cap = *cur.omega_hit - 1;
    for (unsigned i = cap; i >= 1; --i) {
        if (i == n + 1) {
            if (cur.levels.size() >= n + 1 && !vrev &&
                cur.levels[n][u] == cur.levels[n][v])
                out.push_back(Realizer{i, false});
        } else {
            if (cur.levels.size() < i) continue;
            const u32 lu = cur.levels[i - 1][u];
            const u32 lv = cur.levels[i - 1][v];
            const bool has_act = cur.actions.size() >= i && !cur.actions[i - 1].empty();
            const bool has_rev = cur.revmap.size() >= i &&
                                 cur.revmap[i - 1].size() == cur.level_counts[i - 1];
            if (!vrev) {
                if (lv == lu) out.push_back(Realizer{i, false});
                if (has_act && has_rev && lv == cur.actions[i - 1][cur.revmap[i - 1][lu]])
                    out.push_back(Realizer{i, true});
            } else {
                if (has_rev && lv == cur.revmap[i - 1][lu]) out.push_back(Realizer{i, false});
                if (has_act && lv == cur.actions[i - 1][lu]) out.push_back(Realizer{i, true});
            }
        }
        if (!out.empty()) return out;
    }
    out.push_back(Realizer{0, false});
    return out;
}

} // namespace

SpecReport check_J11(const std::vector<WordStage>& tower, unsigned n, const Rat& eps) {
    const WordStage& prev = stage_at(tower, n, "check_J11");
    const WordStage& cur = stage_at(tower, n + 1, "check_J11");
    const u64 k = uniform_block_width(cur, "check_J11");
    const u64 s = prev.word_count();
    const u64 W = cur.word_count();
    SpecReport rep;
    rep.spec_id = "J11";
    rep.threshold = eps;

    if (s * s > (u64(1) << 22)) capacity("check_J11: pair table too large");
    std::vector<u32> cnt(s * s, 0);
    auto seqs = parity_seqs(cur);
    Frac worst{0, 1};
    std::string note = "no pair deviates";

    auto offer = [&](u64 count, u64 b, u32 u, u32 v, bool vrev, const Realizer& r, u32 x, u32 y) {
        const Frac dev = dev_uniform(count, k, b);
        if (frac_less(worst, dev)) {
            worst = dev;
            std::ostringstream os;
            os << "word " << u << " against " << (vrev ? "rev " : "") << "word " << v
               << " at depth " << r.s << (r.twisted ? " (action side)" : "") << ": pair (" << x
               << "," << y << ") count " << count << "/" << k << " against 1/" << b;
            note = os.str();
        }
    };

    for (u32 u = 0; u < W; ++u) {
        for (u32 vr = 0; vr < 2; ++vr) {
            for (u32 v = 0; v < W; ++v) {
                const bool vrev = vr == 1;
                const auto realizers = matching_depth(cur, n, u, v, vrev);
                std::fill(cnt.begin(), cnt.end(), 0);
                const Word& a = seqs[0][u];
                const Word& b = seqs[vr][v];
                for (u64 j = 0; j < k; ++j) ++cnt[a[j] * s + b[j]];
                for (const Realizer& r : realizers) {
                    if (r.s == 0) {
                        const u64 base = s * s;
                        for (u32 x = 0; x < s; ++x)
                            for (u32 y = 0; y < s; ++y)
                                offer(cnt[x * s + y], base, u, v, vrev, r, x, y);
                    } else if (r.s == n + 1) {
                        for (u32 x = 0; x < s; ++x) offer(cnt[x * s + x], s, u, v, vrev, r, x, x);
                    } else {
                        if (prev.levels.size() < r.s) continue;
                        const u32 Qs = prev.level_counts[r.s - 1];
                        const u32 Cs = static_cast<u32>(s / Qs);
                        const u64 base = static_cast<u64>(Qs) * Cs * Cs;
                        const auto& lv = prev.levels[r.s - 1];
                        const std::vector<u32>* act =
                            (r.twisted && prev.actions.size() >= r.s) ? &prev.actions[r.s - 1]
                                                                      : nullptr;
                        if (r.twisted && (!act || act->empty())) continue;
                        for (u32 x = 0; x < s; ++x) {
                            const u32 want = r.twisted ? (*act)[lv[x]] : lv[x];
                            for (u32 y = 0; y < s; ++y)
                                if (lv[y] == want) offer(cnt[x * s + y], base, u, v, vrev, r, x, y);
                        }
                    }
                }
            }
        }
    }
    rep.worst_deviation = frac_rat(worst);
    rep.counterexample = note;
    rep.pass = rep.worst_deviation < eps;
    return rep;
}

SpecReport check_J11_1(const std::vector<WordStage>& tower, unsigned n, const Rat& eps) {
    const WordStage& prev = stage_at(tower, n, "check_J11_1");
    const WordStage& cur = stage_at(tower, n + 1, "check_J11_1");
    const u64 k = uniform_block_width(cur, "check_J11_1");
    const u64 s = prev.word_count();
    const u64 W = cur.word_count();
    SpecReport rep;
    rep.spec_id = "J11.1";
    rep.threshold = eps;
    rep.worst_deviation = Rat(0);

    u64 j0min = ceil_mul(eps, k);
    if (j0min < 1) j0min = 1;
    if (j0min > k) {
        rep.pass = true;
        rep.counterexample = "no admissible window at this threshold";
        return rep;
    }
    const u64 pair_space = s * s;
    EpochHist hist;
    hist.configure(pair_space, k);
    auto seqs = parity_seqs(cur);
    Frac worst{0, 1};
    std::string note = "no unrelated pair deviates";
    u64 pairs_checked = 0;

    auto offer = [&](u32 count, u64 j0, u32 u, u32 v, bool vrev, const char* side) {
        const Frac dev = dev_uniform(count, j0, pair_space);
        if (frac_less(worst, dev)) {
            worst = dev;
            std::ostringstream os;
            os << side << " pair count " << count << "/" << j0 << " between word " << u << " and "
               << (vrev ? "rev " : "") << "word " << v;
            note = os.str();
        }
    };

    for (u32 u = 0; u < W; ++u) {
        for (u32 vr = 0; vr < 2; ++vr) {
            for (u32 v = 0; v < W; ++v) {
                const bool vrev = vr == 1;
                const auto realizers = matching_depth(cur, n, u, v, vrev);
                if (realizers.front().s != 0) continue;
                ++pairs_checked;
                const Word& a = seqs[0][u];
                const Word& b = seqs[vr][v];
                for (int dir = 0; dir < 2; ++dir) {
                    hist.begin();
                    for (u64 step = 0; step < k; ++step) {
                        const u64 j = dir == 0 ? step : k - 1 - step;
                        const auto push = hist.push(a[j] * static_cast<u32>(s) + b[j]);
                        const u64 j0 = step + 1;
                        if (push.min_advanced && j0 - 1 >= j0min)
                            offer(push.old_min, j0 - 1, u, v, vrev,
                                  dir == 0 ? "initial least-hit" : "final least-hit");
                        if (j0 < j0min) continue;
                        if (push.max_changed || j0 == j0min)
                            offer(hist.maxc(), j0, u, v, vrev,
                                  dir == 0 ? "initial most-hit" : "final most-hit");
                        if (j0 == k)
                            offer(hist.minc(), j0, u, v, vrev,
                                  dir == 0 ? "initial least-hit" : "final least-hit");
                    }
                }
            }
        }
    }
    rep.worst_deviation = frac_rat(worst);
    rep.counterexample =
        note + " (" + std::to_string(pairs_checked) + " depth-0 pairs scanned)";
    rep.pass = rep.worst_deviation < eps;
    return rep;
}

// --------------------------------------------------------------------------
// Unique readability.
// --------------------------------------------------------------------------

bool check_unique_readability(const std::vector<std::string>& words, std::string* witness) {
    if (words.empty()) precondition("check_unique_readability: empty word list");
    const std::size_t K = words.front().size();
    for (const auto& w : words)
        if (w.size() != K) precondition("check_unique_readability: unequal word lengths");
    for (std::size_t ui = 0; ui < words.size(); ++ui) {
        for (std::size_t vi = 0; vi < words.size(); ++vi) {
            const std::string uv = words[ui] + words[vi];
            for (std::size_t wi = 0; wi < words.size(); ++wi) {
                const std::string& w = words[wi];
                for (std::size_t b = 1; b + K <= uv.size() && b < uv.size(); ++b) {
                    if (b == K) continue; // flush against the seam is a plain block
                    bool match = true;
                    for (std::size_t j = 0; j < K && match; ++j)
                        if (uv[b + j] != w[j]) match = false;
                    if (match) {
                        if (witness) {
                            std::ostringstream os;
                            os << "word " << wi << " occurs in " << ui << "+" << vi
                               << " at offset " << b;
                            *witness = os.str();
                        }
                        return false;
                    }
                }
            }
        }
    }
    if (witness) *witness = "no interior occurrence";
    return true;
}

SpecReport check_unique_readability(const std::vector<WordStage>& tower, unsigned m,
                                    const BuildOptions& opts) {
    const WordStage& st = stage_at(tower, m, "check_unique_readability");
    SpecReport rep;
    rep.spec_id = "UR";
    rep.threshold = Rat(1);
    rep.worst_deviation = Rat(0);
    rep.pass = true;
    const u64 footprint = static_cast<u64>(st.word_count()) * st.K;
    if (m == 0 || footprint <= opts.letter_ceiling) {
        std::vector<std::string> ws;
        ws.reserve(st.word_count());
        for (u32 w = 0; w < st.word_count(); ++w) ws.push_back(word_letters(tower, m, w));
        std::string note;
        const bool ok = check_unique_readability(ws, &note);
        rep.pass = ok;
        rep.worst_deviation = ok ? Rat(0) : Rat(1);
        rep.counterexample = note;
        return rep;
    }
    // Too large to materialize: once the previous stage has no interior
    // occurrence, any occurrence here must align on block boundaries, so the
    // block-id sequences carry the whole question.
    SpecReport sub = check_unique_readability(tower, m - 1, opts);
    if (!sub.pass)
        capacity("check_unique_readability: previous stage has interior matches; "
                 "letter materialization would be required at stage " +
                 std::to_string(m));
    const u64 k = uniform_block_width(st, "check_unique_readability");
    const u64 Kp = tower[m - 1].K;
    for (u32 ui = 0; ui < st.word_count(); ++ui) {
        for (u32 vi = 0; vi < st.word_count(); ++vi) {
            Word uv = st.blocks[ui];
            uv.insert(uv.end(), st.blocks[vi].begin(), st.blocks[vi].end());
            for (u32 wi = 0; wi < st.word_count(); ++wi) {
                const Word& w = st.blocks[wi];
                for (u64 b = 1; b + k <= uv.size(); ++b) {
                    if (b == k) continue;
                    bool match = true;
                    for (u64 j = 0; j < k && match; ++j)
                        if (uv[b + j] != w[j]) match = false;
                    if (match) {
                        rep.pass = false;
                        rep.worst_deviation = Rat(1);
                        std::ostringstream os;
                        os << "word " << wi << " occurs in " << ui << "+" << vi
                           << " at letter offset " << (b * Kp);
                        rep.counterexample = os.str();
                        return rep;
                    }
                }
            }
        }
    }
    rep.counterexample = "no interior occurrence (aligned scan over block ids)";
    return rep;
}

// --------------------------------------------------------------------------
// Sentence-driven tower construction.
// --------------------------------------------------------------------------

RphiResult run_Rphi(const logic::Pi01Sentence& sentence, unsigned n,
                    const schedule::Schedule& sched, std::uint64_t seed,
                    const BuildOptions& opts) {
    RphiResult out;
    out.stages.push_back(init_stage0());
    std::mt19937_64 master(seed);
    for (unsigned i = 0; i < n; ++i) {
        if (sched.stages.size() <= i || !sched.stages[i].complete)
            precondition("run_Rphi: schedule does not cover stage " + std::to_string(i));
        const u64 stage_seed = master();
        bool open = false;
        if (!out.omega_hit) {
            const auto pc = logic::check_prefix(sentence, Int(i));
            if (pc.all_true)
                open = true;
            else
                out.omega_hit = i + 1;
        }
        out.stages.push_back(build_stage(out.stages, sched.stages[i], stage_seed, open, opts));
    }
    return out;
}

} // namespace pi01forge::words
