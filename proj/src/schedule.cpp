#include "pi01forge/schedule.hpp"

#include "pi01forge/error.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <vector>

namespace pi01forge::schedule {

namespace {

// floor(log2(x)) for rational x > 0.
std::int64_t floor_log2_rat(const Rat& x) {
    Int num = rat_num(x);
    Int den = rat_den(x);
    if (num <= 0) fail("InconsistentOverride", "floor_log2_rat: argument must be positive");
    auto pow2_le = [&](std::int64_t e) {
        // 2^e <= num/den ?
        if (e >= 0) return den << static_cast<unsigned>(e) <= num;
        return den <= num << static_cast<unsigned>(-e);
    };
    std::int64_t t = static_cast<std::int64_t>(floor_log2(num)) -
                     static_cast<std::int64_t>(floor_log2(den));
    while (!pow2_le(t)) --t;
    while (pow2_le(t + 1)) ++t;
    return t;
}

Int floor_rat(const Rat& x) {
    Int n = rat_num(x);
    Int d = rat_den(x);
    Int q = n / d;
    if (n < 0 && q * d != n) --q;
    return q;
}

// Witness strings stay readable even when the exact values have 10^5 digits.
std::string int_brief(const Int& v) {
    if (v < 0) return "-" + int_brief(-v);
    if (v < Int("1000000000000")) return int_to_string(v);
    return "~2^" + std::to_string(static_cast<unsigned long long>(floor_log2(v)));
}

std::string rat_brief(const Rat& r) {
    if (r == 0) return "0";
    if (r < 0) return "-" + rat_brief(-r);
    if (rat_num(r) < 1000000 && rat_den(r) < 1000000) return rat_to_string(r);
    return "~2^" + std::to_string(static_cast<long long>(floor_log2_rat(r)));
}

Int parse_positive_int(const std::string& key, const std::string& text) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
        fail("InconsistentOverride", "override " + key + ": expected a positive integer, got '" + text + "'");
    Int v = int_from_string(text);
    if (v < 1) fail("InconsistentOverride", "override " + key + ": must be >= 1");
    return v;
}

Rat parse_positive_rat(const std::string& key, const std::string& text) {
    auto slash = text.find('/');
    Int num, den = 1;
    if (slash == std::string::npos) {
        num = parse_positive_int(key, text);
    } else {
        num = parse_positive_int(key, text.substr(0, slash));
        den = parse_positive_int(key, text.substr(slash + 1));
    }
    return Rat(num, den);
}

const char* const kOverridePrefixes[] = {"k", "kmax", "l", "e", "eps", "vareps", "mu"};

void validate_override_keys(const ScheduleOptions& opts) {
    for (const auto& [key, value] : opts.overrides) {
        auto us = key.rfind('_');
        bool ok = us != std::string::npos && us + 1 < key.size();
        if (ok) {
            std::string prefix = key.substr(0, us);
            std::string suffix = key.substr(us + 1);
            ok = std::any_of(std::begin(kOverridePrefixes), std::end(kOverridePrefixes),
                             [&](const char* p) { return prefix == p; }) &&
                 suffix.find_first_not_of("0123456789") == std::string::npos;
        }
        if (!ok)
            fail("InconsistentOverride",
                 "unrecognized override key '" + key + "' (expected <name>_<stage>)");
        (void)value;
    }
}

std::optional<std::string> find_override(const Schedule& sched, const char* prefix, unsigned stage) {
    auto it = sched.opts.overrides.find(std::string(prefix) + "_" + std::to_string(stage));
    if (it == sched.opts.overrides.end()) return std::nullopt;
    return it->second;
}

// Least power of two kmax such that k = kmax^2 s_m clears every lower bound the
// word construction and the audit catalogue impose on k_m (all monotone in kmax).
Int choose_kmax(unsigned m, const Rat& eps, const Int& s_m, std::uint64_t e_m,
                std::uint64_t e_prev, const Rat& prev_prod, const Int& k_floor) {
    Rat eps3 = eps * eps * eps;
    Int s_sq = s_m * s_m;
    Int twelve_m = pow_int(12, m);
    Int ratio_n8 = Int(m + 2) * Int(e_m);
    Int weight_n8 = Int(m + 1) * Int(e_prev);
    auto ok = [&](std::uint64_t a) {
        Int kmax = pow_int(2, a);
        Int k = kmax * kmax * s_m;
        Rat kq(k);
        if (Rat(kmax) * eps <= 1) return false;       // prefix-agreement clearance 1/kmax < eps
        if (kq * eps3 <= 100) return false;           // 1/k < eps^3/100 (and a fortiori /4)
        if (kq * eps < Rat(s_sq)) return false;       // k >= s^2/eps
        if (kq * eps < Rat(Int(m))) return false;     // k >= m/eps
        if (kq * eps <= prev_prod) return false;      // eps_n k_n strictly increasing
        if (k < twelve_m) return false;               // 6^n/k_n <= 2^{-n} certificate
        if (ratio_n8 > k * weight_n8) return false;   // s_{n+1} <= s_n^{k_n}
        if (k < k_floor) return false;                // cross-input monotonicity
        return true;
    };
    std::uint64_t lo = 1, hi = 1;
    while (!ok(hi)) {
        lo = hi + 1;
        hi *= 2;
    }
    while (lo < hi) {
        std::uint64_t mid = lo + (hi - lo) / 2;
        if (ok(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    return pow_int(2, lo);
}

} // namespace

const char* req_status_name(ReqStatus s) {
    switch (s) {
    case ReqStatus::Pass: return "pass";
    case ReqStatus::Fail: return "fail";
    case ReqStatus::Deferred: return "deferred";
    case ReqStatus::StrictOnly: return "strict-only";
    }
    return "?";
}

Schedule init_schedule(const ScheduleOptions& opts) {
    if (opts.N < 1) fail("InconsistentOverride", "input index N must be >= 1");
    if (!is_prime(opts.P0))
        fail("InconsistentOverride", "seed P0 = " + int_to_string(opts.P0) + " is not prime");
    if (opts.l0 < 1) fail("InconsistentOverride", "l0 must be >= 1");
    if (opts.strict && !opts.overrides.empty())
        fail("InconsistentOverride", "per-stage overrides require relaxed mode");
    validate_override_keys(opts);

    Schedule sched;
    sched.opts = opts;
    Int p = opts.P0;
    for (unsigned i = 0; i < opts.N; ++i) p = next_prime_above(p);
    sched.P_N = p;

    StageParams st;
    st.n = 0;
    st.s_n = 2; // 2^{(0+1) e(-1)}, e(-1) = 1
    st.Q1_n = 2;
    st.C1_n = 1;
    st.K_n = 1;
    st.q_n = 1;
    st.p_n = 0;
    st.alpha_n = 0;
    st.gamma_n = 1;
    sched.stages.push_back(st);
    return sched;
}

void next_stage(Schedule& sched, const NextStageHints* hints) {
    if (sched.stages.empty() || sched.stages.back().complete)
        fail("InconsistentOverride", "next_stage: schedule has no seeded stage to complete");
    const unsigned m = sched.stages.back().n;
    const std::uint64_t e_prev = m == 0 ? 1 : sched.stages[m - 1].e_n;
    const Int s_m = sched.stages[m].s_n;
    const Int Q1_m = sched.stages[m].Q1_n;
    const Int C1_m = sched.stages[m].C1_n;

    // vareps_n: eighth-ratio cascade keeps the 4x tail-domination requirement.
    Rat vareps;
    if (auto ov = find_override(sched, "vareps", m)) {
        vareps = parse_positive_rat("vareps_" + std::to_string(m), *ov);
    } else {
        Int den = Int(40) * pow_int(8, m);
        vareps = Rat(Int(1), den);
    }

    // mu_n: half of its admissible ceiling t_n min_{k<=n} 2^{-n-2}/t_k.
    auto t_of = [&](unsigned k) {
        const StageParams& sk = sched.stages[k];
        Rat ve = k == m ? vareps : sk.vareps_n;
        Rat inv_q1(Int(1), sk.Q1_n);
        return std::min(ve, inv_q1);
    };
    Rat mu_cap = Rat(Int(1), pow_int(2, m + 2)) / t_of(0);
    for (unsigned k = 1; k <= m; ++k) {
        Rat cand = Rat(Int(1), pow_int(2, m + 2)) / t_of(k);
        mu_cap = std::min(mu_cap, cand);
    }
    mu_cap *= t_of(m);
    Rat mu;
    if (auto ov = find_override(sched, "mu", m)) {
        mu = parse_positive_rat("mu_" + std::to_string(m), *ov);
    } else {
        mu = mu_cap / 2;
    }

    // eps_n: half the tightest upper bound in force.
    Rat eps;
    if (auto ov = find_override(sched, "eps", m)) {
        eps = parse_positive_rat("eps_" + std::to_string(m), *ov);
        if (eps >= 1) fail("InconsistentOverride", "eps_" + std::to_string(m) + " must lie in (0,1)");
    } else {
        Rat bound = m == 0 ? Rat(1, 40) : sched.stages[m - 1].eps_n;
        bound = std::min(bound, Rat(Int(1), pow_int(2, m)));
        bound = std::min(bound, vareps);
        if (m >= 1) {
            Int two_s_sq = 2 * s_m * s_m;
            Rat step_down = sched.stages[m - 1].eps_n / Rat(two_s_sq);
            bound = std::min(bound, step_down);
            // timing-approximation ceiling (vacuous at stage 0: no level-1 classes yet)
            bound = std::min(bound, Rat(Int(1), two_s_sq));
            Int cs = 4 * C1_m * s_m;
            Rat timing = mu / Rat(cs);
            bound = std::min(bound, timing);
        }
        eps = bound / 2;
    }

    // e_n: least multiple of (n+1) e(n-1) clearing the 2^n 2^{-e(n)} < eps_n growth
    // floor, so s_{n+1} = 2^{(n+2) e(n)} stays a power of s_n.
    std::uint64_t e_m;
    if (auto ov = find_override(sched, "e", m)) {
        Int v = parse_positive_int("e_" + std::to_string(m), *ov);
        e_m = static_cast<std::uint64_t>(v);
    } else {
        const std::uint64_t base = (m + 1) * e_prev;
        std::int64_t need = floor_log2_rat(Rat(pow_int(2, m)) / eps) + 1;
        std::uint64_t floor_e = std::max<std::int64_t>(need, static_cast<std::int64_t>(e_prev) + 1);
        e_m = (floor_e + base - 1) / base * base;
    }
    Int s_next = pow_int(2, (m + 2) * e_m);

    // k_n.
    Int k, kmax = 0;
    auto ov_k = find_override(sched, "k", m);
    auto ov_kmax = find_override(sched, "kmax", m);
    if (ov_kmax) {
        kmax = parse_positive_int("kmax_" + std::to_string(m), *ov_kmax);
        k = kmax * kmax * s_m;
        if (ov_k && parse_positive_int("k_" + std::to_string(m), *ov_k) != k)
            fail("InconsistentOverride",
                 "k_" + std::to_string(m) + " contradicts kmax_" + std::to_string(m) +
                     " (kmax^2 s_n = " + int_brief(k) + ")");
    } else if (ov_k) {
        k = parse_positive_int("k_" + std::to_string(m), *ov_k);
    } else if (m == 0) {
        k = sched.P_N; // stage 0 cuts the base tower into P_N columns
    } else {
        Rat prev_prod = sched.stages[m - 1].eps_n * Rat(sched.stages[m - 1].k_n);
        Int k_floor = 1;
        if (hints && hints->previous_input) {
            const auto& ps = hints->previous_input->stages;
            if (m < ps.size() && ps[m].complete) k_floor = ps[m].k_n;
        }
        kmax = choose_kmax(m, eps, s_m, e_m, e_prev, prev_prod, k_floor);
        k = kmax * kmax * s_m;
    }

    // l_n.
    Int l;
    if (auto ov = find_override(sched, "l", m)) {
        l = parse_positive_int("l_" + std::to_string(m), *ov);
    } else if (m == 0) {
        l = sched.opts.l0;
        if (hints && hints->l_lower_bound && *hints->l_lower_bound > l) l = *hints->l_lower_bound;
    } else {
        l = Int(20) * pow_int(2, m) + 1;
        Int dbl = 2 * sched.stages[m - 1].l_n + 1;
        l = std::max(l, dbl);
        if (hints && hints->l_lower_bound) l = std::max(l, *hints->l_lower_bound);
        if (hints && hints->previous_input) {
            const auto& ps = hints->previous_input->stages;
            if (m < ps.size() && ps[m].complete) l = std::max(l, ps[m].l_n);
        }
    }

    StageParams& st = sched.stages[m];
    st.vareps_n = vareps;
    st.mu_n = mu;
    st.eps_n = eps;
    st.e_n = e_m;
    st.k_n = k;
    st.kmax_n = kmax;
    st.l_n = l;
    st.complete = true;

    // Separation coefficient for the next stage.
    Rat gamma_next;
    if (m == 0) {
        gamma_next = (Rat(3, 4) - eps) * (Rat(1) - Rat(1) / (eps * Rat(k))) * (Rat(1) - Rat(Int(1), l));
    } else {
        Rat drift = Rat(1) / (Rat(k) * eps) + Rat(Int(1), st.q_n) + Rat(Int(1), l) +
                    Rat(Int(1), Q1_m) + sched.stages[m - 1].eps_n;
        gamma_next = st.gamma_n * (Rat(1) - Rat(10) * drift);
    }

    StageParams nx;
    nx.n = m + 1;
    nx.s_n = s_next;
    nx.Q1_n = pow_int(2, e_m);
    nx.C1_n = s_next / nx.Q1_n;
    nx.K_n = st.k_n * st.K_n;
    nx.q_n = st.k_n * st.l_n * st.q_n * st.q_n;
    nx.p_n = st.k_n * st.l_n * st.p_n * st.q_n + 1;
    nx.alpha_n = Rat(nx.p_n, nx.q_n);
    nx.gamma_n = gamma_next;
    sched.stages.push_back(nx);
}

Schedule make_schedule(const ScheduleOptions& opts, unsigned stage_count, const NextStageHints* hints) {
    Schedule sched = init_schedule(opts);
    for (unsigned i = 0; i < stage_count; ++i) next_stage(sched, hints);
    sched.audits = check_requirements(sched, hints ? hints->previous_input : nullptr);
    return sched;
}

std::vector<RequirementReport> check_requirements(const Schedule& sched, const Schedule* previous_input) {
    const auto& S = sched.stages;
    unsigned C = 0;
    while (C < S.size() && S[C].complete) ++C;
    const unsigned L = static_cast<unsigned>(S.size()) - 1;
    std::vector<RequirementReport> out;
    auto add = [&](const char* id, ReqStatus st, std::string w) {
        out.push_back({id, st, std::move(w)});
    };
    if (C == 0) return out;

    std::ostringstream w;
    auto take = [&]() {
        std::string s = w.str();
        w.str("");
        return s;
    };

    // A: s_n = 2^{(n+1) e(n-1)}.
    {
        bool ok = true;
        for (unsigned n = 0; n <= L && ok; ++n) {
            std::uint64_t ep = n == 0 ? 1 : S[n - 1].e_n;
            ok = S[n].s_n == pow_int(2, (n + 1) * ep);
        }
        w << "s_n = 2^{(n+1)e(n-1)} for n <= " << L << "; s_" << L << " = " << int_brief(S[L].s_n);
        add("A", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // B: k_n nondecreasing across the input index.
    if (previous_input) {
        unsigned Cp = 0;
        const auto& P = previous_input->stages;
        while (Cp < P.size() && P[Cp].complete) ++Cp;
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < std::min(C, Cp); ++n)
            if (S[n].k_n < P[n].k_n) {
                ok = false;
                bad = n;
                break;
            }
        if (ok && std::min(C, Cp) == 0)
            w << "no overlapping completed stages to compare";
        else if (ok)
            w << "k_n(previous input) <= k_n at n = 0.." << std::min(C, Cp) - 1;
        else
            w << "k_" << bad << " = " << int_brief(S[bad].k_n) << " < previous "
              << int_brief(P[bad].k_n);
        add("B", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    } else {
        add("B", ReqStatus::StrictOnly,
            "needs the schedule built for the previous input index; the default choices are "
            "monotone in the seed prime");
    }
    // C (= N8): s_{n+1} <= s_n^{k_n}.
    auto check_c = [&]() -> std::pair<bool, std::string> {
        for (unsigned n = 0; n < C; ++n) {
            std::uint64_t le = *log2_exact(S[n + 1].s_n);
            std::uint64_t ls = *log2_exact(S[n].s_n);
            if (Int(le) > S[n].k_n * Int(ls)) {
                std::ostringstream o;
                o << "s_" << n + 1 << " = 2^" << le << " exceeds s_" << n << "^{k_" << n
                  << "} = 2^{" << ls << " k}";
                return {false, o.str()};
            }
        }
        std::ostringstream o;
        o << "log2 s_{n+1} <= k_n log2 s_n for n < " << C;
        return {true, o.str()};
    };
    {
        auto [ok, wit] = check_c();
        add("C", ok ? ReqStatus::Pass : ReqStatus::Fail, wit);
    }
    // D: 1/k_n < eps_n^3/100.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C; ++n)
            if (Rat(S[n].k_n) * S[n].eps_n * S[n].eps_n * S[n].eps_n <= 100) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "k_n eps_n^3 > 100 for n < " << C;
        else
            w << "k_" << bad << " eps^3 = "
              << rat_brief(Rat(S[bad].k_n) * S[bad].eps_n * S[bad].eps_n * S[bad].eps_n)
              << " <= 100";
        add("D", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // E: l_n nondecreasing across the input index.
    if (previous_input) {
        unsigned Cp = 0;
        const auto& P = previous_input->stages;
        while (Cp < P.size() && P[Cp].complete) ++Cp;
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < std::min(C, Cp); ++n)
            if (S[n].l_n < P[n].l_n) {
                ok = false;
                bad = n;
                break;
            }
        if (ok && std::min(C, Cp) == 0)
            w << "no overlapping completed stages to compare";
        else if (ok)
            w << "l_n(previous input) <= l_n at n = 0.." << std::min(C, Cp) - 1;
        else
            w << "l_" << bad << " = " << int_brief(S[bad].l_n) << " < previous "
              << int_brief(P[bad].l_n);
        add("E", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    } else {
        add("E", ReqStatus::StrictOnly,
            "needs the schedule built for the previous input index; the default choices are "
            "monotone in the seed prime");
    }
    // F: sum 6^n/k_n < infinity, certified by 6^n/k_n <= 2^{-n}.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C; ++n)
            if (S[n].k_n < pow_int(12, n)) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "k_n >= 12^n for n < " << C << ", so 6^n/k_n <= 2^{-n} and the sum is <= 2";
        else
            w << "k_" << bad << " = " << int_brief(S[bad].k_n) << " < 12^" << bad
              << "; geometric domination certificate fails";
        add("F", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // G: realized-map convergence distance; certified outside the schedule.
    add("G", ReqStatus::Deferred,
        "d_inf(S_{n+1}, S_n) < 2^{-(n+1)} is certified by the realized-map lane; its gate "
        "feeds l_n lower bounds back through NextStageHints");

    // I1: sum eps_n finite; certificate eps_n <= eps_{n-1}/2.
    ReqStatus i1_status;
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n < C; ++n)
            if (S[n].eps_n > S[n - 1].eps_n / 2) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "eps_n <= eps_{n-1}/2 for n < " << C << ", so sum eps_n <= 2 eps_0 = "
              << rat_brief(2 * S[0].eps_n);
        else
            w << "halving certificate fails at n = " << bad << ": eps = " << rat_brief(S[bad].eps_n)
              << " > eps_{n-1}/2 = " << rat_brief(S[bad - 1].eps_n / 2);
        i1_status = ok ? ReqStatus::Pass : ReqStatus::Fail;
        add("I1", i1_status, take());
    }
    // I2: 2^n 2^{-e(n)} < eps_n (and the structural split of A).
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C; ++n)
            if (S[n].eps_n * Rat(pow_int(2, S[n].e_n)) <= Rat(pow_int(2, n))) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "2^n 2^{-e(n)} < eps_n for n < " << C;
        else
            w << "2^" << bad << " 2^{-" << S[bad].e_n << "} >= eps_" << bad << " = "
              << rat_brief(S[bad].eps_n);
        add("I2", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // I3: 2 eps_n s_n^2 < eps_{n-1}.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n < C; ++n) {
            Int t = 2 * S[n].s_n * S[n].s_n;
            if (Rat(t) * S[n].eps_n >= S[n - 1].eps_n) {
                ok = false;
                bad = n;
                break;
            }
        }
        if (ok) {
            w << "2 eps_n s_n^2 < eps_{n-1} for 1 <= n < " << C;
        } else {
            Int t = 2 * S[bad].s_n * S[bad].s_n;
            w << "2 eps s^2 = " << rat_brief(Rat(t) * S[bad].eps_n) << " >= eps_" << bad - 1
              << " = " << rat_brief(S[bad - 1].eps_n);
        }
        add("I3", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // I4: eps_n k_n / s_{n-1}^2 -> infinity; certificate eps_n k_n >= s_n^2.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n < C; ++n) {
            Int s_sq = S[n].s_n * S[n].s_n;
            if (S[n].eps_n * Rat(S[n].k_n) < Rat(s_sq)) {
                ok = false;
                bad = n;
                break;
            }
        }
        if (ok)
            w << "eps_n k_n >= s_n^2 for 1 <= n < " << C
              << ", so the ratio grows at least like (s_n/s_{n-1})^2 >= 4";
        else
            w << "eps_" << bad << " k_" << bad << " = " << rat_brief(S[bad].eps_n * Rat(S[bad].k_n))
              << " < s_" << bad << "^2";
        add("I4", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // I5: restates I1.
    add("I5", i1_status, "as catalogued this coincides with I1; see its certificate");
    // I6: k_0 is the seed prime; k_n/s_n a power of two afterwards.
    {
        bool ok = S[0].k_n == sched.P_N;
        unsigned bad = 0;
        bool head = ok;
        for (unsigned n = 1; n < C && ok; ++n) {
            ok = S[n].k_n % S[n].s_n == 0 && is_power_of_two(S[n].k_n / S[n].s_n);
            if (!ok) bad = n;
        }
        if (ok)
            w << "k_0 = P_N = " << int_brief(sched.P_N)
              << "; k_n = 2^j s_n for 1 <= n < " << C << " (so K_{n+1} = P_N 2^l)";
        else if (!head)
            w << "k_0 = " << int_brief(S[0].k_n) << " != P_N = " << int_brief(sched.P_N);
        else
            w << "k_" << bad << " = " << int_brief(S[bad].k_n) << " is not 2^j s_" << bad;
        add("I6", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // I7: s_n a power of two.
    {
        bool ok = true;
        for (unsigned n = 0; n <= L && ok; ++n) ok = is_power_of_two(S[n].s_n);
        add("I7", ok ? ReqStatus::Pass : ReqStatus::Fail,
            ok ? "every s_n is a power of two" : "a stage word count is not a power of two");
    }
    // I8: eps_n < 2^{-n}.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C; ++n)
            if (S[n].eps_n * Rat(pow_int(2, n)) >= 1) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "eps_n < 2^{-n} for n < " << C;
        else
            w << "eps_" << bad << " = " << rat_brief(S[bad].eps_n) << " >= 2^{-" << bad << "}";
        add("I8", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }

    // N1: l_n > 20 2^n and 1/l_{n-1} > sum_{k>=n} 1/l_k (tail cert: l_n >= 2 l_{n-1}+1).
    {
        bool ok = true;
        std::string site;
        for (unsigned n = 0; n < C && ok; ++n) {
            if (S[n].l_n <= Int(20) * pow_int(2, n)) {
                ok = false;
                site = "l_" + std::to_string(n) + " = " + int_brief(S[n].l_n) + " <= 20*2^" +
                       std::to_string(n) +
                       (n == 0 && S[0].l_n == 1
                            ? " (rotation-number bookkeeping profile trades this for alpha_1 = 1/P_N)"
                            : "");
            } else if (n >= 1 && S[n].l_n < 2 * S[n - 1].l_n + 1) {
                ok = false;
                site = "tail certificate l_n >= 2 l_{n-1}+1 fails at n = " + std::to_string(n);
            }
        }
        if (ok)
            w << "l_n > 20 2^n and l_n >= 2 l_{n-1}+1 for n < " << C
              << ", so sum_{k>=n} 1/l_k < 2/l_n < 1/l_{n-1}";
        else
            w << site;
        add("N1", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N2: vareps_m > 4 sum_{n>m} vareps_n (ratio-8 cert).
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n < C; ++n)
            if (S[n].vareps_n * 8 > S[n - 1].vareps_n) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "vareps_n <= vareps_{n-1}/8 for n < " << C
              << ", so the tail sum is <= vareps_m/7 < vareps_m/4";
        else
            w << "eighth-ratio certificate fails at n = " << bad;
        add("N2", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N3: vareps_{n-1} q_m > sum_{k=n}^{m-1} 3 vareps_k q_{k+1} over computed pairs.
    {
        bool ok = true;
        std::string site;
        for (unsigned n = 1; n <= C && ok; ++n) {
            Rat sum = 0;
            for (unsigned mm = n; mm <= C && ok; ++mm) {
                if (mm > n) sum += Rat(3) * S[mm - 1].vareps_n * Rat(S[mm].q_n);
                if (S[n - 1].vareps_n * Rat(S[mm].q_n) <= sum) {
                    ok = false;
                    site = "pair (n,m) = (" + std::to_string(n) + "," + std::to_string(mm) + ")";
                }
            }
        }
        if (ok)
            w << "vareps_{n-1} > (1/q_m) sum 3 vareps_k q_{k+1} over all computed pairs; later "
                 "terms are dominated by q-doubling";
        else
            w << "timing budget violated at " << site;
        add("N3", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N4: 0 < mu_n < t_n min_{k<=n} 2^{-n-2}/t_k with t_k = min(vareps_k, 1/Q1_k).
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C && ok; ++n) {
            auto t_of = [&](unsigned k) {
                return std::min(S[k].vareps_n, Rat(Int(1), S[k].Q1_n));
            };
            Rat cap = Rat(Int(1), pow_int(2, n + 2)) / t_of(0);
            for (unsigned k = 1; k <= n; ++k) {
                Rat cand = Rat(Int(1), pow_int(2, n + 2)) / t_of(k);
                cap = std::min(cap, cand);
            }
            cap *= t_of(n);
            if (!(S[n].mu_n > 0 && S[n].mu_n < cap)) {
                ok = false;
                bad = n;
            }
        }
        if (ok)
            w << "0 < mu_n < t_n min_{k<=n} 2^{-n-2}/t_k for n < " << C;
        else
            w << "mu_" << bad << " = " << rat_brief(S[bad].mu_n) << " outside its ceiling";
        add("N4", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N5: sum 1/Q^n_1 finite; certificate Q^n_1 >= 2^n.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n <= L; ++n)
            if (S[n].Q1_n < pow_int(2, n)) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "Q^n_1 >= 2^n for n <= " << L << ", so the sum is dominated by a geometric series";
        else
            w << "Q^" << bad << "_1 = " << int_brief(S[bad].Q1_n) << " < 2^" << bad;
        add("N5", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N6: l_n large enough for the realized-map gate.
    add("N6", ReqStatus::Deferred,
        "the gate bound on l_n comes from realized-map norms; see G (hints raise l_n when a "
        "bound is supplied)");
    // N7: s_n -> infinity and s_{n+1} a power of s_n.
    {
        bool ok = true;
        std::string site;
        for (unsigned n = 0; n < L && ok; ++n) {
            if (S[n + 1].s_n <= S[n].s_n) {
                ok = false;
                site = "s_{n+1} <= s_n at n = " + std::to_string(n);
            } else if (*log2_exact(S[n + 1].s_n) % *log2_exact(S[n].s_n) != 0) {
                ok = false;
                site = "s_" + std::to_string(n + 1) + " = 2^" +
                       std::to_string(*log2_exact(S[n + 1].s_n)) + " is not a power of s_" +
                       std::to_string(n) + " = 2^" + std::to_string(*log2_exact(S[n].s_n));
            }
        }
        if (ok)
            w << "s_n strictly increasing and log2 s_{n+1} divisible by log2 s_n for n < " << L;
        else
            w << site;
        add("N7", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N8: same inequality as C.
    {
        auto [ok, wit] = check_c();
        add("N8", ok ? ReqStatus::Pass : ReqStatus::Fail, wit + " (same content as C)");
    }
    // N9: eps_0 < 1/40, eps decreasing, eps_n < vareps_n.
    {
        bool ok = S[0].eps_n < Rat(1, 40);
        std::string site = ok ? "" : "eps_0 = " + rat_brief(S[0].eps_n) + " >= 1/40";
        for (unsigned n = 0; n < C && ok; ++n) {
            if (n >= 1 && S[n].eps_n >= S[n - 1].eps_n) {
                ok = false;
                site = "eps not strictly decreasing at n = " + std::to_string(n);
            } else if (S[n].eps_n >= S[n].vareps_n) {
                ok = false;
                site = "eps_" + std::to_string(n) + " >= vareps_" + std::to_string(n);
            }
        }
        if (ok)
            w << "eps_0 < 1/40, eps strictly decreasing, eps_n < vareps_n for n < " << C;
        else
            w << site;
        add("N9", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N10: 1/k_n < eps_n^3/4.
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 0; n < C; ++n)
            if (Rat(S[n].k_n) * S[n].eps_n * S[n].eps_n * S[n].eps_n <= 4) {
                ok = false;
                bad = n;
                break;
            }
        if (ok)
            w << "k_n eps_n^3 > 4 for n < " << C;
        else
            w << "k_" << bad << " eps^3 <= 4";
        add("N10", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N11: eps_n below the timing-approximation ceiling (vacuous at n = 0).
    {
        bool ok = true;
        unsigned bad = 0;
        for (unsigned n = 1; n < C; ++n) {
            Int two_s_sq = 2 * S[n].s_n * S[n].s_n;
            Int cs = 4 * S[n].C1_n * S[n].s_n;
            Rat cap1 = Rat(Int(1), two_s_sq);
            Rat cap2 = S[n].mu_n / Rat(cs);
            Rat cap = std::min(cap1, cap2);
            if (S[n].eps_n >= cap) {
                ok = false;
                bad = n;
                break;
            }
        }
        if (ok)
            w << "eps_n < min(1/(2 s_n^2), mu_n/(4 C^n_1 s_n)) for 1 <= n < " << C
              << " (no level-1 classes at n = 0)";
        else
            w << "eps_" << bad << " = " << rat_brief(S[bad].eps_n) << " over the ceiling";
        add("N11", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N12: eps_0 k_0 > 20; eps_n k_n at least doubling (so increasing and summable inverses).
    {
        Rat head = S[0].eps_n * Rat(S[0].k_n);
        bool ok = head > 20;
        std::string site;
        if (!ok) {
            Int needed = floor_rat(Rat(20) / S[0].eps_n) + 1;
            site = "eps_0 k_0 = " + rat_brief(head) + " <= 20; needs k_0 >= " + int_brief(needed) +
                   " (seed prime too small)";
        }
        for (unsigned n = 1; n < C && ok; ++n)
            if (S[n].eps_n * Rat(S[n].k_n) < 2 * S[n - 1].eps_n * Rat(S[n - 1].k_n)) {
                ok = false;
                site = "doubling certificate for eps_n k_n fails at n = " + std::to_string(n);
            }
        if (ok)
            w << "eps_0 k_0 = " << rat_brief(head) << " > 20 and eps_n k_n at least doubles, so "
              << "sum 1/(eps_n k_n) < 2/(eps_0 k_0)";
        else
            w << site;
        add("N12", ok ? ReqStatus::Pass : ReqStatus::Fail, take());
    }
    // N13: separation coefficients; the word-metric conclusion lives in the word lane.
    {
        bool positive = true;
        unsigned bad = 0;
        for (unsigned n = 1; n <= L; ++n)
            if (S[n].gamma_n <= 0) {
                positive = false;
                bad = n;
                break;
            }
        if (!positive) {
            w << "gamma_" << bad << " = " << rat_brief(S[bad].gamma_n)
              << " <= 0 (eps_0 k_0 = " << rat_brief(S[0].eps_n * Rat(S[0].k_n))
              << "); the separation chain is dead";
            add("N13", ReqStatus::Fail, take());
        } else {
            w << "gamma_n stays positive down to gamma_" << L << " = " << rat_brief(S[L].gamma_n)
              << "; the d-bar clause is checked against realized words";
            add("N13", ReqStatus::Deferred, take());
        }
    }
    return out;
}

RatInterval alpha_bounds(const Schedule& sched, unsigned m) {
    const auto& S = sched.stages;
    if (m + 1 >= S.size())
        fail("InconsistentOverride",
             "alpha_bounds: stage " + std::to_string(m + 1) + " is not seeded yet");
    for (unsigned j = 0; j <= m; ++j)
        if (S[j + 1].q_n < 2 * S[j].q_n)
            fail("GrowthTooSlow", "q_" + std::to_string(j + 1) + " = " + int_brief(S[j + 1].q_n) +
                                      " < 2 q_" + std::to_string(j) +
                                      "; the tail bound 2/q_{m+1} needs doubling");
    if (S[m + 1].q_n < 2)
        fail("GrowthTooSlow", "q_" + std::to_string(m + 1) +
                                  " < 2; future denominators cannot be certified to double");
    Rat lo = S[m].alpha_n;
    return RatInterval(lo, lo + Rat(Int(2), S[m + 1].q_n));
}

AlphaComparison compare_alpha(const Schedule& a, const Schedule& b) {
    AlphaComparison r;
    const unsigned La = static_cast<unsigned>(a.stages.size()) - 1;
    const unsigned Lb = static_cast<unsigned>(b.stages.size()) - 1;
    const unsigned D = std::min(La, Lb);
    r.depth_used = D;
    if (D < 1) {
        r.witness = "need at least one completed stage on both sides";
        return r;
    }
    for (unsigned j = 1; j <= D; ++j)
        if (a.stages[j].q_n > b.stages[j].q_n) {
            r.order = AlphaOrder::PremiseViolated;
            r.witness = "q_" + std::to_string(j) + "(first) = " + int_brief(a.stages[j].q_n) +
                        " > q_" + std::to_string(j) + "(second) = " + int_brief(b.stages[j].q_n);
            return r;
        }
    RatInterval benc;
    try {
        benc = alpha_bounds(b, D - 1);
    } catch (const Error& e) {
        r.witness = std::string("growth certificate unavailable for the second input: ") + e.what();
        return r;
    }
    Rat margin = a.stages[D].alpha_n - benc.hi;
    if (margin > 0) {
        r.order = AlphaOrder::FirstGreater;
        r.margin = margin;
        r.witness = "alpha_" + std::to_string(D) + "(first) exceeds the second input's ceiling " +
                    "alpha_" + std::to_string(D - 1) + " + 2/q_" + std::to_string(D) + " by " +
                    rat_brief(margin);
    } else {
        r.witness = "margin " + rat_brief(margin) + " <= 0 at depth " + std::to_string(D) +
                    "; deepen both schedules";
    }
    return r;
}

Int hoeffding_klb(const Rat& delta, const Int& event_count, const Rat& failure_budget) {
    if (!(delta > 0 && delta <= 1))
        fail("InconsistentOverride", "hoeffding_klb: delta must lie in (0,1]");
    if (event_count < 1) fail("InconsistentOverride", "hoeffding_klb: event_count must be >= 1");
    if (!(failure_budget > 0 && failure_budget <= 1))
        fail("InconsistentOverride", "hoeffding_klb: failure_budget must lie in (0,1]");
    Rat x = Rat(event_count) / failure_budget;
    if (x == 1) return Int(1);
    Rat d2 = delta * delta;
    // Least n with event_count exp(-n delta^2/6) < budget, i.e. n > 6 ln(x)/delta^2;
    // ln(x) is irrational for rational x != 1, so the floors below eventually agree.
    for (unsigned terms = 24; terms <= (1u << 20); terms *= 2) {
        RatInterval lx = ln_interval(x, terms);
        Int a = floor_rat(Rat(6) * lx.lo / d2) + 1;
        Int b = floor_rat(Rat(6) * lx.hi / d2) + 1;
        if (a == b) return a;
    }
    fail("PrecisionExhausted", "hoeffding_klb: ln enclosure kept straddling an integer");
}

} // namespace pi01forge::schedule
