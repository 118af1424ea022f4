#pragma once

#include "pi01forge/numeric.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pi01forge::schedule {

// Per-stage coefficients.  Index conventions:
//   s_n = 2^{(n+1) e(n-1)} words at stage n (e(-1) = 1, so s_0 = 2);
//   e_n is chosen while completing stage n and controls s_{n+1} = 2^{(n+2) e_n};
//   Q1_n / C1_n are the class count and class size of the coarsest partition level;
//   K_n = k_0 k_1 ... k_{n-1} is the word length at stage n;
//   q_{n+1} = k_n l_n q_n^2, p_{n+1} = k_n l_n p_n q_n + 1, alpha_n = p_n / q_n;
//   gamma_n is the separation coefficient recursion.
struct StageParams {
    unsigned n = 0;
    bool complete = false; // k/l/eps chosen (seeded stages carry only s/q/p/K)

    Int s_n;
    Int Q1_n;
    Int C1_n;
    unsigned e_n = 0;

    Rat eps_n;
    Rat vareps_n;
    Rat mu_n;
    Rat gamma_n;

    Int k_n;
    Int kmax_n; // k_n = kmax_n^2 * s_n when the word-construction shape is in force
    Int l_n;

    Int K_n;
    Int q_n;
    Int p_n;
    Rat alpha_n;
};

enum class ReqStatus { Pass, Fail, Deferred, StrictOnly };

const char* req_status_name(ReqStatus s);

struct RequirementReport {
    std::string id;      // "A".."G", "I1".."I8", "N1".."N13"
    ReqStatus status = ReqStatus::Pass;
    std::string witness; // inequality instance, certificate, or failure site
};

struct ScheduleOptions {
    unsigned N = 1;   // selects P_N, the N-th prime above P0
    Int P0 = 23;
    bool strict = true;
    // Relaxed-mode knobs, keyed "<name>_<stage>", e.g. "k_0" = "5", "l_0" = "1",
    // "eps_1" = "1/2", "e_0" = "1", "kmax_1" = "4", "vareps_2", "mu_2".
    std::map<std::string, std::string> overrides;
    // Realization profile uses l_0 > 20; the rotation-number bookkeeping profile
    // uses l_0 = 1 so that alpha_1 = 1/P_N.  Honored in both modes.
    Int l0 = 21;
};

struct Schedule {
    ScheduleOptions opts;
    Int P_N;
    std::vector<StageParams> stages; // stages[0..m]; last one may be seed-only
    std::vector<RequirementReport> audits;
};

// Optional external data consumed while completing a stage.
struct NextStageHints {
    // Realized-map convergence gate: a lower bound for l_n supplied by the
    // smooth-realization lane (Requirement G); absent means "defer".
    std::optional<Int> l_lower_bound;
    // Coefficients of the schedule built for input N-1, for the cross-input
    // monotonicity requirements on k_n and l_n.
    const Schedule* previous_input = nullptr;
};

// Stage 0 seeded: s_0 = 2, q_0 = 1, p_0 = 0, K_0 = 1.
Schedule init_schedule(const ScheduleOptions& opts);

// Completes the last seeded stage n (choice order: Q^n_1, vareps_n, mu_n, eps_n,
// s_{n+1} via e_n, k_n, l_n) and seeds stage n+1.  Errors: InconsistentOverride.
// Relaxed-mode requirement violations are not raised here; they surface in
// check_requirements.
void next_stage(Schedule& sched, const NextStageHints* hints = nullptr);

// Convenience: init + next_stage x stage_count.
Schedule make_schedule(const ScheduleOptions& opts, unsigned stage_count,
                       const NextStageHints* hints = nullptr);

// Audits every catalogued requirement over the computed stages.  Summability and
// limit statements are certified by the closed-form dominating sequences the
// strict defaults satisfy; relaxed schedules are checked stage by stage.
std::vector<RequirementReport> check_requirements(const Schedule& sched,
                                                  const Schedule* previous_input = nullptr);

// Enclosure of the limit rotation number: [alpha_m, alpha_m + 2/q_{m+1}].
// Requires stage m+1 to be seeded and q_{j+1} >= 2 q_j up to there
// (GrowthTooSlow otherwise).
RatInterval alpha_bounds(const Schedule& sched, unsigned m);

enum class AlphaOrder { FirstGreater, Inconclusive, PremiseViolated };

struct AlphaComparison {
    AlphaOrder order = AlphaOrder::Inconclusive;
    unsigned depth_used = 0;
    Rat margin;          // certified gap when FirstGreater
    std::string witness;
};

// Certifies alpha(a) > alpha(b) from q_m(a) <= q_m(b) for all computed m with
// strict inequality at m = 1 (the first-input sequence descends as N grows).
AlphaComparison compare_alpha(const Schedule& a, const Schedule& b);

// Least n such that event_count * exp(-n delta^2 / 6) < failure_budget, i.e. the
// sample size at which the concentration bound kills a union of that many events.
Int hoeffding_klb(const Rat& delta, const Int& event_count, const Rat& failure_budget);

} // namespace pi01forge::schedule
