#pragma once

// Evaluation statistics: Judged@k, rank-biased overlap, Compatibility,
// Kendall's tau (tau-b / tau-a), a rank-weighted Kendall variant, and the
// pairwise agreement/tie/disagreement triple. All computations are pure and
// per-user independent; aggregation iterates users in sorted order.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recjudge/types.hpp"

namespace recjudge::metrics {

struct MetricResult {
    std::string metric_name;
    std::map<std::string, double> params;
    std::map<std::string, double> per_user;
    double aggregate = 0.0;  // arithmetic mean over per_user
    // Qrels users with no ranking in the run; not scored.
    std::vector<std::string> skipped_users;
    // Compatibility only: users whose qrels contain no relevant item (score 0).
    std::vector<std::string> zero_relevant_users;

    size_t n_users() const { return per_user.size(); }

    void write_csv(const std::string& path) const;        // user_id,value
    std::string summary_json() const;                     // {metric, params, aggregate, n_users}
};

// Fraction of a user's top-k items that carry any judgment (grade 0 counts as
// judged); denominator is min(k, list length).
MetricResult judged_at_k(const RunSet& run, const Qrels& qrels, int k);

// Truncated rank-biased overlap:
//   (1-p) * sum_{d=1..depth} p^(d-1) * |S_{1..d} ∩ I_{1..d}| / d
// with prefixes shorter than d using the full list. No extrapolation term;
// the depth convention is a named parameter recorded by callers.
double rbo(const std::vector<std::string>& system, const std::vector<std::string>& ideal,
           double p, int depth);

// Compatibility: maximum normalized RBO between the run and an ideal ranking
// of the relevant (grade > 0) items. The maximization over grade-tied ideal
// orderings is implemented by a greedy tie-break, ordering equal grades by
// the item's position in the system ranking (unretrieved after retrieved,
// then by item_id).
//
// Why the greedy tie-break attains the maximum: RBO is a weighted sum of
// prefix-overlap terms |S_{1..d} ∩ I_{1..d}|, and any ideal ordering must
// keep grade groups contiguous (grade-descending). Within a grade group,
// placing the group's members in system-rank order means every prefix of the
// group contains exactly those group members the system ranks earliest, which
// maximizes each |S_{1..d} ∩ I_{1..d}| term pointwise over reorderings of the
// group. Terms are independent across grade groups, so per-group pointwise
// maxima compose to the global maximum. A direct consequence is that swapping
// two equal-grade items in the run leaves the score unchanged.
//
// depth defaults to each user's run-list length. Users with no relevant item
// score 0 and are listed in zero_relevant_users. Unjudged items are simply
// non-members of the ideal.
MetricResult compatibility(const RunSet& run, const Qrels& qrels, double p = 0.95,
                           std::optional<int> depth = std::nullopt);

// A ranking of systems by score; the carrier for inter-ranking agreement.
struct ScoredSystem {
    std::string name;
    double score = 0.0;
};

enum class TauVariant { tau_b, tau_a };

// Rank correlation between two scored rankings over the same system set.
// Pairs are compared via scores; tau-b handles ties, tau-a divides by the
// full pair count. Fully tied inputs yield 0.
double kendall_tau(const std::vector<ScoredSystem>& a, const std::vector<ScoredSystem>& b,
                   TauVariant variant = TauVariant::tau_b);

// Rank-weighted Kendall: a pair of elements at 0-based positions r_i, r_j
// carries weight (1/(r_i+1) + 1/(r_j+1)) evaluated in each input ranking and
// averaged, so exchanges near either top weigh more; normalized like tau-b.
double weighted_kendall_tau(const std::vector<ScoredSystem>& a,
                            const std::vector<ScoredSystem>& b);

struct PairFilter {
    enum class Mode { relevant_vs_nonrelevant, min_grade_gap };
    Mode mode = Mode::relevant_vs_nonrelevant;
    int gap = 1;  // min_grade_gap only

    static PairFilter relevant_vs_nonrelevant() { return {Mode::relevant_vs_nonrelevant, 1}; }
    static PairFilter min_grade_gap(int gap) { return {Mode::min_grade_gap, gap}; }
};

struct AgreementTriple {
    double agreement = 0.0;
    double tie = 0.0;
    double disagreement = 0.0;
    size_t pair_count = 0;
};

// Over all user-local item pairs judged by both sides and passing the filter
// on HUMAN grades: agreement when the judge orders the pair like the human
// grades, tie when the judge grades are equal, disagreement otherwise.
// Proportions pool pairs across users by default; per_user_macro averages
// per-user proportions instead. Zero qualifying pairs is a NoPairsError.
AgreementTriple agreement_triple(const Qrels& human, const Qrels& judged,
                                 const PairFilter& filter, bool per_user_macro = false);

}  // namespace recjudge::metrics
