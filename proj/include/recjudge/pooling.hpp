#pragma once

// Judgment pools from multiple system runs, and sampled (reduced) qrels for
// completeness studies. Pools store item sets, not grades; grading is the
// judge pipeline's job.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "recjudge/metrics.hpp"
#include "recjudge/types.hpp"

namespace recjudge::pooling {

struct Pool {
    std::map<std::string, std::set<std::string>> assignments;
    int depth = 0;
    std::vector<std::string> contributing_systems;
};

// Per user, the union of each run's top-depth items. Users appearing in no
// run cannot be pooled; callers may compare against an expected user set via
// the returned assignments' keys.
Pool build_pool(const std::vector<RunSet>& runs, int depth);

// Uniform seeded sample without replacement of min(per_user, available)
// judged items per user, grades preserved; deterministic per (seed, user).
Qrels sample_qrels(const Qrels& qrels, int per_user, uint64_t seed);

// Fraction of the run's top-k inside the pool; identical semantics to
// judged_at_k with the pool as qrels.
metrics::MetricResult coverage_report(const Pool& pool, const RunSet& run, int k);

// Two-column text file "user_id item_id", sorted.
void write_pool(const Pool& pool, const std::string& path);
Pool read_pool(const std::string& path);

}  // namespace recjudge::pooling
