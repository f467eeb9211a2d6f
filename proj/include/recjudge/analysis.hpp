#pragma once

// Experiment orchestration: completeness comparisons, sampled-qrels sweeps,
// metadata ablations, history-size sweeps, grade-gap sweeps and system-ranking
// agreement. Reports serialize to CSV plus a JSON manifest (spec hash, seeds,
// tool version); re-running a spec with identical seeds is byte-identical.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recjudge/judge.hpp"
#include "recjudge/metrics.hpp"
#include "recjudge/types.hpp"

namespace recjudge::analysis {

// Worker threads used when scoring independent systems; results are
// assembled in a fixed order, so the worker count never changes output.
void set_max_workers(int n);

// Mean with a 95% Student-t confidence half-width over repetition values;
// half-width 0 when all values are identical or n < 2.
struct CiStat {
    double mean = 0.0;
    double half_width = 0.0;
};
CiStat mean_ci95(const std::vector<double>& values);

enum class MetricKind { judged_at_k, compatibility };

struct MetricSpec {
    MetricKind kind = MetricKind::compatibility;
    int k = 100;      // judged_at_k
    double p = 0.95;  // compatibility
    std::optional<int> depth;

    metrics::MetricResult evaluate(const RunSet& run, const Qrels& qrels) const;
    std::string name() const;
    static MetricSpec parse(const std::string& name, int k, double p, std::optional<int> depth);
};

struct CompletenessReport {
    int k = 0;
    struct Row {
        std::string system;
        double split_score = 0.0;
        double pooled_score = 0.0;
    };
    std::vector<Row> rows;  // sorted by system tag
    double split_average = 0.0;
    double pooled_average = 0.0;

    std::string to_csv() const;
};

// Judged@k per system under a train/test-split qrels vs a pooled qrels,
// plus per-column averages.
CompletenessReport completeness_comparison(const std::vector<RunSet>& runs,
                                           const Qrels& qrels_split, const Qrels& qrels_pooled,
                                           int k);

struct SampledSweepPoint {
    int sample_size = 0;  // -1 means the full qrels
    CiStat tau;           // system-ranking agreement vs the full-qrels ranking
    CiStat judged;        // mean Judged@k across systems under the sampled qrels
};

// For each size and seed: thin the qrels, rank systems by the metric, and
// correlate against the full-qrels ranking.
std::vector<SampledSweepPoint> sampled_qrels_sweep(const std::vector<RunSet>& runs,
                                                   const Qrels& full_qrels,
                                                   const std::vector<int>& sample_sizes,
                                                   const std::vector<uint64_t>& seeds,
                                                   const MetricSpec& metric, int judged_k = 100);

struct TripleSummary {
    CiStat agreement, tie, disagreement;
    double mean_pair_count = 0.0;
    size_t failures = 0;
    bool flagged = false;  // more than 10% of the cell's judgments failed
};

struct SweepCell {
    std::string label;
    TripleSummary triple;
};

// Table-2-style metadata ablation: one cell per field set, AgreementTriple
// mean +/- CI over judge repetitions against the human qrels.
std::vector<SweepCell> metadata_ablation(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const judge::BackendConfig& backend, const InteractionLog& history, const Catalog& catalog,
    const judge::ProfileSpec& base_profile, const std::vector<std::vector<std::string>>& field_sets,
    int repetitions, const Qrels& human, const metrics::PairFilter& filter);

// Same sweep with ProfileSpec.history_size as the swept parameter.
std::vector<SweepCell> history_size_sweep(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const judge::BackendConfig& backend, const InteractionLog& history, const Catalog& catalog,
    const judge::ProfileSpec& base_profile, const std::vector<int>& sizes, int repetitions,
    const Qrels& human, const metrics::PairFilter& filter);

struct GapCell {
    int gap = 0;
    // Absent when no pair passes the filter at this gap (not zero).
    std::optional<metrics::AgreementTriple> triple;
};
std::vector<GapCell> grade_gap_sweep(const Qrels& human, const Qrels& judged,
                                     const std::vector<int>& gaps);

struct ScatterRow {
    std::string system;
    double score_human = 0.0;
    double score_judge = 0.0;
};

struct RankingAgreementReport {
    std::string metric_name;
    struct BudgetRow {
        int budget = 0;  // -1 means all available judgments
        bool capped = false;  // budget exceeded some user's available judgments
        double tau = 0.0;
        double weighted_tau = 0.0;
        std::vector<ScatterRow> scatter;
    };
    std::vector<BudgetRow> rows;

    std::string to_csv() const;
    std::string scatter_csv() const;
};

// For each prediction budget: restrict the judge qrels to a seeded per-user
// sample of that size, score every system under both qrels, and report
// Kendall / weighted Kendall agreement plus per-system scatter rows.
RankingAgreementReport ranking_agreement(const std::vector<RunSet>& runs, const Qrels& human,
                                         const Qrels& judged, const MetricSpec& metric,
                                         const std::vector<int>& budgets, uint64_t seed);

// Declarative experiment runner behind the `report` CLI subcommand.
struct ExperimentSpec {
    std::string name;
    std::string kind;  // completeness | sampled_sweep | metadata_ablation |
                       // history_sweep | grade_gap | rank_agree
    std::map<std::string, std::vector<std::string>> inputs;  // named path lists
    std::vector<uint64_t> seeds;
    std::string params_json;
    uint64_t spec_hash = 0;  // content hash of the spec file

    static ExperimentSpec load(const std::string& path);
};

// Executes the spec and writes report.csv, manifest.json and gnuplot-ready
// .dat plot data into out_dir; returns the paths written.
std::vector<std::string> run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

}  // namespace recjudge::analysis
