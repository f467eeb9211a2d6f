#pragma once

// Loading, validation, filtering and splitting of interaction datasets, item
// catalogs, qrels and run files. All on-disk formats live here:
//   - interaction files: CSV/TSV with a header row
//   - qrels: 4-column TREC format (user 0 item grade)
//   - runs: 6-column TREC format (user Q0 item rank score tag)
//   - catalogs: JSON-lines (canonical) or CSV with the ten metadata fields
// Writers emit UTF-8 with LF line endings and canonical sorting, so a
// write -> read -> write cycle is byte-stable.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "recjudge/types.hpp"

namespace recjudge::corpus {

enum class InteractionFormat { csv_movielens, tsv };

struct LoadReport {
    size_t parsed = 0;
    size_t skipped = 0;  // malformed data lines
};

// Header must declare user_id and item_id columns (MovieLens spellings
// userId/movieId are accepted); rating and timestamp columns are optional.
InteractionLog load_interactions(const std::string& path, InteractionFormat format,
                                 LoadReport* report = nullptr);

// Canonical CSV: header user_id,item_id,rating,timestamp; absent values empty.
void write_interactions(const InteractionLog& log, const std::string& path);

struct FilterReport {
    size_t events_before = 0, events_after = 0;
    size_t users_before = 0, users_after = 0;
    size_t items_before = 0, items_after = 0;
};

// Single ordered pass: drop items with fewer than min_count interactions,
// then drop users with fewer than min_count remaining interactions. Not an
// iterative k-core; an item that falls below the threshold because of the
// user pass is retained.
InteractionLog filter_min_interactions(const InteractionLog& log, size_t min_count,
                                       FilterReport* report = nullptr);

enum class SplitStrategy { per_user_time_ordered, global_time, per_user_random };

struct SplitSpec {
    SplitStrategy strategy = SplitStrategy::per_user_time_ordered;
    std::optional<double> train_fraction;     // fraction strategies, in (0,1)
    std::optional<int64_t> cutoff_timestamp;  // global_time only
    uint64_t seed = 0;
};

// Train/test partition of the log. per_user_time_ordered sorts each user's
// events by (timestamp, item_id) and sends the first ceil(fraction*n) to
// train; global_time sends timestamp < cutoff to train (test is >= cutoff);
// per_user_random applies a seeded per-user shuffle before the fraction cut.
std::pair<InteractionLog, InteractionLog> split(const InteractionLog& log, const SplitSpec& spec);

// rating -> grade lookup table. A rating maps to the grade of the highest
// band whose min_rating it reaches; ratings below every band are an error.
// implicit_grade covers interactions without a rating.
struct GradeMap {
    struct Band {
        double min_rating;
        int grade;
    };
    std::vector<Band> bands;  // sorted descending by min_rating
    std::optional<int> implicit_grade;

    int grade_for(const Interaction& e) const;

    // Text form: "4.0:2,0.5:1" plus an optional "implicit:1" entry.
    static GradeMap parse(const std::string& text);
};

// One qrels entry per (user, item) in test; duplicates keep the maximum grade.
Qrels derive_qrels_from_test(const InteractionLog& test, const GradeMap& grade_map);

Qrels read_qrels(const std::string& path, int grade_bound = 7);
void write_qrels(const Qrels& qrels, const std::string& path);

// Grades 5-7 mark a user's top-three picks and may occur at most once each
// per user under that convention.
void validate_top_three(const Qrels& qrels);

// diagnostics receives non-fatal findings (score order violating rank order).
RunSet read_run(const std::string& path, std::vector<std::string>* diagnostics = nullptr);
void write_run(const RunSet& run, const std::string& path);

// Dispatches on extension: .jsonl/.ndjson or .csv.
Catalog read_catalog(const std::string& path);
void write_catalog(const Catalog& catalog, const std::string& path);  // JSON-lines

// Seeded uniform sample of distinct users (no stratification), sorted.
std::vector<std::string> sample_users(const InteractionLog& log, size_t n, uint64_t seed);

InteractionLog restrict_users(const InteractionLog& log, const std::set<std::string>& users);

}  // namespace recjudge::corpus
