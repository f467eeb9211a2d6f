#pragma once

// The LLM-judge pipeline: user profiles and prompts from interaction
// histories and item metadata, pluggable judge backends (HTTP chat, seeded
// synthetic oracle, replay cache), structured verdict parsing, and repeated
// judging runs with an append-only verdict cache.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recjudge/types.hpp"

namespace recjudge::judge {

struct Criterion {
    const char* name;
    const char* description;
};

// The eleven dimensions of the criteria-based rubric.
extern const std::array<Criterion, 11> kCriteria;

struct ProfileSpec {
    enum class Selection { random_sample, most_recent };

    int history_size = 1000;
    Selection selection = Selection::random_sample;
    uint64_t seed = 0;
    // Metadata fields rendered per history item; must include "title".
    std::vector<std::string> fields{kMetadataFields.begin(), kMetadataFields.end()};
};

enum class Rubric { none, criteria };

struct JudgePrompt {
    std::string instruction;
    std::string user_profile_text;
    std::string candidate_text;
    Rubric rubric = Rubric::none;
    std::vector<std::string> output_schema;

    // The rendered request text; a pure function of the inputs.
    std::string full_text() const;
};

struct JudgeVerdict {
    std::string reasoning;
    std::optional<int> overall;                // 0-7 when present
    std::map<std::string, int> criteria_scores;  // exactly the eleven names when present
    std::string backend_id;
    int64_t latency_ms = 0;
    bool cached = false;
};

// One "Movie metadata:" line for an item, restricted to the selected fields
// in canonical order; fields whose value is absent are omitted.
std::string render_item_metadata(const ItemRecord& item, const std::vector<std::string>& fields);

// Renders min(history_size, available) of the user's history items, one
// metadata line each, in selection order (the seeded sample order, or
// most-recent-first). Items without catalog metadata are skipped and listed
// in skipped_items.
std::string build_profile(const std::string& user, const InteractionLog& history,
                          const Catalog& catalog, const ProfileSpec& spec,
                          std::vector<std::string>* skipped_items = nullptr);

JudgePrompt render_prompt(const std::string& profile_text, const ItemRecord& candidate,
                          const std::vector<std::string>& fields, Rubric rubric);

enum class Aggregation { cot_overall, sum_aggregation };

// cot_overall projects the verdict's overall grade (0-7); sum_aggregation
// sums the criterion scores into a raw 0-77 grade, deliberately widening the
// score space for downstream pairwise comparisons.
int score_aggregation(const JudgeVerdict& verdict, Aggregation mode);

// Deterministic test double for the LLM: overall = clamp(truth grade +
// rounded Gaussian(0, noise) seeded by (seed, user, item), 0, 7); with the
// criteria rubric, per-criterion scores jitter around the same latent draw.
JudgeVerdict synthetic_oracle_verdict(const std::string& user, const std::string& item,
                                      const Qrels& truth, double noise_level, uint64_t seed,
                                      Rubric rubric = Rubric::none);

struct BackendConfig {
    enum class Kind { http_chat, synthetic_oracle, replay_cache };
    Kind kind = Kind::synthetic_oracle;

    // http_chat: chat-completion-style POST endpoint. Credentials are never
    // stored in config, only the name of the environment variable.
    std::string endpoint_url;
    std::string model_name;
    std::string auth_env_var;
    std::string params_json;  // opaque pass-through (temperature, reasoning, ...)
    int timeout_s = 60;
    int max_retries = 3;
    double backoff_initial_s = 1.0;
    int max_in_flight = 4;

    // synthetic_oracle
    double noise_level = 0.0;
    std::string truth_path;        // qrels file with the oracle's ground truth
    const Qrels* truth = nullptr;  // in-memory override for truth_path
    uint64_t seed = 0;
    // Sweep plumbing: scale noise down with richer inputs, so constructed
    // oracles can exercise the ablation/history sweeps end to end.
    bool noise_shrinks_with_fields = false;
    bool noise_shrinks_with_history = false;

    // All kinds: append-only JSON-lines verdict cache.
    std::string cache_path;

    std::string id() const;
};

// INI-style file with a [backend] section and an optional [backend.params]
// pass-through section.
BackendConfig load_backend_config(const std::string& path);

struct VerdictRecord {
    std::string user_id;
    std::string item_id;
    int repetition = 0;
    JudgeVerdict verdict;
};

struct JudgeFailure {
    std::string user_id;
    std::string item_id;
    int repetition = 0;
    std::string reason;
};

struct JudgeJobResult {
    std::vector<Qrels> per_repetition;
    std::vector<VerdictRecord> verdicts;  // canonical (user, item, repetition) order
    std::vector<JudgeFailure> failures;
    size_t backend_calls = 0;
    size_t cache_hits = 0;
};

// Judges each requested (user, item) pair once per repetition. Verdicts are
// cached keyed by a content hash of (backend identity, prompt, repetition);
// warm re-runs issue zero backend calls. The repetition index perturbs the
// oracle seed / request nonce. Failed items are recorded and never appear in
// the output qrels.
JudgeJobResult judge_items(const std::vector<std::pair<std::string, std::string>>& pairs,
                           const BackendConfig& backend, const InteractionLog& history,
                           const Catalog& catalog, const ProfileSpec& profile, Rubric rubric,
                           int repetitions = 3, Aggregation aggregation = Aggregation::cot_overall);

// Per-item label averaging across repetitions (mean grade, rounded half-up);
// the alternative to averaging metrics over per-repetition qrels.
Qrels average_labels(const std::vector<Qrels>& repetitions);

// JSON-lines, one verdict per line in canonical order.
void write_verdict_log(const JudgeJobResult& result, const std::string& path);
void write_failure_manifest(const JudgeJobResult& result, const std::string& path);

}  // namespace recjudge::judge
