#include "recjudge/judge.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "backend_internal.hpp"
#include "recjudge/common.hpp"
#include "recjudge/corpus.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::judge {

const std::array<Criterion, 11> kCriteria = {{
    {"Genre & Subgenre",
     "How well does the recommendation align with the affinity for the category of film "
     "(action, romance, sci-fi, etc.)."},
    {"Tone & Mood",
     "How well does the recommendation align with the affinity for movie tone, e.g., "
     "lighthearted, dark, intense, uplifting."},
    {"Story Complexity",
     "How well does the recommendation align with the affinity for simple vs. layered movies."},
    {"Pacing",
     "How well does the recommendation align with the affinity for slow vs. fast pacing movies."},
    {"Themes & Topics",
     "How well does the recommendation align with the affinity for underlying themes "
     "(friendship, dystopia, revenge)."},
    {"Cast & Crew",
     "How well does the recommendation align with the preference for actors, directors, "
     "writers, etc."},
    {"Cultural / Regional Context",
     "How well does the recommendation align with the affinity for a certain origin, language, "
     "or cultural lens."},
    {"Runtime / Commitment",
     "How well does the recommendation align with the affinity for movie length."},
    {"Release Period",
     "How well does the recommendation align with the affinity for classics vs. modern movies."},
    {"Trend & Popularity",
     "How well does the recommendation align with the interest in mainstream vs. niche movies."},
    {"Average Ratings",
     "How well does the recommendation align with the user's affinity for highly rated movies."},
}};

namespace {

// Selection mask over kMetadataFields; validates names and the title rule.
std::array<bool, 10> field_mask(const std::vector<std::string>& fields) {
    std::array<bool, 10> mask{};
    for (const auto& f : fields) {
        bool known = false;
        for (size_t i = 0; i < kMetadataFields.size(); ++i) {
            if (f == kMetadataFields[i]) {
                mask[i] = true;
                known = true;
                break;
            }
        }
        if (!known) throw ValidationError("unknown metadata field \"" + f + "\"");
    }
    if (!mask[0]) throw ValidationError("metadata field selection must include title");
    return mask;
}

void append_field(std::vector<std::string>& parts, size_t idx, const std::string& value) {
    if (!value.empty()) parts.push_back(std::string(kMetadataLabels[idx]) + ": " + value);
}

}  // namespace

std::string render_item_metadata(const ItemRecord& item, const std::vector<std::string>& fields) {
    const auto mask = field_mask(fields);
    std::vector<std::string> parts;
    if (mask[0]) append_field(parts, 0, item.title);
    if (mask[1] && item.average_rating)
        append_field(parts, 1, format_compact(*item.average_rating));
    if (mask[2]) append_field(parts, 2, join(item.genres, ", "));
    if (mask[3]) append_field(parts, 3, join(item.directors, ", "));
    if (mask[4]) append_field(parts, 4, item.overview);
    if (mask[5]) append_field(parts, 5, join(item.cast, ", "));
    if (mask[6] && item.runtime_minutes)
        append_field(parts, 6, std::to_string(*item.runtime_minutes) + " min");
    if (mask[7] && item.num_ratings) append_field(parts, 7, std::to_string(*item.num_ratings));
    if (mask[8] && item.year) append_field(parts, 8, std::to_string(*item.year));
    if (mask[9]) append_field(parts, 9, join(item.languages, ", "));
    return "Movie metadata: " + join(parts, "; ");
}

std::string build_profile(const std::string& user, const InteractionLog& history,
                          const Catalog& catalog, const ProfileSpec& spec,
                          std::vector<std::string>* skipped_items) {
    if (spec.history_size < 1) throw ValidationError("history_size must be >= 1");
    field_mask(spec.fields);

    std::vector<const Interaction*> events;
    for (const auto& e : history.events)
        if (e.user_id == user) events.push_back(&e);
    if (events.empty()) throw ValidationError("user " + user + " has an empty history");

    const size_t take = std::min<size_t>(spec.history_size, events.size());
    std::vector<const Interaction*> selected;
    selected.reserve(take);
    if (spec.selection == ProfileSpec::Selection::random_sample) {
        rng::Stream stream(rng::mix(spec.seed, rng::hash_str(user)));
        for (size_t idx : rng::sample_indices(events.size(), take, stream))
            selected.push_back(events[idx]);
    } else {
        for (const Interaction* e : events)
            if (!e->timestamp)
                throw ValidationError("most_recent selection requires timestamps for user " +
                                      user);
        std::stable_sort(events.begin(), events.end(),
                         [](const Interaction* a, const Interaction* b) {
                             if (*a->timestamp != *b->timestamp)
                                 return *a->timestamp > *b->timestamp;
                             return a->item_id < b->item_id;
                         });
        selected.assign(events.begin(), events.begin() + take);
    }

    std::vector<std::string> lines;
    for (const Interaction* e : selected) {
        auto it = catalog.find(e->item_id);
        if (it == catalog.end()) {
            if (skipped_items) skipped_items->push_back(e->item_id);
            continue;
        }
        lines.push_back(render_item_metadata(it->second, spec.fields));
    }
    if (lines.empty())
        throw ValidationError("user " + user + " has no history items with catalog metadata");
    return join(lines, "\n");
}

JudgePrompt render_prompt(const std::string& profile_text, const ItemRecord& candidate,
                          const std::vector<std::string>& fields, Rubric rubric) {
    JudgePrompt prompt;
    prompt.instruction =
        "Your task is to evaluate the relevance of a movie recommendation for a user, "
        "given the metadata of the movie and the user's previous interactions.";
    prompt.user_profile_text = profile_text;
    prompt.candidate_text = render_item_metadata(candidate, fields);
    prompt.rubric = rubric;
    prompt.output_schema.push_back("reasoning");
    if (rubric == Rubric::criteria)
        for (const auto& c : kCriteria) prompt.output_schema.push_back(c.name);
    prompt.output_schema.push_back("interest_in_watching");
    return prompt;
}

std::string JudgePrompt::full_text() const {
    std::string text;
    text += "Instruction:\n" + instruction + "\n\n";
    text += "User profile:\n" + user_profile_text + "\n\n";
    text += "Movie recommendation:\n" + candidate_text + "\n\n";
    if (rubric == Rubric::criteria) {
        text += "Evaluation criteria:\n";
        for (const auto& c : kCriteria) text += std::string(c.name) + ": " + c.description + "\n";
        text += "\n";
    }
    text += "Expected output:\n";
    text +=
        "reasoning: Reason for the interest in watching the movie considering their previous "
        "interactions.\n";
    if (rubric == Rubric::criteria)
        for (const auto& c : kCriteria)
            text += std::string(c.name) + ": Alignment with this criterion, on a scale of 0 to 7.\n";
    text +=
        "interest_in_watching: The interest in watching the movie considering their previous "
        "interactions, on a scale of 0 to 7.\n\n";
    text +=
        "Respond with a single JSON object whose keys are exactly the fields listed under "
        "\"Expected output\".\n";
    return text;
}

int score_aggregation(const JudgeVerdict& verdict, Aggregation mode) {
    if (mode == Aggregation::cot_overall) {
        if (!verdict.overall)
            throw ValidationError("cot_overall aggregation requires an overall grade");
        return *verdict.overall;
    }
    if (verdict.criteria_scores.size() != kCriteria.size())
        throw ValidationError("sum_aggregation requires all criterion scores");
    int sum = 0;
    for (const auto& [name, score] : verdict.criteria_scores) sum += score;
    return sum;
}

JudgeVerdict synthetic_oracle_verdict(const std::string& user, const std::string& item,
                                      const Qrels& truth, double noise_level, uint64_t seed,
                                      Rubric rubric) {
    if (noise_level < 0.0) throw ValidationError("noise_level must be >= 0");
    const auto grade = truth.get(user, item);
    if (!grade)
        throw ValidationError("(" + user + ", " + item + ") missing from oracle truth qrels");

    const uint64_t draw_seed = rng::mix(seed, rng::hash_str(user + "\x1f" + item));
    rng::Stream stream(draw_seed);
    const long offset =
        noise_level > 0.0 ? std::lround(noise_level * stream.gaussian()) : 0;
    const int overall = static_cast<int>(std::clamp<long>(*grade + offset, 0, 7));

    JudgeVerdict verdict;
    verdict.overall = overall;
    verdict.reasoning = "seeded oracle verdict for truth grade " + std::to_string(*grade);
    if (rubric == Rubric::criteria) {
        // Criterion scores jitter around the same perturbed latent grade.
        for (size_t c = 0; c < kCriteria.size(); ++c) {
            rng::Stream cstream(rng::mix(draw_seed, 0xc1700ULL + c));
            const long jitter =
                noise_level > 0.0 ? std::lround(noise_level * cstream.gaussian()) : 0;
            verdict.criteria_scores[kCriteria[c].name] =
                static_cast<int>(std::clamp<long>(*grade + offset + jitter, 0, 7));
        }
    }
    return verdict;
}

namespace {

struct Task {
    size_t pair_idx;
    int repetition;
    uint64_t key;
    const JudgePrompt* prompt;
};

}  // namespace

JudgeJobResult judge_items(const std::vector<std::pair<std::string, std::string>>& pairs,
                           const BackendConfig& backend_config, const InteractionLog& history,
                           const Catalog& catalog, const ProfileSpec& profile, Rubric rubric,
                           int repetitions, Aggregation aggregation) {
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (pairs.empty()) throw ValidationError("judge_items: no pairs requested");

    // Canonical task list: unique pairs sorted by (user, item).
    std::set<std::pair<std::string, std::string>> unique(pairs.begin(), pairs.end());
    std::vector<std::pair<std::string, std::string>> ordered(unique.begin(), unique.end());

    for (const auto& [user, item] : ordered)
        if (!catalog.count(item))
            throw ValidationError("item " + item + " is not resolvable in the catalog");

    // Effective oracle noise may scale with prompt richness (sweep plumbing).
    double effective_noise = backend_config.noise_level;
    if (backend_config.noise_shrinks_with_fields)
        effective_noise /= static_cast<double>(std::max<size_t>(1, profile.fields.size()));
    if (backend_config.noise_shrinks_with_history)
        effective_noise /= static_cast<double>(std::max(1, profile.history_size));

    Qrels truth_storage;
    const Qrels* truth = backend_config.truth;
    if (backend_config.kind == BackendConfig::Kind::synthetic_oracle && !truth) {
        if (backend_config.truth_path.empty())
            throw ValidationError("synthetic_oracle backend requires truth qrels");
        truth_storage = corpus::read_qrels(backend_config.truth_path);
        truth = &truth_storage;
    }

    std::unique_ptr<detail::VerdictCache> cache;
    if (!backend_config.cache_path.empty())
        cache = std::make_unique<detail::VerdictCache>(backend_config.cache_path);
    auto backend = detail::make_backend(backend_config, effective_noise, truth, cache.get());
    const std::string backend_id = backend_config.id();

    // One profile and one prompt per distinct user/item; prompts are shared
    // across repetitions (the repetition only perturbs the seed / nonce).
    std::map<std::string, std::string> profiles;
    for (const auto& [user, item] : ordered)
        if (!profiles.count(user))
            profiles[user] = build_profile(user, history, catalog, profile);

    std::vector<JudgePrompt> prompts;
    prompts.reserve(ordered.size());
    std::vector<std::string> prompt_texts;
    prompt_texts.reserve(ordered.size());
    for (const auto& [user, item] : ordered) {
        prompts.push_back(
            render_prompt(profiles.at(user), catalog.at(item), profile.fields, rubric));
        prompt_texts.push_back(prompts.back().full_text());
    }

    JudgeJobResult result;
    result.per_repetition.resize(repetitions);
    const int grade_bound =
        (rubric == Rubric::criteria && aggregation == Aggregation::sum_aggregation)
            ? static_cast<int>(kCriteria.size()) * 7
            : 7;
    for (auto& q : result.per_repetition) q.grade_bound = grade_bound;

    struct Slot {
        std::optional<JudgeVerdict> verdict;
        std::string failure;
    };
    std::vector<Slot> slots(ordered.size() * static_cast<size_t>(repetitions));
    std::vector<Task> misses;
    std::atomic<size_t> backend_calls{0};
    size_t cache_hits = 0;

    for (size_t i = 0; i < ordered.size(); ++i) {
        for (int rep = 0; rep < repetitions; ++rep) {
            const uint64_t key = detail::cache_key(backend_id, prompt_texts[i], rep);
            if (cache) {
                if (auto hit = cache->lookup(key)) {
                    hit->cached = true;
                    slots[i * repetitions + rep].verdict = std::move(*hit);
                    ++cache_hits;
                    continue;
                }
            }
            misses.push_back({i, rep, key, &prompts[i]});
        }
    }

    auto run_task = [&](const Task& task) {
        Slot& slot = slots[task.pair_idx * repetitions + task.repetition];
        const auto& [user, item] = ordered[task.pair_idx];
        try {
            const auto started = std::chrono::steady_clock::now();
            JudgeVerdict verdict = backend->invoke(user, item, *task.prompt, task.repetition);
            verdict.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - started)
                                     .count();
            verdict.backend_id = backend_id;
            backend_calls.fetch_add(1, std::memory_order_relaxed);
            if (cache) cache->append(task.key, {user, item, task.repetition, verdict});
            slot.verdict = std::move(verdict);
        } catch (const std::exception& e) {
            backend_calls.fetch_add(1, std::memory_order_relaxed);
            slot.failure = e.what();
        }
    };

    const int workers = std::min<int>(backend_config.max_in_flight,
                                      backend->parallel_safe() ? static_cast<int>(misses.size()) : 1);
    if (workers > 1) {
        std::atomic<size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (int w = 0; w < workers; ++w)
            threads.emplace_back([&] {
                for (;;) {
                    const size_t idx = next.fetch_add(1);
                    if (idx >= misses.size()) return;
                    run_task(misses[idx]);
                }
            });
        for (auto& t : threads) t.join();
    } else {
        for (const Task& task : misses) run_task(task);
    }

    for (size_t i = 0; i < ordered.size(); ++i) {
        const auto& [user, item] = ordered[i];
        for (int rep = 0; rep < repetitions; ++rep) {
            Slot& slot = slots[i * repetitions + rep];
            if (!slot.verdict) {
                result.failures.push_back({user, item, rep, slot.failure});
                continue;
            }
            int grade;
            try {
                grade = score_aggregation(*slot.verdict, aggregation);
            } catch (const std::exception& e) {
                result.failures.push_back({user, item, rep, e.what()});
                continue;
            }
            result.per_repetition[rep].set(user, item, grade);
            result.verdicts.push_back({user, item, rep, std::move(*slot.verdict)});
        }
    }
    result.backend_calls = backend_calls.load();
    result.cache_hits = cache_hits;
    return result;
}

Qrels average_labels(const std::vector<Qrels>& repetitions) {
    if (repetitions.empty()) throw ValidationError("average_labels: no repetitions");
    Qrels out;
    out.grade_bound = repetitions.front().grade_bound;
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
    for (const Qrels& rep : repetitions)
        for (const auto& [user, items] : rep.grades)
            for (const auto& [item, grade] : items) {
                auto& slot = sums[{user, item}];
                slot.first += grade;
                slot.second += 1;
            }
    for (const auto& [pair, sum] : sums) {
        const double mean = sum.first / static_cast<double>(sum.second);
        out.set(pair.first, pair.second, static_cast<int>(std::floor(mean + 0.5)));
    }
    return out;
}

namespace {

nlohmann::json verdict_json(const JudgeVerdict& v) {
    nlohmann::json j;
    j["reasoning"] = v.reasoning;
    if (v.overall) j["overall"] = *v.overall;
    if (!v.criteria_scores.empty()) j["criteria"] = v.criteria_scores;
    return j;
}

}  // namespace

void write_verdict_log(const JudgeJobResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& rec : result.verdicts) {
        nlohmann::json j;
        j["user"] = rec.user_id;
        j["item"] = rec.item_id;
        j["repetition"] = rec.repetition;
        j["backend_id"] = rec.verdict.backend_id;
        j["cached"] = rec.verdict.cached;
        j["latency_ms"] = rec.verdict.latency_ms;
        j["verdict"] = verdict_json(rec.verdict);
        out << j.dump() << '\n';
    }
}

void write_failure_manifest(const JudgeJobResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& f : result.failures) {
        nlohmann::json j;
        j["user"] = f.user_id;
        j["item"] = f.item_id;
        j["repetition"] = f.repetition;
        j["reason"] = f.reason;
        out << j.dump() << '\n';
    }
}

}  // namespace recjudge::judge
