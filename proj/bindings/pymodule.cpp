// Python bindings for the main operations: corpus I/O and splitting, the
// evaluation metrics, pooling, synthetic worlds and the judge pipeline
// (synthetic/replay backends; the HTTP backend is driven via the CLI and
// backend config files).
//
// Conventions: qrels are dict[user][item] -> int grade; rankings are
// dict[user] -> list[(item, score)] ordered by rank; interaction events are
// (user, item, rating | None, timestamp | None) tuples.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "recjudge/analysis.hpp"
#include "recjudge/common.hpp"
#include "recjudge/corpus.hpp"
#include "recjudge/judge.hpp"
#include "recjudge/metrics.hpp"
#include "recjudge/pooling.hpp"
#include "recjudge/simlab.hpp"

namespace py = pybind11;
using namespace recjudge;

namespace {

using QrelsDict = std::map<std::string, std::map<std::string, int>>;
using Rankings = std::map<std::string, std::vector<std::pair<std::string, double>>>;
using Events =
    std::vector<std::tuple<std::string, std::string, std::optional<double>, std::optional<int64_t>>>;

Qrels to_qrels(const QrelsDict& d, int grade_bound = 7) {
    Qrels q;
    q.grade_bound = grade_bound;
    q.grades = d;
    return q;
}

QrelsDict from_qrels(const Qrels& q) { return q.grades; }

RunSet to_run(const Rankings& rankings, const std::string& tag) {
    RunSet run;
    run.system_tag = tag;
    for (const auto& [user, entries] : rankings) {
        auto& ranking = run.rankings[user];
        for (const auto& [item, score] : entries) ranking.push_back({item, score});
    }
    return run;
}

Rankings from_run(const RunSet& run) {
    Rankings out;
    for (const auto& [user, entries] : run.rankings) {
        auto& ranking = out[user];
        for (const auto& e : entries) ranking.emplace_back(e.item_id, e.score);
    }
    return out;
}

InteractionLog to_log(const Events& events) {
    InteractionLog log;
    for (const auto& [user, item, rating, ts] : events) log.events.push_back({user, item, rating, ts});
    return log;
}

Events from_log(const InteractionLog& log) {
    Events out;
    for (const auto& e : log.events) out.emplace_back(e.user_id, e.item_id, e.rating, e.timestamp);
    return out;
}

ItemRecord record_from_dict(const std::string& item_id, const py::dict& d) {
    ItemRecord rec;
    rec.item_id = item_id;
    if (d.contains("title")) rec.title = d["title"].cast<std::string>();
    if (d.contains("average_rating")) rec.average_rating = d["average_rating"].cast<double>();
    if (d.contains("genres")) rec.genres = d["genres"].cast<std::vector<std::string>>();
    if (d.contains("directors")) rec.directors = d["directors"].cast<std::vector<std::string>>();
    if (d.contains("overview")) rec.overview = d["overview"].cast<std::string>();
    if (d.contains("cast")) rec.cast = d["cast"].cast<std::vector<std::string>>();
    if (d.contains("runtime")) rec.runtime_minutes = d["runtime"].cast<int>();
    if (d.contains("num_ratings")) rec.num_ratings = d["num_ratings"].cast<int64_t>();
    if (d.contains("year")) rec.year = d["year"].cast<int>();
    if (d.contains("languages")) rec.languages = d["languages"].cast<std::vector<std::string>>();
    return rec;
}

py::dict record_to_dict(const ItemRecord& rec) {
    py::dict d;
    d["title"] = rec.title;
    if (rec.average_rating) d["average_rating"] = *rec.average_rating;
    if (!rec.genres.empty()) d["genres"] = rec.genres;
    if (!rec.directors.empty()) d["directors"] = rec.directors;
    if (!rec.overview.empty()) d["overview"] = rec.overview;
    if (!rec.cast.empty()) d["cast"] = rec.cast;
    if (rec.runtime_minutes) d["runtime"] = *rec.runtime_minutes;
    if (rec.num_ratings) d["num_ratings"] = *rec.num_ratings;
    if (rec.year) d["year"] = *rec.year;
    if (!rec.languages.empty()) d["languages"] = rec.languages;
    return d;
}

Catalog to_catalog(const py::dict& d) {
    Catalog catalog;
    for (const auto& [key, value] : d) {
        const auto item_id = key.cast<std::string>();
        catalog.emplace(item_id, record_from_dict(item_id, value.cast<py::dict>()));
    }
    return catalog;
}

py::dict metric_result_to_dict(const metrics::MetricResult& result) {
    py::dict d;
    d["metric"] = result.metric_name;
    d["aggregate"] = result.aggregate;
    d["per_user"] = result.per_user;
    d["params"] = result.params;
    d["skipped_users"] = result.skipped_users;
    if (!result.zero_relevant_users.empty()) d["zero_relevant_users"] = result.zero_relevant_users;
    return d;
}

std::vector<metrics::ScoredSystem> to_scored(
    const std::vector<std::pair<std::string, double>>& pairs) {
    std::vector<metrics::ScoredSystem> out;
    for (const auto& [name, score] : pairs) out.push_back({name, score});
    return out;
}

metrics::PairFilter to_filter(const std::string& mode, int gap) {
    if (mode == "relevant_vs_nonrelevant") return metrics::PairFilter::relevant_vs_nonrelevant();
    if (mode == "min_grade_gap") return metrics::PairFilter::min_grade_gap(gap);
    throw ValidationError("unknown pair filter \"" + mode + "\"");
}

judge::Rubric to_rubric(const std::string& rubric) {
    if (rubric == "none") return judge::Rubric::none;
    if (rubric == "criteria") return judge::Rubric::criteria;
    throw ValidationError("unknown rubric \"" + rubric + "\"");
}

judge::ProfileSpec to_profile(int history_size, const std::string& selection, uint64_t seed,
                              const std::optional<std::vector<std::string>>& fields) {
    judge::ProfileSpec profile;
    profile.history_size = history_size;
    profile.seed = seed;
    if (selection == "most_recent") profile.selection = judge::ProfileSpec::Selection::most_recent;
    else if (selection != "random_sample")
        throw ValidationError("unknown selection \"" + selection + "\"");
    if (fields) profile.fields = *fields;
    return profile;
}

py::dict verdict_to_dict(const judge::JudgeVerdict& v) {
    py::dict d;
    d["reasoning"] = v.reasoning;
    if (v.overall) d["overall"] = *v.overall;
    if (!v.criteria_scores.empty()) d["criteria"] = v.criteria_scores;
    d["cached"] = v.cached;
    return d;
}

}  // namespace

PYBIND11_MODULE(_recjudge, m) {
    m.doc() = "Cranfield-style recommender evaluation toolkit";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // --- corpus ---
    m.def(
        "load_interactions",
        [](const std::string& path, const std::string& format) {
            corpus::LoadReport report;
            auto log = corpus::load_interactions(path,
                                                 format == "tsv"
                                                     ? corpus::InteractionFormat::tsv
                                                     : corpus::InteractionFormat::csv_movielens,
                                                 &report);
            return py::make_tuple(from_log(log), report.skipped);
        },
        py::arg("path"), py::arg("format") = "csv",
        "Returns (events, skipped_line_count).");
    m.def(
        "write_interactions",
        [](const Events& events, const std::string& path) {
            corpus::write_interactions(to_log(events), path);
        },
        py::arg("events"), py::arg("path"));
    m.def(
        "filter_min_interactions",
        [](const Events& events, int min_count) {
            return from_log(corpus::filter_min_interactions(to_log(events), min_count));
        },
        py::arg("events"), py::arg("min_count"));
    m.def(
        "split",
        [](const Events& events, const std::string& strategy, std::optional<double> train_fraction,
           std::optional<int64_t> cutoff, uint64_t seed) {
            corpus::SplitSpec spec;
            if (strategy == "per_user_time_ordered")
                spec.strategy = corpus::SplitStrategy::per_user_time_ordered;
            else if (strategy == "global_time")
                spec.strategy = corpus::SplitStrategy::global_time;
            else if (strategy == "per_user_random")
                spec.strategy = corpus::SplitStrategy::per_user_random;
            else
                throw ValidationError("unknown strategy \"" + strategy + "\"");
            spec.train_fraction = train_fraction;
            spec.cutoff_timestamp = cutoff;
            spec.seed = seed;
            auto [train, test] = corpus::split(to_log(events), spec);
            return py::make_tuple(from_log(train), from_log(test));
        },
        py::arg("events"), py::arg("strategy"), py::arg("train_fraction") = std::nullopt,
        py::arg("cutoff") = std::nullopt, py::arg("seed") = 0);
    m.def(
        "derive_qrels",
        [](const Events& test, const std::string& grade_map) {
            return from_qrels(
                corpus::derive_qrels_from_test(to_log(test), corpus::GradeMap::parse(grade_map)));
        },
        py::arg("test_events"), py::arg("grade_map") = "4.5:4,3.5:3,2.5:2,0.5:1");
    m.def(
        "read_qrels",
        [](const std::string& path, int grade_bound) {
            return from_qrels(corpus::read_qrels(path, grade_bound));
        },
        py::arg("path"), py::arg("grade_bound") = 7);
    m.def(
        "write_qrels",
        [](const QrelsDict& qrels, const std::string& path, int grade_bound) {
            corpus::write_qrels(to_qrels(qrels, grade_bound), path);
        },
        py::arg("qrels"), py::arg("path"), py::arg("grade_bound") = 7);
    m.def(
        "read_run",
        [](const std::string& path) {
            auto run = corpus::read_run(path);
            return py::make_tuple(run.system_tag, from_run(run));
        },
        py::arg("path"), "Returns (system_tag, rankings).");
    m.def(
        "write_run",
        [](const std::string& tag, const Rankings& rankings, const std::string& path) {
            corpus::write_run(to_run(rankings, tag), path);
        },
        py::arg("tag"), py::arg("rankings"), py::arg("path"));

    // --- metrics ---
    m.def("rbo", &metrics::rbo, py::arg("system"), py::arg("ideal"), py::arg("p"),
          py::arg("depth"));
    m.def(
        "judged_at_k",
        [](const Rankings& rankings, const QrelsDict& qrels, int k, const std::string& tag) {
            return metric_result_to_dict(
                metrics::judged_at_k(to_run(rankings, tag), to_qrels(qrels, 1000), k));
        },
        py::arg("rankings"), py::arg("qrels"), py::arg("k"), py::arg("tag") = "run");
    m.def(
        "compatibility",
        [](const Rankings& rankings, const QrelsDict& qrels, double p, std::optional<int> depth,
           const std::string& tag) {
            return metric_result_to_dict(
                metrics::compatibility(to_run(rankings, tag), to_qrels(qrels, 1000), p, depth));
        },
        py::arg("rankings"), py::arg("qrels"), py::arg("p") = 0.95,
        py::arg("depth") = std::nullopt, py::arg("tag") = "run");
    m.def(
        "kendall_tau",
        [](const std::vector<std::pair<std::string, double>>& a,
           const std::vector<std::pair<std::string, double>>& b, const std::string& variant) {
            return metrics::kendall_tau(to_scored(a), to_scored(b),
                                        variant == "tau_a" ? metrics::TauVariant::tau_a
                                                           : metrics::TauVariant::tau_b);
        },
        py::arg("a"), py::arg("b"), py::arg("variant") = "tau_b",
        "Rankings as ordered [(name, score), ...] lists.");
    m.def(
        "weighted_kendall_tau",
        [](const std::vector<std::pair<std::string, double>>& a,
           const std::vector<std::pair<std::string, double>>& b) {
            return metrics::weighted_kendall_tau(to_scored(a), to_scored(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "agreement_triple",
        [](const QrelsDict& human, const QrelsDict& judged, const std::string& mode, int gap,
           bool per_user_macro) {
            auto triple = metrics::agreement_triple(to_qrels(human), to_qrels(judged, 1000),
                                                    to_filter(mode, gap), per_user_macro);
            py::dict d;
            d["agreement"] = triple.agreement;
            d["tie"] = triple.tie;
            d["disagreement"] = triple.disagreement;
            d["pair_count"] = triple.pair_count;
            return d;
        },
        py::arg("human"), py::arg("judged"), py::arg("mode") = "relevant_vs_nonrelevant",
        py::arg("gap") = 1, py::arg("per_user_macro") = false);

    // --- pooling ---
    m.def(
        "build_pool",
        [](const std::map<std::string, Rankings>& runs, int depth) {
            std::vector<RunSet> run_sets;
            for (const auto& [tag, rankings] : runs) run_sets.push_back(to_run(rankings, tag));
            auto pool = pooling::build_pool(run_sets, depth);
            std::map<std::string, std::vector<std::string>> out;
            for (const auto& [user, items] : pool.assignments)
                out[user] = {items.begin(), items.end()};
            return out;
        },
        py::arg("runs"), py::arg("depth"), "runs: dict tag -> rankings.");
    m.def(
        "sample_qrels",
        [](const QrelsDict& qrels, int per_user, uint64_t seed) {
            return from_qrels(pooling::sample_qrels(to_qrels(qrels, 1000), per_user, seed));
        },
        py::arg("qrels"), py::arg("per_user"), py::arg("seed"));

    // --- judge ---
    m.def("criteria_names", [] {
        std::vector<std::string> names;
        for (const auto& c : judge::kCriteria) names.push_back(c.name);
        return names;
    });
    m.def("metadata_fields",
          [] { return std::vector<std::string>{kMetadataFields.begin(), kMetadataFields.end()}; });
    m.def(
        "build_profile",
        [](const std::string& user, const Events& history, const py::dict& catalog,
           int history_size, const std::string& selection, uint64_t seed,
           const std::optional<std::vector<std::string>>& fields) {
            return judge::build_profile(user, to_log(history), to_catalog(catalog),
                                        to_profile(history_size, selection, seed, fields));
        },
        py::arg("user"), py::arg("history"), py::arg("catalog"), py::arg("history_size") = 1000,
        py::arg("selection") = "random_sample", py::arg("seed") = 0,
        py::arg("fields") = std::nullopt);
    m.def(
        "render_prompt",
        [](const std::string& profile_text, const py::dict& candidate,
           const std::optional<std::vector<std::string>>& fields, const std::string& rubric) {
            const std::vector<std::string> selected =
                fields ? *fields
                       : std::vector<std::string>{kMetadataFields.begin(), kMetadataFields.end()};
            return judge::render_prompt(profile_text, record_from_dict("candidate", candidate),
                                        selected, to_rubric(rubric))
                .full_text();
        },
        py::arg("profile_text"), py::arg("candidate"), py::arg("fields") = std::nullopt,
        py::arg("rubric") = "none");
    m.def(
        "synthetic_oracle_verdict",
        [](const std::string& user, const std::string& item, const QrelsDict& truth, double noise,
           uint64_t seed, const std::string& rubric) {
            return verdict_to_dict(judge::synthetic_oracle_verdict(
                user, item, to_qrels(truth), noise, seed, to_rubric(rubric)));
        },
        py::arg("user"), py::arg("item"), py::arg("truth"), py::arg("noise") = 0.0,
        py::arg("seed") = 0, py::arg("rubric") = "none");
    m.def(
        "judge_items",
        [](const std::vector<std::pair<std::string, std::string>>& pairs, const Events& history,
           const py::dict& catalog, const QrelsDict& truth, double noise, uint64_t seed,
           int repetitions, const std::string& rubric, const std::string& aggregation,
           int history_size, const std::string& selection,
           const std::optional<std::vector<std::string>>& fields, const std::string& cache_path) {
            judge::BackendConfig backend;
            backend.kind = judge::BackendConfig::Kind::synthetic_oracle;
            backend.noise_level = noise;
            backend.seed = seed;
            backend.cache_path = cache_path;
            const Qrels truth_qrels = to_qrels(truth);
            backend.truth = &truth_qrels;
            const auto result = judge::judge_items(
                pairs, backend, to_log(history), to_catalog(catalog),
                to_profile(history_size, selection, seed, fields), to_rubric(rubric), repetitions,
                aggregation == "sum" ? judge::Aggregation::sum_aggregation
                                     : judge::Aggregation::cot_overall);
            py::dict d;
            std::vector<QrelsDict> reps;
            for (const auto& rep : result.per_repetition) reps.push_back(from_qrels(rep));
            d["repetitions"] = reps;
            std::vector<py::dict> failures;
            for (const auto& f : result.failures) {
                py::dict fd;
                fd["user"] = f.user_id;
                fd["item"] = f.item_id;
                fd["repetition"] = f.repetition;
                fd["reason"] = f.reason;
                failures.push_back(fd);
            }
            d["failures"] = failures;
            d["backend_calls"] = result.backend_calls;
            d["cache_hits"] = result.cache_hits;
            return d;
        },
        py::arg("pairs"), py::arg("history"), py::arg("catalog"), py::arg("truth"),
        py::arg("noise") = 0.0, py::arg("seed") = 0, py::arg("repetitions") = 3,
        py::arg("rubric") = "none", py::arg("aggregation") = "cot",
        py::arg("history_size") = 1000, py::arg("selection") = "random_sample",
        py::arg("fields") = std::nullopt, py::arg("cache_path") = "",
        "Judge pairs with the seeded synthetic oracle backend.");

    // --- simlab ---
    py::class_<simlab::World>(m, "World")
        .def_property_readonly("user_ids", [](const simlab::World& w) { return w.user_ids; })
        .def_property_readonly("item_ids", [](const simlab::World& w) { return w.item_ids; })
        .def("interactions", [](const simlab::World& w) { return from_log(w.interactions); })
        .def("catalog",
             [](const simlab::World& w) {
                 py::dict d;
                 for (const auto& [id, rec] : w.catalog) d[py::str(id)] = record_to_dict(rec);
                 return d;
             })
        .def("truth_grade",
             py::overload_cast<const std::string&, const std::string&>(
                 &simlab::World::truth_grade, py::const_))
        .def("truth_qrels", [](const simlab::World& w) { return from_qrels(w.truth_qrels_full()); });
    m.def(
        "generate_world",
        [](int n_users, int n_items, int latent_dim, double popularity_skew,
           int interactions_per_user, double mnar_strength, uint64_t seed) {
            simlab::WorldSpec spec;
            spec.n_users = n_users;
            spec.n_items = n_items;
            spec.latent_dim = latent_dim;
            spec.popularity_skew = popularity_skew;
            spec.interactions_per_user = interactions_per_user;
            spec.mnar_strength = mnar_strength;
            spec.seed = seed;
            return simlab::generate_world(spec);
        },
        py::arg("n_users") = 200, py::arg("n_items") = 2000, py::arg("latent_dim") = 16,
        py::arg("popularity_skew") = 1.0, py::arg("interactions_per_user") = 100,
        py::arg("mnar_strength") = 0.0, py::arg("seed") = 1);
    m.def(
        "run_recommender",
        [](const simlab::World& world, double quality, double popularity_mix, uint64_t seed,
           const Events& train, int k, const std::string& tag) {
            return from_run(simlab::run_recommender({tag, quality, popularity_mix, seed}, world,
                                                    to_log(train), k));
        },
        py::arg("world"), py::arg("quality"), py::arg("popularity_mix") = 0.0,
        py::arg("seed") = 0, py::arg("train") = Events{}, py::arg("k") = 100,
        py::arg("tag") = "sim");
    m.def(
        "quality_ladder",
        [](int n, uint64_t seed) {
            std::vector<py::dict> out;
            for (const auto& rec : simlab::quality_ladder(n, seed)) {
                py::dict d;
                d["tag"] = rec.tag;
                d["quality"] = rec.quality;
                d["popularity_mix"] = rec.popularity_mix;
                d["seed"] = rec.seed;
                out.push_back(d);
            }
            return out;
        },
        py::arg("n"), py::arg("seed"));

    m.attr("__version__") = "0.1.0";
}
