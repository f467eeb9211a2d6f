#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "recjudge/analysis.hpp"
#include "recjudge/common.hpp"
#include "recjudge/corpus.hpp"
#include "recjudge/judge.hpp"
#include "recjudge/pooling.hpp"
#include "recjudge/rng.hpp"
#include "testutil.hpp"

using namespace recjudge;
using namespace recjudge::analysis;

TEST_CASE("mean_ci95 uses the Student-t quantile over repetition values") {
    auto identical = mean_ci95({0.5, 0.5, 0.5});
    CHECK(identical.mean == doctest::Approx(0.5));
    CHECK(identical.half_width == 0.0);

    // n=3, sd=1: t_{0.975,2} / sqrt(3), cross-checked against scipy.
    auto spread = mean_ci95({1.0, 2.0, 3.0});
    CHECK(spread.mean == doctest::Approx(2.0));
    CHECK(spread.half_width == doctest::Approx(2.4841377117).epsilon(1e-9));

    CHECK(mean_ci95({4.0}).half_width == 0.0);
    CHECK_THROWS_AS(mean_ci95({}), ValidationError);
}

namespace {

// Three systems with controlled judged@2 behaviour on one user.
std::vector<RunSet> fixture_runs() {
    return {testutil::run_of("A", "u", {"a", "b"}), testutil::run_of("B", "u", {"a", "x"}),
            testutil::run_of("C", "u", {"x", "y"})};
}

}  // namespace

TEST_CASE("completeness_comparison: identical qrels give identical columns") {
    auto qrels = testutil::qrels_of({{"u", "a", 1}, {"u", "b", 0}});
    auto report = completeness_comparison(fixture_runs(), qrels, qrels, 2);
    REQUIRE(report.rows.size() == 3);
    for (const auto& row : report.rows) CHECK(row.split_score == row.pooled_score);
    CHECK(report.split_average == report.pooled_average);
    const std::string csv = report.to_csv();
    CHECK(csv.find("system,judged@2_split,judged@2_pooled") == 0);
    CHECK(csv.find("AVERAGE,") != std::string::npos);
}

TEST_CASE("completeness_comparison: pool of the evaluated runs covers them fully") {
    auto runs = fixture_runs();
    auto pool = pooling::build_pool(runs, 2);
    Qrels pooled;
    for (const auto& [user, items] : pool.assignments)
        for (const auto& item : items) pooled.set(user, item, 1);
    auto sparse = testutil::qrels_of({{"u", "a", 1}});
    auto report = completeness_comparison(runs, sparse, pooled, 2);
    for (const auto& row : report.rows) CHECK(row.pooled_score == doctest::Approx(1.0));
    CHECK(report.pooled_average == doctest::Approx(1.0));
}

TEST_CASE("sampled_qrels_sweep: full-size sample recovers tau exactly") {
    rng::Stream stream(3);
    Qrels full;
    for (int u = 0; u < 10; ++u)
        for (int i = 0; i < 12; ++i)
            full.set("u" + std::to_string(u), "i" + std::to_string(i),
                     static_cast<int>(stream.bounded(8)));
    std::vector<RunSet> runs;
    for (int s = 0; s < 4; ++s) {
        RunSet run;
        run.system_tag = "S" + std::to_string(s);
        for (int u = 0; u < 10; ++u) {
            auto& ranking = run.rankings["u" + std::to_string(u)];
            static constexpr int kCoprime12[] = {1, 5, 7, 11};
            for (int i = 0; i < 12; ++i) {
                const int item = (i * kCoprime12[s % 4] + u) % 12;
                ranking.push_back({"i" + std::to_string(item), 12.0 - i});
            }
        }
        runs.push_back(std::move(run));
    }
    MetricSpec metric;
    auto points = sampled_qrels_sweep(runs, full, {2, -1}, {1, 2, 3}, metric, 5);
    REQUIRE(points.size() == 2);
    CHECK(points[1].tau.mean == 1.0);
    CHECK(points[1].tau.half_width == 0.0);
    CHECK(points[0].tau.mean <= 1.0);

    CHECK_THROWS_AS(sampled_qrels_sweep({runs[0]}, full, {2}, {1}, metric, 5), ValidationError);
    CHECK_THROWS_AS(sampled_qrels_sweep(runs, full, {5, 2}, {1}, metric, 5), ValidationError);
    CHECK_THROWS_AS(sampled_qrels_sweep(runs, full, {2, 2}, {1}, metric, 5), ValidationError);
}

namespace {

struct SweepFixture {
    Catalog catalog;
    InteractionLog history;
    Qrels truth;
    std::vector<std::pair<std::string, std::string>> pairs;

    SweepFixture() {
        rng::Stream stream(11);
        for (int i = 0; i < 30; ++i) {
            ItemRecord rec;
            rec.item_id = "m" + std::to_string(i);
            rec.title = "Movie " + std::to_string(i);
            rec.genres = {"drama"};
            rec.year = 2000 + i;
            rec.average_rating = 3.0;
            rec.runtime_minutes = 100;
            rec.num_ratings = 50;
            rec.languages = {"English"};
            rec.overview = "Plot " + std::to_string(i);
            rec.directors = {"D"};
            rec.cast = {"A", "B"};
            catalog.emplace(rec.item_id, rec);
        }
        for (int u = 0; u < 6; ++u) {
            const std::string user = "u" + std::to_string(u);
            for (int j = 0; j < 12; ++j) {
                const std::string item = "m" + std::to_string((u * 5 + j) % 30);
                history.events.push_back({user, item, 3.0, static_cast<int64_t>(j + 1)});
                if (!truth.get(user, item)) {
                    truth.set(user, item, static_cast<int>(stream.bounded(8)));
                    pairs.emplace_back(user, item);
                }
            }
        }
    }

    judge::BackendConfig oracle(double noise) const {
        judge::BackendConfig config;
        config.kind = judge::BackendConfig::Kind::synthetic_oracle;
        config.noise_level = noise;
        config.truth = &truth;
        config.seed = 17;
        return config;
    }
};

}  // namespace

TEST_CASE("metadata_ablation: zero-noise oracle gives agreement 1.0 with zero CI") {
    SweepFixture fx;
    judge::ProfileSpec profile;
    auto cells = metadata_ablation(fx.pairs, fx.oracle(0.0), fx.history, fx.catalog, profile,
                                   {{"title"}, {"title", "genres"}}, 3, fx.truth,
                                   metrics::PairFilter::relevant_vs_nonrelevant());
    REQUIRE(cells.size() == 2);
    for (const auto& cell : cells) {
        CHECK(cell.triple.agreement.mean == doctest::Approx(1.0));
        CHECK(cell.triple.agreement.half_width == 0.0);
        CHECK(cell.triple.failures == 0);
        CHECK_FALSE(cell.triple.flagged);
    }
    CHECK(cells[0].label == "title");
    CHECK(cells[1].label == "title+genres");
}

TEST_CASE("metadata_ablation: field-scaled oracle noise raises agreement with field count") {
    SweepFixture fx;
    judge::ProfileSpec profile;
    auto config = fx.oracle(12.0);
    config.noise_shrinks_with_fields = true;
    std::vector<std::vector<std::string>> field_sets = {
        {"title"},
        {"title", "genres", "year"},
        {kMetadataFields.begin(), kMetadataFields.end()},
    };
    auto cells = metadata_ablation(fx.pairs, config, fx.history, fx.catalog, profile, field_sets,
                                   3, fx.truth, metrics::PairFilter::relevant_vs_nonrelevant());
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].triple.agreement.mean < cells[1].triple.agreement.mean);
    CHECK(cells[1].triple.agreement.mean < cells[2].triple.agreement.mean);
}

TEST_CASE("history_size_sweep: cap saturation and zero-noise flatness") {
    SweepFixture fx;
    judge::ProfileSpec profile;
    auto cells = history_size_sweep(fx.pairs, fx.oracle(0.0), fx.history, fx.catalog, profile,
                                    {1, 12, 500}, 2, fx.truth,
                                    metrics::PairFilter::relevant_vs_nonrelevant());
    REQUIRE(cells.size() == 3);
    // Zero noise: flat 1.0 at every size.
    for (const auto& cell : cells) CHECK(cell.triple.agreement.mean == doctest::Approx(1.0));

    // Sizes beyond every history cap produce bit-identical prompts, hence
    // identical cells under a deterministic oracle.
    auto config = fx.oracle(1.0);
    auto capped = history_size_sweep(fx.pairs, config, fx.history, fx.catalog, profile,
                                     {12, 500, 1000}, 1, fx.truth,
                                     metrics::PairFilter::relevant_vs_nonrelevant());
    CHECK(capped[1].triple.agreement.mean == doctest::Approx(capped[2].triple.agreement.mean));
}

TEST_CASE("history_size_sweep: noise shrinking with size gives monotone agreement") {
    SweepFixture fx;
    judge::ProfileSpec profile;
    auto config = fx.oracle(8.0);
    config.noise_shrinks_with_history = true;
    auto cells = history_size_sweep(fx.pairs, config, fx.history, fx.catalog, profile,
                                    {1, 4, 12}, 3, fx.truth,
                                    metrics::PairFilter::relevant_vs_nonrelevant());
    CHECK(cells[0].triple.agreement.mean < cells[2].triple.agreement.mean);
}

TEST_CASE("grade_gap_sweep: identical qrels never disagree; empty gaps are absent") {
    auto human = testutil::qrels_of(
        {{"u", "a", 0}, {"u", "b", 2}, {"u", "c", 5}, {"v", "x", 1}, {"v", "y", 3}});
    auto cells = grade_gap_sweep(human, human, {1, 2, 3, 4, 5, 6, 7});
    REQUIRE(cells.size() == 7);
    for (const auto& cell : cells) {
        if (!cell.triple) continue;
        CHECK(cell.triple->disagreement == doctest::Approx(0.0));
        CHECK(cell.triple->tie == doctest::Approx(0.0));
    }
    // Max human gap is 5, so gaps 6 and 7 have no qualifying pairs.
    CHECK_FALSE(cells[5].triple.has_value());
    CHECK_FALSE(cells[6].triple.has_value());

    // gap=7 restricts to (0 vs 7) pairs only.
    auto wide = testutil::qrels_of({{"u", "a", 0}, {"u", "b", 7}, {"u", "c", 6}});
    auto top = grade_gap_sweep(wide, wide, {7});
    REQUIRE(top[0].triple.has_value());
    CHECK(top[0].triple->pair_count == 1);

    CHECK_THROWS_AS(grade_gap_sweep(human, human, {0}), ValidationError);
    CHECK_THROWS_AS(grade_gap_sweep(human, human, {8}), ValidationError);
}

TEST_CASE("ranking_agreement: identical qrels at full budget give tau exactly 1") {
    rng::Stream stream(7);
    Qrels qrels;
    for (int u = 0; u < 6; ++u)
        for (int i = 0; i < 10; ++i)
            qrels.set("u" + std::to_string(u), "i" + std::to_string(i),
                      static_cast<int>(stream.bounded(8)));
    std::vector<RunSet> runs;
    for (int s = 0; s < 5; ++s) {
        RunSet run;
        run.system_tag = "S" + std::to_string(s);
        for (int u = 0; u < 6; ++u) {
            auto& ranking = run.rankings["u" + std::to_string(u)];
            static constexpr int kCoprime10[] = {1, 3, 7, 9, 11};
            for (int i = 0; i < 10; ++i)
                ranking.push_back(
                    {"i" + std::to_string((i * kCoprime10[s % 5] + u * s) % 10), 10.0 - i});
        }
        runs.push_back(std::move(run));
    }
    MetricSpec metric;
    auto report = ranking_agreement(runs, qrels, qrels, metric, {-1, 3, 100}, 5);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].tau == 1.0);
    CHECK(report.rows[0].weighted_tau == 1.0);
    CHECK_FALSE(report.rows[0].capped);
    CHECK(report.rows[1].tau <= 1.0);
    CHECK(report.rows[2].capped);  // budget 100 exceeds 10 judged items per user

    // Reported tau must equal a recomputation from the embedded scatter rows.
    for (const auto& row : report.rows) {
        std::vector<metrics::ScoredSystem> h, j;
        for (const auto& point : row.scatter) {
            h.push_back({point.system, point.score_human});
            j.push_back({point.system, point.score_judge});
        }
        CHECK(metrics::kendall_tau(h, j) == row.tau);
        CHECK(metrics::weighted_kendall_tau(h, j) == row.weighted_tau);
    }

    CHECK_THROWS_AS(ranking_agreement({runs[0]}, qrels, qrels, metric, {-1}, 5),
                    ValidationError);
    const std::string csv = report.to_csv();
    CHECK(csv.find("budget,tau,weighted_tau,capped") == 0);
    CHECK(csv.find("all,1.000000,1.000000,false") != std::string::npos);
}

TEST_CASE("run_experiment is byte-identical across re-runs and validates inputs") {
    auto dir = testutil::temp_dir("analysis");
    auto human = testutil::qrels_of({{"u", "a", 0}, {"u", "b", 3}, {"u", "c", 7}});
    corpus::write_qrels(human, (dir / "human.qrels").string());
    auto judged = testutil::qrels_of({{"u", "a", 1}, {"u", "b", 2}, {"u", "c", 6}});
    corpus::write_qrels(judged, (dir / "judge.qrels").string());

    nlohmann::json spec;
    spec["name"] = "gap-demo";
    spec["kind"] = "grade_gap";
    spec["inputs"]["qrels_human"] = (dir / "human.qrels").string();
    spec["inputs"]["qrels_judge"] = (dir / "judge.qrels").string();
    spec["params"]["gaps"] = {1, 3, 7};
    testutil::write_text(dir / "spec.json", spec.dump(2));

    auto loaded = ExperimentSpec::load((dir / "spec.json").string());
    auto first = run_experiment(loaded, (dir / "out1").string());
    auto second = run_experiment(loaded, (dir / "out2").string());
    REQUIRE(first.size() == second.size());
    CHECK(first.size() == 3);  // report.csv, plot.dat, manifest.json
    for (size_t i = 0; i < first.size(); ++i)
        CHECK(testutil::read_text(first[i]) == testutil::read_text(second[i]));

    auto manifest = nlohmann::json::parse(testutil::read_text(dir / "out1" / "manifest.json"));
    CHECK(manifest["kind"] == "grade_gap");
    CHECK(manifest["tool_version"] == kToolVersion);
    CHECK(manifest["spec_hash"].get<std::string>().size() == 16);

    spec["inputs"]["qrels_judge"] = (dir / "missing.qrels").string();
    testutil::write_text(dir / "bad.json", spec.dump(2));
    CHECK_THROWS_AS(ExperimentSpec::load((dir / "bad.json").string()), ValidationError);

    spec["inputs"]["qrels_judge"] = (dir / "judge.qrels").string();
    spec["kind"] = "unheard_of";
    testutil::write_text(dir / "unknown.json", spec.dump(2));
    auto unknown = ExperimentSpec::load((dir / "unknown.json").string());
    CHECK_THROWS_AS(run_experiment(unknown, (dir / "out3").string()), ValidationError);
}

TEST_CASE("worker count never changes analysis output") {
    rng::Stream stream(13);
    Qrels qrels;
    for (int u = 0; u < 8; ++u)
        for (int i = 0; i < 15; ++i)
            qrels.set("u" + std::to_string(u), "i" + std::to_string(i),
                      static_cast<int>(stream.bounded(8)));
    std::vector<RunSet> runs;
    static constexpr int kCoprime15[] = {1, 2, 4, 7, 8, 11};
    for (int s = 0; s < 6; ++s) {
        RunSet run;
        run.system_tag = "S" + std::to_string(s);
        for (int u = 0; u < 8; ++u) {
            auto& ranking = run.rankings["u" + std::to_string(u)];
            for (int i = 0; i < 15; ++i)
                ranking.push_back({"i" + std::to_string((i * kCoprime15[s] + u) % 15), 15.0 - i});
        }
        runs.push_back(std::move(run));
    }
    MetricSpec metric;
    auto sampled = pooling::sample_qrels(qrels, 6, 3);
    auto serial = ranking_agreement(runs, qrels, sampled, metric, {3, -1}, 5);
    set_max_workers(4);
    auto parallel = ranking_agreement(runs, qrels, sampled, metric, {3, -1}, 5);
    set_max_workers(1);
    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].tau == parallel.rows[i].tau);
        CHECK(serial.rows[i].weighted_tau == parallel.rows[i].weighted_tau);
    }
}

TEST_CASE("run_experiment dispatches every experiment kind") {
    auto dir = testutil::temp_dir("analysis");
    rng::Stream stream(19);

    // Shared fixtures on disk: three runs, qrels, interactions, catalog,
    // pairs and a synthetic backend config.
    Qrels full;
    for (int u = 0; u < 5; ++u)
        for (int i = 0; i < 12; ++i)
            full.set("u" + std::to_string(u), "i" + std::to_string(i),
                     static_cast<int>(stream.bounded(8)));
    corpus::write_qrels(full, (dir / "full.qrels").string());

    std::vector<std::string> run_paths;
    static constexpr int kCoprime12b[] = {1, 5, 7};
    for (int s = 0; s < 3; ++s) {
        RunSet run;
        run.system_tag = "S" + std::to_string(s);
        for (int u = 0; u < 5; ++u) {
            auto& ranking = run.rankings["u" + std::to_string(u)];
            for (int i = 0; i < 12; ++i)
                ranking.push_back({"i" + std::to_string((i * kCoprime12b[s] + u) % 12), 12.0 - i});
        }
        const auto path = dir / ("s" + std::to_string(s) + ".run");
        corpus::write_run(run, path.string());
        run_paths.push_back(path.string());
    }

    InteractionLog history;
    Catalog catalog;
    for (int i = 0; i < 12; ++i) {
        ItemRecord rec;
        rec.item_id = "i" + std::to_string(i);
        rec.title = "Item " + std::to_string(i);
        catalog.emplace(rec.item_id, rec);
    }
    for (int u = 0; u < 5; ++u)
        for (int i = 0; i < 12; ++i)
            history.events.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 3.0,
                                      static_cast<int64_t>(i + 1)});
    corpus::write_interactions(history, (dir / "hist.csv").string());
    corpus::write_catalog(catalog, (dir / "catalog.jsonl").string());

    std::string pairs_text;
    for (int u = 0; u < 5; ++u)
        for (int i = 0; i < 12; ++i)
            pairs_text += "u" + std::to_string(u) + " i" + std::to_string(i) + "\n";
    testutil::write_text(dir / "pairs.txt", pairs_text);
    testutil::write_text(dir / "backend.ini",
                         "[backend]\nkind = synthetic_oracle\nnoise_level = 0\ntruth_qrels = " +
                             (dir / "full.qrels").string() + "\n");

    auto run_kind = [&](const char* kind, nlohmann::json inputs, nlohmann::json params,
                        const char* out) {
        nlohmann::json spec;
        spec["name"] = kind;
        spec["kind"] = kind;
        spec["inputs"] = inputs;
        spec["params"] = params;
        spec["seeds"] = {1, 2};
        const auto spec_path = dir / (std::string(kind) + ".json");
        testutil::write_text(spec_path, spec.dump(2));
        return run_experiment(ExperimentSpec::load(spec_path.string()),
                              (dir / out).string());
    };

    nlohmann::json runs_input = {{"runs", run_paths}};
    runs_input["qrels_split"] = (dir / "full.qrels").string();
    runs_input["qrels_pooled"] = (dir / "full.qrels").string();
    auto completeness = run_kind("completeness", runs_input, {{"k", 5}}, "out_completeness");
    CHECK(testutil::read_text(completeness[0]).find("AVERAGE,1.000000,1.000000") !=
          std::string::npos);

    nlohmann::json sweep_input = {{"runs", run_paths}};
    sweep_input["qrels_full"] = (dir / "full.qrels").string();
    auto sweep = run_kind("sampled_sweep", sweep_input,
                          {{"sample_sizes", {3, -1}}, {"metric", "compatibility"}}, "out_sweep");
    CHECK(testutil::read_text(sweep[0]).find("all,1.000000,0.000000") != std::string::npos);

    nlohmann::json rank_input = {{"runs", run_paths}};
    rank_input["qrels_human"] = (dir / "full.qrels").string();
    rank_input["qrels_judge"] = (dir / "full.qrels").string();
    auto rank = run_kind("rank_agree", rank_input, {{"budgets", {4, -1}}}, "out_rank");
    CHECK(testutil::read_text(rank[0]).find("all,1.000000,1.000000,false") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "out_rank" / "scatter.csv"));

    nlohmann::json judge_input;
    judge_input["pairs"] = (dir / "pairs.txt").string();
    judge_input["backend"] = (dir / "backend.ini").string();
    judge_input["interactions"] = (dir / "hist.csv").string();
    judge_input["catalog"] = (dir / "catalog.jsonl").string();
    judge_input["qrels_human"] = (dir / "full.qrels").string();
    auto ablation = run_kind(
        "metadata_ablation", judge_input,
        {{"field_sets", {{"title"}, {"title", "genres"}}}, {"repetitions", 2}}, "out_ablation");
    const auto ablation_csv = testutil::read_text(ablation[0]);
    CHECK(ablation_csv.find("title,1.000000,0.000000") != std::string::npos);
    CHECK(ablation_csv.find("title+genres,1.000000") != std::string::npos);

    auto history_sweep = run_kind("history_sweep", judge_input,
                                  {{"history_sizes", {2, 12}}, {"repetitions", 2}}, "out_history");
    CHECK(testutil::read_text(history_sweep[0]).find("12,1.000000") != std::string::npos);
}
