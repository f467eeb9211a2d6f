#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "recjudge/corpus.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kData = RECJUDGE_TEST_DATA;

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(RECJUDGE_CLI_PATH) + " " + args + " 2>&1";
    CliResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (fgets(buf, sizeof(buf), pipe)) result.output += buf;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// One simulated mini-world shared by the pipeline cases.
struct CliWorld {
    fs::path dir = testutil::temp_dir("cli");

    CliWorld() {
        nlohmann::json spec;
        spec["n_users"] = 20;
        spec["n_items"] = 150;
        spec["latent_dim"] = 8;
        spec["interactions_per_user"] = 30;
        spec["popularity_skew"] = 1.0;
        spec["seed"] = 5;
        testutil::write_text(dir / "world.json", spec.dump());
        auto sim = run_cli("simulate --spec " + (dir / "world.json").string() +
                           " --ladder 3 --k 20 --out-dir " + (dir / "world").string());
        REQUIRE(sim.exit_code == 0);
        REQUIRE(sim.output.find("seed: 5") != std::string::npos);
    }

    std::string path(const char* rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("cli: simulate writes world files and is idempotent") {
    CliWorld world;
    CHECK(fs::exists(world.path("world/interactions.csv")));
    CHECK(fs::exists(world.path("world/catalog.jsonl")));
    CHECK(fs::exists(world.path("world/truth.qrels")));
    CHECK(fs::exists(world.path("world/runs/rec00_q000.run")));

    const std::string before = testutil::read_text(world.path("world/interactions.csv"));
    auto again = run_cli("simulate --spec " + world.path("world.json") + " --ladder 3 --k 20" +
                         " --out-dir " + world.path("world2"));
    REQUIRE(again.exit_code == 0);
    CHECK(testutil::read_text(world.path("world2/interactions.csv")) == before);

    SUBCASE("split produces train/test/qrels and reports counts") {
        auto split = run_cli("split --interactions " + world.path("world/interactions.csv") +
                             " --strategy per_user_time_ordered --train-fraction 0.8" +
                             " --train-out " + world.path("train.csv") + " --test-out " +
                             world.path("test.csv") + " --qrels-out " + world.path("test.qrels"));
        REQUIRE(split.exit_code == 0);
        CHECK(split.output.find("train: 480 test: 120") != std::string::npos);
        const auto train = recjudge::corpus::load_interactions(
            world.path("train.csv"), recjudge::corpus::InteractionFormat::csv_movielens);
        CHECK(train.size() == 480);
    }

    SUBCASE("pool unions run files selected by wildcard") {
        auto pool = run_cli("pool --runs '" + world.path("world/runs/*.run") +
                            "' --depth 10 --out " + world.path("pool.txt"));
        REQUIRE(pool.exit_code == 0);
        CHECK(pool.output.find("3 systems") != std::string::npos);
        CHECK(fs::exists(world.path("pool.txt")));
    }

    SUBCASE("judge + agree: zero-noise pipeline identity, warm cache, exit codes") {
        auto pool = run_cli("pool --runs '" + world.path("world/runs/*.run") +
                            "' --depth 5 --out " + world.path("pool.txt"));
        REQUIRE(pool.exit_code == 0);

        const std::string judge_args =
            "judge --pairs " + world.path("pool.txt") + " --backend synthetic --noise 0" +
            " --truth " + world.path("world/truth.qrels") + " --interactions " +
            world.path("world/interactions.csv") + " --catalog " +
            world.path("world/catalog.jsonl") + " --history-size 10 --repetitions 2" +
            " --cache " + world.path("cache.jsonl") + " --out " + world.path("judged");
        auto judged = run_cli(judge_args);
        REQUIRE(judged.exit_code == 0);
        CHECK(judged.output.find("seed: 1") != std::string::npos);
        CHECK(judged.output.find("cache hits: 0") != std::string::npos);
        CHECK(fs::exists(world.path("judged.rep0.qrels")));
        CHECK(fs::exists(world.path("judged.verdicts.jsonl")));

        // Warm re-run: zero backend calls, byte-identical qrels.
        const std::string rep0 = testutil::read_text(world.path("judged.rep0.qrels"));
        auto warm = run_cli(judge_args);
        REQUIRE(warm.exit_code == 0);
        CHECK(warm.output.find("backend calls: 0") != std::string::npos);
        CHECK(testutil::read_text(world.path("judged.rep0.qrels")) == rep0);

        auto agree = run_cli("agree --human " + world.path("world/truth.qrels") + " --judge " +
                             world.path("judged.rep0.qrels"));
        REQUIRE(agree.exit_code == 0);
        CHECK(agree.output.find("agreement=1.000000 tie=0.000000 disagreement=0.000000") !=
              std::string::npos);
    }

    SUBCASE("eval prints and writes the metric result") {
        // Truth qrels cover every pair, so every retrieved item is judged.
        auto eval = run_cli("eval --run " + world.path("world/runs/rec02_q100.run") +
                            " --qrels " + world.path("world/truth.qrels") +
                            " --metric judged@100 --out " + world.path("m"));
        REQUIRE(eval.exit_code == 0);
        CHECK(eval.output.find("judged@100 aggregate=1.000000 n_users=20") != std::string::npos);
        CHECK(fs::exists(world.path("m.csv")));
        auto summary = nlohmann::json::parse(testutil::read_text(world.path("m.json")));
        CHECK(summary["aggregate"].get<double>() == doctest::Approx(1.0));
        CHECK(summary["metric"] == "judged@100");
    }

    SUBCASE("rank-agree emits monotone-ready report files") {
        auto rank = run_cli("rank-agree --runs '" + world.path("world/runs/*.run") +
                            "' --human " + world.path("world/truth.qrels") + " --judge " +
                            world.path("world/truth.qrels") +
                            " --budgets 5,all --out-dir " + world.path("rank"));
        REQUIRE(rank.exit_code == 0);
        CHECK(rank.output.find("seed: 1") != std::string::npos);
        CHECK(rank.output.find("all,1.000000,1.000000,false") != std::string::npos);
        CHECK(fs::exists(world.path("rank/report.csv")));
        CHECK(fs::exists(world.path("rank/scatter.csv")));
    }

    SUBCASE("report runs an experiment spec end to end") {
        nlohmann::json spec;
        spec["name"] = "cli-gap";
        spec["kind"] = "grade_gap";
        spec["inputs"]["qrels_human"] = world.path("world/truth.qrels");
        spec["inputs"]["qrels_judge"] = world.path("world/truth.qrels");
        spec["params"]["gaps"] = {1, 2};
        testutil::write_text(world.dir / "exp.json", spec.dump());
        auto report = run_cli("report --spec " + world.path("exp.json") + " --out-dir " +
                              world.path("exp_out"));
        REQUIRE(report.exit_code == 0);
        CHECK(fs::exists(world.path("exp_out/report.csv")));
        CHECK(fs::exists(world.path("exp_out/manifest.json")));
    }
}

TEST_CASE("cli: usage errors exit 1 with a single-line error") {
    auto unknown = run_cli("eval --wat");
    CHECK(unknown.exit_code == 1);
    CHECK(unknown.output.rfind("error: usage:", 0) == 0);
    CHECK(std::count(unknown.output.begin(), unknown.output.end(), '\n') == 1);

    auto missing = run_cli("agree --human /nonexistent.qrels --judge /nonexistent.qrels");
    CHECK(missing.exit_code == 1);
    CHECK(missing.output.rfind("error: io:", 0) == 0);

    auto no_sub = run_cli("");
    CHECK(no_sub.exit_code == 1);
}

TEST_CASE("cli: malformed inputs exit 2 with a validation error") {
    auto dir = testutil::temp_dir("cli");
    auto bad_qrels = run_cli("agree --human " + (kData / "bad_grade.qrels").string() +
                             " --judge " + (kData / "golden.qrels").string());
    CHECK(bad_qrels.exit_code == 2);
    CHECK(bad_qrels.output.rfind("error: validation:", 0) == 0);

    auto gap_run = run_cli("eval --run " + (kData / "rank_gap.run").string() + " --qrels " +
                           (kData / "golden.qrels").string());
    CHECK(gap_run.exit_code == 2);

    auto dup_run = run_cli("eval --run " + (kData / "dup_item.run").string() + " --qrels " +
                           (kData / "golden.qrels").string());
    CHECK(dup_run.exit_code == 2);

    testutil::write_text(dir / "empty.pairs", "");
    auto empty = run_cli("judge --pairs " + (dir / "empty.pairs").string() +
                         " --interactions x --catalog y --out z");
    CHECK(empty.exit_code == 2);
}

TEST_CASE("cli: partial and hard judge failures use exit codes 3 and 4") {
    auto dir = testutil::temp_dir("cli");
    // Catalog with two items; truth knows only one of them.
    testutil::write_text(dir / "catalog.jsonl",
                         "{\"item_id\":\"a\",\"title\":\"A\"}\n"
                         "{\"item_id\":\"b\",\"title\":\"B\"}\n");
    testutil::write_text(dir / "hist.csv", "user_id,item_id\nu,a\nu,b\n");
    testutil::write_text(dir / "truth.qrels", "u 0 a 3\n");
    testutil::write_text(dir / "pairs.txt", "u a\nu b\n");

    auto partial = run_cli("judge --pairs " + (dir / "pairs.txt").string() + " --backend synthetic" +
                           " --noise 0 --truth " + (dir / "truth.qrels").string() +
                           " --interactions " + (dir / "hist.csv").string() + " --catalog " +
                           (dir / "catalog.jsonl").string() + " --repetitions 1 --out " +
                           (dir / "out").string());
    CHECK(partial.exit_code == 3);
    CHECK(fs::exists(dir / "out.failures.jsonl"));
    CHECK(*recjudge::corpus::read_qrels((dir / "out.rep0.qrels").string()).get("u", "a") == 3);

    testutil::write_text(dir / "pairs_bad.txt", "u b\n");
    auto hard = run_cli("judge --pairs " + (dir / "pairs_bad.txt").string() +
                        " --backend synthetic --noise 0 --truth " +
                        (dir / "truth.qrels").string() + " --interactions " +
                        (dir / "hist.csv").string() + " --catalog " +
                        (dir / "catalog.jsonl").string() + " --repetitions 1 --out " +
                        (dir / "out2").string());
    CHECK(hard.exit_code == 4);
}

TEST_CASE("cli: global seed propagates unless locally overridden") {
    auto dir = testutil::temp_dir("cli");
    testutil::write_text(dir / "i.csv",
                         "user_id,item_id,timestamp\nu,a,1\nu,b,2\nu,c,3\nu,d,4\n");
    auto split = run_cli("--seed 9 split --interactions " + (dir / "i.csv").string() +
                         " --strategy per_user_random --train-fraction 0.5 --train-out " +
                         (dir / "tr.csv").string() + " --test-out " + (dir / "te.csv").string());
    REQUIRE(split.exit_code == 0);
    CHECK(split.output.find("seed: 9") != std::string::npos);
}

TEST_CASE("cli: seeds default from the config file, never the wall clock") {
    auto dir = testutil::temp_dir("cli");
    testutil::write_text(dir / "i.csv",
                         "user_id,item_id,timestamp\nu,a,1\nu,b,2\nu,c,3\nu,d,4\n");
    testutil::write_text(dir / "global.ini", "seed=5\n");
    auto split = run_cli("--config " + (dir / "global.ini").string() + " split --interactions " +
                         (dir / "i.csv").string() +
                         " --strategy per_user_random --train-fraction 0.5 --train-out " +
                         (dir / "tr.csv").string() + " --test-out " + (dir / "te.csv").string());
    REQUIRE(split.exit_code == 0);
    CHECK(split.output.find("seed: 5") != std::string::npos);
}
