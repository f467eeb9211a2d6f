// recjudge: command-line entry point for Cranfield-style recommender
// evaluation. Every subcommand is scriptable and idempotent given identical
// inputs and seeds; randomized subcommands print their effective seed.
//
// Exit codes: 0 success, 1 usage error, 2 validation error, 3 partial judge
// failure, 4 backend hard failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "recjudge/analysis.hpp"
#include "recjudge/common.hpp"
#include "recjudge/corpus.hpp"
#include "recjudge/judge.hpp"
#include "recjudge/metrics.hpp"
#include "recjudge/pooling.hpp"
#include "recjudge/simlab.hpp"

namespace {

using namespace recjudge;
namespace fs = std::filesystem;

bool wildcard_match(const std::string& pattern, const std::string& text) {
    size_t p = 0, t = 0, star = std::string::npos, match = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            match = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++match;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

// Expands shell-style wildcards in the filename component; literal paths pass
// through (their existence is checked by the readers).
std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const auto& pattern : patterns) {
        const fs::path p(pattern);
        const std::string name = p.filename().string();
        if (name.find('*') == std::string::npos && name.find('?') == std::string::npos) {
            out.push_back(pattern);
            continue;
        }
        const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        std::vector<std::string> matches;
        if (fs::is_directory(dir))
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.is_regular_file() && wildcard_match(name, entry.path().filename().string()))
                    matches.push_back(entry.path().string());
        std::sort(matches.begin(), matches.end());
        if (matches.empty()) throw UsageError("no files match pattern: " + pattern);
        out.insert(out.end(), matches.begin(), matches.end());
    }
    return out;
}

std::vector<RunSet> load_run_files(const std::vector<std::string>& patterns) {
    std::vector<RunSet> runs;
    for (const auto& path : expand_globs(patterns)) runs.push_back(corpus::read_run(path));
    if (runs.empty()) throw UsageError("no run files given");
    return runs;
}

corpus::InteractionFormat format_from(const std::string& format, const std::string& path) {
    if (format == "csv") return corpus::InteractionFormat::csv_movielens;
    if (format == "tsv") return corpus::InteractionFormat::tsv;
    if (format != "auto") throw UsageError("unknown interactions format \"" + format + "\"");
    return path.size() > 4 && path.compare(path.size() - 4, 4, ".tsv") == 0
               ? corpus::InteractionFormat::tsv
               : corpus::InteractionFormat::csv_movielens;
}

std::vector<std::pair<std::string, std::string>> load_pairs_file(const std::string& path) {
    const auto pool = pooling::read_pool(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [user, items] : pool.assignments)
        for (const auto& item : items) pairs.emplace_back(user, item);
    if (pairs.empty()) throw ValidationError(path + ": no (user, item) pairs");
    return pairs;
}

struct JudgeOptions {
    std::string pairs_path;
    std::string backend_arg = "synthetic";
    std::string truth_path;
    double noise = 0.0;
    std::string cache_path;
    std::string interactions_path;
    std::string catalog_path;
    int history_size = 1000;
    std::string selection = "random_sample";
    std::string fields_csv = "all";
    std::string rubric = "none";
    std::string aggregation = "cot";
    int repetitions = 3;
    bool aggregate_labels = false;
    std::string out_prefix;
};

std::vector<std::string> parse_fields(const std::string& csv) {
    if (csv == "all")
        return {kMetadataFields.begin(), kMetadataFields.end()};
    std::vector<std::string> fields;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) fields.push_back(cur);
    return fields;
}

int run_judge(const JudgeOptions& opt, uint64_t seed, int max_in_flight) {
    judge::BackendConfig backend;
    if (opt.backend_arg == "synthetic") {
        backend.kind = judge::BackendConfig::Kind::synthetic_oracle;
        backend.noise_level = opt.noise;
        backend.truth_path = opt.truth_path;
        backend.seed = seed;
    } else if (opt.backend_arg == "replay") {
        backend.kind = judge::BackendConfig::Kind::replay_cache;
    } else {
        backend = judge::load_backend_config(opt.backend_arg);
    }
    if (!opt.cache_path.empty()) backend.cache_path = opt.cache_path;
    backend.max_in_flight = max_in_flight;

    judge::ProfileSpec profile;
    profile.history_size = opt.history_size;
    profile.seed = seed;
    profile.fields = parse_fields(opt.fields_csv);
    if (opt.selection == "most_recent")
        profile.selection = judge::ProfileSpec::Selection::most_recent;
    else if (opt.selection != "random_sample")
        throw UsageError("unknown selection \"" + opt.selection + "\"");

    judge::Rubric rubric;
    if (opt.rubric == "none") rubric = judge::Rubric::none;
    else if (opt.rubric == "criteria") rubric = judge::Rubric::criteria;
    else throw UsageError("unknown rubric \"" + opt.rubric + "\"");

    judge::Aggregation aggregation;
    if (opt.aggregation == "cot") aggregation = judge::Aggregation::cot_overall;
    else if (opt.aggregation == "sum") aggregation = judge::Aggregation::sum_aggregation;
    else throw UsageError("unknown aggregation \"" + opt.aggregation + "\"");

    const auto pairs = load_pairs_file(opt.pairs_path);
    const auto history =
        corpus::load_interactions(opt.interactions_path, format_from("auto", opt.interactions_path));
    const auto catalog = corpus::read_catalog(opt.catalog_path);

    std::cout << "seed: " << seed << "\n";
    const auto result = judge::judge_items(pairs, backend, history, catalog, profile, rubric,
                                           opt.repetitions, aggregation);

    for (size_t rep = 0; rep < result.per_repetition.size(); ++rep)
        corpus::write_qrels(result.per_repetition[rep],
                            opt.out_prefix + ".rep" + std::to_string(rep) + ".qrels");
    judge::write_verdict_log(result, opt.out_prefix + ".verdicts.jsonl");
    if (!result.failures.empty())
        judge::write_failure_manifest(result, opt.out_prefix + ".failures.jsonl");
    if (opt.aggregate_labels)
        corpus::write_qrels(judge::average_labels(result.per_repetition),
                            opt.out_prefix + ".avg.qrels");

    std::cout << "judged pairs: " << pairs.size() << " x " << opt.repetitions
              << " repetitions; backend calls: " << result.backend_calls
              << "; cache hits: " << result.cache_hits << "; failures: " << result.failures.size()
              << "\n";

    if (result.failures.empty()) return 0;
    const size_t requested = pairs.size() * static_cast<size_t>(opt.repetitions);
    return result.failures.size() == requested ? 4 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cranfield-style recommender evaluation toolkit"};
    app.set_config("--config", "", "Global config file (INI)");
    app.require_subcommand(1);

    uint64_t seed = 1;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    int max_in_flight = 4;
    app.add_option("--seed", seed, "Global seed; subcommand seeds default to it");
    app.add_option("--jobs", jobs, "Worker threads for per-system evaluation");
    app.add_option("--max-in-flight", max_in_flight, "Concurrent backend requests");

    // split
    auto* split_cmd = app.add_subcommand("split", "Split interactions into train/test (+ qrels)");
    std::string in_path, in_format = "auto", strategy = "per_user_time_ordered";
    std::string train_out, test_out, qrels_out, grade_map_text = "4.5:4,3.5:3,2.5:2,0.5:1";
    double train_fraction = 0.8;
    int64_t cutoff = 0;
    bool fraction_set = false, cutoff_set = false;
    split_cmd->add_option("--interactions", in_path, "Interactions file")->required();
    split_cmd->add_option("--format", in_format, "csv|tsv|auto");
    split_cmd->add_option("--strategy", strategy,
                          "per_user_time_ordered|global_time|per_user_random");
    split_cmd->add_option("--train-fraction", train_fraction, "Train fraction in (0,1)")
        ->each([&](const std::string&) { fraction_set = true; });
    split_cmd->add_option("--cutoff", cutoff, "global_time cutoff timestamp")
        ->each([&](const std::string&) { cutoff_set = true; });
    split_cmd->add_option("--train-out", train_out, "Train interactions output")->required();
    split_cmd->add_option("--test-out", test_out, "Test interactions output")->required();
    split_cmd->add_option("--qrels-out", qrels_out, "Derive qrels from the test split");
    split_cmd->add_option("--grade-map", grade_map_text, "rating->grade bands, e.g. 4.0:2,0.5:1");

    // pool
    auto* pool_cmd = app.add_subcommand("pool", "Build a judgment pool from runs");
    std::vector<std::string> pool_runs;
    int pool_depth = 100;
    std::string pool_out;
    pool_cmd->add_option("--runs", pool_runs, "Run files (wildcards ok)")->required();
    pool_cmd->add_option("--depth", pool_depth, "Pool depth");
    pool_cmd->add_option("--out", pool_out, "Pool output file")->required();

    // judge
    auto* judge_cmd = app.add_subcommand("judge", "Judge (user,item) pairs with a backend");
    JudgeOptions jopt;
    judge_cmd->add_option("--pairs", jopt.pairs_path, "Pairs file (user item per line)")
        ->required();
    judge_cmd->add_option("--backend", jopt.backend_arg,
                          "synthetic | replay | path to backend config (INI)");
    judge_cmd->add_option("--truth", jopt.truth_path, "Truth qrels for the synthetic oracle");
    judge_cmd->add_option("--noise", jopt.noise, "Synthetic oracle noise level");
    judge_cmd->add_option("--cache", jopt.cache_path, "Verdict cache file (JSONL)");
    judge_cmd->add_option("--interactions", jopt.interactions_path, "User history interactions")
        ->required();
    judge_cmd->add_option("--catalog", jopt.catalog_path, "Item metadata catalog")->required();
    judge_cmd->add_option("--history-size", jopt.history_size, "Profile history size");
    judge_cmd->add_option("--selection", jopt.selection, "random_sample|most_recent");
    judge_cmd->add_option("--fields", jopt.fields_csv, "Comma-separated metadata fields or 'all'");
    judge_cmd->add_option("--rubric", jopt.rubric, "none|criteria");
    judge_cmd->add_option("--aggregation", jopt.aggregation, "cot|sum");
    judge_cmd->add_option("--repetitions", jopt.repetitions, "Judge repetitions");
    judge_cmd->add_flag("--aggregate-labels", jopt.aggregate_labels,
                        "Also write label-averaged qrels");
    judge_cmd->add_option("--out", jopt.out_prefix, "Output prefix")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score one run against qrels");
    std::string eval_run, eval_qrels, eval_metric = "compatibility", eval_out;
    double eval_p = 0.95;
    int eval_k = 100, eval_depth = 0, eval_bound = 7;
    eval_cmd->add_option("--run", eval_run, "Run file")->required();
    eval_cmd->add_option("--qrels", eval_qrels, "Qrels file")->required();
    eval_cmd->add_option("--metric", eval_metric, "compatibility | judged@K");
    eval_cmd->add_option("--p", eval_p, "Compatibility persistence");
    eval_cmd->add_option("--k", eval_k, "Judged@k cutoff");
    eval_cmd->add_option("--depth", eval_depth, "Compatibility RBO depth (0 = run length)");
    eval_cmd->add_option("--grade-bound", eval_bound, "Qrels grade upper bound");
    eval_cmd->add_option("--out", eval_out, "Output prefix (.csv and .json)");

    // agree
    auto* agree_cmd = app.add_subcommand("agree", "Agreement triple between two qrels");
    std::string agree_human, agree_judge, agree_filter = "relevant_vs_nonrelevant";
    int agree_gap = 1, agree_judge_bound = 1000;
    bool agree_macro = false;
    agree_cmd->add_option("--human", agree_human, "Human qrels")->required();
    agree_cmd->add_option("--judge", agree_judge, "Judge qrels")->required();
    agree_cmd->add_option("--pair-filter", agree_filter, "relevant_vs_nonrelevant|min_grade_gap");
    agree_cmd->add_option("--gap", agree_gap, "Minimum human grade gap");
    agree_cmd->add_flag("--per-user-macro", agree_macro, "Macro-average per user");
    agree_cmd->add_option("--judge-grade-bound", agree_judge_bound,
                          "Grade bound for the judge qrels (sum aggregation uses 77)");

    // rank-agree
    auto* rank_cmd = app.add_subcommand("rank-agree", "System-ranking agreement across two qrels");
    std::vector<std::string> rank_runs;
    std::string rank_human, rank_judge, rank_budgets = "all", rank_metric = "compatibility";
    std::string rank_out_dir;
    double rank_p = 0.95;
    int rank_k = 100;
    rank_cmd->add_option("--runs", rank_runs, "Run files (wildcards ok)")->required();
    rank_cmd->add_option("--human", rank_human, "Human qrels")->required();
    rank_cmd->add_option("--judge", rank_judge, "Judge qrels")->required();
    rank_cmd->add_option("--budgets", rank_budgets, "Comma list of per-user budgets or 'all'");
    rank_cmd->add_option("--metric", rank_metric, "compatibility | judged@K");
    rank_cmd->add_option("--p", rank_p, "Compatibility persistence");
    rank_cmd->add_option("--k", rank_k, "Judged@k cutoff");
    rank_cmd->add_option("--out-dir", rank_out_dir, "Write report.csv and scatter.csv here");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic world and runs");
    std::string sim_spec_path, sim_out_dir;
    int sim_ladder = 0, sim_k = 100;
    sim_cmd->add_option("--spec", sim_spec_path, "World spec JSON")->required();
    sim_cmd->add_option("--ladder", sim_ladder, "Quality-ladder size (0 = no runs)");
    sim_cmd->add_option("--k", sim_k, "Run depth for ladder recommenders");
    sim_cmd->add_option("--out-dir", sim_out_dir, "Output directory")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "Run a declarative experiment spec");
    std::string report_spec, report_out_dir;
    report_cmd->add_option("--spec", report_spec, "Experiment spec JSON")->required();
    report_cmd->add_option("--out-dir", report_out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    }

    analysis::set_max_workers(jobs);

    try {
        if (split_cmd->parsed()) {
            corpus::SplitSpec spec;
            spec.seed = seed;
            if (strategy == "per_user_time_ordered")
                spec.strategy = corpus::SplitStrategy::per_user_time_ordered;
            else if (strategy == "global_time")
                spec.strategy = corpus::SplitStrategy::global_time;
            else if (strategy == "per_user_random")
                spec.strategy = corpus::SplitStrategy::per_user_random;
            else
                throw UsageError("unknown strategy \"" + strategy + "\"");
            if (spec.strategy == corpus::SplitStrategy::global_time) {
                if (!cutoff_set) throw UsageError("global_time requires --cutoff");
                if (fraction_set) throw UsageError("global_time takes no --train-fraction");
                spec.cutoff_timestamp = cutoff;
            } else {
                if (cutoff_set) throw UsageError("--cutoff requires --strategy global_time");
                spec.train_fraction = train_fraction;
            }
            corpus::LoadReport load_report;
            const auto log =
                corpus::load_interactions(in_path, format_from(in_format, in_path), &load_report);
            if (spec.strategy == corpus::SplitStrategy::per_user_random)
                std::cout << "seed: " << seed << "\n";
            auto [train, test] = corpus::split(log, spec);
            corpus::write_interactions(train, train_out);
            corpus::write_interactions(test, test_out);
            if (!qrels_out.empty())
                corpus::write_qrels(
                    corpus::derive_qrels_from_test(test, corpus::GradeMap::parse(grade_map_text)),
                    qrels_out);
            std::cout << "parsed: " << load_report.parsed << " skipped: " << load_report.skipped
                      << " train: " << train.size() << " test: " << test.size() << "\n";
            return 0;
        }

        if (pool_cmd->parsed()) {
            const auto runs = load_run_files(pool_runs);
            const auto pool = pooling::build_pool(runs, pool_depth);
            pooling::write_pool(pool, pool_out);
            size_t total = 0;
            for (const auto& [user, items] : pool.assignments) total += items.size();
            std::cout << "pooled " << total << " (user,item) pairs over "
                      << pool.assignments.size() << " users from " << runs.size() << " systems\n";
            return 0;
        }

        if (judge_cmd->parsed()) return run_judge(jopt, seed, max_in_flight);

        if (eval_cmd->parsed()) {
            const auto run = corpus::read_run(eval_run);
            const auto qrels = corpus::read_qrels(eval_qrels, eval_bound);
            const auto metric = analysis::MetricSpec::parse(
                eval_metric, eval_k, eval_p,
                eval_depth > 0 ? std::optional<int>(eval_depth) : std::nullopt);
            const auto result = metric.evaluate(run, qrels);
            if (!eval_out.empty()) {
                result.write_csv(eval_out + ".csv");
                std::ofstream json_out(eval_out + ".json", std::ios::binary);
                if (!json_out) throw IoError("cannot open for writing: " + eval_out + ".json");
                json_out << result.summary_json();
            }
            std::cout << result.metric_name << " aggregate=" << format_fixed(result.aggregate, 6)
                      << " n_users=" << result.n_users() << "\n";
            return 0;
        }

        if (agree_cmd->parsed()) {
            const auto human = corpus::read_qrels(agree_human);
            const auto judged = corpus::read_qrels(agree_judge, agree_judge_bound);
            metrics::PairFilter filter;
            if (agree_filter == "relevant_vs_nonrelevant")
                filter = metrics::PairFilter::relevant_vs_nonrelevant();
            else if (agree_filter == "min_grade_gap")
                filter = metrics::PairFilter::min_grade_gap(agree_gap);
            else
                throw UsageError("unknown pair filter \"" + agree_filter + "\"");
            const auto triple = metrics::agreement_triple(human, judged, filter, agree_macro);
            std::cout << "agreement=" << format_fixed(triple.agreement, 6)
                      << " tie=" << format_fixed(triple.tie, 6)
                      << " disagreement=" << format_fixed(triple.disagreement, 6)
                      << " pairs=" << triple.pair_count << "\n";
            return 0;
        }

        if (rank_cmd->parsed()) {
            const auto runs = load_run_files(rank_runs);
            const auto human = corpus::read_qrels(rank_human);
            const auto judged = corpus::read_qrels(rank_judge, 1000);
            std::vector<int> budgets;
            for (const auto& token : parse_fields(rank_budgets))
                budgets.push_back(token == "all" ? -1 : std::stoi(token));
            const auto metric =
                analysis::MetricSpec::parse(rank_metric, rank_k, rank_p, std::nullopt);
            std::cout << "seed: " << seed << "\n";
            const auto report = analysis::ranking_agreement(runs, human, judged, metric, budgets,
                                                            seed);
            std::cout << report.to_csv();
            if (!rank_out_dir.empty()) {
                fs::create_directories(rank_out_dir);
                std::ofstream((fs::path(rank_out_dir) / "report.csv"), std::ios::binary)
                    << report.to_csv();
                std::ofstream((fs::path(rank_out_dir) / "scatter.csv"), std::ios::binary)
                    << report.scatter_csv();
            }
            return 0;
        }

        if (sim_cmd->parsed()) {
            auto spec = simlab::load_world_spec(sim_spec_path);
            std::cout << "seed: " << spec.seed << "\n";
            const auto world = simlab::generate_world(spec);
            fs::create_directories(sim_out_dir);
            const fs::path dir(sim_out_dir);
            corpus::write_interactions(world.interactions, (dir / "interactions.csv").string());
            corpus::write_catalog(world.catalog, (dir / "catalog.jsonl").string());
            corpus::write_qrels(world.truth_qrels_full(), (dir / "truth.qrels").string());
            if (sim_ladder > 0) {
                fs::create_directories(dir / "runs");
                for (const auto& rec : simlab::quality_ladder(sim_ladder, spec.seed)) {
                    const auto run =
                        simlab::run_recommender(rec, world, world.interactions, sim_k);
                    corpus::write_run(run, (dir / "runs" / (rec.tag + ".run")).string());
                }
            }
            std::cout << "world: " << spec.n_users << " users x " << spec.n_items << " items, "
                      << world.interactions.size() << " interactions\n";
            return 0;
        }

        if (report_cmd->parsed()) {
            const auto spec = analysis::ExperimentSpec::load(report_spec);
            for (const auto& path : analysis::run_experiment(spec, report_out_dir))
                std::cout << "wrote " << path << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 1;
    } catch (const BackendError& e) {
        std::cerr << "error: backend: " << e.what() << "\n";
        return 4;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
