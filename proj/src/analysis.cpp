#include "recjudge/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "recjudge/common.hpp"
#include "recjudge/corpus.hpp"
#include "recjudge/pooling.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::analysis {

namespace {

using nlohmann::json;

std::atomic<int> g_max_workers{1};

template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    const int workers = static_cast<int>(std::min<size_t>(g_max_workers.load(), n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& t : threads) t.join();
}

std::vector<metrics::ScoredSystem> score_systems(const std::vector<RunSet>& runs,
                                                 const Qrels& qrels, const MetricSpec& metric) {
    std::vector<metrics::ScoredSystem> scores(runs.size());
    parallel_for(runs.size(), [&](size_t i) {
        scores[i] = {runs[i].system_tag, metric.evaluate(runs[i], qrels).aggregate};
    });
    std::sort(scores.begin(), scores.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    return scores;
}

void require_distinct_tags(const std::vector<RunSet>& runs) {
    std::set<std::string> tags;
    for (const RunSet& run : runs)
        if (!tags.insert(run.system_tag).second)
            throw ValidationError("duplicate system tag \"" + run.system_tag + "\" across runs");
}

}  // namespace

void set_max_workers(int n) { g_max_workers.store(std::max(1, n)); }

CiStat mean_ci95(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean_ci95: no values");
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / (n - 1.0);
    if (var <= 0.0) return {mean, 0.0};
    boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(dist, 0.975);
    return {mean, t * std::sqrt(var / n)};
}

metrics::MetricResult MetricSpec::evaluate(const RunSet& run, const Qrels& qrels) const {
    if (kind == MetricKind::judged_at_k) return metrics::judged_at_k(run, qrels, k);
    return metrics::compatibility(run, qrels, p, depth);
}

std::string MetricSpec::name() const {
    if (kind == MetricKind::judged_at_k) return "judged@" + std::to_string(k);
    return "compatibility";
}

MetricSpec MetricSpec::parse(const std::string& name, int k, double p, std::optional<int> depth) {
    MetricSpec spec;
    spec.k = k;
    spec.p = p;
    spec.depth = depth;
    if (name == "compatibility") {
        spec.kind = MetricKind::compatibility;
    } else if (name == "judged" || name.rfind("judged@", 0) == 0) {
        spec.kind = MetricKind::judged_at_k;
        if (name.rfind("judged@", 0) == 0) spec.k = std::stoi(name.substr(7));
    } else {
        throw ValidationError("unknown metric \"" + name + "\" (compatibility or judged@K)");
    }
    return spec;
}

CompletenessReport completeness_comparison(const std::vector<RunSet>& runs,
                                           const Qrels& qrels_split, const Qrels& qrels_pooled,
                                           int k) {
    if (runs.empty()) throw ValidationError("completeness_comparison: no runs");
    require_distinct_tags(runs);
    CompletenessReport report;
    report.k = k;
    for (const RunSet& run : runs) {
        CompletenessReport::Row row;
        row.system = run.system_tag;
        row.split_score = metrics::judged_at_k(run, qrels_split, k).aggregate;
        row.pooled_score = metrics::judged_at_k(run, qrels_pooled, k).aggregate;
        report.rows.push_back(row);
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const auto& a, const auto& b) { return a.system < b.system; });
    for (const auto& row : report.rows) {
        report.split_average += row.split_score;
        report.pooled_average += row.pooled_score;
    }
    report.split_average /= static_cast<double>(report.rows.size());
    report.pooled_average /= static_cast<double>(report.rows.size());
    return report;
}

std::string CompletenessReport::to_csv() const {
    std::string csv = "system,judged@" + std::to_string(k) + "_split,judged@" + std::to_string(k) +
                      "_pooled\n";
    for (const auto& row : rows)
        csv += row.system + ',' + format_fixed(row.split_score, 6) + ',' +
               format_fixed(row.pooled_score, 6) + '\n';
    csv += "AVERAGE," + format_fixed(split_average, 6) + ',' + format_fixed(pooled_average, 6) +
           '\n';
    return csv;
}

std::vector<SampledSweepPoint> sampled_qrels_sweep(const std::vector<RunSet>& runs,
                                                   const Qrels& full_qrels,
                                                   const std::vector<int>& sample_sizes,
                                                   const std::vector<uint64_t>& seeds,
                                                   const MetricSpec& metric, int judged_k) {
    if (runs.size() < 2)
        throw ValidationError("sampled_qrels_sweep requires at least 2 systems for tau");
    if (seeds.empty()) throw ValidationError("sampled_qrels_sweep: no seeds");
    {
        std::set<int> distinct(sample_sizes.begin(), sample_sizes.end());
        if (distinct.size() != sample_sizes.size())
            throw ValidationError("sweep sizes must be distinct");
        for (size_t i = 1; i < sample_sizes.size(); ++i)
            if (sample_sizes[i - 1] != -1 && sample_sizes[i] != -1 &&
                sample_sizes[i] <= sample_sizes[i - 1])
                throw ValidationError("sample sizes must be ascending");
    }
    require_distinct_tags(runs);

    const auto full_ranking = score_systems(runs, full_qrels, metric);

    std::vector<SampledSweepPoint> points;
    for (int size : sample_sizes) {
        SampledSweepPoint point;
        point.sample_size = size;
        std::vector<double> taus, judged;
        for (uint64_t seed : seeds) {
            const Qrels sampled =
                size < 0 ? full_qrels : pooling::sample_qrels(full_qrels, size, seed);
            const auto ranking = score_systems(runs, sampled, metric);
            taus.push_back(metrics::kendall_tau(full_ranking, ranking));
            double j = 0.0;
            for (const RunSet& run : runs)
                j += metrics::judged_at_k(run, sampled, judged_k).aggregate;
            judged.push_back(j / static_cast<double>(runs.size()));
        }
        point.tau = mean_ci95(taus);
        point.judged = mean_ci95(judged);
        points.push_back(std::move(point));
    }
    return points;
}

namespace {

// Shared cell runner for the metadata and history sweeps.
SweepCell run_judge_cell(const std::string& label,
                         const std::vector<std::pair<std::string, std::string>>& pairs,
                         const judge::BackendConfig& backend, const InteractionLog& history,
                         const Catalog& catalog, const judge::ProfileSpec& profile,
                         int repetitions, const Qrels& human,
                         const metrics::PairFilter& filter) {
    auto result = judge::judge_items(pairs, backend, history, catalog, profile,
                                     judge::Rubric::none, repetitions,
                                     judge::Aggregation::cot_overall);
    SweepCell cell;
    cell.label = label;
    std::vector<double> agreement, tie, disagreement, pair_counts;
    for (const Qrels& rep : result.per_repetition) {
        const auto triple = metrics::agreement_triple(human, rep, filter);
        agreement.push_back(triple.agreement);
        tie.push_back(triple.tie);
        disagreement.push_back(triple.disagreement);
        pair_counts.push_back(static_cast<double>(triple.pair_count));
    }
    cell.triple.agreement = mean_ci95(agreement);
    cell.triple.tie = mean_ci95(tie);
    cell.triple.disagreement = mean_ci95(disagreement);
    cell.triple.mean_pair_count = mean_ci95(pair_counts).mean;
    cell.triple.failures = result.failures.size();
    const size_t requested = pairs.size() * static_cast<size_t>(repetitions);
    cell.triple.flagged = requested > 0 && cell.triple.failures * 10 > requested;
    return cell;
}

}  // namespace

std::vector<SweepCell> metadata_ablation(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const judge::BackendConfig& backend, const InteractionLog& history, const Catalog& catalog,
    const judge::ProfileSpec& base_profile, const std::vector<std::vector<std::string>>& field_sets,
    int repetitions, const Qrels& human, const metrics::PairFilter& filter) {
    if (field_sets.empty()) throw ValidationError("metadata_ablation: no field sets");
    std::vector<SweepCell> cells;
    for (const auto& fields : field_sets) {
        judge::ProfileSpec profile = base_profile;
        profile.fields = fields;
        cells.push_back(run_judge_cell(join(fields, "+"), pairs, backend, history, catalog,
                                       profile, repetitions, human, filter));
    }
    return cells;
}

std::vector<SweepCell> history_size_sweep(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const judge::BackendConfig& backend, const InteractionLog& history, const Catalog& catalog,
    const judge::ProfileSpec& base_profile, const std::vector<int>& sizes, int repetitions,
    const Qrels& human, const metrics::PairFilter& filter) {
    if (sizes.empty()) throw ValidationError("history_size_sweep: no sizes");
    {
        std::set<int> distinct(sizes.begin(), sizes.end());
        if (distinct.size() != sizes.size()) throw ValidationError("sweep sizes must be distinct");
    }
    std::vector<SweepCell> cells;
    for (int size : sizes) {
        judge::ProfileSpec profile = base_profile;
        profile.history_size = size;
        cells.push_back(run_judge_cell(std::to_string(size), pairs, backend, history, catalog,
                                       profile, repetitions, human, filter));
    }
    return cells;
}

std::vector<GapCell> grade_gap_sweep(const Qrels& human, const Qrels& judged,
                                     const std::vector<int>& gaps) {
    if (gaps.empty()) throw ValidationError("grade_gap_sweep: no gaps");
    for (int gap : gaps)
        if (gap < 1 || gap > 7) throw ValidationError("gaps must be within [1,7]");
    std::vector<GapCell> cells;
    for (int gap : gaps) {
        GapCell cell;
        cell.gap = gap;
        try {
            cell.triple = metrics::agreement_triple(human, judged,
                                                    metrics::PairFilter::min_grade_gap(gap));
        } catch (const NoPairsError&) {
            cell.triple = std::nullopt;  // absent, not zero
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

RankingAgreementReport ranking_agreement(const std::vector<RunSet>& runs, const Qrels& human,
                                         const Qrels& judged, const MetricSpec& metric,
                                         const std::vector<int>& budgets, uint64_t seed) {
    if (runs.size() < 2) throw ValidationError("ranking_agreement requires at least 2 systems");
    require_distinct_tags(runs);
    if (budgets.empty()) throw ValidationError("ranking_agreement: no budgets");

    const auto human_ranking = score_systems(runs, human, metric);

    size_t min_available = SIZE_MAX;
    for (const auto& [user, items] : judged.grades)
        min_available = std::min(min_available, items.size());

    RankingAgreementReport report;
    report.metric_name = metric.name();
    for (int budget : budgets) {
        RankingAgreementReport::BudgetRow row;
        row.budget = budget;
        Qrels restricted;
        const Qrels* effective = &judged;
        if (budget >= 0) {
            row.capped = static_cast<size_t>(budget) > min_available;
            restricted = pooling::sample_qrels(judged, budget, seed);
            effective = &restricted;
        }
        const auto judge_ranking = score_systems(runs, *effective, metric);
        row.tau = metrics::kendall_tau(human_ranking, judge_ranking);
        row.weighted_tau = metrics::weighted_kendall_tau(human_ranking, judge_ranking);
        for (size_t i = 0; i < human_ranking.size(); ++i)
            row.scatter.push_back(
                {human_ranking[i].name, human_ranking[i].score, judge_ranking[i].score});
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string RankingAgreementReport::to_csv() const {
    std::string csv = "budget,tau,weighted_tau,capped\n";
    for (const auto& row : rows) {
        csv += (row.budget < 0 ? std::string("all") : std::to_string(row.budget)) + ',' +
               format_fixed(row.tau, 6) + ',' + format_fixed(row.weighted_tau, 6) + ',' +
               (row.capped ? "true" : "false") + '\n';
    }
    return csv;
}

std::string RankingAgreementReport::scatter_csv() const {
    std::string csv = "budget,system,score_human,score_judge\n";
    for (const auto& row : rows)
        for (const auto& point : row.scatter)
            csv += (row.budget < 0 ? std::string("all") : std::to_string(row.budget)) + ',' +
                   point.system + ',' + format_fixed(point.score_human, 6) + ',' +
                   format_fixed(point.score_judge, 6) + '\n';
    return csv;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
}

}  // namespace

ExperimentSpec ExperimentSpec::load(const std::string& path) {
    const std::string content = read_file(path);
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw FormatError(path + ": experiment spec is not a JSON object");

    ExperimentSpec spec;
    spec.spec_hash = rng::hash_str(content);
    spec.name = j.value("name", std::string("experiment"));
    if (!j.contains("kind")) throw ValidationError(path + ": experiment spec must set kind");
    spec.kind = j["kind"].get<std::string>();
    if (j.contains("inputs")) {
        for (auto it = j["inputs"].begin(); it != j["inputs"].end(); ++it) {
            std::vector<std::string> paths;
            if (it.value().is_string()) paths.push_back(it.value().get<std::string>());
            else paths = it.value().get<std::vector<std::string>>();
            spec.inputs[it.key()] = std::move(paths);
        }
    }
    if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (spec.seeds.empty()) spec.seeds = {1};
    spec.params_json = j.value("params", json::object()).dump();

    for (const auto& [name, paths] : spec.inputs)
        for (const auto& p : paths)
            if (!std::filesystem::exists(p))
                throw ValidationError(path + ": input \"" + name + "\" path does not exist: " + p);
    return spec;
}

namespace {

const std::vector<std::string>& input_list(const ExperimentSpec& spec, const std::string& name) {
    auto it = spec.inputs.find(name);
    if (it == spec.inputs.end() || it->second.empty())
        throw ValidationError("experiment spec is missing input \"" + name + "\"");
    return it->second;
}

std::string input_path(const ExperimentSpec& spec, const std::string& name) {
    const auto& list = input_list(spec, name);
    if (list.size() != 1)
        throw ValidationError("experiment input \"" + name + "\" expects exactly one path");
    return list.front();
}

std::vector<RunSet> load_runs(const ExperimentSpec& spec) {
    std::vector<RunSet> runs;
    for (const auto& path : input_list(spec, "runs")) runs.push_back(corpus::read_run(path));
    return runs;
}

std::vector<std::pair<std::string, std::string>> load_pairs(const std::string& path) {
    const auto pool = pooling::read_pool(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [user, items] : pool.assignments)
        for (const auto& item : items) pairs.emplace_back(user, item);
    return pairs;
}

InteractionLog load_interactions_any(const std::string& path) {
    const bool tsv = path.size() > 4 && path.compare(path.size() - 4, 4, ".tsv") == 0;
    return corpus::load_interactions(
        path, tsv ? corpus::InteractionFormat::tsv : corpus::InteractionFormat::csv_movielens);
}

MetricSpec metric_from_params(const json& params) {
    return MetricSpec::parse(params.value("metric", std::string("compatibility")),
                             params.value("k", 100), params.value("p", 0.95),
                             params.contains("depth")
                                 ? std::optional<int>(params["depth"].get<int>())
                                 : std::nullopt);
}

metrics::PairFilter filter_from_params(const json& params) {
    const std::string mode = params.value("pair_filter", std::string("relevant_vs_nonrelevant"));
    if (mode == "relevant_vs_nonrelevant") return metrics::PairFilter::relevant_vs_nonrelevant();
    if (mode == "min_grade_gap") return metrics::PairFilter::min_grade_gap(params.value("gap", 1));
    throw ValidationError("unknown pair_filter \"" + mode + "\"");
}

judge::ProfileSpec profile_from_params(const json& params, uint64_t default_seed) {
    judge::ProfileSpec profile;
    profile.history_size = params.value("history_size", profile.history_size);
    profile.seed = params.value("profile_seed", default_seed);
    const std::string selection = params.value("selection", std::string("random_sample"));
    if (selection == "most_recent")
        profile.selection = judge::ProfileSpec::Selection::most_recent;
    else if (selection != "random_sample")
        throw ValidationError("unknown selection \"" + selection + "\"");
    if (params.contains("fields"))
        profile.fields = params["fields"].get<std::vector<std::string>>();
    return profile;
}

std::string sweep_cells_csv(const std::string& label_column, const std::vector<SweepCell>& cells) {
    std::string csv = label_column +
                      ",agreement,agreement_ci95,tie,tie_ci95,disagreement,disagreement_ci95,"
                      "mean_pairs,failures,flagged\n";
    for (const auto& cell : cells) {
        csv += cell.label + ',' + format_fixed(cell.triple.agreement.mean, 6) + ',' +
               format_fixed(cell.triple.agreement.half_width, 6) + ',' +
               format_fixed(cell.triple.tie.mean, 6) + ',' +
               format_fixed(cell.triple.tie.half_width, 6) + ',' +
               format_fixed(cell.triple.disagreement.mean, 6) + ',' +
               format_fixed(cell.triple.disagreement.half_width, 6) + ',' +
               format_fixed(cell.triple.mean_pair_count, 1) + ',' +
               std::to_string(cell.triple.failures) + ',' + (cell.triple.flagged ? "true" : "false") +
               '\n';
    }
    return csv;
}

std::string sweep_cells_dat(const std::vector<SweepCell>& cells) {
    std::string dat = "# cell agreement agreement_ci tie disagreement\n";
    for (size_t i = 0; i < cells.size(); ++i)
        dat += std::to_string(i) + ' ' + format_fixed(cells[i].triple.agreement.mean, 6) + ' ' +
               format_fixed(cells[i].triple.agreement.half_width, 6) + ' ' +
               format_fixed(cells[i].triple.tie.mean, 6) + ' ' +
               format_fixed(cells[i].triple.disagreement.mean, 6) + '\n';
    return dat;
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const json params = json::parse(spec.params_json);
    std::vector<std::string> written;

    auto emit = [&](const std::string& file, const std::string& content) {
        const std::string path = (std::filesystem::path(out_dir) / file).string();
        write_file(path, content);
        written.push_back(path);
    };

    if (spec.kind == "completeness") {
        const auto report = completeness_comparison(
            load_runs(spec), corpus::read_qrels(input_path(spec, "qrels_split")),
            corpus::read_qrels(input_path(spec, "qrels_pooled")), params.value("k", 100));
        emit("report.csv", report.to_csv());
    } else if (spec.kind == "sampled_sweep") {
        if (!params.contains("sample_sizes"))
            throw ValidationError("sampled_sweep requires params.sample_sizes");
        const auto points = sampled_qrels_sweep(
            load_runs(spec), corpus::read_qrels(input_path(spec, "qrels_full")),
            params["sample_sizes"].get<std::vector<int>>(), spec.seeds,
            metric_from_params(params), params.value("judged_k", 100));
        std::string csv = "sample_size,tau,tau_ci95,judged,judged_ci95\n";
        std::string dat = "# sample_size tau tau_ci judged judged_ci\n";
        for (const auto& pt : points) {
            const std::string size =
                pt.sample_size < 0 ? std::string("all") : std::to_string(pt.sample_size);
            csv += size + ',' + format_fixed(pt.tau.mean, 6) + ',' +
                   format_fixed(pt.tau.half_width, 6) + ',' + format_fixed(pt.judged.mean, 6) +
                   ',' + format_fixed(pt.judged.half_width, 6) + '\n';
            dat += size + ' ' + format_fixed(pt.tau.mean, 6) + ' ' +
                   format_fixed(pt.tau.half_width, 6) + ' ' + format_fixed(pt.judged.mean, 6) +
                   ' ' + format_fixed(pt.judged.half_width, 6) + '\n';
        }
        emit("report.csv", csv);
        emit("plot.dat", dat);
    } else if (spec.kind == "metadata_ablation" || spec.kind == "history_sweep") {
        const auto pairs = load_pairs(input_path(spec, "pairs"));
        const auto backend = judge::load_backend_config(input_path(spec, "backend"));
        const auto history = load_interactions_any(input_path(spec, "interactions"));
        const auto catalog = corpus::read_catalog(input_path(spec, "catalog"));
        const auto human = corpus::read_qrels(input_path(spec, "qrels_human"));
        const auto profile = profile_from_params(params, spec.seeds.front());
        const auto filter = filter_from_params(params);
        const int repetitions = params.value("repetitions", 3);
        std::vector<SweepCell> cells;
        std::string label_column;
        if (spec.kind == "metadata_ablation") {
            if (!params.contains("field_sets"))
                throw ValidationError("metadata_ablation requires params.field_sets");
            cells = metadata_ablation(pairs, backend, history, catalog, profile,
                                      params["field_sets"].get<std::vector<std::vector<std::string>>>(),
                                      repetitions, human, filter);
            label_column = "fields";
        } else {
            if (!params.contains("history_sizes"))
                throw ValidationError("history_sweep requires params.history_sizes");
            cells = history_size_sweep(pairs, backend, history, catalog, profile,
                                       params["history_sizes"].get<std::vector<int>>(),
                                       repetitions, human, filter);
            label_column = "history_size";
        }
        emit("report.csv", sweep_cells_csv(label_column, cells));
        emit("plot.dat", sweep_cells_dat(cells));
    } else if (spec.kind == "grade_gap") {
        if (!params.contains("gaps")) throw ValidationError("grade_gap requires params.gaps");
        const auto cells = grade_gap_sweep(corpus::read_qrels(input_path(spec, "qrels_human")),
                                           corpus::read_qrels(input_path(spec, "qrels_judge")),
                                           params["gaps"].get<std::vector<int>>());
        std::string csv = "gap,agreement,tie,disagreement,pairs\n";
        std::string dat = "# gap agreement tie disagreement\n";
        for (const auto& cell : cells) {
            if (!cell.triple) {
                csv += std::to_string(cell.gap) + ",absent,absent,absent,0\n";
                continue;
            }
            csv += std::to_string(cell.gap) + ',' + format_fixed(cell.triple->agreement, 6) + ',' +
                   format_fixed(cell.triple->tie, 6) + ',' +
                   format_fixed(cell.triple->disagreement, 6) + ',' +
                   std::to_string(cell.triple->pair_count) + '\n';
            dat += std::to_string(cell.gap) + ' ' + format_fixed(cell.triple->agreement, 6) + ' ' +
                   format_fixed(cell.triple->tie, 6) + ' ' +
                   format_fixed(cell.triple->disagreement, 6) + '\n';
        }
        emit("report.csv", csv);
        emit("plot.dat", dat);
    } else if (spec.kind == "rank_agree") {
        if (!params.contains("budgets")) throw ValidationError("rank_agree requires params.budgets");
        const auto report = ranking_agreement(
            load_runs(spec), corpus::read_qrels(input_path(spec, "qrels_human")),
            corpus::read_qrels(input_path(spec, "qrels_judge"), 1000),
            metric_from_params(params), params["budgets"].get<std::vector<int>>(),
            spec.seeds.front());
        emit("report.csv", report.to_csv());
        emit("scatter.csv", report.scatter_csv());
        std::string dat = "# budget tau weighted_tau\n";
        for (const auto& row : report.rows)
            dat += (row.budget < 0 ? std::string("-1") : std::to_string(row.budget)) + ' ' +
                   format_fixed(row.tau, 6) + ' ' + format_fixed(row.weighted_tau, 6) + '\n';
        emit("plot.dat", dat);
    } else {
        throw ValidationError("unknown experiment kind \"" + spec.kind + "\"");
    }

    json manifest;
    manifest["name"] = spec.name;
    manifest["kind"] = spec.kind;
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(spec.spec_hash));
    manifest["spec_hash"] = hash_hex;
    manifest["seeds"] = spec.seeds;
    manifest["tool_version"] = kToolVersion;
    emit("manifest.json", manifest.dump(2) + "\n");
    return written;
}

}  // namespace recjudge::analysis
