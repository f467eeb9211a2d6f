#include "recjudge/pooling.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "recjudge/common.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::pooling {

Pool build_pool(const std::vector<RunSet>& runs, int depth) {
    if (depth < 1) throw ValidationError("pool depth must be >= 1");
    if (runs.empty()) throw ValidationError("build_pool requires at least one run");

    Pool pool;
    pool.depth = depth;
    for (const RunSet& run : runs) {
        pool.contributing_systems.push_back(run.system_tag);
        for (const auto& [user, ranking] : run.rankings) {
            auto& items = pool.assignments[user];
            const size_t top = std::min<size_t>(depth, ranking.size());
            for (size_t i = 0; i < top; ++i) items.insert(ranking[i].item_id);
        }
    }
    std::sort(pool.contributing_systems.begin(), pool.contributing_systems.end());
    return pool;
}

Qrels sample_qrels(const Qrels& qrels, int per_user, uint64_t seed) {
    if (per_user < 1) throw ValidationError("sample_qrels requires per_user >= 1");
    Qrels out;
    out.grade_bound = qrels.grade_bound;
    for (const auto& [user, items] : qrels.grades) {
        std::vector<const std::pair<const std::string, int>*> entries;
        entries.reserve(items.size());
        for (const auto& entry : items) entries.push_back(&entry);
        rng::Stream stream(rng::mix(seed, rng::hash_str(user)));
        auto picks = rng::sample_indices(entries.size(), static_cast<size_t>(per_user), stream);
        auto& slot = out.grades[user];
        for (size_t idx : picks) slot[entries[idx]->first] = entries[idx]->second;
    }
    return out;
}

metrics::MetricResult coverage_report(const Pool& pool, const RunSet& run, int k) {
    Qrels pool_as_qrels;
    for (const auto& [user, items] : pool.assignments) {
        auto& slot = pool_as_qrels.grades[user];
        for (const auto& item : items) slot[item] = 1;
    }
    metrics::MetricResult result = metrics::judged_at_k(run, pool_as_qrels, k);
    result.metric_name = "pool_coverage@" + std::to_string(k);
    result.params["pool_depth"] = pool.depth;
    return result;
}

void write_pool(const Pool& pool, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [user, items] : pool.assignments)
        for (const auto& item : items) out << user << ' ' << item << '\n';
}

Pool read_pool(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    Pool pool;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string user, item, extra;
        if (!(ss >> user >> item) || (ss >> extra))
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected 2 columns (user_id item_id)");
        pool.assignments[user].insert(item);
    }
    return pool;
}

}  // namespace recjudge::pooling
