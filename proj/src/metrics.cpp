#include "recjudge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "recjudge/common.hpp"

namespace recjudge::metrics {

namespace {

double mean_of(const std::map<std::string, double>& per_user) {
    if (per_user.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [user, value] : per_user) sum += value;
    return sum / static_cast<double>(per_user.size());
}

std::vector<std::string> qrels_users_missing_from(const RunSet& run, const Qrels& qrels) {
    std::vector<std::string> missing;
    for (const auto& [user, items] : qrels.grades)
        if (!run.rankings.count(user)) missing.push_back(user);
    return missing;
}

}  // namespace

void MetricResult::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "user_id,value\n";
    for (const auto& [user, value] : per_user) out << user << ',' << format_fixed(value, 6) << '\n';
}

std::string MetricResult::summary_json() const {
    nlohmann::json j;
    j["metric"] = metric_name;
    j["params"] = params;
    j["aggregate"] = aggregate;
    j["n_users"] = n_users();
    return j.dump(2) + "\n";
}

MetricResult judged_at_k(const RunSet& run, const Qrels& qrels, int k) {
    if (k < 1) throw ValidationError("judged_at_k requires k >= 1");
    if (run.empty()) throw ValidationError("judged_at_k: run is empty");

    MetricResult result;
    result.metric_name = "judged@" + std::to_string(k);
    result.params["k"] = k;
    for (const auto& [user, ranking] : run.rankings) {
        const size_t depth = std::min<size_t>(k, ranking.size());
        if (depth == 0) {
            result.per_user[user] = 0.0;
            continue;
        }
        auto uit = qrels.grades.find(user);
        size_t judged = 0;
        if (uit != qrels.grades.end())
            for (size_t i = 0; i < depth; ++i)
                if (uit->second.count(ranking[i].item_id)) ++judged;
        result.per_user[user] = static_cast<double>(judged) / static_cast<double>(depth);
    }
    result.skipped_users = qrels_users_missing_from(run, qrels);
    result.aggregate = mean_of(result.per_user);
    return result;
}

double rbo(const std::vector<std::string>& system, const std::vector<std::string>& ideal,
           double p, int depth) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("rbo requires p in (0,1)");
    if (depth < 1) throw ValidationError("rbo requires depth >= 1");

    std::unordered_set<std::string> seen_s, seen_i;
    seen_s.reserve(system.size());
    seen_i.reserve(ideal.size());
    size_t overlap = 0;
    double sum = 0.0;
    double weight = 1.0;  // p^(d-1)
    for (int d = 1; d <= depth; ++d) {
        if (static_cast<size_t>(d) <= system.size()) {
            const std::string& x = system[d - 1];
            if (!seen_s.insert(x).second)
                throw ValidationError("rbo: duplicate item \"" + x + "\" in system list");
            if (seen_i.count(x)) ++overlap;
        }
        if (static_cast<size_t>(d) <= ideal.size()) {
            const std::string& x = ideal[d - 1];
            if (!seen_i.insert(x).second)
                throw ValidationError("rbo: duplicate item \"" + x + "\" in ideal list");
            if (seen_s.count(x)) ++overlap;
        }
        sum += weight * static_cast<double>(overlap) / static_cast<double>(d);
        weight *= p;
    }
    return (1.0 - p) * sum;
}

MetricResult compatibility(const RunSet& run, const Qrels& qrels, double p,
                           std::optional<int> depth) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("compatibility requires p in (0,1)");
    if (run.empty()) throw ValidationError("compatibility: run is empty");

    MetricResult result;
    result.metric_name = "compatibility";
    result.params["p"] = p;
    if (depth) result.params["depth"] = *depth;

    for (const auto& [user, ranking] : run.rankings) {
        auto uit = qrels.grades.find(user);

        std::vector<std::string> system_items;
        system_items.reserve(ranking.size());
        std::unordered_map<std::string, size_t> system_pos;
        for (size_t i = 0; i < ranking.size(); ++i) {
            system_items.push_back(ranking[i].item_id);
            system_pos.emplace(ranking[i].item_id, i);
        }

        struct RelevantItem {
            const std::string* item;
            int grade;
            size_t pos;  // position in the run, SIZE_MAX when unretrieved
        };
        std::vector<RelevantItem> relevant;
        if (uit != qrels.grades.end()) {
            for (const auto& [item, grade] : uit->second) {
                if (grade <= 0) continue;
                auto pit = system_pos.find(item);
                relevant.push_back(
                    {&item, grade, pit == system_pos.end() ? SIZE_MAX : pit->second});
            }
        }
        if (relevant.empty()) {
            result.per_user[user] = 0.0;
            result.zero_relevant_users.push_back(user);
            continue;
        }

        std::sort(relevant.begin(), relevant.end(), [](const RelevantItem& a, const RelevantItem& b) {
            if (a.grade != b.grade) return a.grade > b.grade;
            if (a.pos != b.pos) return a.pos < b.pos;
            return *a.item < *b.item;
        });
        std::vector<std::string> ideal;
        ideal.reserve(relevant.size());
        for (const auto& r : relevant) ideal.push_back(*r.item);

        const int depth_eff = depth ? *depth : static_cast<int>(ranking.size());
        if (depth_eff < 1) {
            result.per_user[user] = 0.0;
            continue;
        }
        const double numer = rbo(system_items, ideal, p, depth_eff);
        const double denom = rbo(ideal, ideal, p, depth_eff);
        result.per_user[user] = denom > 0.0 ? numer / denom : 0.0;
    }
    result.skipped_users = qrels_users_missing_from(run, qrels);
    result.aggregate = mean_of(result.per_user);
    return result;
}

namespace {

struct PairCounts {
    double concordant = 0.0, discordant = 0.0;
    double tied_a = 0.0, tied_b = 0.0;  // tied in exactly one ranking
};

// Aligns b's scores to a's order; validates the element sets match.
std::pair<std::vector<double>, std::vector<double>> align_scores(
    const std::vector<ScoredSystem>& a, const std::vector<ScoredSystem>& b) {
    if (a.size() != b.size())
        throw ValidationError("rankings compare different numbers of systems (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.size() < 2) throw ValidationError("rank correlation requires at least 2 systems");
    std::unordered_map<std::string, double> b_scores;
    for (const auto& s : b)
        if (!b_scores.emplace(s.name, s.score).second)
            throw ValidationError("duplicate system \"" + s.name + "\" in ranking");
    std::vector<double> x, y;
    std::unordered_set<std::string> seen_a;
    for (const auto& s : a) {
        if (!seen_a.insert(s.name).second)
            throw ValidationError("duplicate system \"" + s.name + "\" in ranking");
        auto it = b_scores.find(s.name);
        if (it == b_scores.end())
            throw ValidationError("system \"" + s.name + "\" missing from the other ranking");
        x.push_back(s.score);
        y.push_back(it->second);
    }
    return {std::move(x), std::move(y)};
}

double tau_from_counts(const PairCounts& c, double total_pairs, TauVariant variant) {
    const double numer = c.concordant - c.discordant;
    if (variant == TauVariant::tau_a) return total_pairs > 0.0 ? numer / total_pairs : 0.0;
    const double denom = std::sqrt((c.concordant + c.discordant + c.tied_a) *
                                   (c.concordant + c.discordant + c.tied_b));
    return denom > 0.0 ? numer / denom : 0.0;
}

}  // namespace

double kendall_tau(const std::vector<ScoredSystem>& a, const std::vector<ScoredSystem>& b,
                   TauVariant variant) {
    auto [x, y] = align_scores(a, b);
    const size_t n = x.size();
    PairCounts counts;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) counts.tied_a += 1.0;
            else if (dy == 0.0) counts.tied_b += 1.0;
            else if (dx * dy > 0.0) counts.concordant += 1.0;
            else counts.discordant += 1.0;
        }
    }
    return tau_from_counts(counts, static_cast<double>(n * (n - 1)) / 2.0, variant);
}

double weighted_kendall_tau(const std::vector<ScoredSystem>& a,
                            const std::vector<ScoredSystem>& b) {
    auto [x, y] = align_scores(a, b);
    const size_t n = x.size();

    // Position of each of a's elements within b's ordering.
    std::unordered_map<std::string, size_t> pos_b;
    for (size_t i = 0; i < b.size(); ++i) pos_b.emplace(b[i].name, i);

    PairCounts counts;
    for (size_t i = 0; i < n; ++i) {
        const double wa_i = 1.0 / static_cast<double>(i + 1);
        const double wb_i = 1.0 / static_cast<double>(pos_b.at(a[i].name) + 1);
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            const double wa_j = 1.0 / static_cast<double>(j + 1);
            const double wb_j = 1.0 / static_cast<double>(pos_b.at(a[j].name) + 1);
            const double w = 0.5 * ((wa_i + wa_j) + (wb_i + wb_j));
            if (dx == 0.0) counts.tied_a += w;
            else if (dy == 0.0) counts.tied_b += w;
            else if (dx * dy > 0.0) counts.concordant += w;
            else counts.discordant += w;
        }
    }
    return tau_from_counts(counts, 0.0, TauVariant::tau_b);
}

AgreementTriple agreement_triple(const Qrels& human, const Qrels& judged,
                                 const PairFilter& filter, bool per_user_macro) {
    if (filter.mode == PairFilter::Mode::min_grade_gap && filter.gap < 1)
        throw ValidationError("min_grade_gap filter requires gap >= 1");

    size_t total_agree = 0, total_tie = 0, total_disagree = 0;
    double macro_agree = 0.0, macro_tie = 0.0, macro_disagree = 0.0;
    size_t users_with_pairs = 0;

    for (const auto& [user, human_items] : human.grades) {
        auto jit = judged.grades.find(user);
        if (jit == judged.grades.end()) continue;
        const auto& judge_items = jit->second;

        // Pairs are formed over items judged by both sides.
        std::vector<std::pair<const std::string*, std::pair<int, int>>> compared;
        for (const auto& [item, h_grade] : human_items) {
            auto it = judge_items.find(item);
            if (it == judge_items.end()) continue;
            compared.push_back({&item, {h_grade, it->second}});
        }

        size_t u_agree = 0, u_tie = 0, u_disagree = 0;
        for (size_t i = 0; i < compared.size(); ++i) {
            for (size_t j = i + 1; j < compared.size(); ++j) {
                const int h_i = compared[i].second.first, h_j = compared[j].second.first;
                const int g_i = compared[i].second.second, g_j = compared[j].second.second;
                bool qualifies;
                if (filter.mode == PairFilter::Mode::relevant_vs_nonrelevant)
                    qualifies = (h_i == 0) != (h_j == 0);
                else
                    qualifies = std::abs(h_i - h_j) >= filter.gap;
                if (!qualifies) continue;

                const int sign_h = h_i > h_j ? 1 : -1;  // filters exclude equal human grades
                const int sign_g = g_i > g_j ? 1 : (g_i < g_j ? -1 : 0);
                if (sign_g == 0) ++u_tie;
                else if (sign_g == sign_h) ++u_agree;
                else ++u_disagree;
            }
        }
        const size_t u_total = u_agree + u_tie + u_disagree;
        if (u_total == 0) continue;
        ++users_with_pairs;
        total_agree += u_agree;
        total_tie += u_tie;
        total_disagree += u_disagree;
        macro_agree += static_cast<double>(u_agree) / static_cast<double>(u_total);
        macro_tie += static_cast<double>(u_tie) / static_cast<double>(u_total);
        macro_disagree += static_cast<double>(u_disagree) / static_cast<double>(u_total);
    }

    const size_t total = total_agree + total_tie + total_disagree;
    if (total == 0)
        throw NoPairsError("no qualifying pairs under the given filter (distinct from zero agreement)");

    AgreementTriple triple;
    triple.pair_count = total;
    if (per_user_macro) {
        const double n = static_cast<double>(users_with_pairs);
        triple.agreement = macro_agree / n;
        triple.tie = macro_tie / n;
        triple.disagreement = macro_disagree / n;
    } else {
        const double n = static_cast<double>(total);
        triple.agreement = static_cast<double>(total_agree) / n;
        triple.tie = static_cast<double>(total_tie) / n;
        triple.disagreement = static_cast<double>(total_disagree) / n;
    }
    return triple;
}

}  // namespace recjudge::metrics
