#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace recjudge {

// One timestamped user-item event. rating is absent for implicit-feedback
// logs; timestamp is absent where the source collection does not provide one.
struct Interaction {
    std::string user_id;
    std::string item_id;
    std::optional<double> rating;      // in [0.5, 5.0] when present
    std::optional<int64_t> timestamp;  // seconds since epoch, >= 0
};

struct InteractionLog {
    std::vector<Interaction> events;

    size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

// The ten metadata fields addressable by name for ablation selection, in the
// canonical rendering order used by the judge prompt.
inline constexpr std::array<const char*, 10> kMetadataFields = {
    "title",   "average_rating", "genres",      "directors", "overview",
    "cast",    "runtime",        "num_ratings", "year",      "languages",
};

inline constexpr std::array<const char*, 10> kMetadataLabels = {
    "Title",   "Average rating", "Genres",         "Directors", "Overview",
    "Cast",    "Runtime",        "Number ratings", "Year",      "Languages",
};

struct ItemRecord {
    std::string item_id;
    std::string title;
    std::optional<double> average_rating;
    std::vector<std::string> genres;
    std::vector<std::string> directors;
    std::string overview;
    std::vector<std::string> cast;
    std::optional<int> runtime_minutes;
    std::optional<int64_t> num_ratings;
    std::optional<int> year;
    std::vector<std::string> languages;
};

using Catalog = std::map<std::string, ItemRecord>;

// Graded relevance judgments, (user, item) -> grade in [0, grade_bound].
// The default bound 7 matches the interest scale; sum-aggregated judge grades
// use a wider bound.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> grades;
    int grade_bound = 7;

    size_t size() const {
        size_t n = 0;
        for (const auto& [u, items] : grades) n += items.size();
        return n;
    }
    bool empty() const { return grades.empty(); }

    void set(const std::string& user, const std::string& item, int grade) {
        grades[user][item] = grade;
    }
    std::optional<int> get(const std::string& user, const std::string& item) const {
        auto uit = grades.find(user);
        if (uit == grades.end()) return std::nullopt;
        auto iit = uit->second.find(item);
        if (iit == uit->second.end()) return std::nullopt;
        return iit->second;
    }

    bool operator==(const Qrels& other) const { return grades == other.grades; }
};

struct RunEntry {
    std::string item_id;
    double score = 0.0;
};

// One system's ranked lists, TREC-run style: per user an ordered item list
// with non-increasing scores and ranks contiguous from 1.
struct RunSet {
    std::string system_tag;
    std::map<std::string, std::vector<RunEntry>> rankings;

    bool empty() const { return rankings.empty(); }
};

}  // namespace recjudge
