#include "recjudge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "recjudge/common.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::corpus {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::vector<std::string> whitespace_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_int64(const std::string& s, int64_t& out) {
    try {
        size_t pos = 0;
        out = std::stoll(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_int(const std::string& s, int& out) {
    int64_t v;
    if (!parse_int64(s, v)) return false;
    out = static_cast<int>(v);
    return static_cast<int64_t>(out) == v;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

InteractionLog load_interactions(const std::string& path, InteractionFormat format,
                                 LoadReport* report) {
    const char delim = format == InteractionFormat::tsv ? '\t' : ',';
    std::ifstream in = open_input(path);

    std::string header_line;
    if (!std::getline(in, header_line))
        throw FormatError(path + ": empty file, expected a header row");
    header_line = strip_cr(header_line);

    int col_user = -1, col_item = -1, col_rating = -1, col_ts = -1;
    auto header = split_fields(header_line, delim);
    for (size_t i = 0; i < header.size(); ++i) {
        const std::string name = lower(header[i]);
        if (name == "user_id" || name == "userid") col_user = static_cast<int>(i);
        else if (name == "item_id" || name == "itemid" || name == "movieid")
            col_item = static_cast<int>(i);
        else if (name == "rating") col_rating = static_cast<int>(i);
        else if (name == "timestamp") col_ts = static_cast<int>(i);
    }
    if (col_user < 0 || col_item < 0)
        throw FormatError(path + ": header must declare user_id and item_id columns, got \"" +
                          header_line + "\"");

    InteractionLog log;
    LoadReport rep;
    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;

        auto fields = split_fields(line, delim);
        const int max_col = std::max({col_user, col_item, col_rating, col_ts});
        if (static_cast<int>(fields.size()) <= std::max(col_user, col_item) ||
            static_cast<int>(fields.size()) <= max_col) {
            ++rep.skipped;
            continue;
        }

        Interaction e;
        e.user_id = fields[col_user];
        e.item_id = fields[col_item];
        if (e.user_id.empty() || e.item_id.empty()) {
            ++rep.skipped;
            continue;
        }

        bool ok = true;
        if (col_rating >= 0 && !fields[col_rating].empty()) {
            double r;
            if (parse_double(fields[col_rating], r) && r >= 0.5 && r <= 5.0) e.rating = r;
            else ok = false;
        }
        if (ok && col_ts >= 0 && !fields[col_ts].empty()) {
            int64_t t;
            if (parse_int64(fields[col_ts], t) && t >= 0) e.timestamp = t;
            else ok = false;
        }
        if (!ok) {
            ++rep.skipped;
            continue;
        }
        log.events.push_back(std::move(e));
        ++rep.parsed;
    }
    if (report) *report = rep;
    return log;
}

void write_interactions(const InteractionLog& log, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "user_id,item_id,rating,timestamp\n";
    for (const auto& e : log.events) {
        out << e.user_id << ',' << e.item_id << ',';
        if (e.rating) out << format_fixed(*e.rating, 1);
        out << ',';
        if (e.timestamp) out << *e.timestamp;
        out << '\n';
    }
}

InteractionLog filter_min_interactions(const InteractionLog& log, size_t min_count,
                                       FilterReport* report) {
    std::map<std::string, size_t> item_counts;
    std::set<std::string> users_before;
    for (const auto& e : log.events) {
        ++item_counts[e.item_id];
        users_before.insert(e.user_id);
    }

    // Pass 1: items.
    std::vector<const Interaction*> kept;
    kept.reserve(log.events.size());
    for (const auto& e : log.events)
        if (item_counts[e.item_id] >= min_count) kept.push_back(&e);

    // Pass 2: users, counted over what survived pass 1.
    std::map<std::string, size_t> user_counts;
    for (const Interaction* e : kept) ++user_counts[e->user_id];

    InteractionLog out;
    std::set<std::string> users_after, items_after;
    for (const Interaction* e : kept) {
        if (user_counts[e->user_id] < min_count) continue;
        out.events.push_back(*e);
        users_after.insert(e->user_id);
        items_after.insert(e->item_id);
    }

    if (report) {
        report->events_before = log.events.size();
        report->events_after = out.events.size();
        report->users_before = users_before.size();
        report->users_after = users_after.size();
        report->items_before = item_counts.size();
        report->items_after = items_after.size();
    }
    return out;
}

namespace {

size_t train_count(double fraction, size_t n) {
    return static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
}

void require_timestamps(const InteractionLog& log, const char* strategy) {
    for (const auto& e : log.events)
        if (!e.timestamp)
            throw ValidationError(std::string(strategy) +
                                  " split requires timestamps on all interactions");
}

}  // namespace

std::pair<InteractionLog, InteractionLog> split(const InteractionLog& log, const SplitSpec& spec) {
    const bool fraction_based = spec.strategy != SplitStrategy::global_time;
    if (fraction_based) {
        if (!spec.train_fraction || spec.cutoff_timestamp)
            throw ValidationError("fraction-based split requires train_fraction and no cutoff");
        if (!(*spec.train_fraction > 0.0 && *spec.train_fraction < 1.0))
            throw ValidationError("train_fraction must be in (0,1)");
    } else {
        if (!spec.cutoff_timestamp || spec.train_fraction)
            throw ValidationError("global_time split requires cutoff_timestamp and no fraction");
    }

    InteractionLog train, test;

    if (spec.strategy == SplitStrategy::global_time) {
        require_timestamps(log, "global_time");
        for (const auto& e : log.events)
            (*e.timestamp < *spec.cutoff_timestamp ? train : test).events.push_back(e);
        return {std::move(train), std::move(test)};
    }

    if (spec.strategy == SplitStrategy::per_user_time_ordered)
        require_timestamps(log, "per_user_time_ordered");

    std::map<std::string, std::vector<const Interaction*>> per_user;
    for (const auto& e : log.events) per_user[e.user_id].push_back(&e);

    for (auto& [user, events] : per_user) {
        if (spec.strategy == SplitStrategy::per_user_time_ordered) {
            std::stable_sort(events.begin(), events.end(),
                             [](const Interaction* a, const Interaction* b) {
                                 if (*a->timestamp != *b->timestamp)
                                     return *a->timestamp < *b->timestamp;
                                 return a->item_id < b->item_id;
                             });
        } else {
            rng::Stream stream(rng::mix(spec.seed, rng::hash_str(user)));
            rng::shuffle(events, stream);
        }
        const size_t cut = train_count(*spec.train_fraction, events.size());
        for (size_t i = 0; i < events.size(); ++i)
            (i < cut ? train : test).events.push_back(*events[i]);
    }
    return {std::move(train), std::move(test)};
}

int GradeMap::grade_for(const Interaction& e) const {
    if (!e.rating) {
        if (implicit_grade) return *implicit_grade;
        throw ValidationError("interaction without rating but grade map has no implicit grade");
    }
    for (const Band& band : bands)
        if (*e.rating >= band.min_rating) return band.grade;
    throw ValidationError("rating " + format_compact(*e.rating) + " outside grade map domain");
}

GradeMap GradeMap::parse(const std::string& text) {
    GradeMap out;
    for (const auto& token : split_fields(text, ',')) {
        if (token.empty()) continue;
        auto colon = token.find(':');
        if (colon == std::string::npos)
            throw ValidationError("bad grade map entry \"" + token + "\", expected min:grade");
        const std::string key = token.substr(0, colon);
        int grade;
        if (!parse_int(token.substr(colon + 1), grade))
            throw ValidationError("bad grade in grade map entry \"" + token + "\"");
        if (key == "implicit") {
            out.implicit_grade = grade;
            continue;
        }
        double min_rating;
        if (!parse_double(key, min_rating))
            throw ValidationError("bad rating threshold in grade map entry \"" + token + "\"");
        out.bands.push_back({min_rating, grade});
    }
    if (out.bands.empty() && !out.implicit_grade)
        throw ValidationError("grade map is empty");
    std::sort(out.bands.begin(), out.bands.end(),
              [](const Band& a, const Band& b) { return a.min_rating > b.min_rating; });
    return out;
}

Qrels derive_qrels_from_test(const InteractionLog& test, const GradeMap& grade_map) {
    Qrels out;
    for (const auto& e : test.events) {
        const int grade = grade_map.grade_for(e);
        auto& slot = out.grades[e.user_id];
        auto it = slot.find(e.item_id);
        if (it == slot.end() || it->second < grade) slot[e.item_id] = grade;
    }
    return out;
}

Qrels read_qrels(const std::string& path, int grade_bound) {
    std::ifstream in = open_input(path);
    Qrels out;
    out.grade_bound = grade_bound;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto tok = whitespace_tokens(line);
        if (tok.size() != 4)
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected 4 columns (user 0 item grade), got " +
                              std::to_string(tok.size()));
        int grade;
        if (!parse_int(tok[3], grade))
            throw FormatError(path + ":" + std::to_string(line_no) + ": grade is not an integer");
        if (grade < 0 || grade > grade_bound)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": grade " +
                                  std::to_string(grade) + " outside [0, " +
                                  std::to_string(grade_bound) + "]");
        auto& slot = out.grades[tok[0]];
        if (slot.count(tok[2]))
            throw FormatError(path + ":" + std::to_string(line_no) + ": duplicate entry for (" +
                              tok[0] + ", " + tok[2] + ")");
        slot[tok[2]] = grade;
    }
    return out;
}

void write_qrels(const Qrels& qrels, const std::string& path) {
    std::ofstream out = open_output(path);
    for (const auto& [user, items] : qrels.grades)
        for (const auto& [item, grade] : items)
            out << user << " 0 " << item << ' ' << grade << '\n';
}

void validate_top_three(const Qrels& qrels) {
    for (const auto& [user, items] : qrels.grades) {
        int counts[3] = {0, 0, 0};
        for (const auto& [item, grade] : items)
            if (grade >= 5 && grade <= 7) ++counts[grade - 5];
        for (int g = 5; g <= 7; ++g)
            if (counts[g - 5] > 1)
                throw ValidationError("user " + user + " has " + std::to_string(counts[g - 5]) +
                                      " items at grade " + std::to_string(g) +
                                      ", top-three convention allows one");
    }
}

RunSet read_run(const std::string& path, std::vector<std::string>* diagnostics) {
    std::ifstream in = open_input(path);
    RunSet out;
    struct Row {
        int rank;
        std::string item;
        double score;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto tok = whitespace_tokens(line);
        if (tok.size() != 6)
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected 6 columns (user Q0 item rank score tag), got " +
                              std::to_string(tok.size()));
        int rank;
        double score;
        if (!parse_int(tok[3], rank) || rank < 1)
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad rank \"" + tok[3] +
                              "\"");
        if (!parse_double(tok[4], score))
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad score \"" + tok[4] +
                              "\"");
        if (out.system_tag.empty()) out.system_tag = tok[5];
        else if (out.system_tag != tok[5])
            throw FormatError(path + ":" + std::to_string(line_no) + ": mixed system tags \"" +
                              out.system_tag + "\" and \"" + tok[5] + "\"");
        rows[tok[0]].push_back({rank, tok[2], score});
    }

    for (auto& [user, user_rows] : rows) {
        std::sort(user_rows.begin(), user_rows.end(),
                  [](const Row& a, const Row& b) { return a.rank < b.rank; });
        std::set<std::string> seen;
        auto& ranking = out.rankings[user];
        for (size_t i = 0; i < user_rows.size(); ++i) {
            const Row& row = user_rows[i];
            if (row.rank != static_cast<int>(i) + 1)
                throw ValidationError(path + ": non-contiguous ranks for user " + user +
                                      " (expected " + std::to_string(i + 1) + ", got " +
                                      std::to_string(row.rank) + ")");
            if (!seen.insert(row.item).second)
                throw ValidationError(path + ": duplicate item " + row.item + " for user " + user);
            if (i > 0 && row.score > ranking.back().score && diagnostics)
                diagnostics->push_back("user " + user + " rank " + std::to_string(row.rank) +
                                       ": score increases against rank order");
            ranking.push_back({row.item, row.score});
        }
    }
    return out;
}

void write_run(const RunSet& run, const std::string& path) {
    std::ofstream out = open_output(path);
    for (const auto& [user, ranking] : run.rankings)
        for (size_t i = 0; i < ranking.size(); ++i)
            out << user << " Q0 " << ranking[i].item_id << ' ' << i + 1 << ' '
                << format_fixed(ranking[i].score, 6) << ' ' << run.system_tag << '\n';
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ItemRecord record_from_json(const json& j, const std::string& where) {
    ItemRecord rec;
    try {
        rec.item_id = j.at("item_id").get<std::string>();
        rec.title = j.at("title").get<std::string>();
        if (j.contains("average_rating")) rec.average_rating = j["average_rating"].get<double>();
        if (j.contains("genres")) rec.genres = j["genres"].get<std::vector<std::string>>();
        if (j.contains("directors")) rec.directors = j["directors"].get<std::vector<std::string>>();
        if (j.contains("overview")) rec.overview = j["overview"].get<std::string>();
        if (j.contains("cast")) rec.cast = j["cast"].get<std::vector<std::string>>();
        if (j.contains("runtime")) rec.runtime_minutes = j["runtime"].get<int>();
        if (j.contains("num_ratings")) rec.num_ratings = j["num_ratings"].get<int64_t>();
        if (j.contains("year")) rec.year = j["year"].get<int>();
        if (j.contains("languages")) rec.languages = j["languages"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw FormatError(where + ": " + e.what());
    }
    if (rec.item_id.empty() || rec.title.empty())
        throw FormatError(where + ": item_id and title must be non-empty");
    return rec;
}

// Minimal RFC-4180 row split; overview/cast fields carry commas.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> split_list_field(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    for (auto& part : split_fields(s, '|'))
        if (!part.empty()) out.push_back(part);
    return out;
}

}  // namespace

Catalog read_catalog(const std::string& path) {
    std::ifstream in = open_input(path);
    Catalog catalog;
    std::string line;
    size_t line_no = 0;

    auto insert = [&](ItemRecord rec, size_t at_line) {
        if (catalog.count(rec.item_id))
            throw FormatError(path + ":" + std::to_string(at_line) + ": duplicate item_id " +
                              rec.item_id);
        catalog.emplace(rec.item_id, std::move(rec));
    };

    if (ends_with(path, ".csv")) {
        if (!std::getline(in, line)) throw FormatError(path + ": empty file");
        auto header = split_csv_row(strip_cr(line));
        std::map<std::string, int> cols;
        for (size_t i = 0; i < header.size(); ++i) cols[lower(header[i])] = static_cast<int>(i);
        if (!cols.count("item_id") || !cols.count("title"))
            throw FormatError(path + ": catalog CSV must declare item_id and title columns");
        auto field = [&](const std::vector<std::string>& row, const char* name) -> std::string {
            auto it = cols.find(name);
            if (it == cols.end() || it->second >= static_cast<int>(row.size())) return {};
            return row[it->second];
        };
        ++line_no;
        while (std::getline(in, line)) {
            ++line_no;
            line = strip_cr(line);
            if (line.empty()) continue;
            auto row = split_csv_row(line);
            ItemRecord rec;
            rec.item_id = field(row, "item_id");
            rec.title = field(row, "title");
            if (rec.item_id.empty() || rec.title.empty())
                throw FormatError(path + ":" + std::to_string(line_no) +
                                  ": item_id and title must be non-empty");
            double d;
            int i;
            int64_t n;
            if (auto s = field(row, "average_rating"); !s.empty() && parse_double(s, d))
                rec.average_rating = d;
            rec.genres = split_list_field(field(row, "genres"));
            rec.directors = split_list_field(field(row, "directors"));
            rec.overview = field(row, "overview");
            rec.cast = split_list_field(field(row, "cast"));
            if (auto s = field(row, "runtime"); !s.empty() && parse_int(s, i))
                rec.runtime_minutes = i;
            if (auto s = field(row, "num_ratings"); !s.empty() && parse_int64(s, n))
                rec.num_ratings = n;
            if (auto s = field(row, "year"); !s.empty() && parse_int(s, i)) rec.year = i;
            rec.languages = split_list_field(field(row, "languages"));
            insert(std::move(rec), line_no);
        }
        return catalog;
    }

    // JSON-lines (default).
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw FormatError(path + ":" + std::to_string(line_no) + ": not a JSON object");
        insert(record_from_json(j, path + ":" + std::to_string(line_no)), line_no);
    }
    return catalog;
}

void write_catalog(const Catalog& catalog, const std::string& path) {
    std::ofstream out = open_output(path);
    for (const auto& [id, rec] : catalog) {
        json j;
        j["item_id"] = rec.item_id;
        j["title"] = rec.title;
        if (rec.average_rating) j["average_rating"] = *rec.average_rating;
        if (!rec.genres.empty()) j["genres"] = rec.genres;
        if (!rec.directors.empty()) j["directors"] = rec.directors;
        if (!rec.overview.empty()) j["overview"] = rec.overview;
        if (!rec.cast.empty()) j["cast"] = rec.cast;
        if (rec.runtime_minutes) j["runtime"] = *rec.runtime_minutes;
        if (rec.num_ratings) j["num_ratings"] = *rec.num_ratings;
        if (rec.year) j["year"] = *rec.year;
        if (!rec.languages.empty()) j["languages"] = rec.languages;
        out << j.dump() << '\n';
    }
}

std::vector<std::string> sample_users(const InteractionLog& log, size_t n, uint64_t seed) {
    std::set<std::string> distinct;
    for (const auto& e : log.events) distinct.insert(e.user_id);
    std::vector<std::string> users(distinct.begin(), distinct.end());
    rng::Stream stream(rng::mix(seed, 0x757365727360ULL));
    auto picks = rng::sample_indices(users.size(), n, stream);
    std::vector<std::string> out;
    out.reserve(picks.size());
    for (size_t i : picks) out.push_back(users[i]);
    std::sort(out.begin(), out.end());
    return out;
}

InteractionLog restrict_users(const InteractionLog& log, const std::set<std::string>& users) {
    InteractionLog out;
    for (const auto& e : log.events)
        if (users.count(e.user_id)) out.events.push_back(e);
    return out;
}

}  // namespace recjudge::corpus
