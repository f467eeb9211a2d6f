#include "recjudge/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "recjudge/common.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::simlab {

namespace {

// Scales mnar_strength into the affinity exponent of the logging weights.
constexpr double kMnarExponentScale = 6.0;

const char* kGenrePool[] = {"drama",  "comedy",  "action",    "thriller",
                            "sci-fi", "romance", "animation", "documentary"};
const char* kAdjectives[] = {"Silent", "Golden",  "Last",   "Hidden", "Broken", "Distant",
                             "Crimson", "Restless", "Frozen", "Velvet", "Hollow", "Burning"};
const char* kNouns[] = {"Harbor", "Garden", "Signal",  "Mirror", "Voyage", "Orchard",
                        "Frontier", "Letter", "Current", "Summit", "Paradox", "Reunion"};
const char* kSurnames[] = {"Alvarez", "Brandt", "Chen",  "Dubois", "Eriksen", "Fontaine",
                           "Garcia",  "Hoshino", "Ivanov", "Klein",  "Laurent", "Moreau"};
const char* kLanguagePool[] = {"English", "French", "Spanish", "Japanese", "Korean", "German"};

std::string padded_id(const char* prefix, int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
    return buf;
}

ItemRecord synthesize_item(const World& world, int item, double mean_affinity) {
    const uint64_t h = rng::mix(world.spec.seed, 0x6361740000ULL + static_cast<uint64_t>(item));
    rng::Stream stream(h);
    ItemRecord rec;
    rec.item_id = world.item_ids[item];

    const char* adj = kAdjectives[stream.bounded(std::size(kAdjectives))];
    const char* noun = kNouns[stream.bounded(std::size(kNouns))];
    rec.title = std::string("The ") + adj + " " + noun;
    rec.year = 1940 + static_cast<int>(stream.bounded(85));

    // Genre tokens follow the signs of the leading latent dimensions, so
    // items close in latent space share genres.
    const double* vec = &world.item_vecs[static_cast<size_t>(item) * world.spec.latent_dim];
    for (int d = 0; d < std::min(world.spec.latent_dim, 4); ++d)
        if (vec[d] > 0.0) rec.genres.push_back(kGenrePool[d]);
    if (rec.genres.empty()) rec.genres.push_back(kGenrePool[4 + stream.bounded(4)]);

    rec.directors.push_back(std::string("D. ") + kSurnames[stream.bounded(std::size(kSurnames))]);
    for (int i = 0; i < 3; ++i)
        rec.cast.push_back(std::string(1, static_cast<char>('A' + stream.bounded(26))) + ". " +
                           kSurnames[stream.bounded(std::size(kSurnames))]);
    rec.runtime_minutes = 70 + static_cast<int>(stream.bounded(110));
    rec.languages.push_back(kLanguagePool[stream.bounded(std::size(kLanguagePool))]);
    if (stream.bounded(4) == 0)
        rec.languages.push_back(kLanguagePool[stream.bounded(std::size(kLanguagePool))]);
    std::sort(rec.languages.begin(), rec.languages.end());
    rec.languages.erase(std::unique(rec.languages.begin(), rec.languages.end()),
                        rec.languages.end());

    rec.overview = std::string("A ") + adj + " story set around the " + noun + ".";
    rec.average_rating = 1.0 + 4.0 * mean_affinity;
    rec.num_ratings = static_cast<int64_t>(std::lround(world.exposure[item] * 50000.0));
    return rec;
}

}  // namespace

WorldSpec load_world_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    WorldSpec spec;
    spec.n_users = j.value("n_users", spec.n_users);
    spec.n_items = j.value("n_items", spec.n_items);
    spec.latent_dim = j.value("latent_dim", spec.latent_dim);
    spec.popularity_skew = j.value("popularity_skew", spec.popularity_skew);
    spec.interactions_per_user = j.value("interactions_per_user", spec.interactions_per_user);
    spec.mnar_strength = j.value("mnar_strength", spec.mnar_strength);
    if (j.contains("grade_thresholds"))
        spec.grade_thresholds = j["grade_thresholds"].get<std::vector<double>>();
    if (j.contains("threshold_quantiles")) {
        auto q = j["threshold_quantiles"].get<std::vector<double>>();
        if (q.size() != 7)
            throw ValidationError(path + ": threshold_quantiles must have 7 entries");
        std::copy(q.begin(), q.end(), spec.threshold_quantiles.begin());
    }
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

double World::affinity(int user, int item) const {
    const double* u = &user_vecs[static_cast<size_t>(user) * spec.latent_dim];
    const double* v = &item_vecs[static_cast<size_t>(item) * spec.latent_dim];
    double dot = 0.0;
    for (int d = 0; d < spec.latent_dim; ++d) dot += u[d] * v[d];
    const double range = affinity_max - affinity_min;
    if (range < 1e-12) return 0.5;
    double a = (dot - affinity_min) / range;
    return std::clamp(a, 0.0, 1.0);
}

int World::truth_grade(int user, int item) const {
    const double a = affinity(user, item);
    int grade = 0;
    for (double t : thresholds)
        if (a >= t) ++grade;
        else break;
    return grade;
}

int World::truth_grade(const std::string& user, const std::string& item) const {
    return truth_grade(user_index.at(user), item_index.at(item));
}

Qrels World::truth_qrels_full() const {
    Qrels out;
    for (int u = 0; u < spec.n_users; ++u) {
        auto& slot = out.grades[user_ids[u]];
        for (int i = 0; i < spec.n_items; ++i) slot[item_ids[i]] = truth_grade(u, i);
    }
    return out;
}

Qrels World::truth_qrels_for(const std::map<std::string, std::set<std::string>>& subset) const {
    Qrels out;
    for (const auto& [user, items] : subset) {
        const int u = user_index.at(user);
        auto& slot = out.grades[user];
        for (const auto& item : items) slot[item] = truth_grade(u, item_index.at(item));
    }
    return out;
}

World generate_world(const WorldSpec& spec) {
    if (spec.n_users < 1 || spec.n_items < 1 || spec.latent_dim < 1 ||
        spec.interactions_per_user < 1)
        throw ValidationError("world spec counts must be >= 1");
    if (spec.popularity_skew < 0.0) throw ValidationError("popularity_skew must be >= 0");
    if (spec.mnar_strength < 0.0 || spec.mnar_strength > 1.0)
        throw ValidationError("mnar_strength must be in [0,1]");
    if (!spec.grade_thresholds.empty()) {
        if (spec.grade_thresholds.size() != 7)
            throw ValidationError("grade_thresholds must have exactly 7 entries");
        for (size_t i = 1; i < 7; ++i)
            if (!(spec.grade_thresholds[i] > spec.grade_thresholds[i - 1]))
                throw ValidationError("grade_thresholds must be strictly ascending");
    }
    for (size_t i = 0; i < 7; ++i) {
        const double q = spec.threshold_quantiles[i];
        if (!(q > 0.0 && q < 1.0) || (i > 0 && q <= spec.threshold_quantiles[i - 1]))
            throw ValidationError("threshold_quantiles must be strictly ascending in (0,1)");
    }

    World world;
    world.spec = spec;
    world.user_ids.reserve(spec.n_users);
    for (int u = 0; u < spec.n_users; ++u) {
        world.user_ids.push_back(padded_id("u", u + 1, 5));
        world.user_index[world.user_ids.back()] = u;
    }
    world.item_ids.reserve(spec.n_items);
    for (int i = 0; i < spec.n_items; ++i) {
        world.item_ids.push_back(padded_id("i", i + 1, 6));
        world.item_index[world.item_ids.back()] = i;
    }

    rng::Stream latent(rng::mix(spec.seed, 0x1a7e17ULL));
    world.user_vecs.resize(static_cast<size_t>(spec.n_users) * spec.latent_dim);
    for (double& x : world.user_vecs) x = latent.gaussian();
    world.item_vecs.resize(static_cast<size_t>(spec.n_items) * spec.latent_dim);
    for (double& x : world.item_vecs) x = latent.gaussian();

    // Popularity ranks are a seeded permutation, independent of affinity.
    std::vector<size_t> perm(spec.n_items);
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng::Stream perm_stream(rng::mix(spec.seed, 0x9021ULL));
    rng::shuffle(perm, perm_stream);
    world.exposure.resize(spec.n_items);
    world.popularity_score.resize(spec.n_items);
    const double log_n = std::log(static_cast<double>(spec.n_items) + 1.0);
    for (int i = 0; i < spec.n_items; ++i) {
        const double rank = static_cast<double>(perm[i]);  // 0 = most popular
        world.exposure[i] = 1.0 / (rank + 1.0);
        world.popularity_score[i] = 1.0 - std::log(rank + 1.0) / log_n;
    }

    // Affinity range and per-item means over the full user-item grid.
    world.affinity_min = std::numeric_limits<double>::infinity();
    world.affinity_max = -std::numeric_limits<double>::infinity();
    std::vector<double> item_sum(spec.n_items, 0.0);
    std::vector<double> all_dots;
    all_dots.reserve(static_cast<size_t>(spec.n_users) * spec.n_items);
    for (int u = 0; u < spec.n_users; ++u) {
        const double* uv = &world.user_vecs[static_cast<size_t>(u) * spec.latent_dim];
        for (int i = 0; i < spec.n_items; ++i) {
            const double* iv = &world.item_vecs[static_cast<size_t>(i) * spec.latent_dim];
            double dot = 0.0;
            for (int d = 0; d < spec.latent_dim; ++d) dot += uv[d] * iv[d];
            world.affinity_min = std::min(world.affinity_min, dot);
            world.affinity_max = std::max(world.affinity_max, dot);
            item_sum[i] += dot;
            all_dots.push_back(dot);
        }
    }

    if (!spec.grade_thresholds.empty()) {
        std::copy(spec.grade_thresholds.begin(), spec.grade_thresholds.end(),
                  world.thresholds.begin());
    } else {
        // Thresholds at empirical affinity quantiles of the full grid.
        std::sort(all_dots.begin(), all_dots.end());
        const double range = world.affinity_max - world.affinity_min;
        for (size_t k = 0; k < 7; ++k) {
            size_t idx = static_cast<size_t>(spec.threshold_quantiles[k] *
                                             static_cast<double>(all_dots.size()));
            idx = std::min(idx, all_dots.size() - 1);
            world.thresholds[k] =
                range < 1e-12 ? 0.5 : (all_dots[idx] - world.affinity_min) / range;
        }
    }
    all_dots.clear();
    all_dots.shrink_to_fit();

    // Logged interactions: weighted sampling without replacement per user
    // (Efraimidis-Spirakis exponential keys), weight =
    // exposure^skew * affinity^(scale*mnar_strength). Selection order is the
    // user's chronology; timestamps are 1..n within each user.
    const double mnar_exp = kMnarExponentScale * spec.mnar_strength;
    const int per_user = std::min(spec.interactions_per_user, spec.n_items);
    for (int u = 0; u < spec.n_users; ++u) {
        rng::Stream stream(rng::mix(spec.seed, 0x10600000ULL + static_cast<uint64_t>(u)));
        std::vector<std::pair<double, int>> keys;
        keys.reserve(spec.n_items);
        for (int i = 0; i < spec.n_items; ++i) {
            double w = std::pow(world.exposure[i], spec.popularity_skew);
            if (mnar_exp > 0.0) w *= std::pow(std::max(world.affinity(u, i), 1e-12), mnar_exp);
            double uniform = stream.unit();
            if (uniform <= 0.0) uniform = 0x1.0p-53;
            // log(u)/w is monotone in u^(1/w); larger keys win.
            keys.emplace_back(std::log(uniform) / std::max(w, 1e-300), i);
        }
        std::partial_sort(keys.begin(), keys.begin() + per_user, keys.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        for (int j = 0; j < per_user; ++j) {
            const int item = keys[j].second;
            Interaction e;
            e.user_id = world.user_ids[u];
            e.item_id = world.item_ids[item];
            const double a = world.affinity(u, item);
            e.rating = 0.5 * (1.0 + std::floor(9.0 * a + 0.5));
            e.timestamp = j + 1;
            world.interactions.events.push_back(std::move(e));
        }
    }

    const double n_users = static_cast<double>(spec.n_users);
    const double range = world.affinity_max - world.affinity_min;
    for (int i = 0; i < spec.n_items; ++i) {
        const double mean_dot = item_sum[i] / n_users;
        const double mean_affinity =
            range < 1e-12 ? 0.5 : std::clamp((mean_dot - world.affinity_min) / range, 0.0, 1.0);
        world.catalog.emplace(world.item_ids[i], synthesize_item(world, i, mean_affinity));
    }

    return world;
}

RunSet run_recommender(const SimRecommender& rec, const World& world,
                       const InteractionLog& train, int k) {
    if (k < 1) throw ValidationError("run_recommender requires k >= 1");
    if (rec.quality < 0.0 || rec.quality > 1.0 || rec.popularity_mix < 0.0 ||
        rec.popularity_mix > 1.0)
        throw ValidationError("recommender quality and popularity_mix must be in [0,1]");

    std::map<std::string, std::set<int>> seen;
    for (const auto& e : train.events) {
        auto it = world.item_index.find(e.item_id);
        if (it != world.item_index.end()) seen[e.user_id].insert(it->second);
    }

    const double blend = 1.0 - rec.quality;
    const double noise_weight = blend * (1.0 - rec.popularity_mix);
    const double pop_weight = blend * rec.popularity_mix;
    RunSet run;
    run.system_tag = rec.tag;
    for (int u = 0; u < world.spec.n_users; ++u) {
        const std::string& user = world.user_ids[u];
        const std::set<int>* exclude = nullptr;
        if (auto it = seen.find(user); it != seen.end()) exclude = &it->second;

        std::vector<std::pair<double, int>> scored;
        scored.reserve(world.spec.n_items);
        for (int i = 0; i < world.spec.n_items; ++i) {
            if (exclude && exclude->count(i)) continue;
            double score = rec.quality * world.affinity(u, i) +
                           pop_weight * world.popularity_score[i];
            if (noise_weight > 0.0) {
                rng::Stream stream(rng::mix(rec.seed, rng::mix(0xabcd01ULL + u, 0xef0203ULL + i)));
                score += noise_weight * stream.unit();
            }
            scored.emplace_back(score, i);
        }
        const size_t top = std::min<size_t>(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + top, scored.end(),
                          [&](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return world.item_ids[a.second] < world.item_ids[b.second];
                          });
        auto& ranking = run.rankings[user];
        ranking.reserve(top);
        for (size_t j = 0; j < top; ++j)
            ranking.push_back({world.item_ids[scored[j].second], scored[j].first});
    }
    return run;
}

std::vector<SimRecommender> quality_ladder(int n, uint64_t seed) {
    if (n < 2) throw ValidationError("quality_ladder requires n >= 2");
    static constexpr double kMixOptions[] = {0.0, 0.2, 0.4};
    const uint64_t offset = rng::mix(seed, 0x1adde0ULL) % 3;
    std::vector<SimRecommender> ladder;
    ladder.reserve(n);
    for (int i = 0; i < n; ++i) {
        SimRecommender rec;
        rec.quality = static_cast<double>(i) / static_cast<double>(n - 1);
        rec.popularity_mix = kMixOptions[(i + offset) % 3];
        char buf[32];
        std::snprintf(buf, sizeof(buf), "rec%02d_q%03d", i,
                      static_cast<int>(std::lround(rec.quality * 100.0)));
        rec.tag = buf;
        rec.seed = rng::mix(seed, 0x51000ULL + static_cast<uint64_t>(i));
        ladder.push_back(std::move(rec));
    }
    return ladder;
}

}  // namespace recjudge::simlab
