#pragma once

// Synthetic preference worlds with exposure/popularity bias and a ladder of
// simulated recommenders. Worlds are bit-reproducible per seed and export to
// the corpus module's file formats, so downstream tools are format-agnostic
// about real vs synthetic data.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recjudge/types.hpp"

namespace recjudge::simlab {

struct WorldSpec {
    int n_users = 200;
    int n_items = 2000;
    int latent_dim = 16;
    // Zipf exponent on exposure weights; 0 means uniform exposure.
    double popularity_skew = 1.0;
    int interactions_per_user = 100;
    // In [0,1]; shifts logging probability mass toward high-affinity items.
    double mnar_strength = 0.0;
    // Explicit thresholds partitioning normalized affinity into grades 0-7,
    // strictly ascending. When empty, thresholds are placed at the affinity
    // quantiles below.
    std::vector<double> grade_thresholds;
    std::array<double, 7> threshold_quantiles = {0.50, 0.70, 0.85, 0.93, 0.97, 0.99, 0.998};
    uint64_t seed = 1;
};

WorldSpec load_world_spec(const std::string& path);  // JSON file

struct World {
    WorldSpec spec;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::map<std::string, int> user_index;
    std::map<std::string, int> item_index;

    // Zipf exposure weight 1/(popularity_rank+1) per item, in (0,1].
    std::vector<double> exposure;
    // Smoothly decaying popularity score used by simulated recommenders.
    std::vector<double> popularity_score;

    std::vector<double> user_vecs;  // n_users x latent_dim, row-major
    std::vector<double> item_vecs;  // n_items x latent_dim
    double affinity_min = 0.0, affinity_max = 1.0;
    std::array<double, 7> thresholds{};

    InteractionLog interactions;  // logged events with sequential timestamps
    Catalog catalog;

    double affinity(int user, int item) const;  // normalized to [0,1]
    int truth_grade(int user, int item) const;
    int truth_grade(const std::string& user, const std::string& item) const;

    // Materializations of the latent truth; entries include grade 0.
    Qrels truth_qrels_full() const;
    Qrels truth_qrels_for(const std::map<std::string, std::set<std::string>>& subset) const;
};

World generate_world(const WorldSpec& spec);

struct SimRecommender {
    std::string tag;
    double quality = 1.0;         // 1 ranks by true affinity, 0 is random
    double popularity_mix = 0.0;  // blend weight toward global popularity
    uint64_t seed = 0;
};

// Per user and candidate item:
//   score = q*affinity + (1-q)*((1-mix)*noise + mix*popularity)
// with seeded uniform noise per (seed, user, item). Quality fixes how much of
// the score is true affinity (1 ranks by affinity exactly, 0 is random);
// popularity_mix only shifts the composition of the non-affinity remainder
// toward the global popularity ranking. Items in the user's train history
// are excluded; top-k by score.
RunSet run_recommender(const SimRecommender& rec, const World& world,
                       const InteractionLog& train, int k);

// n recommenders with evenly spaced, strictly increasing qualities and mixed
// popularity_mix values; stand-ins for a pool of heterogeneous systems.
std::vector<SimRecommender> quality_ladder(int n, uint64_t seed);

}  // namespace recjudge::simlab
