#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "longrec/trace.hpp"

namespace longrec::harness {

struct EpisodeMetrics {
    double len = 0.0;
    double r_each = 0.0;
    double r_traj = 0.0;
};

/// Len = steps, R_traj = sum of rewards, R_each = R_traj / Len.
EpisodeMetrics episode_metrics(const agent::EpisodeTrace& trace);

struct MetricsReport {
    double len_mean = 0.0, len_std = 0.0;
    double r_each_mean = 0.0, r_each_std = 0.0;
    double r_traj_mean = 0.0, r_traj_std = 0.0;
    int n_episodes = 0;
    int n_seeds = 0;
    std::vector<EpisodeMetrics> per_episode;  // all seeds, in run order
    std::vector<std::uint64_t> seeds;
    std::string config_hash;
    std::string label;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& doc);
    std::string to_table() const;
};

/// Aggregation: mean per metric within each seed's episode list, then mean
/// and population standard deviation across the per-seed means.
MetricsReport aggregate_metrics(const std::vector<std::vector<EpisodeMetrics>>& per_seed);

}  // namespace longrec::harness
