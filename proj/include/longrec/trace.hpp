#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "longrec/env.hpp"

namespace longrec::agent {

/// One (s, a, r, V(s), V(s')) micro-learning step. The advantage identity
/// A == reward + gamma * v_next - v_state holds exactly (same expression,
/// same rounding), and v == 1 iff A >= 0.
struct AdvantageRecord {
    std::string state_digest;
    std::string action_item_id;
    double reward = 0.0;
    double v_state = 0.0;
    double v_next = 0.0;
    double advantage = 0.0;
    int v = 0;
    bool degraded = false;  // a value estimate failed and defaulted to 0
};

struct StepRecord {
    int step_index = 0;
    std::string state_text;  // digest of the pre-action state
    std::string thought;
    std::string action_item_id;
    std::string action_title;
    std::string action_raw;  // LLM output before grounding
    double reward = 0.0;
    bool done = false;
    env::QuitReason quit_reason = env::QuitReason::none;
    std::optional<AdvantageRecord> advantage;
};

struct EpisodeTrace {
    std::string episode_id;
    std::string user_id;
    std::uint64_t seed = 0;
    std::string s1_text;
    std::vector<std::string> reflections_used;
    std::vector<StepRecord> steps;
    env::QuitReason quit_reason = env::QuitReason::none;
    bool aborted = false;
    std::string abort_reason;

    std::size_t length() const { return steps.size(); }
    double total_reward() const;
};

/// One JSON object per step: state digest, thought, action, reward, done,
/// quit_reason plus episode bookkeeping.
void write_traces_jsonl(const std::filesystem::path& path,
                        const std::vector<EpisodeTrace>& traces);
std::vector<EpisodeTrace> read_traces_jsonl(const std::filesystem::path& path);

}  // namespace longrec::agent
