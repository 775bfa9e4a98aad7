#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "longrec/catalog.hpp"
#include "longrec/scorer.hpp"

namespace longrec::env {

enum class Split { train, test };

Split split_from_string(const std::string& name);
std::string to_string(Split split);

enum class QuitReason { none, similarity_quit, low_reward_quit, max_rounds };

std::string to_string(QuitReason reason);
QuitReason quit_reason_from_string(const std::string& name);

struct EnvConfig {
    int window_w = 4;
    double beta = 0.0;          // similarity-quit threshold; 0 disables the check
    double reward_floor = 2.0;  // quit when reward < floor
    int max_rounds = 100;
    Split which_split = Split::train;
    bool exclude_repeats = true;  // drop already-recommended items from legal_items
};

struct State {
    std::string user_id;
    std::vector<std::pair<std::string, double>> history;  // (item_id, reward) this episode
    int step_index = 1;                                   // == history.size() + 1
    std::vector<std::string> warm_start;                  // offline items describing the user
    bool finished = false;
};

struct StepOutcome {
    double reward = 0.0;
    State next_state;
    bool done = false;
    QuitReason quit_reason = QuitReason::none;
};

/// Per-user view of the chronological split, shared by every environment
/// instance built from the same dataset.
class UserIndex {
public:
    UserIndex() = default;
    explicit UserIndex(const catalog::DatasetSplit& split);

    bool in_split(const std::string& user_id, Split split) const;
    std::size_t split_count(const std::string& user_id, Split split) const;
    /// Chronologically ordered train-split item ids for the user.
    const std::vector<std::string>& train_items(const std::string& user_id) const;
    /// Users present in the split, in deterministic (first-seen) order.
    const std::vector<std::string>& users(Split split) const;

private:
    std::unordered_map<std::string, std::vector<std::string>> train_items_;
    std::unordered_map<std::string, std::size_t> test_counts_;
    std::vector<std::string> train_users_;
    std::vector<std::string> test_users_;
    std::vector<std::string> empty_;
};

/// Deterministic simulated user. Rewards come from the reward model; the
/// episode ends by the quit mechanism: an action too close to the recent
/// window (distance < beta), a reward below the floor, or the round cap,
/// checked in that priority order.
///
/// The instance is immutable and stateless across calls: reset() builds a
/// fresh State and step() maps (state, action) to an outcome, so any number
/// of episodes may run concurrently against one Environment.
class Environment {
public:
    Environment(const catalog::ItemCatalog& catalog, const catalog::RewardModel& scorer,
                const UserIndex& users, EnvConfig config);

    const EnvConfig& config() const { return config_; }
    const catalog::ItemCatalog& item_catalog() const { return catalog_; }
    const catalog::RewardModel& scorer() const { return scorer_; }
    const UserIndex& users() const { return users_; }

    /// Fresh episode state. The warm start is the user's chronologically last
    /// warm_start_len train-split items. Throws DataError for an unknown user
    /// or insufficient history.
    State reset(const std::string& user_id, std::size_t warm_start_len) const;

    /// Applies one recommendation. Throws DataError for unknown items or a
    /// finished episode.
    StepOutcome step(const State& state, const std::string& action_item_id) const;

    /// Candidate pool for the next action: the full catalog, minus items
    /// already recommended this episode when exclude_repeats is on.
    /// Sorted by item_id.
    std::vector<std::string> legal_items(const State& state) const;

private:
    const catalog::ItemCatalog& catalog_;
    const catalog::RewardModel& scorer_;
    const UserIndex& users_;
    EnvConfig config_;
};

}  // namespace longrec::env
