#include "longrec/env.hpp"

#include <algorithm>
#include <limits>

namespace longrec::env {

Split split_from_string(const std::string& name) {
    if (name == "train") {
        return Split::train;
    }
    if (name == "test") {
        return Split::test;
    }
    throw ConfigError("unknown split: " + name);
}

std::string to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

std::string to_string(QuitReason reason) {
    switch (reason) {
        case QuitReason::none: return "none";
        case QuitReason::similarity_quit: return "similarity_quit";
        case QuitReason::low_reward_quit: return "low_reward_quit";
        case QuitReason::max_rounds: return "max_rounds";
    }
    return "none";
}

QuitReason quit_reason_from_string(const std::string& name) {
    if (name == "none") return QuitReason::none;
    if (name == "similarity_quit") return QuitReason::similarity_quit;
    if (name == "low_reward_quit") return QuitReason::low_reward_quit;
    if (name == "max_rounds") return QuitReason::max_rounds;
    throw DataError("unknown quit reason: " + name);
}

UserIndex::UserIndex(const catalog::DatasetSplit& split) {
    for (const auto& rec : split.train) {
        auto& items = train_items_[rec.user_id];
        if (items.empty()) {
            train_users_.push_back(rec.user_id);
        }
        items.push_back(rec.item_id);
    }
    for (const auto& rec : split.test) {
        if (test_counts_[rec.user_id]++ == 0) {
            test_users_.push_back(rec.user_id);
        }
    }
}

bool UserIndex::in_split(const std::string& user_id, Split split) const {
    return split_count(user_id, split) > 0;
}

std::size_t UserIndex::split_count(const std::string& user_id, Split split) const {
    if (split == Split::train) {
        const auto it = train_items_.find(user_id);
        return it == train_items_.end() ? 0 : it->second.size();
    }
    const auto it = test_counts_.find(user_id);
    return it == test_counts_.end() ? 0 : it->second;
}

const std::vector<std::string>& UserIndex::train_items(const std::string& user_id) const {
    const auto it = train_items_.find(user_id);
    return it == train_items_.end() ? empty_ : it->second;
}

const std::vector<std::string>& UserIndex::users(Split split) const {
    return split == Split::train ? train_users_ : test_users_;
}

Environment::Environment(const catalog::ItemCatalog& catalog, const catalog::RewardModel& scorer,
                         const UserIndex& users, EnvConfig config)
    : catalog_(catalog), scorer_(scorer), users_(users), config_(config) {
    if (config_.window_w < 1) {
        throw ConfigError("window_w must be >= 1");
    }
    if (config_.max_rounds < 1) {
        throw ConfigError("max_rounds must be >= 1");
    }
    if (config_.beta < 0.0) {
        throw ConfigError("beta must be >= 0");
    }
}

State Environment::reset(const std::string& user_id, std::size_t warm_start_len) const {
    if (!users_.in_split(user_id, config_.which_split)) {
        throw DataError("unknown user in " + to_string(config_.which_split) +
                        " split: " + user_id);
    }
    const auto& train = users_.train_items(user_id);
    if (train.size() < warm_start_len) {
        throw DataError("insufficient history for user " + user_id + ": has " +
                        std::to_string(train.size()) + " train interactions, need " +
                        std::to_string(warm_start_len));
    }
    State state;
    state.user_id = user_id;
    state.step_index = 1;
    state.warm_start.assign(train.end() - static_cast<std::ptrdiff_t>(warm_start_len), train.end());
    return state;
}

StepOutcome Environment::step(const State& state, const std::string& action_item_id) const {
    if (state.finished) {
        throw DataError("cannot step a finished episode");
    }
    if (!catalog_.contains(action_item_id)) {
        throw DataError("unknown item_id: " + action_item_id);
    }

    StepOutcome outcome;
    outcome.reward = scorer_.score(state.user_id, action_item_id);

    // Quit checks in fixed priority order: similarity, low reward, round cap.
    const std::size_t window =
        std::min<std::size_t>(static_cast<std::size_t>(config_.window_w), state.history.size());
    if (window > 0 && config_.beta > 0.0) {
        double min_distance = std::numeric_limits<double>::infinity();
        for (std::size_t k = state.history.size() - window; k < state.history.size(); ++k) {
            min_distance = std::min(
                min_distance, catalog::item_distance(catalog_, action_item_id,
                                                     state.history[k].first));
        }
        if (min_distance < config_.beta) {
            outcome.quit_reason = QuitReason::similarity_quit;
        }
    }
    if (outcome.quit_reason == QuitReason::none && outcome.reward < config_.reward_floor) {
        outcome.quit_reason = QuitReason::low_reward_quit;
    }
    if (outcome.quit_reason == QuitReason::none && state.step_index >= config_.max_rounds) {
        outcome.quit_reason = QuitReason::max_rounds;
    }
    outcome.done = outcome.quit_reason != QuitReason::none;

    outcome.next_state = state;
    outcome.next_state.history.emplace_back(action_item_id, outcome.reward);
    outcome.next_state.step_index = static_cast<int>(outcome.next_state.history.size()) + 1;
    outcome.next_state.finished = outcome.done;
    return outcome;
}

std::vector<std::string> Environment::legal_items(const State& state) const {
    std::vector<std::string> ids = catalog_.item_ids();
    if (config_.exclude_repeats && !state.history.empty()) {
        std::unordered_map<std::string, bool> seen;
        for (const auto& [item, reward] : state.history) {
            seen[item] = true;
        }
        ids.erase(std::remove_if(ids.begin(), ids.end(),
                                 [&](const std::string& id) { return seen.count(id) > 0; }),
                  ids.end());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace longrec::env
