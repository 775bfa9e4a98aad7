#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "longrec/agent.hpp"
#include "longrec/metrics.hpp"

namespace longrec::harness {

/// Fully resolved experiment: catalogs and scorers per split, the user index,
/// configs, prompts, and a backend factory. The CLI builds one from the
/// config file; tests build one directly from toy components.
struct Experiment {
    std::shared_ptr<const catalog::ItemCatalog> train_catalog;
    std::shared_ptr<const catalog::ItemCatalog> test_catalog;
    std::shared_ptr<const catalog::RewardModel> train_scorer;
    std::shared_ptr<const catalog::RewardModel> test_scorer;
    std::shared_ptr<const env::UserIndex> users;
    env::EnvConfig env_config;
    agent::AgentConfig agent_config;
    llm::PromptSet prompts = llm::PromptSet::builtin();
    std::shared_ptr<const TextEncoder> encoder = default_encoder();
    std::function<std::shared_ptr<llm::ChatBackend>(std::uint64_t seed)> make_backend;
    int train_episodes = 100;
    int eval_episodes = 100;
    int n_seeds = 3;
    int workers = 1;
    std::string config_hash;

    env::Environment make_env(env::Split split) const;
    /// Users of the split with enough train history for the warm start,
    /// deterministic order. Throws ConfigError when empty.
    std::vector<std::string> eligible_users(env::Split split) const;
    void validate() const;
};

struct TrainResult {
    agent::Memories memories;
    std::vector<agent::EpisodeTrace> traces;
};

/// Runs train_episodes sequential episodes against the train environment with
/// memory writes enabled. Aborted episodes are logged and kept in the traces;
/// their partial memory writes stand, but no reflection is added.
TrainResult train(const Experiment& experiment, std::uint64_t seed,
                  llm::AuditLog* audit = nullptr);

struct EvalResult {
    MetricsReport report;
    std::vector<agent::EpisodeTrace> traces;
};

/// Evaluates against the test environment with frozen memories:
/// eval_episodes per seed for seeds base_seed .. base_seed + n_seeds - 1.
/// The memories are read-only; a hash check enforces it.
EvalResult evaluate(const Experiment& experiment, agent::Memories& memories,
                    std::uint64_t base_seed, llm::AuditLog* audit = nullptr);

void save_memories(const std::filesystem::path& dir, const agent::Memories& memories);

/// Loads planner.mem / actor.mem / critic.mem from dir. Missing files degrade
/// to empty stores with a loud warning (cold-start evaluation is legal).
agent::Memories load_memories(const std::filesystem::path& dir,
                              std::shared_ptr<const TextEncoder> encoder);

// ---------------------------------------------------------------------------
// Policies and Monte-Carlo oracle
// ---------------------------------------------------------------------------

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string select(const env::Environment& environment, const env::State& state,
                               RngStream& rng) = 0;
    virtual std::string name() const = 0;
};

/// Uniform choice over the legal set.
class RandomPolicy final : public Policy {
public:
    std::string select(const env::Environment& environment, const env::State& state,
                       RngStream& rng) override;
    std::string name() const override { return "random"; }
};

/// Highest immediate reward over the legal set; ties go to the smaller id.
class GreedyPolicy final : public Policy {
public:
    std::string select(const env::Environment& environment, const env::State& state,
                       RngStream& rng) override;
    std::string name() const override { return "greedy"; }
};

/// Plan + act through the agent with frozen memories. Rollouts may start from
/// mid-episode states, so reflections are retrieved against the current state
/// and prior thoughts are unknown to the rebuilt history.
class AgentPolicy final : public Policy {
public:
    explicit AgentPolicy(agent::Agent& agent) : agent_(agent) {}
    std::string select(const env::Environment& environment, const env::State& state,
                       RngStream& rng) override;
    std::string name() const override { return "agent"; }

private:
    agent::Agent& agent_;
};

struct McResult {
    std::vector<double> samples;  // discounted return of each rollout
    double mean = 0.0;
    double variance = 0.0;  // population variance of the samples
};

/// Monte-Carlo estimate of V_pi(state): n_rollouts trajectories under the
/// policy, each contributing sum_k gamma^k r_k from the probe state onward.
McResult mc_state_value(const env::Environment& environment, Policy& policy,
                        const env::State& state, int n_rollouts, double gamma,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Critic variance study
// ---------------------------------------------------------------------------

struct StateStudy {
    std::string state_text;
    double mc_mean = 0.0;
    double mc_variance = 0.0;
    double critic_mean = 0.0;
    double critic_variance = 0.0;
    double bias = 0.0;  // critic_mean - mc_mean
    std::vector<double> mc_samples;
    std::vector<double> critic_samples;
};

struct VarianceStudyReport {
    std::vector<StateStudy> states;
    nlohmann::json to_json() const;
};

/// For each probe state: the MC return distribution under the policy (the
/// oracle) against repeated Critic estimates. `reseed_backend`, when given,
/// reseeds the stub before each repetition so the critic samples model the
/// sampling variability of a temperature > 0 model.
VarianceStudyReport critic_variance_study(
    const env::Environment& environment, agent::Agent& agent, Policy& policy,
    const std::vector<env::State>& states, int n_mc, int n_critic, double gamma,
    std::uint64_t seed, const std::function<void(std::uint64_t)>& reseed_backend = {});

// ---------------------------------------------------------------------------
// Popularity analysis and window sweep
// ---------------------------------------------------------------------------

struct PopularityBuckets {
    int n_buckets = 5;
    std::map<std::string, int> bucket_of_item;                  // 1 = most popular
    std::vector<int> bucket_sizes;                              // near-equal partition
    std::map<std::string, std::vector<double>> share_by_policy; // per-bucket share of events

    nlohmann::json to_json() const;
};

/// Popularity = train + test occurrence frequency; items partition into
/// n_buckets groups by descending popularity (remainder to earlier buckets).
/// Shares count recommendation events per bucket for each policy's traces.
PopularityBuckets popularity_analysis(
    const std::map<std::string, std::vector<agent::EpisodeTrace>>& traces_by_policy,
    const std::vector<catalog::InteractionRecord>& train_records,
    const std::vector<catalog::InteractionRecord>& test_records, int n_buckets = 5);

/// Full evaluate per window size, same snapshots, keyed by W.
std::vector<std::pair<int, MetricsReport>> sweep_window(const Experiment& experiment,
                                                        agent::Memories& memories,
                                                        const std::vector<int>& window_values,
                                                        std::uint64_t base_seed,
                                                        llm::AuditLog* audit = nullptr);

}  // namespace longrec::harness
