#include "longrec/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

namespace longrec::harness {

using nlohmann::json;

void Experiment::validate() const {
    if (!train_catalog || !test_catalog || !train_scorer || !test_scorer || !users || !encoder) {
        throw ConfigError("experiment is missing resolved components");
    }
    if (!make_backend) {
        throw ConfigError("experiment has no backend factory");
    }
    if (train_episodes < 0 || eval_episodes < 1 || n_seeds < 1) {
        throw ConfigError("episode and seed counts must be positive");
    }
    agent_config.validate();
}

env::Environment Experiment::make_env(env::Split split) const {
    env::EnvConfig config = env_config;
    config.which_split = split;
    const bool is_train = split == env::Split::train;
    return env::Environment(is_train ? *train_catalog : *test_catalog,
                            is_train ? *train_scorer : *test_scorer, *users, config);
}

std::vector<std::string> Experiment::eligible_users(env::Split split) const {
    std::vector<std::string> eligible;
    const auto warm = static_cast<std::size_t>(agent_config.warm_start_len);
    for (const auto& user : users->users(split)) {
        if (users->train_items(user).size() >= warm) {
            eligible.push_back(user);
        }
    }
    if (eligible.empty()) {
        throw ConfigError("no users in the " + env::to_string(split) +
                          " split have enough history for warm_start_len " +
                          std::to_string(agent_config.warm_start_len));
    }
    return eligible;
}

namespace {

std::string pick_user(const std::vector<std::string>& eligible, std::uint64_t seed,
                      std::string_view label, std::uint64_t episode_index) {
    auto rng = RngStream::derive(seed, label, episode_index);
    const auto idx = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1));
    return eligible[idx];
}

/// Runs `count` episodes, fanning out over `workers` threads when asked.
/// Results land at their episode index, so the output is identical for any
/// worker count.
std::vector<agent::EpisodeTrace> run_episode_batch(
    int count, int workers, const std::function<agent::EpisodeTrace(int)>& run_one) {
    std::vector<agent::EpisodeTrace> traces(static_cast<std::size_t>(count));
    if (workers <= 1 || count <= 1) {
        for (int k = 0; k < count; ++k) {
            traces[static_cast<std::size_t>(k)] = run_one(k);
        }
        return traces;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= count) {
                return;
            }
            traces[static_cast<std::size_t>(k)] = run_one(k);
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    return traces;
}

}  // namespace

TrainResult train(const Experiment& experiment, std::uint64_t seed, llm::AuditLog* audit) {
    experiment.validate();
    const auto environment = experiment.make_env(env::Split::train);
    TrainResult result{agent::Memories::fresh(experiment.encoder), {}};
    auto backend = experiment.make_backend(RngStream::derive(seed, "llm-backend").next_u64());
    llm::Gateway gateway(backend, audit);
    agent::Agent the_agent(experiment.agent_config, gateway, experiment.prompts, result.memories,
                           experiment.encoder, *experiment.train_catalog);

    if (experiment.train_episodes == 0) {
        return result;
    }
    const auto eligible = experiment.eligible_users(env::Split::train);
    result.traces.reserve(static_cast<std::size_t>(experiment.train_episodes));
    // Training is strictly sequential: memory writes between episodes are
    // order-dependent.
    for (int k = 0; k < experiment.train_episodes; ++k) {
        const auto user = pick_user(eligible, seed, "train-user", static_cast<std::uint64_t>(k));
        auto trace = agent::run_episode(environment, the_agent, user, seed,
                                        agent::MemoryMode::training,
                                        "train_s" + std::to_string(seed) + "_e" + std::to_string(k));
        if (trace.aborted) {
            std::cerr << "[warn] training episode " << trace.episode_id
                      << " aborted: " << trace.abort_reason << "\n";
        }
        result.traces.push_back(std::move(trace));
    }
    return result;
}

EvalResult evaluate(const Experiment& experiment, agent::Memories& memories,
                    std::uint64_t base_seed, llm::AuditLog* audit) {
    experiment.validate();
    const auto environment = experiment.make_env(env::Split::test);
    const auto eligible = experiment.eligible_users(env::Split::test);

    const std::array<std::uint64_t, 3> hash_before = {memories.planner.content_hash(),
                                                      memories.actor.content_hash(),
                                                      memories.critic.content_hash()};

    EvalResult result;
    std::vector<std::vector<EpisodeMetrics>> per_seed;
    for (int s = 0; s < experiment.n_seeds; ++s) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
        auto backend = experiment.make_backend(RngStream::derive(seed, "llm-backend").next_u64());
        llm::Gateway gateway(backend, audit);
        agent::Agent the_agent(experiment.agent_config, gateway, experiment.prompts, memories,
                               experiment.encoder, *experiment.test_catalog);
        auto traces = run_episode_batch(
            experiment.eval_episodes, experiment.workers, [&](int k) {
                const auto user =
                    pick_user(eligible, seed, "eval-user", static_cast<std::uint64_t>(k));
                return agent::run_episode(environment, the_agent, user, seed,
                                          agent::MemoryMode::frozen,
                                          "eval_s" + std::to_string(seed) + "_e" +
                                              std::to_string(k));
            });
        std::vector<EpisodeMetrics> seed_metrics;
        for (auto& trace : traces) {
            if (trace.aborted) {
                std::cerr << "[warn] evaluation episode " << trace.episode_id
                          << " aborted and excluded from metrics: " << trace.abort_reason << "\n";
            } else {
                seed_metrics.push_back(episode_metrics(trace));
            }
            result.traces.push_back(std::move(trace));
        }
        per_seed.push_back(std::move(seed_metrics));
        result.report.seeds.push_back(seed);
    }

    const std::array<std::uint64_t, 3> hash_after = {memories.planner.content_hash(),
                                                     memories.actor.content_hash(),
                                                     memories.critic.content_hash()};
    if (hash_before != hash_after) {
        throw Error("evaluation mutated the memory stores; this is a bug");
    }

    const auto seeds = result.report.seeds;
    result.report = aggregate_metrics(per_seed);
    result.report.seeds = seeds;
    result.report.config_hash = experiment.config_hash;
    return result;
}

void save_memories(const std::filesystem::path& dir, const agent::Memories& memories) {
    std::filesystem::create_directories(dir);
    memories.planner.save(dir / "planner.mem");
    memories.actor.save(dir / "actor.mem");
    memories.critic.save(dir / "critic.mem");
}

agent::Memories load_memories(const std::filesystem::path& dir,
                              std::shared_ptr<const TextEncoder> encoder) {
    auto memories = agent::Memories::fresh(encoder);
    auto load_one = [&](const char* file, memory::VectorStore& store, memory::StoreKind kind) {
        const auto path = dir / file;
        if (!std::filesystem::exists(path)) {
            std::cerr << "[warn] memory snapshot missing: " << path.string()
                      << " -- evaluating with an empty " << memory::to_string(kind)
                      << " store\n";
            return;
        }
        store = memory::VectorStore::load(path, encoder);
        if (store.kind() != kind) {
            throw IoError("snapshot " + path.string() + " holds a " +
                          memory::to_string(store.kind()) + " store, expected " +
                          memory::to_string(kind));
        }
    };
    load_one("planner.mem", memories.planner, memory::StoreKind::planner);
    load_one("actor.mem", memories.actor, memory::StoreKind::actor);
    load_one("critic.mem", memories.critic, memory::StoreKind::critic);
    return memories;
}

// ---------------------------------------------------------------------------
// Policies and Monte-Carlo oracle
// ---------------------------------------------------------------------------

std::string RandomPolicy::select(const env::Environment& environment, const env::State& state,
                                 RngStream& rng) {
    const auto legal = environment.legal_items(state);
    if (legal.empty()) {
        throw DataError("random policy: empty legal set");
    }
    return legal[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(legal.size()) - 1))];
}

std::string GreedyPolicy::select(const env::Environment& environment, const env::State& state,
                                 RngStream& rng) {
    (void)rng;
    const auto legal = environment.legal_items(state);
    if (legal.empty()) {
        throw DataError("greedy policy: empty legal set");
    }
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (const auto& item : legal) {
        const double s = environment.scorer().score(state.user_id, item);
        if (!best || s > best_score) {
            best = &item;
            best_score = s;
        }
    }
    return *best;
}

std::string AgentPolicy::select(const env::Environment& environment, const env::State& state,
                                RngStream& rng) {
    (void)rng;  // the stub backend is the only sampling source
    const auto state_text = agent::state_to_text(state, environment.item_catalog());
    const auto reflections = agent_.retrieve_reflections(state_text);
    std::vector<llm::HistoryStep> history;
    history.reserve(state.history.size());
    for (const auto& [item_id, reward] : state.history) {
        history.push_back({"", environment.item_catalog().get(item_id).title,
                           "reward " + format_fixed(reward, 3)});
    }
    const auto thought = agent_.plan(history, state, reflections);
    return agent_.act(history, state, thought, environment.legal_items(state)).item_id;
}

McResult mc_state_value(const env::Environment& environment, Policy& policy,
                        const env::State& state, int n_rollouts, double gamma,
                        std::uint64_t seed) {
    if (n_rollouts < 1) {
        throw ConfigError("n_rollouts must be >= 1");
    }
    McResult result;
    result.samples.reserve(static_cast<std::size_t>(n_rollouts));
    for (int r = 0; r < n_rollouts; ++r) {
        auto rng = RngStream::derive(seed, "mc-rollout", static_cast<std::uint64_t>(r));
        env::State current = state;
        double discounted = 0.0;
        double weight = 1.0;
        while (!current.finished) {
            const auto action = policy.select(environment, current, rng);
            const auto outcome = environment.step(current, action);
            discounted += weight * outcome.reward;
            weight *= gamma;
            current = outcome.next_state;
        }
        result.samples.push_back(discounted);
    }
    double sum = 0.0;
    for (double s : result.samples) {
        sum += s;
    }
    result.mean = sum / static_cast<double>(result.samples.size());
    double var = 0.0;
    for (double s : result.samples) {
        const double d = s - result.mean;
        var += d * d;
    }
    result.variance = var / static_cast<double>(result.samples.size());
    return result;
}

// ---------------------------------------------------------------------------
// Critic variance study
// ---------------------------------------------------------------------------

VarianceStudyReport critic_variance_study(
    const env::Environment& environment, agent::Agent& agent, Policy& policy,
    const std::vector<env::State>& states, int n_mc, int n_critic, double gamma,
    std::uint64_t seed, const std::function<void(std::uint64_t)>& reseed_backend) {
    if (states.empty()) {
        throw ConfigError("variance study needs at least one probe state");
    }
    const double v_max = static_cast<double>(environment.config().max_rounds) * 5.0;
    VarianceStudyReport report;
    for (std::size_t idx = 0; idx < states.size(); ++idx) {
        const auto& state = states[idx];
        StateStudy study;
        study.state_text = agent::state_to_text(state, environment.item_catalog());

        const auto mc = mc_state_value(environment, policy, state, n_mc, gamma,
                                       RngStream::derive(seed, "study-mc", idx).next_u64());
        study.mc_samples = mc.samples;
        study.mc_mean = mc.mean;
        study.mc_variance = mc.variance;

        std::vector<llm::HistoryStep> history;
        for (const auto& [item_id, reward] : state.history) {
            history.push_back({"", environment.item_catalog().get(item_id).title,
                               "reward " + format_fixed(reward, 3)});
        }
        study.critic_samples.reserve(static_cast<std::size_t>(n_critic));
        for (int rep = 0; rep < n_critic; ++rep) {
            if (reseed_backend) {
                reseed_backend(RngStream::derive(seed, "study-critic",
                                                 idx * 100000 + static_cast<std::uint64_t>(rep))
                                   .next_u64());
            }
            study.critic_samples.push_back(agent.estimate_value(history, state, v_max));
        }
        double sum = 0.0;
        for (double v : study.critic_samples) {
            sum += v;
        }
        study.critic_mean = sum / static_cast<double>(study.critic_samples.size());
        double var = 0.0;
        for (double v : study.critic_samples) {
            const double d = v - study.critic_mean;
            var += d * d;
        }
        study.critic_variance = var / static_cast<double>(study.critic_samples.size());
        study.bias = study.critic_mean - study.mc_mean;
        report.states.push_back(std::move(study));
    }
    return report;
}

json VarianceStudyReport::to_json() const {
    json doc;
    doc["version"] = 1;
    json list = json::array();
    for (const auto& study : states) {
        json s;
        s["state"] = study.state_text;
        s["mc_mean"] = study.mc_mean;
        s["mc_variance"] = study.mc_variance;
        s["critic_mean"] = study.critic_mean;
        s["critic_variance"] = study.critic_variance;
        s["bias"] = study.bias;
        list.push_back(std::move(s));
    }
    doc["states"] = std::move(list);
    return doc;
}

// ---------------------------------------------------------------------------
// Popularity analysis and window sweep
// ---------------------------------------------------------------------------

PopularityBuckets popularity_analysis(
    const std::map<std::string, std::vector<agent::EpisodeTrace>>& traces_by_policy,
    const std::vector<catalog::InteractionRecord>& train_records,
    const std::vector<catalog::InteractionRecord>& test_records, int n_buckets) {
    if (n_buckets < 1) {
        throw ConfigError("n_buckets must be >= 1");
    }
    std::map<std::string, std::size_t> popularity;
    for (const auto& rec : train_records) {
        ++popularity[rec.item_id];
    }
    for (const auto& rec : test_records) {
        ++popularity[rec.item_id];
    }
    if (popularity.empty()) {
        throw DataError("popularity analysis needs non-empty logs");
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(popularity.begin(), popularity.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });

    PopularityBuckets buckets;
    buckets.n_buckets = n_buckets;
    const std::size_t n = ranked.size();
    const std::size_t base = n / static_cast<std::size_t>(n_buckets);
    const std::size_t remainder = n % static_cast<std::size_t>(n_buckets);
    std::size_t cursor = 0;
    for (int b = 1; b <= n_buckets; ++b) {
        const std::size_t size = base + (static_cast<std::size_t>(b) <= remainder ? 1 : 0);
        buckets.bucket_sizes.push_back(static_cast<int>(size));
        for (std::size_t k = 0; k < size; ++k) {
            buckets.bucket_of_item[ranked[cursor++].first] = b;
        }
    }

    for (const auto& [label, traces] : traces_by_policy) {
        std::vector<double> counts(static_cast<std::size_t>(n_buckets), 0.0);
        double total = 0.0;
        for (const auto& trace : traces) {
            for (const auto& step : trace.steps) {
                const auto it = buckets.bucket_of_item.find(step.action_item_id);
                if (it == buckets.bucket_of_item.end()) {
                    throw DataError("recommended item not present in the logs: " +
                                    step.action_item_id);
                }
                counts[static_cast<std::size_t>(it->second - 1)] += 1.0;
                total += 1.0;
            }
        }
        if (total > 0.0) {
            for (auto& c : counts) {
                c /= total;
            }
        }
        buckets.share_by_policy[label] = std::move(counts);
    }
    return buckets;
}

json PopularityBuckets::to_json() const {
    json doc;
    doc["version"] = 1;
    doc["n_buckets"] = n_buckets;
    doc["bucket_sizes"] = bucket_sizes;
    doc["bucket_of_item"] = bucket_of_item;
    doc["share_by_policy"] = share_by_policy;
    return doc;
}

std::vector<std::pair<int, MetricsReport>> sweep_window(const Experiment& experiment,
                                                        agent::Memories& memories,
                                                        const std::vector<int>& window_values,
                                                        std::uint64_t base_seed,
                                                        llm::AuditLog* audit) {
    if (window_values.empty()) {
        throw ConfigError("sweep needs at least one window value");
    }
    std::vector<std::pair<int, MetricsReport>> results;
    for (const int w : window_values) {
        Experiment variant = experiment;
        variant.env_config.window_w = w;
        auto eval = evaluate(variant, memories, base_seed, audit);
        eval.report.label = "W=" + std::to_string(w);
        results.emplace_back(w, std::move(eval.report));
    }
    return results;
}

}  // namespace longrec::harness
