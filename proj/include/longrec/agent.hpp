#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "longrec/env.hpp"
#include "longrec/llm.hpp"
#include "longrec/memory_store.hpp"
#include "longrec/prompts.hpp"
#include "longrec/trace.hpp"

namespace longrec::agent {

struct Thought {
    std::string text;
    int step_index = 0;
};

struct Reflection {
    std::string text;
    std::string source_episode_id;
    std::string key_state_text;  // textual rendering of the episode's initial state
};

struct AgentConfig {
    int k_reflections = 2;
    double tau_actor = 0.01;
    double tau_critic = 0.1;
    double gamma = 0.5;
    bool macro_enabled = true;    // reflector + reflection retrieval
    bool micro_enabled = true;    // actor experiences + critic updates
    bool planner_enabled = true;  // false = act-only baseline
    int warm_start_len = 5;
    int max_exemplars = 8;  // cap on in-context experiences per prompt
    int top_m_categories = 5;
    double temperature_planner = 0.5;
    double temperature_reflector = 0.5;
    double temperature_actor = 0.5;
    double temperature_critic = 0.0;  // deterministic value estimates
    int max_tokens = 512;
    std::string model_id = "stub";

    void validate() const;
};

enum class MemoryMode { training, frozen };

/// A(s, a) = r + gamma * V(s') - V(s). This expression is the single source
/// of the advantage arithmetic; tests recompute it independently and expect
/// bitwise equality.
double advantage_value(double reward, double gamma, double v_state, double v_next);

/// sigma(x): 1 when x >= 0, else 0.
int sigma_gate(double advantage);

/// Deterministic textual rendering of a state; every retrieval key and prompt
/// slot derives from this. Format:
///   "User <id> | recent: <title (cat/cat)>, ... | episode: <title> reward <r>, ..."
/// with warm start and episode history most-recent last, "none" when empty.
std::string state_to_text(const env::State& state, const catalog::ItemCatalog& catalog);

/// Category Analysis Tool: category counts over warm start plus episode
/// history, descending count then alphabetical, followed by the catalog's
/// top-M categories in aggregate. "no history" when the state is empty.
std::string analyze_categories(const env::State& state, const catalog::ItemCatalog& catalog,
                               int top_m);

/// Precomputed grounding vectors: encoder(title + categories) per item.
class GroundingIndex {
public:
    GroundingIndex(const catalog::ItemCatalog& catalog, const TextEncoder& encoder);

    /// Legal item with the minimal Euclidean distance to `query`; ties go to
    /// the lexicographically smaller item_id. Throws DataError on an empty
    /// legal set.
    std::string nearest(const std::vector<double>& query,
                        const std::vector<std::string>& legal) const;

    const std::vector<double>& vector_of(const std::string& item_id) const;

private:
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Maps raw LLM output to a legal catalog item by embedding nearest-neighbor.
std::string ground_action(const std::string& raw_text, const std::vector<std::string>& legal,
                          const GroundingIndex& index, const TextEncoder& encoder);

/// The three memories: M_P (reflections), M_A (actor experiences),
/// M_C (critic value estimates).
struct Memories {
    memory::VectorStore planner;
    memory::VectorStore actor;
    memory::VectorStore critic;

    static Memories fresh(std::shared_ptr<const TextEncoder> encoder);
};

/// The bi-level agent: a Planner that writes thoughts guided by retrieved
/// reflections (macro level), and an Actor/Critic pair that grounds thoughts
/// into items and labels experiences by advantage sign (micro level). All
/// learning happens through memory writes; the LLM weights never change.
class Agent {
public:
    Agent(AgentConfig config, llm::Gateway& gateway, llm::PromptSet prompts, Memories& memories,
          std::shared_ptr<const TextEncoder> encoder, const catalog::ItemCatalog& catalog);

    const AgentConfig& config() const { return config_; }
    Memories& memories() { return memories_; }
    const GroundingIndex& grounding() const { return grounding_; }

    /// Reflections for a new episode: top-K against the initial state's text.
    /// Empty when macro learning is disabled.
    std::vector<std::string> retrieve_reflections(const std::string& s1_text) const;

    /// Thought for the next step. The reflections must be the episode-fixed
    /// set retrieved against s_1. With the planner disabled, returns an empty
    /// thought without any LLM call.
    Thought plan(const std::vector<llm::HistoryStep>& history, const env::State& state,
                 const std::vector<std::string>& reflections);

    /// Post-episode reflection, inserted into M_P keyed by the episode's s_1
    /// text. Returns nullopt (and only warns) on backend failure or when
    /// macro learning is disabled.
    std::optional<Reflection> reflect(const EpisodeTrace& trace);

    struct ActResult {
        std::string item_id;
        std::string raw_text;
    };

    /// Retrieves actor experiences, runs the category tool, samples a raw
    /// action from the LLM, and grounds it to a legal item.
    ActResult act(const std::vector<llm::HistoryStep>& history, const env::State& state,
                  const Thought& thought, const std::vector<std::string>& legal);

    /// Critic estimate of V(state), clamped to [0, v_max]. Terminal states
    /// are 0 without an LLM call; a double parse failure degrades to 0 with
    /// a warning instead of aborting the episode.
    double estimate_value(const std::vector<llm::HistoryStep>& history, const env::State& state,
                          double v_max);

    /// One micro-learning step: estimates V(s) and V(s'), computes the
    /// advantage, gates it through sigma, and appends the new experiences to
    /// M_C and M_A. No-op (nullopt) when micro learning is disabled.
    std::optional<AdvantageRecord> micro_step_update(
        const env::State& state, const std::vector<llm::HistoryStep>& history_before,
        const std::string& action_item_id, double reward, const env::State& next_state,
        const std::vector<llm::HistoryStep>& history_after, double v_max);

private:
    std::string call_llm(llm::TemplateId id, const llm::Slots& slots, double temperature);
    std::string title_of(const std::string& item_id) const;

    AgentConfig config_;
    llm::Gateway& gateway_;
    llm::PromptSet prompts_;
    Memories& memories_;
    std::shared_ptr<const TextEncoder> encoder_;
    const catalog::ItemCatalog& catalog_;
    GroundingIndex grounding_;
};

/// Runs one full episode: plan -> act -> env.step -> micro update each round,
/// then reflect on completion. In frozen mode no memory is written and no
/// critic or reflector calls happen. Any aborting sub-error produces a
/// partial trace marked aborted instead of propagating.
EpisodeTrace run_episode(const env::Environment& environment, Agent& agent,
                         const std::string& user_id, std::uint64_t seed, MemoryMode mode,
                         std::string episode_id);

}  // namespace longrec::agent
