#include "longrec/agent.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <sstream>

#include "longrec/parsing.hpp"

namespace longrec::agent {

namespace {

std::string observation_text(double reward, bool done, env::QuitReason reason) {
    std::string text = "reward " + format_fixed(reward, 3);
    if (done) {
        text += " (quit: " + env::to_string(reason) + ")";
    }
    return text;
}

}  // namespace

void AgentConfig::validate() const {
    if (k_reflections < 0) {
        throw ConfigError("k_reflections must be >= 0");
    }
    if (tau_actor < 0.0 || tau_critic < 0.0) {
        throw ConfigError("retrieval thresholds must be >= 0");
    }
    if (gamma < 0.0 || gamma > 1.0) {
        throw ConfigError("gamma must be in [0, 1]");
    }
    if (warm_start_len < 0) {
        throw ConfigError("warm_start_len must be >= 0");
    }
    if (max_exemplars < 0) {
        throw ConfigError("max_exemplars must be >= 0");
    }
}

double advantage_value(double reward, double gamma, double v_state, double v_next) {
    return reward + gamma * v_next - v_state;
}

int sigma_gate(double advantage) {
    return advantage >= 0.0 ? 1 : 0;
}

namespace {

// Warm-start items come from the train split and may be missing from a
// test-split catalog; render them by id with an unknown category then.
const catalog::ItemRecord* find_item(const catalog::ItemCatalog& catalog,
                                     const std::string& item_id) {
    return catalog.contains(item_id) ? &catalog.get(item_id) : nullptr;
}

}  // namespace

std::string state_to_text(const env::State& state, const catalog::ItemCatalog& catalog) {
    std::ostringstream out;
    out << "User " << state.user_id << " | recent: ";
    if (state.warm_start.empty()) {
        out << "none";
    } else {
        for (std::size_t i = 0; i < state.warm_start.size(); ++i) {
            if (i > 0) {
                out << ", ";
            }
            if (const auto* item = find_item(catalog, state.warm_start[i])) {
                out << item->title << " (";
                for (std::size_t c = 0; c < item->categories.size(); ++c) {
                    if (c > 0) {
                        out << "/";
                    }
                    out << item->categories[c];
                }
                out << ")";
            } else {
                out << state.warm_start[i] << " (unknown)";
            }
        }
    }
    out << " | episode: ";
    if (state.history.empty()) {
        out << "none";
    } else {
        for (std::size_t i = 0; i < state.history.size(); ++i) {
            if (i > 0) {
                out << ", ";
            }
            const auto* item = find_item(catalog, state.history[i].first);
            out << (item ? item->title : state.history[i].first) << " reward "
                << format_fixed(state.history[i].second, 3);
        }
    }
    return out.str();
}

std::string analyze_categories(const env::State& state, const catalog::ItemCatalog& catalog,
                               int top_m) {
    std::map<std::string, int> counts;
    auto tally = [&](const std::string& item_id) {
        const auto* item = find_item(catalog, item_id);
        if (!item) {
            ++counts["unknown"];
            return;
        }
        for (const auto& cat : item->categories) {
            ++counts[cat];
        }
    };
    for (const auto& item_id : state.warm_start) {
        tally(item_id);
    }
    for (const auto& [item_id, reward] : state.history) {
        tally(item_id);
    }
    if (counts.empty()) {
        return "no history";
    }

    auto ordered = [](const std::map<std::string, int>& m) {
        std::vector<std::pair<std::string, int>> v(m.begin(), m.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) {
                return a.second > b.second;
            }
            return a.first < b.first;
        });
        return v;
    };

    std::ostringstream out;
    out << "History categories: ";
    const auto history_sorted = ordered(counts);
    for (std::size_t i = 0; i < history_sorted.size(); ++i) {
        if (i > 0) {
            out << ", ";
        }
        out << history_sorted[i].first << ": " << history_sorted[i].second;
    }

    std::map<std::string, int> catalog_counts;
    for (const auto& item : catalog.items()) {
        for (const auto& cat : item.categories) {
            ++catalog_counts[cat];
        }
    }
    const auto catalog_sorted = ordered(catalog_counts);
    out << " | Catalog top categories: ";
    const auto limit = std::min<std::size_t>(catalog_sorted.size(),
                                             static_cast<std::size_t>(std::max(top_m, 0)));
    for (std::size_t i = 0; i < limit; ++i) {
        if (i > 0) {
            out << ", ";
        }
        out << catalog_sorted[i].first << ": " << catalog_sorted[i].second;
    }
    return out.str();
}

GroundingIndex::GroundingIndex(const catalog::ItemCatalog& catalog, const TextEncoder& encoder) {
    for (const auto& item : catalog.items()) {
        std::string key = item.title;
        for (const auto& cat : item.categories) {
            key += " " + cat;
        }
        vectors_.emplace(item.item_id, encoder.encode(key));
    }
}

const std::vector<double>& GroundingIndex::vector_of(const std::string& item_id) const {
    const auto it = vectors_.find(item_id);
    if (it == vectors_.end()) {
        throw DataError("item not in grounding index: " + item_id);
    }
    return it->second;
}

std::string GroundingIndex::nearest(const std::vector<double>& query,
                                    const std::vector<std::string>& legal) const {
    if (legal.empty()) {
        throw DataError("cannot ground an action over an empty legal set");
    }
    const std::string* best_id = nullptr;
    double best_distance = 0.0;
    for (const auto& item_id : legal) {
        const double d = euclidean_distance(query, vector_of(item_id));
        if (!best_id || d < best_distance ||
            (d == best_distance && item_id < *best_id)) {
            best_id = &item_id;
            best_distance = d;
        }
    }
    return *best_id;
}

std::string ground_action(const std::string& raw_text, const std::vector<std::string>& legal,
                          const GroundingIndex& index, const TextEncoder& encoder) {
    return index.nearest(encoder.encode(raw_text), legal);
}

Memories Memories::fresh(std::shared_ptr<const TextEncoder> encoder) {
    return Memories{memory::VectorStore(memory::StoreKind::planner, encoder),
                    memory::VectorStore(memory::StoreKind::actor, encoder),
                    memory::VectorStore(memory::StoreKind::critic, encoder)};
}

Agent::Agent(AgentConfig config, llm::Gateway& gateway, llm::PromptSet prompts,
             Memories& memories, std::shared_ptr<const TextEncoder> encoder,
             const catalog::ItemCatalog& catalog)
    : config_(std::move(config)),
      gateway_(gateway),
      prompts_(std::move(prompts)),
      memories_(memories),
      encoder_(std::move(encoder)),
      catalog_(catalog),
      grounding_(catalog, *encoder_) {
    config_.validate();
}

std::string Agent::call_llm(llm::TemplateId id, const llm::Slots& slots, double temperature) {
    llm::ChatRequest request;
    request.messages.push_back({llm::Role::user, llm::render_prompt(prompts_.get(id), slots)});
    request.temperature = temperature;
    request.max_tokens = config_.max_tokens;
    request.model_id = config_.model_id;
    request.tag = llm::to_string(id);
    return gateway_.complete(request);
}

std::string Agent::title_of(const std::string& item_id) const {
    return catalog_.contains(item_id) ? catalog_.get(item_id).title : item_id;
}

std::vector<std::string> Agent::retrieve_reflections(const std::string& s1_text) const {
    std::vector<std::string> out;
    if (!config_.macro_enabled || config_.k_reflections == 0) {
        return out;
    }
    for (const auto& entry : memories_.planner.retrieve_topk(
             s1_text, static_cast<std::size_t>(config_.k_reflections))) {
        if (const auto* payload = std::get_if<memory::ReflectionPayload>(&entry.payload)) {
            out.push_back(payload->text);
        }
    }
    return out;
}

Thought Agent::plan(const std::vector<llm::HistoryStep>& history, const env::State& state,
                    const std::vector<std::string>& reflections) {
    if (!config_.planner_enabled) {
        return Thought{"", state.step_index};
    }
    llm::Slots slots;
    slots["few_shot"] = prompts_.fewshot(llm::TemplateId::planner);
    slots["reflections"] = llm::format_reflections(reflections);
    slots["state"] = state_to_text(state, catalog_);
    slots["history"] = llm::format_history(history);
    const std::string text = call_llm(llm::TemplateId::planner, slots, config_.temperature_planner);
    return Thought{text, state.step_index};
}

std::optional<Reflection> Agent::reflect(const EpisodeTrace& trace) {
    if (!config_.macro_enabled) {
        return std::nullopt;
    }
    if (trace.steps.empty() || !trace.steps.back().done) {
        throw DataError("cannot reflect on an unfinished episode");
    }
    std::vector<llm::HistoryStep> history;
    history.reserve(trace.steps.size());
    for (const auto& step : trace.steps) {
        history.push_back({step.thought, step.action_title,
                           observation_text(step.reward, step.done, step.quit_reason)});
    }
    llm::Slots slots;
    slots["few_shot"] = prompts_.fewshot(llm::TemplateId::reflector);
    slots["state"] = trace.s1_text;
    slots["history"] = llm::format_history(history);
    std::string text;
    try {
        text = call_llm(llm::TemplateId::reflector, slots, config_.temperature_reflector);
    } catch (const std::exception& e) {
        std::cerr << "[warn] reflector failed for episode " << trace.episode_id
                  << ", skipping reflection: " << e.what() << "\n";
        return std::nullopt;
    }
    Reflection reflection{text, trace.episode_id, trace.s1_text};
    memories_.planner.insert(trace.s1_text, memory::ReflectionPayload{text});
    return reflection;
}

Agent::ActResult Agent::act(const std::vector<llm::HistoryStep>& history, const env::State& state,
                            const Thought& thought, const std::vector<std::string>& legal) {
    if (legal.empty()) {
        throw DataError("no legal items left to recommend");
    }
    const std::string state_text = state_to_text(state, catalog_);

    std::vector<llm::ActorExemplar> exemplars;
    if (config_.micro_enabled) {
        const auto retrieved = memories_.actor.retrieve_threshold(state_text, config_.tau_actor);
        const auto limit = std::min<std::size_t>(retrieved.size(),
                                                 static_cast<std::size_t>(config_.max_exemplars));
        for (std::size_t i = 0; i < limit; ++i) {
            if (const auto* exp = std::get_if<memory::ActorExpPayload>(&retrieved[i].payload)) {
                exemplars.push_back(
                    {exp->state_digest, title_of(exp->action_item_id), exp->advantage_v});
            }
        }
    }

    llm::Slots slots;
    slots["few_shot"] = prompts_.fewshot(llm::TemplateId::actor);
    slots["experiences"] = llm::format_actor_experiences(exemplars);
    slots["tool_output"] = analyze_categories(state, catalog_, config_.top_m_categories);
    slots["state"] = state_text;
    slots["history"] = llm::format_history(history);
    slots["thought"] = thought.text;

    std::string response = call_llm(llm::TemplateId::actor, slots, config_.temperature_actor);
    auto raw = llm::parse_action(response);
    if (!raw) {
        // One retry with an instruction-reinforcing suffix, then give up.
        llm::Slots retry_slots = slots;
        retry_slots["thought"] +=
            "\n\nYour previous reply could not be parsed. Respond with exactly one line: "
            "ACTION: <item title>";
        response = call_llm(llm::TemplateId::actor, retry_slots, config_.temperature_actor);
        raw = llm::parse_action(response);
        if (!raw) {
            throw DataError("actor output not parsable after retry: '" + response + "'");
        }
    }
    return ActResult{ground_action(*raw, legal, grounding_, *encoder_), *raw};
}

double Agent::estimate_value(const std::vector<llm::HistoryStep>& history,
                             const env::State& state, double v_max) {
    if (state.finished) {
        return 0.0;  // terminal bootstrap, no LLM call
    }
    const std::string state_text = state_to_text(state, catalog_);

    std::vector<llm::CriticExemplar> exemplars;
    const auto retrieved = memories_.critic.retrieve_threshold(state_text, config_.tau_critic);
    const auto limit = std::min<std::size_t>(retrieved.size(),
                                             static_cast<std::size_t>(config_.max_exemplars));
    for (std::size_t i = 0; i < limit; ++i) {
        if (const auto* exp = std::get_if<memory::CriticExpPayload>(&retrieved[i].payload)) {
            exemplars.push_back({exp->state_digest, exp->value_estimate});
        }
    }

    llm::Slots slots;
    slots["few_shot"] = prompts_.fewshot(llm::TemplateId::critic);
    slots["experiences"] = llm::format_critic_experiences(exemplars);
    slots["state"] = state_text;
    slots["history"] = llm::format_history(history);

    std::string response = call_llm(llm::TemplateId::critic, slots, config_.temperature_critic);
    auto value = llm::parse_value(response, v_max);
    if (!value) {
        llm::Slots retry_slots = slots;
        retry_slots["state"] +=
            "\n\nYour previous reply could not be parsed. Respond with exactly one line: "
            "VALUE: <number>";
        response = call_llm(llm::TemplateId::critic, retry_slots, config_.temperature_critic);
        value = llm::parse_value(response, v_max);
        if (!value) {
            std::cerr << "[warn] critic output not parsable twice, defaulting V=0: '" << response
                      << "'\n";
            return 0.0;
        }
    }
    return *value;
}

std::optional<AdvantageRecord> Agent::micro_step_update(
    const env::State& state, const std::vector<llm::HistoryStep>& history_before,
    const std::string& action_item_id, double reward, const env::State& next_state,
    const std::vector<llm::HistoryStep>& history_after, double v_max) {
    if (!config_.micro_enabled) {
        return std::nullopt;
    }
    const std::string state_text = state_to_text(state, catalog_);

    AdvantageRecord record;
    record.state_digest = state_text;
    record.action_item_id = action_item_id;
    record.reward = reward;
    // Critic failures degrade to V=0 with a flagged record; only planner and
    // actor failures abort an episode.
    auto estimate_or_zero = [&](const std::vector<llm::HistoryStep>& history,
                                const env::State& s) {
        try {
            return estimate_value(history, s, v_max);
        } catch (const std::exception& e) {
            std::cerr << "[warn] value estimate failed, defaulting to 0: " << e.what() << "\n";
            record.degraded = true;
            return 0.0;
        }
    };
    record.v_state = estimate_or_zero(history_before, state);
    record.v_next = estimate_or_zero(history_after, next_state);
    record.advantage = advantage_value(reward, config_.gamma, record.v_state, record.v_next);
    record.v = sigma_gate(record.advantage);

    // M_C gains the bootstrapped target r + gamma * V(s'), M_A the gated triple.
    const double target = reward + config_.gamma * record.v_next;
    memories_.critic.insert(state_text, memory::CriticExpPayload{state_text, target});
    memories_.actor.insert(state_text,
                           memory::ActorExpPayload{state_text, action_item_id, record.v});
    return record;
}

EpisodeTrace run_episode(const env::Environment& environment, Agent& agent,
                         const std::string& user_id, std::uint64_t seed, MemoryMode mode,
                         std::string episode_id) {
    EpisodeTrace trace;
    trace.episode_id = std::move(episode_id);
    trace.user_id = user_id;
    trace.seed = seed;

    const auto& config = agent.config();
    const double v_max = static_cast<double>(environment.config().max_rounds) * 5.0;

    try {
        env::State state =
            environment.reset(user_id, static_cast<std::size_t>(config.warm_start_len));
        trace.s1_text = state_to_text(state, environment.item_catalog());
        trace.reflections_used = agent.retrieve_reflections(trace.s1_text);

        std::vector<llm::HistoryStep> history;
        for (;;) {
            const std::string state_text = state_to_text(state, environment.item_catalog());
            const Thought thought = agent.plan(history, state, trace.reflections_used);
            const auto legal = environment.legal_items(state);
            const auto action = agent.act(history, state, thought, legal);
            const auto outcome = environment.step(state, action.item_id);

            StepRecord step;
            step.step_index = state.step_index;
            step.state_text = state_text;
            step.thought = thought.text;
            step.action_item_id = action.item_id;
            step.action_title = environment.item_catalog().get(action.item_id).title;
            step.action_raw = action.raw_text;
            step.reward = outcome.reward;
            step.done = outcome.done;
            step.quit_reason = outcome.quit_reason;

            auto history_after = history;
            history_after.push_back({thought.text, step.action_title,
                                     observation_text(outcome.reward, outcome.done,
                                                      outcome.quit_reason)});

            if (mode == MemoryMode::training) {
                step.advantage =
                    agent.micro_step_update(state, history, action.item_id, outcome.reward,
                                            outcome.next_state, history_after, v_max);
            }

            trace.steps.push_back(std::move(step));
            history = std::move(history_after);
            state = outcome.next_state;
            if (outcome.done) {
                trace.quit_reason = outcome.quit_reason;
                break;
            }
        }

        if (mode == MemoryMode::training) {
            agent.reflect(trace);  // failures degrade to a warning inside
        }
    } catch (const std::exception& e) {
        trace.aborted = true;
        trace.abort_reason = e.what();
    }
    return trace;
}

}  // namespace longrec::agent
