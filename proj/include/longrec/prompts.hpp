#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "longrec/core.hpp"

namespace longrec::llm {

enum class TemplateId { planner, reflector, actor, critic };

std::string to_string(TemplateId id);

/// A prompt body with named {slot} placeholders. Rendering is pure text
/// substitution and fails when a required slot is unbound.
struct PromptTemplate {
    TemplateId id = TemplateId::planner;
    std::string body;
    std::vector<std::string> required_slots;
};

using Slots = std::map<std::string, std::string>;

/// Substitutes every bound {slot}; throws PromptError when a required slot is
/// missing from `slots`. Referentially transparent.
std::string render_prompt(const PromptTemplate& tmpl, const Slots& slots);

/// The four role templates plus their few-shot example blocks. Defaults are
/// compiled in; from_dir() overrides any of planner.txt / reflector.txt /
/// actor.txt / critic.txt and *_fewshot.txt found in the directory.
struct PromptSet {
    PromptTemplate planner;
    PromptTemplate reflector;
    PromptTemplate actor;
    PromptTemplate critic;
    std::string planner_fewshot;
    std::string reflector_fewshot;
    std::string actor_fewshot;
    std::string critic_fewshot;

    static PromptSet builtin();
    static PromptSet from_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;
    const std::string& fewshot(TemplateId id) const;
};

/// Section formatting helpers shared by the agent roles.

/// "none" when empty, otherwise one "- <text>" line per reflection in order.
std::string format_reflections(const std::vector<std::string>& reflections);

struct HistoryStep {
    std::string thought;
    std::string action_title;
    std::string observation;  // e.g. "reward 4.500" or "reward 1.900 (quit: low_reward_quit)"
};

/// Interleaved transcript: one "Thought i / Action i / Observation i" block
/// per step. "(no interactions yet)" when empty.
std::string format_history(const std::vector<HistoryStep>& steps);

struct ActorExemplar {
    std::string state_digest;
    std::string action_title;
    int advantage_v = 0;
};

std::string format_actor_experiences(const std::vector<ActorExemplar>& exemplars);

struct CriticExemplar {
    std::string state_digest;
    double value = 0.0;
};

std::string format_critic_experiences(const std::vector<CriticExemplar>& exemplars);

}  // namespace longrec::llm
