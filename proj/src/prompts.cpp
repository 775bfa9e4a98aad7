#include "longrec/prompts.hpp"

#include <sstream>

#include "longrec/binio.hpp"

namespace longrec::llm {

namespace {

// Default instruction bodies. Distinctive first lines double as stub-script
// matchers, so keep them stable.

constexpr const char* kPlannerBody =
    R"(You plan a long interactive recommendation session. The transcript interleaves Thought, Action, and Observation lines. Write the next Thought: a short plan for what to recommend and why, balancing the user's known tastes against variety. The user quits after an item too close to recent picks or an item they rate poorly, so plan for a session that lasts as many rounds as possible.

Here are some examples:
{few_shot}
(END OF EXAMPLES)

Reflection: {reflections}

State: {state}

{history}

Thought:)";

constexpr const char* kReflectorBody =
    R"(A recommendation session just ended. Write a Reflection on it: briefly explain why the user left, then give forward-looking guidance for future sessions. Keep it general; do not name specific items.

Here are some examples:
{few_shot}
(END OF EXAMPLES)

Initial state: {state}

Session transcript:
{history}

Reflection:)";

constexpr const char* kActorBody =
    R"(You turn a plan into a concrete pick. Recommend exactly one item for this user, following the Thought below. Reply with a single line of the form "ACTION: <item title>".

Here are some examples:
{few_shot}
(END OF EXAMPLES)

Past experiences (v=1 worked, v=0 did not): {experiences}

Tool analysis: {tool_output}

State: {state}

{history}

Thought: {thought}

ACTION:)";

constexpr const char* kCriticBody =
    R"(Estimate the long-term value of the user's current state: the total reward you expect from the rest of the session if recommendations continue from here. Use the prior estimates below as reference points when they are relevant. Reply with a single line of the form "VALUE: <number>".

Here are some examples:
{few_shot}
(END OF EXAMPLES)

Prior value estimates: {experiences}

State: {state}

{history}

VALUE:)";

constexpr const char* kPlannerFewshot =
    R"(State: User u9 | recent: Starfall Saga (RPG), Mech Arena (Action) | episode: none
Thought 1: The user favors RPGs with some Action on the side. Open with a strong RPG pick, then branch into adjacent genres so the session stays fresh.
Action 1: Starfall Saga II
Observation 1: reward 4.200
Thought 2: The RPG pick landed well. Keep following the plan: introduce an Adventure title next instead of another near-identical RPG.)";

constexpr const char* kReflectorFewshot =
    R"(Session transcript:
Thought 1: Lead with the user's favorite shooter.
Action 1: Ironclad Strike
Observation 1: reward 4.600
Thought 2: It worked, recommend it again.
Action 2: Ironclad Strike
Observation 2: reward 4.600 (quit: similarity_quit)
Reflection: The user left because the session circled back to a near-identical pick. Future plans should rotate across genres and keep each recommendation clearly distinct from the recent ones.)";

constexpr const char* kActorFewshot =
    R"(Thought: Open with the user's favorite genre before branching out.
ACTION: Starfall Saga II)";

constexpr const char* kCriticFewshot =
    R"(State: User u9 | recent: Starfall Saga (RPG) | episode: Starfall Saga II reward 4.200
VALUE: 12.0)";

std::vector<std::string> slots_planner() {
    return {"few_shot", "reflections", "state", "history"};
}
std::vector<std::string> slots_reflector() {
    return {"few_shot", "state", "history"};
}
std::vector<std::string> slots_actor() {
    return {"few_shot", "experiences", "tool_output", "state", "history", "thought"};
}
std::vector<std::string> slots_critic() {
    return {"few_shot", "experiences", "state", "history"};
}

std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

std::string load_override(const std::filesystem::path& dir, const char* name,
                          const std::string& fallback) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) {
        return read_file_text(path);
    }
    return fallback;
}

}  // namespace

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::planner: return "planner";
        case TemplateId::reflector: return "reflector";
        case TemplateId::actor: return "actor";
        case TemplateId::critic: return "critic";
    }
    return "planner";
}

std::string render_prompt(const PromptTemplate& tmpl, const Slots& slots) {
    for (const auto& required : tmpl.required_slots) {
        if (!slots.count(required)) {
            throw PromptError("unbound slot '" + required + "' for template " +
                              to_string(tmpl.id));
        }
    }
    std::string out = tmpl.body;
    for (const auto& [name, value] : slots) {
        out = replace_all(std::move(out), "{" + name + "}", value);
    }
    return out;
}

PromptSet PromptSet::builtin() {
    PromptSet set;
    set.planner = {TemplateId::planner, kPlannerBody, slots_planner()};
    set.reflector = {TemplateId::reflector, kReflectorBody, slots_reflector()};
    set.actor = {TemplateId::actor, kActorBody, slots_actor()};
    set.critic = {TemplateId::critic, kCriticBody, slots_critic()};
    set.planner_fewshot = kPlannerFewshot;
    set.reflector_fewshot = kReflectorFewshot;
    set.actor_fewshot = kActorFewshot;
    set.critic_fewshot = kCriticFewshot;
    return set;
}

PromptSet PromptSet::from_dir(const std::filesystem::path& dir) {
    PromptSet set = builtin();
    set.planner.body = load_override(dir, "planner.txt", set.planner.body);
    set.reflector.body = load_override(dir, "reflector.txt", set.reflector.body);
    set.actor.body = load_override(dir, "actor.txt", set.actor.body);
    set.critic.body = load_override(dir, "critic.txt", set.critic.body);
    set.planner_fewshot = load_override(dir, "planner_fewshot.txt", set.planner_fewshot);
    set.reflector_fewshot = load_override(dir, "reflector_fewshot.txt", set.reflector_fewshot);
    set.actor_fewshot = load_override(dir, "actor_fewshot.txt", set.actor_fewshot);
    set.critic_fewshot = load_override(dir, "critic_fewshot.txt", set.critic_fewshot);
    return set;
}

const PromptTemplate& PromptSet::get(TemplateId id) const {
    switch (id) {
        case TemplateId::planner: return planner;
        case TemplateId::reflector: return reflector;
        case TemplateId::actor: return actor;
        case TemplateId::critic: return critic;
    }
    return planner;
}

const std::string& PromptSet::fewshot(TemplateId id) const {
    switch (id) {
        case TemplateId::planner: return planner_fewshot;
        case TemplateId::reflector: return reflector_fewshot;
        case TemplateId::actor: return actor_fewshot;
        case TemplateId::critic: return critic_fewshot;
    }
    return planner_fewshot;
}

std::string format_reflections(const std::vector<std::string>& reflections) {
    if (reflections.empty()) {
        return "none";
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < reflections.size(); ++i) {
        if (i > 0) {
            out << "\n";
        }
        out << "- " << reflections[i];
    }
    return out.str();
}

std::string format_history(const std::vector<HistoryStep>& steps) {
    if (steps.empty()) {
        return "(no interactions yet)";
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto n = i + 1;
        if (i > 0) {
            out << "\n";
        }
        out << "Thought " << n << ": " << steps[i].thought << "\n";
        out << "Action " << n << ": " << steps[i].action_title << "\n";
        out << "Observation " << n << ": " << steps[i].observation;
    }
    return out.str();
}

std::string format_actor_experiences(const std::vector<ActorExemplar>& exemplars) {
    if (exemplars.empty()) {
        return "none";
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        if (i > 0) {
            out << "\n";
        }
        out << "- v=" << exemplars[i].advantage_v << " | action: " << exemplars[i].action_title
            << " | state: " << exemplars[i].state_digest;
    }
    return out.str();
}

std::string format_critic_experiences(const std::vector<CriticExemplar>& exemplars) {
    if (exemplars.empty()) {
        return "none";
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        if (i > 0) {
            out << "\n";
        }
        out << "- estimate: " << format_fixed(exemplars[i].value, 3)
            << " | state: " << exemplars[i].state_digest;
    }
    return out.str();
}

}  // namespace longrec::llm
