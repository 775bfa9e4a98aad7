#include "longrec/trace.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "longrec/binio.hpp"

namespace longrec::agent {

using nlohmann::json;

double EpisodeTrace::total_reward() const {
    double sum = 0.0;
    for (const auto& step : steps) {
        sum += step.reward;
    }
    return sum;
}

void write_traces_jsonl(const std::filesystem::path& path,
                        const std::vector<EpisodeTrace>& traces) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write traces: " + path.string());
    }
    for (const auto& trace : traces) {
        for (const auto& step : trace.steps) {
            json line;
            line["episode"] = trace.episode_id;
            line["user"] = trace.user_id;
            line["seed"] = trace.seed;
            line["step"] = step.step_index;
            line["state"] = step.state_text;
            line["thought"] = step.thought;
            line["action"] = step.action_item_id;
            line["action_title"] = step.action_title;
            line["reward"] = step.reward;
            line["done"] = step.done;
            line["quit_reason"] = env::to_string(step.quit_reason);
            if (step.advantage) {
                json adv;
                adv["reward"] = step.advantage->reward;
                adv["v_state"] = step.advantage->v_state;
                adv["v_next"] = step.advantage->v_next;
                adv["advantage"] = step.advantage->advantage;
                adv["v"] = step.advantage->v;
                if (step.advantage->degraded) {
                    adv["degraded"] = true;
                }
                line["advantage"] = std::move(adv);
            }
            out << line.dump() << "\n";
        }
        if (trace.aborted) {
            // Epilogue marker so partial traces stay identifiable on reload.
            json line;
            line["episode"] = trace.episode_id;
            line["user"] = trace.user_id;
            line["seed"] = trace.seed;
            line["aborted"] = true;
            line["abort_reason"] = trace.abort_reason;
            out << line.dump() << "\n";
        }
    }
}

std::vector<EpisodeTrace> read_traces_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open traces: " + path.string());
    }
    std::vector<EpisodeTrace> traces;
    std::map<std::string, std::size_t> index;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("malformed trace line in " + path.string() + ": " + e.what());
        }
        const auto episode_id = doc.value("episode", std::string());
        auto it = index.find(episode_id);
        if (it == index.end()) {
            it = index.emplace(episode_id, traces.size()).first;
            EpisodeTrace trace;
            trace.episode_id = episode_id;
            trace.user_id = doc.value("user", std::string());
            trace.seed = doc.value("seed", std::uint64_t{0});
            traces.push_back(std::move(trace));
        }
        auto& trace = traces[it->second];
        if (doc.value("aborted", false)) {
            trace.aborted = true;
            trace.abort_reason = doc.value("abort_reason", std::string());
        }
        if (!doc.contains("step")) {
            continue;
        }
        StepRecord step;
        step.step_index = doc.value("step", 0);
        step.state_text = doc.value("state", std::string());
        step.thought = doc.value("thought", std::string());
        step.action_item_id = doc.value("action", std::string());
        step.action_title = doc.value("action_title", std::string());
        step.reward = doc.value("reward", 0.0);
        step.done = doc.value("done", false);
        step.quit_reason = env::quit_reason_from_string(doc.value("quit_reason", std::string("none")));
        if (step.done) {
            trace.quit_reason = step.quit_reason;
        }
        trace.steps.push_back(std::move(step));
    }
    return traces;
}

}  // namespace longrec::agent
