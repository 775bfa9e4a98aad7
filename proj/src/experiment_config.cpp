#include "longrec/experiment_config.hpp"

#include <iostream>

#include <json.hpp>

#include "longrec/binio.hpp"
#include "longrec/dataset.hpp"

namespace longrec::harness {

using nlohmann::json;

namespace {

std::string resolve_path(const std::filesystem::path& config_path, const std::string& relative) {
    if (relative.empty() || std::filesystem::path(relative).is_absolute()) {
        return relative;
    }
    return (config_path.parent_path() / relative).lexically_normal().string();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file_text(path));
    } catch (const IoError& e) {
        throw ConfigError(std::string("cannot read experiment config: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError("invalid experiment config " + path.string() + ": " + e.what());
    }
    ExperimentConfig config;
    config.source_path = path;
    try {
        const auto& dataset = doc.at("dataset");
        config.dataset_snapshot = resolve_path(path, dataset.at("snapshot").get<std::string>());
        config.model_snapshot = resolve_path(path, dataset.at("model").get<std::string>());

        if (doc.contains("env")) {
            const auto& e = doc["env"];
            config.env_config.window_w = e.value("window_w", config.env_config.window_w);
            config.env_config.beta = e.value("beta", config.env_config.beta);
            if (e.contains("beta_percentile") && !e["beta_percentile"].is_null()) {
                config.beta_percentile = e["beta_percentile"].get<double>();
            }
            config.env_config.reward_floor =
                e.value("reward_floor", config.env_config.reward_floor);
            config.env_config.max_rounds = e.value("max_rounds", config.env_config.max_rounds);
            config.env_config.exclude_repeats =
                e.value("exclude_repeats", config.env_config.exclude_repeats);
        }
        if (doc.contains("agent")) {
            const auto& a = doc["agent"];
            auto& ac = config.agent_config;
            ac.k_reflections = a.value("k_reflections", ac.k_reflections);
            ac.tau_actor = a.value("tau_actor", ac.tau_actor);
            ac.tau_critic = a.value("tau_critic", ac.tau_critic);
            ac.gamma = a.value("gamma", ac.gamma);
            ac.macro_enabled = a.value("macro", ac.macro_enabled);
            ac.micro_enabled = a.value("micro", ac.micro_enabled);
            ac.planner_enabled = a.value("planner", ac.planner_enabled);
            ac.warm_start_len = a.value("warm_start_len", ac.warm_start_len);
            ac.max_exemplars = a.value("max_exemplars", ac.max_exemplars);
            ac.top_m_categories = a.value("top_m_categories", ac.top_m_categories);
            ac.max_tokens = a.value("max_tokens", ac.max_tokens);
            ac.model_id = a.value("model_id", ac.model_id);
            if (a.contains("temperature")) {
                const auto& t = a["temperature"];
                ac.temperature_planner = t.value("planner", ac.temperature_planner);
                ac.temperature_reflector = t.value("reflector", ac.temperature_reflector);
                ac.temperature_actor = t.value("actor", ac.temperature_actor);
                ac.temperature_critic = t.value("critic", ac.temperature_critic);
            }
        }
        if (doc.contains("backend")) {
            const auto& b = doc["backend"];
            config.backend.kind = b.value("kind", config.backend.kind);
            config.backend.stub_script =
                resolve_path(path, b.value("stub_script", config.backend.stub_script));
            config.backend.base_url = b.value("base_url", config.backend.base_url);
            config.backend.path = b.value("path", config.backend.path);
            config.backend.api_key_env = b.value("api_key_env", config.backend.api_key_env);
            config.backend.max_attempts = b.value("max_attempts", config.backend.max_attempts);
            config.backend.backoff_base_seconds =
                b.value("backoff_base_seconds", config.backend.backoff_base_seconds);
            config.backend.context_limit_chars =
                b.value("context_limit_chars", config.backend.context_limit_chars);
            config.backend.max_inflight = b.value("max_inflight", config.backend.max_inflight);
            config.backend.rate_limit_per_second =
                b.value("rate_limit_per_second", config.backend.rate_limit_per_second);
        }
        config.prompts_dir = resolve_path(path, doc.value("prompts_dir", std::string()));
        if (doc.contains("run")) {
            const auto& r = doc["run"];
            config.train_episodes = r.value("train_episodes", config.train_episodes);
            config.eval_episodes = r.value("eval_episodes", config.eval_episodes);
            config.n_seeds = r.value("seeds", config.n_seeds);
            config.workers = r.value("workers", config.workers);
            config.audit_log = r.value("audit_log", config.audit_log);
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid experiment config " + path.string() + ": " + e.what());
    }
    if (config.backend.kind != "stub" && config.backend.kind != "openai" &&
        config.backend.kind != "local") {
        throw ConfigError("unknown backend kind: " + config.backend.kind);
    }
    if (config.backend.kind == "stub" && config.backend.stub_script.empty()) {
        throw ConfigError("stub backend requires backend.stub_script");
    }
    config.config_hash = to_hex(fnv1a64(doc.dump()));
    return config;
}

Experiment ExperimentConfig::build() const {
    const auto dataset = catalog::load_dataset(dataset_snapshot);
    auto model = std::make_shared<catalog::Model>(catalog::load_model(model_snapshot));

    Experiment experiment;
    experiment.train_catalog = std::make_shared<const catalog::ItemCatalog>(
        catalog::build_catalog(model->item_meta, model->train_scorer));
    experiment.test_catalog = std::make_shared<const catalog::ItemCatalog>(
        catalog::build_catalog(model->item_meta, model->test_scorer));
    // Alias the scorers to the shared model so lifetimes stay tied together.
    experiment.train_scorer =
        std::shared_ptr<const catalog::RewardModel>(model, &model->train_scorer);
    experiment.test_scorer =
        std::shared_ptr<const catalog::RewardModel>(model, &model->test_scorer);
    experiment.users = std::make_shared<const env::UserIndex>(dataset.split);

    experiment.env_config = env_config;
    if (beta_percentile) {
        // One beta for both environments, calibrated in the train-split
        // embedding space.
        experiment.env_config.beta = catalog::pairwise_distance_percentile(
            *experiment.train_catalog, *beta_percentile, 200000, 0);
        std::cerr << "[info] calibrated beta = " << format_fixed(experiment.env_config.beta, 6)
                  << " from percentile " << format_fixed(*beta_percentile, 4) << "\n";
    }
    experiment.agent_config = agent_config;
    experiment.prompts =
        prompts_dir.empty() ? llm::PromptSet::builtin() : llm::PromptSet::from_dir(prompts_dir);
    experiment.encoder = default_encoder();

    const BackendConfig backend_config = backend;
    if (backend_config.kind == "stub") {
        const auto script = llm::StubScript::from_json_file(backend_config.stub_script);
        experiment.make_backend = [script](std::uint64_t seed) {
            return std::make_shared<llm::StubBackend>(script, seed);
        };
    } else {
        llm::HttpBackendConfig http;
        http.base_url = backend_config.base_url;
        http.path = backend_config.path;
        http.api_key_env = backend_config.api_key_env;
        http.require_auth = backend_config.kind == "openai";
        http.max_attempts = backend_config.max_attempts;
        http.backoff_base_seconds = backend_config.backoff_base_seconds;
        http.context_limit_chars = backend_config.context_limit_chars;
        http.max_inflight = backend_config.max_inflight;
        http.rate_limit_per_second = backend_config.rate_limit_per_second;
        experiment.make_backend = [http](std::uint64_t) {
            return std::make_shared<llm::HttpChatBackend>(http);
        };
    }

    experiment.train_episodes = train_episodes;
    experiment.eval_episodes = eval_episodes;
    experiment.n_seeds = n_seeds;
    experiment.workers = workers;
    experiment.config_hash = config_hash;
    experiment.validate();
    return experiment;
}

}  // namespace longrec::harness
