#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "longrec/harness.hpp"

namespace longrec::harness {

/// Backend selection block of the experiment config.
struct BackendConfig {
    std::string kind = "stub";  // stub | openai | local
    std::string stub_script;    // path, resolved relative to the config file
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_attempts = 3;
    double backoff_base_seconds = 0.5;
    std::size_t context_limit_chars = 200000;
    int max_inflight = 4;
    double rate_limit_per_second = 0.0;
};

/// Parsed experiment config file (versioned JSON). See docs in README for the
/// schema. build() resolves it into a runnable Experiment: loads the dataset
/// and model snapshots, builds per-split catalogs, calibrates beta when asked,
/// and wires up the backend factory.
struct ExperimentConfig {
    std::filesystem::path source_path;
    std::string dataset_snapshot;
    std::string model_snapshot;
    env::EnvConfig env_config;
    std::optional<double> beta_percentile;  // overrides env_config.beta when set
    agent::AgentConfig agent_config;
    BackendConfig backend;
    std::string prompts_dir;
    int train_episodes = 100;
    int eval_episodes = 100;
    int n_seeds = 3;
    int workers = 1;
    bool audit_log = true;
    std::string config_hash;  // fnv1a64 of the canonical config dump

    static ExperimentConfig from_json_file(const std::filesystem::path& path);

    Experiment build() const;
};

}  // namespace longrec::harness

namespace longrec {

/// CLI entry point; returns the process exit code (0 success, 2 usage or
/// config errors, 1 runtime failures).
int cli_main(int argc, char** argv);

}  // namespace longrec
