#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "longrec/binio.hpp"
#include "longrec/dataset.hpp"
#include "longrec/experiment_config.hpp"

namespace longrec {

namespace {

using harness::Experiment;
using harness::ExperimentConfig;
using harness::MetricsReport;
using nlohmann::json;

struct RunOverrides {
    int train_episodes = -1;
    int eval_episodes = -1;
    int n_seeds = -1;
    int workers = -1;

    void apply(Experiment& experiment) const {
        if (train_episodes >= 0) experiment.train_episodes = train_episodes;
        if (eval_episodes >= 0) experiment.eval_episodes = eval_episodes;
        if (n_seeds >= 0) experiment.n_seeds = n_seeds;
        if (workers >= 0) experiment.workers = workers;
    }

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--train-episodes", train_episodes, "Override run.train_episodes");
        cmd->add_option("--eval-episodes", eval_episodes, "Override run.eval_episodes");
        cmd->add_option("--seeds", n_seeds, "Override run.seeds");
        cmd->add_option("--workers", workers, "Override run.workers");
    }
};

void write_report_files(const std::filesystem::path& dir, const std::string& stem,
                        const MetricsReport& report) {
    std::filesystem::create_directories(dir);
    write_file_text(dir / (stem + ".json"), report.to_json().dump(2) + "\n");
    write_file_text(dir / (stem + ".txt"), report.to_table());
}

int cmd_ingest(const std::string& manifest_path, const std::string& out_path,
               const std::string& split_index_path) {
    const auto manifest = catalog::DatasetManifest::from_json_file(manifest_path);
    const auto dataset = catalog::ingest(manifest);
    catalog::save_dataset(out_path, dataset);
    if (!split_index_path.empty()) {
        catalog::write_split_index(split_index_path, dataset);
    }
    std::cout << "ingested " << dataset.split.train.size() << " train + "
              << dataset.split.test.size() << " test records, " << dataset.items.size()
              << " items, " << dataset.malformed_rows << " malformed rows skipped\n";
    return 0;
}

int cmd_train_scorer(const std::string& manifest_path, const std::string& dataset_path,
                     const std::string& out_path, std::uint64_t seed) {
    const auto manifest = catalog::DatasetManifest::from_json_file(manifest_path);
    const auto dataset = catalog::load_dataset(dataset_path);
    catalog::Model model;
    model.item_meta = dataset.items;
    model.train_scorer = catalog::MfScorer::train(dataset.split.train, manifest.scorer,
                                                  RngStream::derive(seed, "scorer-train").next_u64());
    model.test_scorer = catalog::MfScorer::train(dataset.split.test, manifest.scorer,
                                                 RngStream::derive(seed, "scorer-test").next_u64());
    catalog::save_model(out_path, model);
    std::cout << "trained scorers: train RMSE "
              << format_fixed(model.train_scorer.rmse_history().back(), 4) << " ("
              << model.train_scorer.rmse_history().size() << " epochs), test RMSE "
              << format_fixed(model.test_scorer.rmse_history().back(), 4) << " ("
              << model.test_scorer.rmse_history().size() << " epochs)\n";
    return 0;
}

int cmd_train(const ExperimentConfig& config, const RunOverrides& overrides, std::uint64_t seed,
              const std::filesystem::path& out_dir) {
    Experiment experiment = config.build();
    overrides.apply(experiment);
    std::filesystem::create_directories(out_dir);
    llm::AuditLog audit;
    if (config.audit_log) {
        audit.open_mirror(out_dir / "audit_train.jsonl");
    }
    auto result = harness::train(experiment, seed, &audit);
    harness::save_memories(out_dir / "memories", result.memories);
    agent::write_traces_jsonl(out_dir / "train_traces.jsonl", result.traces);
    std::cout << "trained " << result.traces.size() << " episodes: |M_P|="
              << result.memories.planner.size() << " |M_A|=" << result.memories.actor.size()
              << " |M_C|=" << result.memories.critic.size() << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& config, const RunOverrides& overrides, std::uint64_t seed,
             const std::filesystem::path& out_dir, const std::string& snapshots,
             const std::string& label) {
    Experiment experiment = config.build();
    overrides.apply(experiment);
    std::filesystem::create_directories(out_dir);
    auto memories = harness::load_memories(
        snapshots.empty() ? out_dir / "memories" : std::filesystem::path(snapshots),
        experiment.encoder);
    llm::AuditLog audit;
    if (config.audit_log) {
        audit.open_mirror(out_dir / "audit_eval.jsonl");
    }
    auto result = harness::evaluate(experiment, memories, seed, &audit);
    result.report.label = label;
    write_report_files(out_dir, "report", result.report);
    agent::write_traces_jsonl(out_dir / "eval_traces.jsonl", result.traces);
    std::cout << result.report.to_table();
    return 0;
}

int cmd_ablate(const ExperimentConfig& config, const RunOverrides& overrides, std::uint64_t seed,
               const std::filesystem::path& out_dir) {
    struct Variant {
        const char* label;
        bool macro_on, micro_on, planner_on;
    };
    const Variant variants[] = {
        {"full", true, true, true},
        {"wo_macro", false, true, true},
        {"wo_micro", true, false, true},
        {"act_only", false, false, false},
    };
    std::filesystem::create_directories(out_dir);
    for (const auto& variant : variants) {
        Experiment experiment = config.build();
        overrides.apply(experiment);
        experiment.agent_config.macro_enabled = variant.macro_on;
        experiment.agent_config.micro_enabled = variant.micro_on;
        experiment.agent_config.planner_enabled = variant.planner_on;

        const auto variant_dir = out_dir / variant.label;
        std::filesystem::create_directories(variant_dir);
        llm::AuditLog audit;
        if (config.audit_log) {
            audit.open_mirror(variant_dir / "audit.jsonl");
        }
        auto trained = harness::train(experiment, seed, &audit);
        harness::save_memories(variant_dir / "memories", trained.memories);
        agent::write_traces_jsonl(variant_dir / "train_traces.jsonl", trained.traces);
        auto eval = harness::evaluate(experiment, trained.memories, seed, &audit);
        eval.report.label = variant.label;
        write_report_files(out_dir, std::string(variant.label) + "_report", eval.report);
        agent::write_traces_jsonl(variant_dir / "eval_traces.jsonl", eval.traces);
        std::cout << eval.report.to_table() << "\n";
    }
    return 0;
}

int cmd_mc_oracle(const ExperimentConfig& config, std::uint64_t seed, const std::string& user_flag,
                  int rollouts, double gamma_flag, const std::string& split_name,
                  const std::string& policy_name, const std::string& out_path) {
    Experiment experiment = config.build();
    const auto split = env::split_from_string(split_name);
    const auto environment = experiment.make_env(split);
    const auto eligible = experiment.eligible_users(split);
    const std::string user = user_flag.empty() ? eligible.front() : user_flag;
    const auto state =
        environment.reset(user, static_cast<std::size_t>(experiment.agent_config.warm_start_len));
    const double gamma = gamma_flag >= 0.0 ? gamma_flag : experiment.agent_config.gamma;

    std::unique_ptr<harness::Policy> policy;
    if (policy_name == "random") {
        policy = std::make_unique<harness::RandomPolicy>();
    } else if (policy_name == "greedy") {
        policy = std::make_unique<harness::GreedyPolicy>();
    } else {
        throw ConfigError("mc-oracle policy must be random or greedy");
    }
    const auto result = harness::mc_state_value(environment, *policy, state, rollouts, gamma,
                                                RngStream::derive(seed, "mc-oracle").next_u64());
    json doc;
    doc["user"] = user;
    doc["policy"] = policy->name();
    doc["n_rollouts"] = rollouts;
    doc["gamma"] = gamma;
    doc["mean"] = result.mean;
    doc["variance"] = result.variance;
    doc["samples"] = result.samples;
    if (!out_path.empty()) {
        write_file_text(out_path, doc.dump(2) + "\n");
    }
    std::cout << "V(" << user << ") ~= " << format_fixed(result.mean, 4) << " (variance "
              << format_fixed(result.variance, 4) << ", " << rollouts << " rollouts)\n";
    return 0;
}

int cmd_variance_study(const ExperimentConfig& config, std::uint64_t seed,
                       const std::string& snapshots, int n_states, int n_mc, int n_critic,
                       const std::string& out_path) {
    Experiment experiment = config.build();
    const auto environment = experiment.make_env(env::Split::test);
    auto memories = harness::load_memories(snapshots, experiment.encoder);
    auto backend = experiment.make_backend(RngStream::derive(seed, "llm-backend").next_u64());
    llm::AuditLog audit;
    llm::Gateway gateway(backend, &audit);
    agent::Agent the_agent(experiment.agent_config, gateway, experiment.prompts, memories,
                           experiment.encoder, *experiment.test_catalog);
    harness::AgentPolicy policy(the_agent);

    const auto eligible = experiment.eligible_users(env::Split::test);
    std::vector<env::State> states;
    for (int k = 0; k < n_states && k < static_cast<int>(eligible.size()); ++k) {
        states.push_back(environment.reset(
            eligible[static_cast<std::size_t>(k)],
            static_cast<std::size_t>(experiment.agent_config.warm_start_len)));
    }

    std::function<void(std::uint64_t)> reseed;
    if (auto stub = std::dynamic_pointer_cast<llm::StubBackend>(backend)) {
        reseed = [stub](std::uint64_t s) { stub->reseed(s); };
    }
    const auto report = harness::critic_variance_study(environment, the_agent, policy, states,
                                                       n_mc, n_critic,
                                                       experiment.agent_config.gamma, seed, reseed);
    if (!out_path.empty()) {
        write_file_text(out_path, report.to_json().dump(2) + "\n");
    }
    for (const auto& study : report.states) {
        std::cout << "mc_mean " << format_fixed(study.mc_mean, 4) << "  mc_var "
                  << format_fixed(study.mc_variance, 4) << "  critic_var "
                  << format_fixed(study.critic_variance, 4) << "  bias "
                  << format_fixed(study.bias, 4) << "\n";
    }
    return 0;
}

int cmd_popularity(const ExperimentConfig& config, const std::vector<std::string>& trace_specs,
                   int n_buckets, const std::string& out_path) {
    const auto dataset = catalog::load_dataset(config.dataset_snapshot);
    std::map<std::string, std::vector<agent::EpisodeTrace>> traces_by_policy;
    for (const auto& spec : trace_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--traces expects label=path, got: " + spec);
        }
        traces_by_policy[spec.substr(0, eq)] = agent::read_traces_jsonl(spec.substr(eq + 1));
    }
    const auto buckets = harness::popularity_analysis(traces_by_policy, dataset.split.train,
                                                      dataset.split.test, n_buckets);
    if (!out_path.empty()) {
        write_file_text(out_path, buckets.to_json().dump(2) + "\n");
    }
    for (const auto& [label, shares] : buckets.share_by_policy) {
        std::cout << label << ":";
        for (double share : shares) {
            std::cout << " " << format_fixed(share, 3);
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& config, const RunOverrides& overrides, std::uint64_t seed,
              const std::string& snapshots, const std::vector<int>& windows,
              const std::filesystem::path& out_dir) {
    Experiment experiment = config.build();
    overrides.apply(experiment);
    std::filesystem::create_directories(out_dir);
    auto memories = harness::load_memories(snapshots, experiment.encoder);
    const auto results = harness::sweep_window(experiment, memories, windows, seed);
    json summary = json::array();
    for (const auto& [w, report] : results) {
        write_report_files(out_dir, "W" + std::to_string(w) + "_report", report);
        json row;
        row["window_w"] = w;
        row["report"] = report.to_json();
        summary.push_back(std::move(row));
        std::cout << "W=" << w << "  Len " << format_fixed(report.len_mean, 3) << "  R_each "
                  << format_fixed(report.r_each_mean, 3) << "  R_traj "
                  << format_fixed(report.r_traj_mean, 3) << "\n";
    }
    write_file_text(out_dir / "sweep_summary.json", summary.dump(2) + "\n");
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Bi-level LLM planning for long-term interactive recommendation"};
    app.require_subcommand(1);

    // ingest
    std::string manifest_path, out_path, split_index_path;
    auto* ingest = app.add_subcommand("ingest", "Load, filter, and split an interaction log");
    ingest->add_option("--manifest", manifest_path, "Dataset manifest JSON")->required();
    ingest->add_option("--out", out_path, "Output dataset snapshot")->required();
    ingest->add_option("--split-index", split_index_path, "Optional split-index JSON output");

    // train-scorer
    std::string ts_manifest, ts_dataset, ts_out;
    std::uint64_t ts_seed = 0;
    auto* train_scorer = app.add_subcommand("train-scorer", "Fit per-split reward scorers");
    train_scorer->add_option("--manifest", ts_manifest, "Dataset manifest JSON")->required();
    train_scorer->add_option("--dataset", ts_dataset, "Dataset snapshot")->required();
    train_scorer->add_option("--out", ts_out, "Output model snapshot")->required();
    train_scorer->add_option("--seed", ts_seed, "Training seed")->required();

    // train
    std::string tr_config, tr_out_dir;
    std::uint64_t tr_seed = 0;
    RunOverrides tr_overrides;
    auto* train = app.add_subcommand("train", "Run training episodes and persist memories");
    train->add_option("--config", tr_config, "Experiment config JSON")->required();
    train->add_option("--seed", tr_seed, "Run seed")->required();
    train->add_option("--out-dir", tr_out_dir, "Output directory")->required();
    tr_overrides.add_flags(train);

    // eval
    std::string ev_config, ev_out_dir, ev_snapshots, ev_label = "full";
    std::uint64_t ev_seed = 0;
    RunOverrides ev_overrides;
    auto* eval = app.add_subcommand("eval", "Evaluate with frozen memories");
    eval->add_option("--config", ev_config, "Experiment config JSON")->required();
    eval->add_option("--seed", ev_seed, "Base seed")->required();
    eval->add_option("--out-dir", ev_out_dir, "Output directory")->required();
    eval->add_option("--snapshots", ev_snapshots, "Memory snapshot directory");
    eval->add_option("--label", ev_label, "Policy label in the report");
    ev_overrides.add_flags(eval);

    // ablate
    std::string ab_config, ab_out_dir;
    std::uint64_t ab_seed = 0;
    RunOverrides ab_overrides;
    auto* ablate =
        app.add_subcommand("ablate", "Train + evaluate full, w/o macro, w/o micro, act-only");
    ablate->add_option("--config", ab_config, "Experiment config JSON")->required();
    ablate->add_option("--seed", ab_seed, "Run seed")->required();
    ablate->add_option("--out-dir", ab_out_dir, "Output directory")->required();
    ab_overrides.add_flags(ablate);

    // mc-oracle
    std::string mc_config, mc_user, mc_split = "test", mc_policy = "random", mc_out;
    std::uint64_t mc_seed = 0;
    int mc_rollouts = 1000;
    double mc_gamma = -1.0;
    auto* mc = app.add_subcommand("mc-oracle", "Monte-Carlo state-value estimate");
    mc->add_option("--config", mc_config, "Experiment config JSON")->required();
    mc->add_option("--seed", mc_seed, "Sampling seed")->required();
    mc->add_option("--user", mc_user, "Probe user (default: first eligible)");
    mc->add_option("--rollouts", mc_rollouts, "Number of rollouts");
    mc->add_option("--gamma", mc_gamma, "Discount (default: agent gamma)");
    mc->add_option("--split", mc_split, "train or test");
    mc->add_option("--policy", mc_policy, "random or greedy");
    mc->add_option("--out", mc_out, "Output JSON file");

    // variance-study
    std::string vs_config, vs_snapshots, vs_out;
    std::uint64_t vs_seed = 0;
    int vs_states = 3, vs_n_mc = 1000, vs_n_critic = 100;
    auto* vs = app.add_subcommand("variance-study", "Critic vs Monte-Carlo variance study");
    vs->add_option("--config", vs_config, "Experiment config JSON")->required();
    vs->add_option("--seed", vs_seed, "Study seed")->required();
    vs->add_option("--snapshots", vs_snapshots, "Memory snapshot directory");
    vs->add_option("--states", vs_states, "Number of probe states");
    vs->add_option("--n-mc", vs_n_mc, "Rollouts per state");
    vs->add_option("--n-critic", vs_n_critic, "Critic repetitions per state");
    vs->add_option("--out", vs_out, "Output JSON file");

    // popularity
    std::string pop_config, pop_out;
    std::vector<std::string> pop_traces;
    int pop_buckets = 5;
    auto* pop = app.add_subcommand("popularity", "Popularity-bucket analysis of traces");
    pop->add_option("--config", pop_config, "Experiment config JSON")->required();
    pop->add_option("--traces", pop_traces, "label=path, repeatable")->required();
    pop->add_option("--buckets", pop_buckets, "Number of buckets");
    pop->add_option("--out", pop_out, "Output JSON file");

    // sweep
    std::string sw_config, sw_snapshots, sw_out_dir;
    std::uint64_t sw_seed = 0;
    std::vector<int> sw_windows;
    RunOverrides sw_overrides;
    auto* sweep = app.add_subcommand("sweep", "Evaluate across window sizes");
    sweep->add_option("--config", sw_config, "Experiment config JSON")->required();
    sweep->add_option("--seed", sw_seed, "Base seed")->required();
    sweep->add_option("--snapshots", sw_snapshots, "Memory snapshot directory");
    sweep->add_option("--windows", sw_windows, "Window sizes")->required()->delimiter(',');
    sweep->add_option("--out-dir", sw_out_dir, "Output directory")->required();
    sw_overrides.add_flags(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ingest->parsed()) {
            return cmd_ingest(manifest_path, out_path, split_index_path);
        }
        if (train_scorer->parsed()) {
            return cmd_train_scorer(ts_manifest, ts_dataset, ts_out, ts_seed);
        }
        if (train->parsed()) {
            return cmd_train(ExperimentConfig::from_json_file(tr_config), tr_overrides, tr_seed,
                             tr_out_dir);
        }
        if (eval->parsed()) {
            return cmd_eval(ExperimentConfig::from_json_file(ev_config), ev_overrides, ev_seed,
                            ev_out_dir, ev_snapshots, ev_label);
        }
        if (ablate->parsed()) {
            return cmd_ablate(ExperimentConfig::from_json_file(ab_config), ab_overrides, ab_seed,
                              ab_out_dir);
        }
        if (mc->parsed()) {
            return cmd_mc_oracle(ExperimentConfig::from_json_file(mc_config), mc_seed, mc_user,
                                 mc_rollouts, mc_gamma, mc_split, mc_policy, mc_out);
        }
        if (vs->parsed()) {
            return cmd_variance_study(ExperimentConfig::from_json_file(vs_config), vs_seed,
                                      vs_snapshots, vs_states, vs_n_mc, vs_n_critic, vs_out);
        }
        if (pop->parsed()) {
            return cmd_popularity(ExperimentConfig::from_json_file(pop_config), pop_traces,
                                  pop_buckets, pop_out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(ExperimentConfig::from_json_file(sw_config), sw_overrides, sw_seed,
                             sw_snapshots, sw_windows, sw_out_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        std::cerr << "Run with --help for usage.\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace longrec
