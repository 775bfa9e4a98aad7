#include "longrec/metrics.hpp"

#include <cmath>
#include <sstream>

namespace longrec::harness {

using nlohmann::json;

EpisodeMetrics episode_metrics(const agent::EpisodeTrace& trace) {
    EpisodeMetrics m;
    m.len = static_cast<double>(trace.length());
    m.r_traj = trace.total_reward();
    m.r_each = m.len > 0.0 ? m.r_traj / m.len : 0.0;
    return m;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std_dev = 0.0;
};

MeanStd mean_and_population_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        const double d = v - out.mean;
        var += d * d;
    }
    out.std_dev = std::sqrt(var / static_cast<double>(values.size()));
    return out;
}

}  // namespace

MetricsReport aggregate_metrics(const std::vector<std::vector<EpisodeMetrics>>& per_seed) {
    MetricsReport report;
    report.n_seeds = static_cast<int>(per_seed.size());
    std::vector<double> seed_len, seed_each, seed_traj;
    for (const auto& episodes : per_seed) {
        double len = 0.0, each = 0.0, traj = 0.0;
        for (const auto& m : episodes) {
            len += m.len;
            each += m.r_each;
            traj += m.r_traj;
            report.per_episode.push_back(m);
        }
        const auto n = static_cast<double>(episodes.size());
        if (n > 0.0) {
            seed_len.push_back(len / n);
            seed_each.push_back(each / n);
            seed_traj.push_back(traj / n);
        }
        report.n_episodes += static_cast<int>(episodes.size());
    }
    const auto len_stats = mean_and_population_std(seed_len);
    const auto each_stats = mean_and_population_std(seed_each);
    const auto traj_stats = mean_and_population_std(seed_traj);
    report.len_mean = len_stats.mean;
    report.len_std = len_stats.std_dev;
    report.r_each_mean = each_stats.mean;
    report.r_each_std = each_stats.std_dev;
    report.r_traj_mean = traj_stats.mean;
    report.r_traj_std = traj_stats.std_dev;
    return report;
}

json MetricsReport::to_json() const {
    json doc;
    doc["version"] = 1;
    doc["label"] = label;
    doc["config_hash"] = config_hash;
    doc["seeds"] = seeds;
    doc["n_episodes"] = n_episodes;
    doc["n_seeds"] = n_seeds;
    doc["metrics"] = {
        {"len", {{"mean", len_mean}, {"std", len_std}}},
        {"r_each", {{"mean", r_each_mean}, {"std", r_each_std}}},
        {"r_traj", {{"mean", r_traj_mean}, {"std", r_traj_std}}},
    };
    json episodes = json::array();
    for (const auto& m : per_episode) {
        episodes.push_back({m.len, m.r_each, m.r_traj});
    }
    doc["per_episode"] = std::move(episodes);
    return doc;
}

MetricsReport MetricsReport::from_json(const json& doc) {
    MetricsReport report;
    report.label = doc.value("label", std::string());
    report.config_hash = doc.value("config_hash", std::string());
    report.seeds = doc.value("seeds", std::vector<std::uint64_t>{});
    report.n_episodes = doc.value("n_episodes", 0);
    report.n_seeds = doc.value("n_seeds", 0);
    const auto& metrics = doc.at("metrics");
    report.len_mean = metrics.at("len").at("mean").get<double>();
    report.len_std = metrics.at("len").at("std").get<double>();
    report.r_each_mean = metrics.at("r_each").at("mean").get<double>();
    report.r_each_std = metrics.at("r_each").at("std").get<double>();
    report.r_traj_mean = metrics.at("r_traj").at("mean").get<double>();
    report.r_traj_std = metrics.at("r_traj").at("std").get<double>();
    for (const auto& row : doc.value("per_episode", json::array())) {
        report.per_episode.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                                      row.at(2).get<double>()});
    }
    return report;
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    if (!label.empty()) {
        out << "policy: " << label << "\n";
    }
    out << "metric        mean       std\n";
    out << "Len      " << format_fixed(len_mean, 3) << "  " << format_fixed(len_std, 3) << "\n";
    out << "R_each   " << format_fixed(r_each_mean, 3) << "  " << format_fixed(r_each_std, 3)
        << "\n";
    out << "R_traj   " << format_fixed(r_traj_mean, 3) << "  " << format_fixed(r_traj_std, 3)
        << "\n";
    out << "episodes " << n_episodes << "  seeds " << n_seeds << "  config " << config_hash
        << "\n";
    return out.str();
}

}  // namespace longrec::harness
