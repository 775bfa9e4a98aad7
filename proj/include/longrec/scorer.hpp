#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "longrec/binio.hpp"
#include "longrec/catalog.hpp"

namespace longrec::catalog {

/// Reward source for the simulated environment. Implementations must be
/// deterministic: score(u, i) always returns the same value once built.
class RewardModel {
public:
    virtual ~RewardModel() = default;
    /// Reward in [1, 5]. Throws DataError for unknown ids.
    virtual double score(const std::string& user_id, const std::string& item_id) const = 0;
    virtual bool knows_user(const std::string& user_id) const = 0;
    virtual bool knows_item(const std::string& item_id) const = 0;
};

struct ScorerConfig {
    int dim = 16;
    int epochs = 60;
    double learning_rate = 0.05;
    double regularization = 0.02;
    double init_scale = 0.1;
};

/// Biased matrix factorization: score(u,i) = clamp(mu + b_u + b_i + p_u . q_i).
///
/// Trained by SGD with a backtracking step-size rule: an epoch that worsens
/// the training RMSE is reverted and retried at half the learning rate, so
/// the recorded RMSE history is non-increasing and training is reproducible
/// from the seed alone. After training the model is immutable and safe for
/// concurrent reads.
class MfScorer final : public RewardModel {
public:
    MfScorer() = default;  // empty model; populate via train() or deserialize()

    static MfScorer train(const std::vector<InteractionRecord>& records, const ScorerConfig& config,
                          std::uint64_t seed);

    double score(const std::string& user_id, const std::string& item_id) const override;
    bool knows_user(const std::string& user_id) const override;
    bool knows_item(const std::string& item_id) const override;

    int dim() const { return dim_; }
    const std::vector<double>& rmse_history() const { return rmse_history_; }

    /// Learned item embedding; the environment uses these for quit distances.
    std::vector<double> item_embedding(const std::string& item_id) const;
    /// Item ids in the scorer's deterministic (first-seen) order.
    const std::vector<std::string>& item_ids() const { return item_ids_; }
    const std::vector<std::string>& user_ids() const { return user_ids_; }

    void serialize_to(ByteWriter& out) const;
    static MfScorer deserialize(ByteReader& in);

    bool operator==(const MfScorer& other) const;

private:
    double predict_raw(std::size_t u, std::size_t i) const;
    double rmse(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                const std::vector<double>& ratings) const;

    int dim_ = 0;
    double global_bias_ = 0.0;
    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::unordered_map<std::string, std::size_t> user_index_;
    std::unordered_map<std::string, std::size_t> item_index_;
    std::vector<double> user_bias_;
    std::vector<double> item_bias_;
    std::vector<double> user_factors_;  // row-major [n_users x dim]
    std::vector<double> item_factors_;  // row-major [n_items x dim]
    std::vector<double> rmse_history_;
};

/// Spec-shaped convenience wrapper around MfScorer::train.
MfScorer train_scorer(const std::vector<InteractionRecord>& records, int dim, int epochs,
                      double learning_rate, double regularization, std::uint64_t seed);

/// RMSE of the scorer's clamped predictions over the given records; pairs with
/// users or items the scorer does not know are skipped.
double scorer_rmse(const RewardModel& scorer, const std::vector<InteractionRecord>& records);

/// Catalog whose embeddings are the scorer's learned item vectors, restricted
/// to items the scorer knows. Metadata (titles, categories) comes from `items`.
ItemCatalog build_catalog(const std::vector<ItemRecord>& items, const MfScorer& scorer);

/// Catalog + per-split scorers, snapshot round-trips bit-exactly.
struct Model {
    std::vector<ItemRecord> item_meta;  // no embeddings; spaces live in the scorers
    MfScorer train_scorer;
    MfScorer test_scorer;
};

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace longrec::catalog
