#include "longrec/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "longrec/binio.hpp"

namespace longrec::catalog {

namespace {

constexpr double kRatingMin = 1.0;
constexpr double kRatingMax = 5.0;
constexpr int kMaxBackoffs = 24;

double clamp_rating(double x) {
    return std::clamp(x, kRatingMin, kRatingMax);
}

}  // namespace

double MfScorer::predict_raw(std::size_t u, std::size_t i) const {
    double dot = 0.0;
    const double* p = &user_factors_[u * static_cast<std::size_t>(dim_)];
    const double* q = &item_factors_[i * static_cast<std::size_t>(dim_)];
    for (int k = 0; k < dim_; ++k) {
        dot += p[k] * q[k];
    }
    return global_bias_ + user_bias_[u] + item_bias_[i] + dot;
}

double MfScorer::rmse(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                      const std::vector<double>& ratings) const {
    double sum_sq = 0.0;
    for (std::size_t n = 0; n < pairs.size(); ++n) {
        const double err = ratings[n] - clamp_rating(predict_raw(pairs[n].first, pairs[n].second));
        sum_sq += err * err;
    }
    return std::sqrt(sum_sq / static_cast<double>(pairs.size()));
}

MfScorer MfScorer::train(const std::vector<InteractionRecord>& records, const ScorerConfig& config,
                         std::uint64_t seed) {
    if (records.empty()) {
        throw DataError("cannot train a scorer on an empty log");
    }
    if (config.dim < 1) {
        throw ConfigError("scorer dimension must be >= 1");
    }
    MfScorer model;
    model.dim_ = config.dim;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> ratings;
    pairs.reserve(records.size());
    ratings.reserve(records.size());
    double rating_sum = 0.0;
    for (const auto& rec : records) {
        auto [uit, u_new] = model.user_index_.try_emplace(rec.user_id, model.user_ids_.size());
        if (u_new) {
            model.user_ids_.push_back(rec.user_id);
        }
        auto [iit, i_new] = model.item_index_.try_emplace(rec.item_id, model.item_ids_.size());
        if (i_new) {
            model.item_ids_.push_back(rec.item_id);
        }
        pairs.emplace_back(uit->second, iit->second);
        ratings.push_back(rec.rating);
        rating_sum += rec.rating;
    }
    const std::size_t n_users = model.user_ids_.size();
    const std::size_t n_items = model.item_ids_.size();
    const auto d = static_cast<std::size_t>(config.dim);

    model.global_bias_ = rating_sum / static_cast<double>(records.size());
    model.user_bias_.assign(n_users, 0.0);
    model.item_bias_.assign(n_items, 0.0);
    model.user_factors_.resize(n_users * d);
    model.item_factors_.resize(n_items * d);
    auto init_rng = RngStream::derive(seed, "scorer-init");
    for (auto& w : model.user_factors_) {
        w = config.init_scale * init_rng.next_normal();
    }
    for (auto& w : model.item_factors_) {
        w = config.init_scale * init_rng.next_normal();
    }

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t n = 0; n < order.size(); ++n) {
        order[n] = n;
    }

    double lr = config.learning_rate;
    const double reg = config.regularization;
    double prev_rmse = model.rmse(pairs, ratings);
    std::vector<double> p_scratch(d);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto checkpoint_ub = model.user_bias_;
        const auto checkpoint_ib = model.item_bias_;
        const auto checkpoint_uf = model.user_factors_;
        const auto checkpoint_if = model.item_factors_;

        auto epoch_rng = RngStream::derive(seed, "scorer-epoch", static_cast<std::uint64_t>(epoch));
        bool accepted = false;
        for (int attempt = 0; attempt <= kMaxBackoffs; ++attempt) {
            auto rng = epoch_rng;  // same visit order for every retry of this epoch
            rng.shuffle(order);
            for (const std::size_t n : order) {
                const auto [u, i] = pairs[n];
                const double err = ratings[n] - model.predict_raw(u, i);
                model.user_bias_[u] += lr * (err - reg * model.user_bias_[u]);
                model.item_bias_[i] += lr * (err - reg * model.item_bias_[i]);
                double* p = &model.user_factors_[u * d];
                double* q = &model.item_factors_[i * d];
                for (std::size_t k = 0; k < d; ++k) {
                    p_scratch[k] = p[k];
                }
                for (std::size_t k = 0; k < d; ++k) {
                    p[k] += lr * (err * q[k] - reg * p[k]);
                    q[k] += lr * (err * p_scratch[k] - reg * q[k]);
                }
            }
            const double epoch_rmse = model.rmse(pairs, ratings);
            if (std::isfinite(epoch_rmse) && epoch_rmse <= prev_rmse + 1e-9) {
                prev_rmse = epoch_rmse;
                model.rmse_history_.push_back(epoch_rmse);
                accepted = true;
                break;
            }
            // Worsened or blew up: rewind and retry the epoch with a smaller step.
            model.user_bias_ = checkpoint_ub;
            model.item_bias_ = checkpoint_ib;
            model.user_factors_ = checkpoint_uf;
            model.item_factors_ = checkpoint_if;
            if (attempt == kMaxBackoffs) {
                if (!std::isfinite(epoch_rmse)) {
                    throw TrainingError("scorer training diverged at epoch " +
                                        std::to_string(epoch) + " (non-finite RMSE)");
                }
            } else {
                lr *= 0.5;
            }
        }
        if (!accepted) {
            break;  // no improving step exists at any tried rate: converged
        }
    }
    return model;
}

double MfScorer::score(const std::string& user_id, const std::string& item_id) const {
    const auto u = user_index_.find(user_id);
    if (u == user_index_.end()) {
        throw DataError("unknown user_id: " + user_id);
    }
    const auto i = item_index_.find(item_id);
    if (i == item_index_.end()) {
        throw DataError("unknown item_id: " + item_id);
    }
    return clamp_rating(predict_raw(u->second, i->second));
}

bool MfScorer::knows_user(const std::string& user_id) const {
    return user_index_.count(user_id) > 0;
}

bool MfScorer::knows_item(const std::string& item_id) const {
    return item_index_.count(item_id) > 0;
}

std::vector<double> MfScorer::item_embedding(const std::string& item_id) const {
    const auto it = item_index_.find(item_id);
    if (it == item_index_.end()) {
        throw DataError("unknown item_id: " + item_id);
    }
    const auto d = static_cast<std::size_t>(dim_);
    return {item_factors_.begin() + static_cast<std::ptrdiff_t>(it->second * d),
            item_factors_.begin() + static_cast<std::ptrdiff_t>((it->second + 1) * d)};
}

bool MfScorer::operator==(const MfScorer& other) const {
    return dim_ == other.dim_ && global_bias_ == other.global_bias_ &&
           user_ids_ == other.user_ids_ && item_ids_ == other.item_ids_ &&
           user_bias_ == other.user_bias_ && item_bias_ == other.item_bias_ &&
           user_factors_ == other.user_factors_ && item_factors_ == other.item_factors_;
}

void MfScorer::serialize_to(ByteWriter& out) const {
    out.u32(static_cast<std::uint32_t>(dim_));
    out.f64(global_bias_);
    out.u64(user_ids_.size());
    for (std::size_t u = 0; u < user_ids_.size(); ++u) {
        out.str(user_ids_[u]);
        out.f64(user_bias_[u]);
        for (int k = 0; k < dim_; ++k) {
            out.f64(user_factors_[u * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(k)]);
        }
    }
    out.u64(item_ids_.size());
    for (std::size_t i = 0; i < item_ids_.size(); ++i) {
        out.str(item_ids_[i]);
        out.f64(item_bias_[i]);
        for (int k = 0; k < dim_; ++k) {
            out.f64(item_factors_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(k)]);
        }
    }
    out.u64(rmse_history_.size());
    for (double r : rmse_history_) {
        out.f64(r);
    }
}

MfScorer MfScorer::deserialize(ByteReader& in) {
    MfScorer model;
    model.dim_ = static_cast<int>(in.u32());
    model.global_bias_ = in.f64();
    const auto d = static_cast<std::size_t>(model.dim_);
    const std::uint64_t n_users = in.u64();
    model.user_bias_.reserve(n_users);
    model.user_factors_.reserve(n_users * d);
    for (std::uint64_t u = 0; u < n_users; ++u) {
        auto id = in.str();
        model.user_index_.emplace(id, model.user_ids_.size());
        model.user_ids_.push_back(std::move(id));
        model.user_bias_.push_back(in.f64());
        for (std::size_t k = 0; k < d; ++k) {
            model.user_factors_.push_back(in.f64());
        }
    }
    const std::uint64_t n_items = in.u64();
    for (std::uint64_t i = 0; i < n_items; ++i) {
        auto id = in.str();
        model.item_index_.emplace(id, model.item_ids_.size());
        model.item_ids_.push_back(std::move(id));
        model.item_bias_.push_back(in.f64());
        for (std::size_t k = 0; k < d; ++k) {
            model.item_factors_.push_back(in.f64());
        }
    }
    const std::uint64_t n_rmse = in.u64();
    for (std::uint64_t r = 0; r < n_rmse; ++r) {
        model.rmse_history_.push_back(in.f64());
    }
    return model;
}

MfScorer train_scorer(const std::vector<InteractionRecord>& records, int dim, int epochs,
                      double learning_rate, double regularization, std::uint64_t seed) {
    ScorerConfig config;
    config.dim = dim;
    config.epochs = epochs;
    config.learning_rate = learning_rate;
    config.regularization = regularization;
    return MfScorer::train(records, config, seed);
}

double scorer_rmse(const RewardModel& scorer, const std::vector<InteractionRecord>& records) {
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& rec : records) {
        if (!scorer.knows_user(rec.user_id) || !scorer.knows_item(rec.item_id)) {
            continue;
        }
        const double err = rec.rating - scorer.score(rec.user_id, rec.item_id);
        sum_sq += err * err;
        ++n;
    }
    if (n == 0) {
        throw DataError("no scorable records for RMSE");
    }
    return std::sqrt(sum_sq / static_cast<double>(n));
}

ItemCatalog build_catalog(const std::vector<ItemRecord>& items, const MfScorer& scorer) {
    std::unordered_map<std::string, const ItemRecord*> meta;
    for (const auto& item : items) {
        meta.emplace(item.item_id, &item);
    }
    std::vector<ItemRecord> out;
    out.reserve(scorer.item_ids().size());
    for (const auto& id : scorer.item_ids()) {
        ItemRecord rec;
        const auto it = meta.find(id);
        if (it != meta.end()) {
            rec = *it->second;
        } else {
            rec.item_id = id;
        }
        rec.embedding = scorer.item_embedding(id);
        out.push_back(std::move(rec));
    }
    return ItemCatalog(std::move(out));
}

namespace {
constexpr char kModelMagic[] = {'L', 'R', 'M', 'D', 'L', '\x01'};
}

void save_model(const std::filesystem::path& path, const Model& model) {
    ByteWriter out;
    for (char c : kModelMagic) {
        out.u8(static_cast<std::uint8_t>(c));
    }
    out.u64(model.item_meta.size());
    for (const auto& item : model.item_meta) {
        out.str(item.item_id);
        out.str(item.title);
        out.u32(static_cast<std::uint32_t>(item.categories.size()));
        for (const auto& cat : item.categories) {
            out.str(cat);
        }
    }
    model.train_scorer.serialize_to(out);
    model.test_scorer.serialize_to(out);
    write_file_bytes(path, out.bytes());
}

Model load_model(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader in(bytes);
    for (char c : kModelMagic) {
        if (in.u8() != static_cast<std::uint8_t>(c)) {
            throw IoError("not a model snapshot (bad magic): " + path.string());
        }
    }
    Model model;
    const std::uint64_t n_items = in.u64();
    model.item_meta.reserve(n_items);
    for (std::uint64_t i = 0; i < n_items; ++i) {
        ItemRecord item;
        item.item_id = in.str();
        item.title = in.str();
        const std::uint32_t n_cats = in.u32();
        for (std::uint32_t c = 0; c < n_cats; ++c) {
            item.categories.push_back(in.str());
        }
        model.item_meta.push_back(std::move(item));
    }
    model.train_scorer = MfScorer::deserialize(in);
    model.test_scorer = MfScorer::deserialize(in);
    if (!in.at_end()) {
        throw IoError("corrupt model snapshot: trailing bytes");
    }
    return model;
}

}  // namespace longrec::catalog
