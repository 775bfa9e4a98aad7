#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "longrec/core.hpp"

namespace longrec::catalog {

struct ItemRecord {
    std::string item_id;
    std::string title;                     // defaults to item_id when absent
    std::vector<std::string> categories;   // never empty; defaults to {"unknown"}
    std::vector<double> embedding;         // shared dimension D within a catalog
};

struct InteractionRecord {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;      // in [1, 5]
    std::int64_t timestamp = 0;  // strictly positive epoch seconds
    std::optional<double> playtime_hours;  // steam schema only, >= 0
    std::size_t row_id = 0;   // 0-based position among valid rows of the source file
};

struct RowError {
    std::size_t line;  // 1-based line number in the source file
    std::string message;
};

enum class LogSchema { generic, steam };

LogSchema schema_from_string(const std::string& name);
std::string to_string(LogSchema schema);

struct LoadResult {
    std::vector<InteractionRecord> records;
    std::vector<ItemRecord> items;     // unique, first-seen order, no embeddings yet
    std::vector<RowError> malformed;   // row-level failures, aggregated
};

/// Reads a CSV interaction log. Header: user_id,item_id,rating,timestamp with
/// optional trailing title,categories columns; the steam schema replaces the
/// rating column with playtime (hours) and derives ratings via
/// transform_steam_ratings. Malformed rows are counted and reported, not fatal.
/// Throws IoError for a missing file and DataError for a missing column.
LoadResult load_log(const std::filesystem::path& path, LogSchema schema);

struct TransformResult {
    std::vector<InteractionRecord> records;
    std::vector<RowError> malformed;
};

/// Rating 5 when playtime exceeds 3 hours (strict), otherwise 2.
/// Rows with negative or missing playtime become row-level errors.
TransformResult transform_steam_ratings(const std::vector<InteractionRecord>& records);

/// Iterated k-core filter: removes users with fewer than min_user interactions
/// and items with fewer than min_item until a fixed point. Idempotent.
std::vector<InteractionRecord> filter_min_interactions(std::vector<InteractionRecord> records,
                                                       std::size_t min_user,
                                                       std::size_t min_item);

struct DatasetSplit {
    std::vector<InteractionRecord> train;
    std::vector<InteractionRecord> test;
};

/// Per-user chronological split: the earlier half of each user's records goes
/// to train, the later half to test. Odd counts round toward train; equal
/// timestamps keep their input order.
DatasetSplit chronological_split(const std::vector<InteractionRecord>& records);

/// Immutable item catalog with one embedding space.
class ItemCatalog {
public:
    ItemCatalog() = default;
    explicit ItemCatalog(std::vector<ItemRecord> items);

    std::size_t size() const { return items_.size(); }
    bool contains(const std::string& item_id) const;
    const ItemRecord& get(const std::string& item_id) const;  // throws DataError when unknown
    const std::vector<ItemRecord>& items() const { return items_; }
    int dim() const { return dim_; }

    /// Ids in deterministic (insertion) order.
    std::vector<std::string> item_ids() const;

private:
    std::vector<ItemRecord> items_;
    std::unordered_map<std::string, std::size_t> index_;
    int dim_ = 0;
};

/// Euclidean distance between the two items' embeddings.
double item_distance(const ItemCatalog& catalog, const std::string& item_i,
                     const std::string& item_j);

/// Empirical q-quantile (q in [0,1]) of pairwise item distances, estimated
/// from up to max_pairs sampled pairs. Used to calibrate the quit threshold
/// beta for a given embedding space.
double pairwise_distance_percentile(const ItemCatalog& catalog, double q,
                                    std::size_t max_pairs, std::uint64_t seed);

}  // namespace longrec::catalog
