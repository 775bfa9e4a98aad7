#include "longrec/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "longrec/text_encoder.hpp"

namespace longrec::catalog {

namespace {

// Minimal RFC-4180-style row parser: handles quoted fields with embedded
// commas and doubled quotes. Returns one field list per call.
std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    double value = 0.0;
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    std::int64_t value = 0;
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        return std::nullopt;
    }
    return value;
}

std::vector<std::string> split_categories(const std::string& raw) {
    std::vector<std::string> out;
    std::string current;
    for (char c : raw) {
        if (c == ';' || c == '|') {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
        } else if (c == ' ' && current.empty()) {
            continue;  // trim leading spaces per tag
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        out.push_back(current);
    }
    for (auto& tag : out) {
        while (!tag.empty() && tag.back() == ' ') {
            tag.pop_back();
        }
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const std::string& t) { return t.empty(); }),
              out.end());
    return out;
}

}  // namespace

LogSchema schema_from_string(const std::string& name) {
    if (name == "generic") {
        return LogSchema::generic;
    }
    if (name == "steam") {
        return LogSchema::steam;
    }
    throw ConfigError("unknown dataset schema: " + name);
}

std::string to_string(LogSchema schema) {
    return schema == LogSchema::steam ? "steam" : "generic";
}

LoadResult load_log(const std::filesystem::path& path, LogSchema schema) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open log file: " + path.string());
    }
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw DataError("log file is empty: " + path.string());
    }
    const auto header = parse_csv_row(header_line);
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    };
    const auto user_col = column("user_id");
    const auto item_col = column("item_id");
    const auto value_col = schema == LogSchema::steam ? column("playtime") : column("rating");
    const auto ts_col = column("timestamp");
    if (!user_col || !item_col || !value_col || !ts_col) {
        throw DataError("missing required column in " + path.string() + " (need user_id,item_id," +
                        (schema == LogSchema::steam ? "playtime" : "rating") + ",timestamp)");
    }
    const auto title_col = column("title");
    const auto cats_col = column("categories");

    LoadResult result;
    std::unordered_map<std::string, std::size_t> item_index;
    std::string line;
    std::size_t line_no = 1;
    std::size_t row_id = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = parse_csv_row(line);
        const std::size_t needed =
            std::max({*user_col, *item_col, *value_col, *ts_col}) + 1;
        if (fields.size() < needed) {
            result.malformed.push_back({line_no, "too few fields"});
            continue;
        }
        InteractionRecord rec;
        rec.user_id = fields[*user_col];
        rec.item_id = fields[*item_col];
        if (rec.user_id.empty() || rec.item_id.empty()) {
            result.malformed.push_back({line_no, "empty user_id or item_id"});
            continue;
        }
        const auto ts = parse_int(fields[*ts_col]);
        if (!ts || *ts <= 0) {
            result.malformed.push_back({line_no, "unparsable or non-positive timestamp '" +
                                                     fields[*ts_col] + "'"});
            continue;
        }
        rec.timestamp = *ts;
        const auto value = parse_double(fields[*value_col]);
        if (schema == LogSchema::steam) {
            if (!value || *value < 0.0) {
                result.malformed.push_back(
                    {line_no, "unparsable or negative playtime '" + fields[*value_col] + "'"});
                continue;
            }
            rec.playtime_hours = *value;
            rec.rating = *value > 3.0 ? 5.0 : 2.0;
        } else {
            if (!value || *value < 1.0 || *value > 5.0) {
                result.malformed.push_back(
                    {line_no, "unparsable or out-of-range rating '" + fields[*value_col] + "'"});
                continue;
            }
            rec.rating = *value;
        }
        rec.row_id = row_id++;
        result.records.push_back(rec);

        auto it = item_index.find(rec.item_id);
        if (it == item_index.end()) {
            ItemRecord item;
            item.item_id = rec.item_id;
            item.title = title_col && fields.size() > *title_col && !fields[*title_col].empty()
                             ? fields[*title_col]
                             : rec.item_id;
            if (cats_col && fields.size() > *cats_col) {
                item.categories = split_categories(fields[*cats_col]);
            }
            if (item.categories.empty()) {
                item.categories = {"unknown"};
            }
            item_index.emplace(rec.item_id, result.items.size());
            result.items.push_back(std::move(item));
        } else if (result.items[it->second].title == rec.item_id && title_col &&
                   fields.size() > *title_col && !fields[*title_col].empty()) {
            // Backfill a title first seen on a later row.
            result.items[it->second].title = fields[*title_col];
        }
    }
    return result;
}

TransformResult transform_steam_ratings(const std::vector<InteractionRecord>& records) {
    TransformResult result;
    result.records.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.playtime_hours) {
            result.malformed.push_back({i + 1, "record has no playtime payload"});
            continue;
        }
        if (*rec.playtime_hours < 0.0) {
            result.malformed.push_back({i + 1, "negative playtime"});
            continue;
        }
        InteractionRecord out = rec;
        out.rating = *rec.playtime_hours > 3.0 ? 5.0 : 2.0;
        result.records.push_back(std::move(out));
    }
    return result;
}

std::vector<InteractionRecord> filter_min_interactions(std::vector<InteractionRecord> records,
                                                       std::size_t min_user,
                                                       std::size_t min_item) {
    if (min_user < 1 || min_item < 1) {
        throw ConfigError("filter thresholds must be >= 1");
    }
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, std::size_t> user_counts;
        std::unordered_map<std::string, std::size_t> item_counts;
        for (const auto& rec : records) {
            ++user_counts[rec.user_id];
            ++item_counts[rec.item_id];
        }
        std::vector<InteractionRecord> kept;
        kept.reserve(records.size());
        for (auto& rec : records) {
            if (user_counts[rec.user_id] >= min_user && item_counts[rec.item_id] >= min_item) {
                kept.push_back(std::move(rec));
            } else {
                changed = true;
            }
        }
        records = std::move(kept);
    }
    return records;
}

DatasetSplit chronological_split(const std::vector<InteractionRecord>& records) {
    // Group per user, preserving input order within each user.
    std::unordered_map<std::string, std::vector<std::size_t>> per_user;
    std::vector<std::string> user_order;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& bucket = per_user[records[i].user_id];
        if (bucket.empty()) {
            user_order.push_back(records[i].user_id);
        }
        bucket.push_back(i);
    }
    DatasetSplit split;
    for (const auto& user : user_order) {
        auto indices = per_user[user];
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return records[a].timestamp < records[b].timestamp;
        });
        const std::size_t n = indices.size();
        const std::size_t n_train = (n + 1) / 2;  // odd counts round toward train
        for (std::size_t k = 0; k < n; ++k) {
            (k < n_train ? split.train : split.test).push_back(records[indices[k]]);
        }
    }
    return split;
}

ItemCatalog::ItemCatalog(std::vector<ItemRecord> items) : items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        auto& item = items_[i];
        if (item.categories.empty()) {
            item.categories = {"unknown"};
        }
        if (item.title.empty()) {
            item.title = item.item_id;
        }
        if (!index_.emplace(item.item_id, i).second) {
            throw DataError("duplicate item_id in catalog: " + item.item_id);
        }
        if (i == 0) {
            dim_ = static_cast<int>(item.embedding.size());
        } else if (static_cast<int>(item.embedding.size()) != dim_) {
            throw DataError("catalog embeddings disagree on dimension for item " + item.item_id);
        }
    }
    if (!items_.empty() && dim_ == 0) {
        throw DataError("catalog items must carry embeddings with dimension > 0");
    }
}

bool ItemCatalog::contains(const std::string& item_id) const {
    return index_.count(item_id) > 0;
}

const ItemRecord& ItemCatalog::get(const std::string& item_id) const {
    const auto it = index_.find(item_id);
    if (it == index_.end()) {
        throw DataError("unknown item_id: " + item_id);
    }
    return items_[it->second];
}

std::vector<std::string> ItemCatalog::item_ids() const {
    std::vector<std::string> ids;
    ids.reserve(items_.size());
    for (const auto& item : items_) {
        ids.push_back(item.item_id);
    }
    return ids;
}

double item_distance(const ItemCatalog& catalog, const std::string& item_i,
                     const std::string& item_j) {
    return euclidean_distance(catalog.get(item_i).embedding, catalog.get(item_j).embedding);
}

double pairwise_distance_percentile(const ItemCatalog& catalog, double q, std::size_t max_pairs,
                                    std::uint64_t seed) {
    if (q < 0.0 || q > 1.0) {
        throw ConfigError("percentile must be in [0,1]");
    }
    const auto n = catalog.size();
    if (n < 2) {
        throw DataError("need at least two items to calibrate distances");
    }
    std::vector<double> distances;
    const std::size_t total_pairs = n * (n - 1) / 2;
    if (total_pairs <= max_pairs) {
        distances.reserve(total_pairs);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                distances.push_back(euclidean_distance(catalog.items()[i].embedding,
                                                       catalog.items()[j].embedding));
            }
        }
    } else {
        auto rng = RngStream::derive(seed, "beta-calibration");
        distances.reserve(max_pairs);
        for (std::size_t k = 0; k < max_pairs; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
            auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 2));
            if (j >= i) {
                ++j;
            }
            distances.push_back(
                euclidean_distance(catalog.items()[i].embedding, catalog.items()[j].embedding));
        }
    }
    std::sort(distances.begin(), distances.end());
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(distances.size() - 1) + 0.5);
    return distances[std::min(idx, distances.size() - 1)];
}

}  // namespace longrec::catalog
