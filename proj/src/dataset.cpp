#include "longrec/dataset.hpp"

#include <json.hpp>

#include "longrec/binio.hpp"

namespace longrec::catalog {

namespace {

using nlohmann::json;

constexpr char kDatasetMagic[] = {'L', 'R', 'D', 'T', 'A', '\x01'};

void write_records(ByteWriter& out, const std::vector<InteractionRecord>& records) {
    out.u64(records.size());
    for (const auto& rec : records) {
        out.str(rec.user_id);
        out.str(rec.item_id);
        out.f64(rec.rating);
        out.i64(rec.timestamp);
        out.u8(rec.playtime_hours ? 1 : 0);
        if (rec.playtime_hours) {
            out.f64(*rec.playtime_hours);
        }
        out.u64(rec.row_id);
    }
}

std::vector<InteractionRecord> read_records(ByteReader& in) {
    const std::uint64_t n = in.u64();
    std::vector<InteractionRecord> records;
    records.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        InteractionRecord rec;
        rec.user_id = in.str();
        rec.item_id = in.str();
        rec.rating = in.f64();
        rec.timestamp = in.i64();
        if (in.u8()) {
            rec.playtime_hours = in.f64();
        }
        rec.row_id = in.u64();
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

DatasetManifest DatasetManifest::from_json_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file_text(path));
    } catch (const IoError& e) {
        throw ConfigError(std::string("cannot read dataset manifest: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError("invalid dataset manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    try {
        manifest.csv_path =
            (path.parent_path() / doc.at("csv").get<std::string>()).lexically_normal().string();
        manifest.schema = schema_from_string(doc.value("schema", std::string("generic")));
        manifest.min_user_interactions = doc.value("min_user_interactions", std::size_t{1});
        manifest.min_item_interactions = doc.value("min_item_interactions", std::size_t{1});
        if (doc.contains("scorer")) {
            const auto& s = doc["scorer"];
            manifest.scorer.dim = s.value("dim", manifest.scorer.dim);
            manifest.scorer.epochs = s.value("epochs", manifest.scorer.epochs);
            manifest.scorer.learning_rate = s.value("learning_rate", manifest.scorer.learning_rate);
            manifest.scorer.regularization =
                s.value("regularization", manifest.scorer.regularization);
            manifest.scorer.init_scale = s.value("init_scale", manifest.scorer.init_scale);
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid dataset manifest " + path.string() + ": " + e.what());
    }
    if (manifest.min_user_interactions < 1 || manifest.min_item_interactions < 1) {
        throw ConfigError("manifest filter thresholds must be >= 1");
    }
    return manifest;
}

Dataset ingest(const DatasetManifest& manifest) {
    // Steam logs already get their ratings assigned inside load_log; the
    // transform-then-filter order matters and is fixed here.
    auto loaded = load_log(manifest.csv_path, manifest.schema);
    auto filtered = filter_min_interactions(std::move(loaded.records),
                                            manifest.min_user_interactions,
                                            manifest.min_item_interactions);
    Dataset dataset;
    dataset.malformed_rows = loaded.malformed.size();
    dataset.split = chronological_split(filtered);

    // Keep only items that survive filtering, in first-seen order.
    std::unordered_map<std::string, bool> surviving;
    for (const auto& rec : filtered) {
        surviving[rec.item_id] = true;
    }
    for (auto& item : loaded.items) {
        if (surviving.count(item.item_id)) {
            dataset.items.push_back(std::move(item));
        }
    }
    return dataset;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    ByteWriter out;
    for (char c : kDatasetMagic) {
        out.u8(static_cast<std::uint8_t>(c));
    }
    out.u64(dataset.malformed_rows);
    out.u64(dataset.items.size());
    for (const auto& item : dataset.items) {
        out.str(item.item_id);
        out.str(item.title);
        out.u32(static_cast<std::uint32_t>(item.categories.size()));
        for (const auto& cat : item.categories) {
            out.str(cat);
        }
    }
    write_records(out, dataset.split.train);
    write_records(out, dataset.split.test);
    write_file_bytes(path, out.bytes());
}

Dataset load_dataset(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader in(bytes);
    for (char c : kDatasetMagic) {
        if (in.u8() != static_cast<std::uint8_t>(c)) {
            throw IoError("not a dataset snapshot (bad magic): " + path.string());
        }
    }
    Dataset dataset;
    dataset.malformed_rows = in.u64();
    const std::uint64_t n_items = in.u64();
    dataset.items.reserve(n_items);
    for (std::uint64_t i = 0; i < n_items; ++i) {
        ItemRecord item;
        item.item_id = in.str();
        item.title = in.str();
        const std::uint32_t n_cats = in.u32();
        for (std::uint32_t c = 0; c < n_cats; ++c) {
            item.categories.push_back(in.str());
        }
        dataset.items.push_back(std::move(item));
    }
    dataset.split.train = read_records(in);
    dataset.split.test = read_records(in);
    if (!in.at_end()) {
        throw IoError("corrupt dataset snapshot: trailing bytes");
    }
    return dataset;
}

void write_split_index(const std::filesystem::path& path, const Dataset& dataset) {
    json doc;
    doc["version"] = 1;
    json train = json::array();
    for (const auto& rec : dataset.split.train) {
        train.push_back(rec.row_id);
    }
    json test = json::array();
    for (const auto& rec : dataset.split.test) {
        test.push_back(rec.row_id);
    }
    doc["train"] = std::move(train);
    doc["test"] = std::move(test);
    write_file_text(path, doc.dump(2) + "\n");
}

}  // namespace longrec::catalog
