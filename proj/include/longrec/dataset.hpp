#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "longrec/catalog.hpp"
#include "longrec/scorer.hpp"

namespace longrec::catalog {

/// Declarative description of one offline log: where it lives, how to parse
/// it, how to filter it, and how to train the per-split scorers.
struct DatasetManifest {
    std::string csv_path;  // resolved relative to the manifest file
    LogSchema schema = LogSchema::generic;
    std::size_t min_user_interactions = 1;
    std::size_t min_item_interactions = 1;
    ScorerConfig scorer;

    static DatasetManifest from_json_file(const std::filesystem::path& path);
};

/// Ingested dataset: catalog metadata plus the chronological split.
struct Dataset {
    std::vector<ItemRecord> items;
    DatasetSplit split;
    std::size_t malformed_rows = 0;
};

/// load -> (schema transform) -> k-core filter -> chronological split.
Dataset ingest(const DatasetManifest& manifest);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

/// Human-readable JSON listing the row ids assigned to each side of the split.
void write_split_index(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace longrec::catalog
