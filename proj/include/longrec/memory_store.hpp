#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "longrec/text_encoder.hpp"

namespace longrec::memory {

enum class StoreKind : std::uint8_t { planner = 0, actor = 1, critic = 2 };

std::string to_string(StoreKind kind);

/// A post-episode reflection: high-level guidance for future planning.
struct ReflectionPayload {
    std::string text;
    bool operator==(const ReflectionPayload&) const = default;
};

/// One micro-learning experience: a state, the action taken, and whether the
/// action's advantage was non-negative (v=1) or negative (v=0).
struct ActorExpPayload {
    std::string state_digest;
    std::string action_item_id;
    int advantage_v = 0;  // exactly 0 or 1
    bool operator==(const ActorExpPayload&) const = default;
};

/// A stored state-value estimate used as an in-context exemplar.
struct CriticExpPayload {
    std::string state_digest;
    double value_estimate = 0.0;
    bool operator==(const CriticExpPayload&) const = default;
};

using Payload = std::variant<ReflectionPayload, ActorExpPayload, CriticExpPayload>;

struct MemoryEntry {
    std::string key_text;
    Payload payload;
    std::vector<double> key_vec;  // encoder(key_text) at insert time
    std::uint64_t insert_seq = 0;
    bool operator==(const MemoryEntry&) const = default;
};

/// Append-only, embedding-keyed memory store with exact retrieval.
///
/// Retrieval is an exact linear scan over all entries; stores stay small
/// enough that approximate indexing would only cost testability. Reads are
/// const and safe to run concurrently; writes must be serialized by the
/// caller (training runs episodes sequentially, evaluation never writes).
class VectorStore {
public:
    VectorStore(StoreKind kind, std::shared_ptr<const TextEncoder> encoder);

    StoreKind kind() const { return kind_; }
    int dim() const { return encoder_->dim(); }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<MemoryEntry>& entries() const { return entries_; }
    const TextEncoder& encoder() const { return *encoder_; }

    /// Appends an entry keyed by encoder(key_text); assigns the next insert_seq.
    const MemoryEntry& insert(std::string key_text, Payload payload);

    /// Appends a pre-built entry. Dimension must match the store.
    const MemoryEntry& insert_entry(MemoryEntry entry);

    /// K entries with the smallest Euclidean distance to the query embedding,
    /// ascending distance, ties broken by smaller insert_seq.
    std::vector<MemoryEntry> retrieve_topk(std::string_view query_text, std::size_t k) const;

    /// All entries with distance strictly below tau, ascending distance,
    /// ties broken by smaller insert_seq.
    std::vector<MemoryEntry> retrieve_threshold(std::string_view query_text, double tau) const;

    /// Versioned binary snapshot; save -> load -> save is byte-identical.
    void save(const std::filesystem::path& path) const;
    static VectorStore load(const std::filesystem::path& path,
                            std::shared_ptr<const TextEncoder> encoder);

    std::vector<std::uint8_t> serialize() const;
    static VectorStore deserialize(const std::vector<std::uint8_t>& bytes,
                                   std::shared_ptr<const TextEncoder> encoder);

    /// Hash of the serialized content; used to assert evaluation never writes.
    std::uint64_t content_hash() const;

    bool operator==(const VectorStore& other) const {
        return kind_ == other.kind_ && entries_ == other.entries_;
    }

private:
    struct Scored {
        double distance;
        std::size_t index;
    };
    std::vector<Scored> scan(std::string_view query_text) const;

    StoreKind kind_;
    std::shared_ptr<const TextEncoder> encoder_;
    std::vector<MemoryEntry> entries_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace longrec::memory
