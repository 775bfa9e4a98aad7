#include "longrec/memory_store.hpp"

#include <algorithm>

#include "longrec/binio.hpp"

namespace longrec::memory {

namespace {

constexpr char kMagic[] = {'L', 'R', 'M', 'E', 'M', '\x01'};

void write_entry(ByteWriter& out, const MemoryEntry& entry) {
    ByteWriter body;
    body.u64(entry.insert_seq);
    body.str(entry.key_text);
    if (const auto* r = std::get_if<ReflectionPayload>(&entry.payload)) {
        body.u8(0);
        body.str(r->text);
    } else if (const auto* a = std::get_if<ActorExpPayload>(&entry.payload)) {
        body.u8(1);
        body.str(a->state_digest);
        body.str(a->action_item_id);
        body.u8(static_cast<std::uint8_t>(a->advantage_v));
    } else {
        const auto& c = std::get<CriticExpPayload>(entry.payload);
        body.u8(2);
        body.str(c.state_digest);
        body.f64(c.value_estimate);
    }
    body.u32(static_cast<std::uint32_t>(entry.key_vec.size()));
    for (double v : entry.key_vec) {
        body.f64(v);
    }
    out.raw(body.bytes());
}

MemoryEntry read_entry(ByteReader& in) {
    const std::uint32_t len = in.u32();
    const std::size_t end = in.position() + len;
    MemoryEntry entry;
    entry.insert_seq = in.u64();
    entry.key_text = in.str();
    const std::uint8_t tag = in.u8();
    switch (tag) {
        case 0: {
            ReflectionPayload p;
            p.text = in.str();
            entry.payload = std::move(p);
            break;
        }
        case 1: {
            ActorExpPayload p;
            p.state_digest = in.str();
            p.action_item_id = in.str();
            p.advantage_v = in.u8();
            if (p.advantage_v != 0 && p.advantage_v != 1) {
                throw IoError("corrupt snapshot: advantage_v out of {0,1}");
            }
            entry.payload = std::move(p);
            break;
        }
        case 2: {
            CriticExpPayload p;
            p.state_digest = in.str();
            p.value_estimate = in.f64();
            entry.payload = std::move(p);
            break;
        }
        default:
            throw IoError("corrupt snapshot: unknown payload tag " + std::to_string(tag));
    }
    const std::uint32_t n = in.u32();
    entry.key_vec.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        entry.key_vec[i] = in.f64();
    }
    if (in.position() != end) {
        throw IoError("corrupt snapshot: entry length mismatch");
    }
    return entry;
}

}  // namespace

std::string to_string(StoreKind kind) {
    switch (kind) {
        case StoreKind::planner: return "planner";
        case StoreKind::actor: return "actor";
        case StoreKind::critic: return "critic";
    }
    return "unknown";
}

VectorStore::VectorStore(StoreKind kind, std::shared_ptr<const TextEncoder> encoder)
    : kind_(kind), encoder_(std::move(encoder)) {
    if (!encoder_) {
        throw ConfigError("VectorStore requires an encoder");
    }
}

const MemoryEntry& VectorStore::insert(std::string key_text, Payload payload) {
    MemoryEntry entry;
    entry.key_vec = encoder_->encode(key_text);
    entry.key_text = std::move(key_text);
    entry.payload = std::move(payload);
    return insert_entry(std::move(entry));
}

const MemoryEntry& VectorStore::insert_entry(MemoryEntry entry) {
    if (entry.key_vec.size() != static_cast<std::size_t>(dim())) {
        throw DataError("memory entry dimension " + std::to_string(entry.key_vec.size()) +
                        " does not match store dimension " + std::to_string(dim()));
    }
    if (const auto* exp = std::get_if<ActorExpPayload>(&entry.payload)) {
        if (exp->advantage_v != 0 && exp->advantage_v != 1) {
            throw DataError("actor experience advantage_v must be 0 or 1, got " +
                            std::to_string(exp->advantage_v));
        }
    }
    entry.insert_seq = next_seq_++;
    entries_.push_back(std::move(entry));
    return entries_.back();
}

std::vector<VectorStore::Scored> VectorStore::scan(std::string_view query_text) const {
    const std::vector<double> query = encoder_->encode(std::string(query_text));
    std::vector<Scored> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        scored.push_back({euclidean_distance(query, entries_[i].key_vec), i});
    }
    std::sort(scored.begin(), scored.end(), [this](const Scored& a, const Scored& b) {
        if (a.distance != b.distance) {
            return a.distance < b.distance;
        }
        return entries_[a.index].insert_seq < entries_[b.index].insert_seq;
    });
    return scored;
}

std::vector<MemoryEntry> VectorStore::retrieve_topk(std::string_view query_text,
                                                    std::size_t k) const {
    std::vector<MemoryEntry> out;
    if (k == 0 || entries_.empty()) {
        return out;
    }
    const auto scored = scan(query_text);
    const std::size_t n = std::min(k, scored.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(entries_[scored[i].index]);
    }
    return out;
}

std::vector<MemoryEntry> VectorStore::retrieve_threshold(std::string_view query_text,
                                                         double tau) const {
    std::vector<MemoryEntry> out;
    if (entries_.empty()) {
        return out;
    }
    for (const auto& s : scan(query_text)) {
        if (s.distance < tau) {
            out.push_back(entries_[s.index]);
        } else {
            break;  // scan is ascending
        }
    }
    return out;
}

std::vector<std::uint8_t> VectorStore::serialize() const {
    ByteWriter out;
    for (char c : kMagic) {
        out.u8(static_cast<std::uint8_t>(c));
    }
    out.u8(static_cast<std::uint8_t>(kind_));
    out.u32(static_cast<std::uint32_t>(dim()));
    out.u64(entries_.size());
    for (const auto& entry : entries_) {
        write_entry(out, entry);
    }
    return out.bytes();
}

VectorStore VectorStore::deserialize(const std::vector<std::uint8_t>& bytes,
                                     std::shared_ptr<const TextEncoder> encoder) {
    ByteReader in(bytes);
    for (char c : kMagic) {
        if (in.u8() != static_cast<std::uint8_t>(c)) {
            throw IoError("not a memory snapshot (bad magic)");
        }
    }
    const std::uint8_t kind_byte = in.u8();
    if (kind_byte > 2) {
        throw IoError("corrupt snapshot: unknown store kind " + std::to_string(kind_byte));
    }
    VectorStore store(static_cast<StoreKind>(kind_byte), std::move(encoder));
    const std::uint32_t dim = in.u32();
    if (dim != static_cast<std::uint32_t>(store.dim())) {
        throw IoError("snapshot dimension " + std::to_string(dim) +
                      " does not match encoder dimension " + std::to_string(store.dim()));
    }
    const std::uint64_t count = in.u64();
    store.entries_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        MemoryEntry entry = read_entry(in);
        const std::uint64_t seq = entry.insert_seq;
        store.entries_.push_back(std::move(entry));
        store.next_seq_ = std::max(store.next_seq_, seq + 1);
    }
    if (!in.at_end()) {
        throw IoError("corrupt snapshot: trailing bytes");
    }
    return store;
}

void VectorStore::save(const std::filesystem::path& path) const {
    write_file_bytes(path, serialize());
}

VectorStore VectorStore::load(const std::filesystem::path& path,
                              std::shared_ptr<const TextEncoder> encoder) {
    return deserialize(read_file_bytes(path), std::move(encoder));
}

std::uint64_t VectorStore::content_hash() const {
    const auto bytes = serialize();
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace longrec::memory
