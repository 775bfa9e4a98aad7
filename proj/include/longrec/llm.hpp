#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "longrec/core.hpp"

namespace longrec::llm {

enum class Role { system, user, assistant };

std::string to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string text;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.5;
    int max_tokens = 512;
    std::string model_id;
    std::string tag;  // caller role label, recorded in the audit log

    void validate() const;  // at least one message, finite temperature >= 0
    std::string joined_text() const;
    std::size_t prompt_chars() const;
};

/// One chat-completion backend. complete() returns the assistant text or
/// throws a BackendError subclass.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic scripted stub
// ---------------------------------------------------------------------------

/// Emits responses[count(prompt, key) % responses.size()]; the occurrence
/// count of `key` in the rendered prompt acts as a step counter, so the stub
/// stays a pure function of the request.
struct CycleGenerator {
    std::string key;
    std::vector<std::string> responses;
};

/// Averages every number following `marker` in the prompt and replies
/// "<prefix><mean + noise>"; noise is uniform in [-amplitude, amplitude],
/// drawn from an RNG keyed by (backend seed, prompt hash). Falls back to
/// `fallback` when the prompt contains no such numbers.
struct AverageGenerator {
    std::string marker = "estimate:";
    std::string prefix = "VALUE: ";
    double noise_amplitude = 0.0;
    double fallback = 0.0;
};

struct StubRule {
    std::vector<std::string> contains;  // all substrings must appear; empty = catch-all
    std::string respond;
    std::optional<CycleGenerator> cycle;
    std::optional<AverageGenerator> average;
};

/// Ordered match rules over the rendered prompt; the first matching rule
/// fires. A catch-all rule (no matchers) is mandatory.
struct StubScript {
    std::vector<StubRule> rules;

    void validate() const;
    static StubScript from_json_file(const std::filesystem::path& path);
};

/// Deterministic backend: the response is a pure function of
/// (script, seed, request). Identical requests always get identical replies,
/// which also makes concurrent use trivially safe.
class StubBackend final : public ChatBackend {
public:
    StubBackend(StubScript script, std::uint64_t seed);

    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return "stub"; }

    void reseed(std::uint64_t seed) { seed_ = seed; }

private:
    StubScript script_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// HTTP backends (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    bool require_auth = true;  // false for local servers
    int max_attempts = 3;
    double backoff_base_seconds = 0.5;
    std::size_t context_limit_chars = 200000;
    int max_inflight = 4;
    double rate_limit_per_second = 0.0;  // <= 0 disables the token bucket
};

/// OpenAI-compatible chat-completions client over HTTP(S). Retries transient
/// failures (connect errors, 408/429/5xx) with exponential backoff; rejects
/// oversized prompts before any network traffic; optional token-bucket rate
/// limit and in-flight cap.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ~HttpChatBackend() override;

    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return config_.require_auth ? "openai" : "local"; }

private:
    struct Impl;
    HttpBackendConfig config_;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Audit log and gateway
// ---------------------------------------------------------------------------

struct AuditRecord {
    std::string tag;
    std::string backend;
    std::string prompt;
    std::string response;  // "<error: ...>" when the call failed
    bool ok = true;
};

/// Thread-safe append-only record of every LLM call, optionally mirrored to a
/// JSONL file. Ablation checks count calls per tag.
class AuditLog {
public:
    void open_mirror(const std::filesystem::path& path);
    void append(AuditRecord record);
    std::size_t count_tag(const std::string& tag) const;
    std::size_t size() const;
    std::vector<AuditRecord> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::vector<AuditRecord> records_;
    std::optional<std::filesystem::path> mirror_path_;
};

/// Single entry point the agent uses for every LLM call: dispatches to the
/// configured backend and records the exchange in the audit log.
class Gateway {
public:
    Gateway(std::shared_ptr<ChatBackend> backend, AuditLog* audit = nullptr)
        : backend_(std::move(backend)), audit_(audit) {}

    std::string complete(const ChatRequest& request);
    ChatBackend& backend() { return *backend_; }
    AuditLog* audit() { return audit_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    AuditLog* audit_;
};

}  // namespace longrec::llm
