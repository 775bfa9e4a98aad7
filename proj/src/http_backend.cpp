#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#ifdef LONGREC_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "longrec/llm.hpp"

namespace longrec::llm {

using nlohmann::json;

namespace {

bool transient_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

}  // namespace

struct HttpChatBackend::Impl {
    explicit Impl(const HttpBackendConfig& config)
        : inflight_limit(std::max(1, config.max_inflight)),
          rate_per_second(config.rate_limit_per_second),
          bucket_tokens(rate_per_second > 0.0 ? rate_per_second : 0.0),
          last_refill(std::chrono::steady_clock::now()) {}

    // In-flight cap.
    std::mutex gate_mutex;
    std::condition_variable gate_cv;
    int inflight = 0;
    int inflight_limit;

    // Token bucket; capacity equals one second of refill.
    double rate_per_second;
    double bucket_tokens;
    std::chrono::steady_clock::time_point last_refill;

    void acquire() {
        std::unique_lock<std::mutex> lock(gate_mutex);
        gate_cv.wait(lock, [&] { return inflight < inflight_limit; });
        ++inflight;
        if (rate_per_second > 0.0) {
            for (;;) {
                const auto now = std::chrono::steady_clock::now();
                const double elapsed = std::chrono::duration<double>(now - last_refill).count();
                bucket_tokens = std::min(rate_per_second, bucket_tokens + elapsed * rate_per_second);
                last_refill = now;
                if (bucket_tokens >= 1.0) {
                    bucket_tokens -= 1.0;
                    break;
                }
                const double wait_s = (1.0 - bucket_tokens) / rate_per_second;
                lock.unlock();
                std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
                lock.lock();
            }
        }
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(gate_mutex);
            --inflight;
        }
        gate_cv.notify_one();
    }
};

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_)) {}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::complete(const ChatRequest& request) {
    request.validate();

    // Local guard: refuse oversized prompts before any network traffic.
    const std::size_t prompt_size = request.prompt_chars();
    if (prompt_size > config_.context_limit_chars) {
        throw ContextLengthError("rendered prompt is " + std::to_string(prompt_size) +
                                 " chars, over the configured context limit of " +
                                 std::to_string(config_.context_limit_chars));
    }

    std::string api_key;
    if (config_.require_auth) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key) {
            throw AuthError("API key environment variable " + config_.api_key_env + " is not set");
        }
        api_key = key;
    }

    json body;
    body["model"] = request.model_id;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    json messages = json::array();
    for (const auto& message : request.messages) {
        messages.push_back({{"role", to_string(message.role)}, {"content", message.text}});
    }
    body["messages"] = std::move(messages);
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }

    impl_->acquire();
    struct Release {
        Impl* impl;
        ~Release() { impl->release(); }
    } release{impl_.get()};

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            const double delay =
                config_.backoff_base_seconds * std::pow(2.0, static_cast<double>(attempt - 2));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        auto result = client.Post(config_.path, headers, payload, "application/json");
        if (!result) {
            last_error = "connection failure: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status == 401 || result->status == 403) {
            throw AuthError("authentication failed (HTTP " + std::to_string(result->status) + ")");
        }
        if (transient_status(result->status)) {
            last_error = "transient HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw BackendError("HTTP " + std::to_string(result->status) + ": " + result->body);
        }
        try {
            const json response = json::parse(result->body);
            return response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed chat-completion response: ") + e.what());
        }
    }
    throw BackendError("exhausted " + std::to_string(config_.max_attempts) +
                       " attempts; last error: " + last_error);
}

}  // namespace longrec::llm
