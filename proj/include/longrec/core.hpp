#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace longrec {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Bad input data: malformed records, unknown ids, invariant violations.
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(message) {}
};

/// Filesystem problems: missing files, unreadable or corrupt snapshots.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(message) {}
};

/// Invalid experiment or dataset configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(message) {}
};

/// Chat backend failures (transport, protocol, exhausted retries).
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message) : Error(message) {}
};

class AuthError : public BackendError {
public:
    explicit AuthError(const std::string& message) : BackendError(message) {}
};

/// Prompt exceeds the configured context limit; raised before any network call.
class ContextLengthError : public BackendError {
public:
    explicit ContextLengthError(const std::string& message) : BackendError(message) {}
};

/// Prompt template rendering failure (unbound required slot).
class PromptError : public Error {
public:
    explicit PromptError(const std::string& message) : Error(message) {}
};

/// Scorer training failure (divergence).
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& message) : Error(message) {}
};

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t fnv1a64_mix(std::uint64_t value, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffULL;
        h *= kFnvPrime;
    }
    return h;
}

/// Deterministic, portable random stream (splitmix64 core, Box-Muller normals).
/// Every stochastic path in the project draws from a stream derived from the
/// experiment seed, so runs are reproducible bit-for-bit on the same build.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    /// Independent substream addressed by (seed, label, index).
    static RngStream derive(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

    std::uint64_t next_u64();
    double next_unit();    // uniform in [0, 1)
    double next_normal();  // standard normal
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive bounds

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t state_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Fixed-point formatting used everywhere a float reaches text output,
/// so rendered prompts and reports are deterministic.
std::string format_fixed(double value, int digits);

std::string to_hex(std::uint64_t value);

}  // namespace longrec
