#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "longrec/core.hpp"

namespace longrec {

/// Text-to-vector encoder shared by the memory stores and by action grounding.
/// Implementations must be deterministic: the same text always encodes to the
/// same vector.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int dim() const = 0;
    virtual std::vector<double> encode(std::string_view text) const = 0;
};

/// Feature-hashing bag-of-tokens encoder.
///
/// Tokenization lowercases and splits on non-alphanumeric runs, which also
/// normalizes whitespace ("a" and "a " encode identically). Each token lands
/// in bucket fnv1a64(token) % dim with a sign taken from the hash's top bit;
/// the result is L2-normalized when it has nonzero norm. Fully hermetic: no
/// model files, no network, stable across runs and platforms.
class HashingEncoder final : public TextEncoder {
public:
    explicit HashingEncoder(int dim = kDefaultDim);

    int dim() const override { return dim_; }

    /// Throws DataError on empty text.
    std::vector<double> encode(std::string_view text) const override;

    static constexpr int kDefaultDim = 256;

private:
    int dim_;
};

std::shared_ptr<const TextEncoder> default_encoder();

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace longrec
