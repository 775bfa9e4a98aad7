#include "longrec/text_encoder.hpp"

#include <cctype>
#include <cmath>

namespace longrec {

HashingEncoder::HashingEncoder(int dim) : dim_(dim) {
    if (dim <= 0) {
        throw ConfigError("encoder dimension must be positive");
    }
}

std::vector<double> HashingEncoder::encode(std::string_view text) const {
    if (text.empty()) {
        throw DataError("cannot encode empty text");
    }
    std::vector<double> vec(static_cast<std::size_t>(dim_), 0.0);
    std::uint64_t h = kFnvOffset;
    bool in_token = false;
    auto flush = [&]() {
        if (!in_token) {
            return;
        }
        const auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim_));
        vec[bucket] += (h >> 63) ? -1.0 : 1.0;
        h = kFnvOffset;
        in_token = false;
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            const auto lower = static_cast<unsigned char>(std::tolower(c));
            h ^= lower;
            h *= kFnvPrime;
            in_token = true;
        } else {
            flush();
        }
    }
    flush();

    double norm_sq = 0.0;
    for (double v : vec) {
        norm_sq += v * v;
    }
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : vec) {
            v *= inv;
        }
    }
    return vec;
}

std::shared_ptr<const TextEncoder> default_encoder() {
    static const auto encoder = std::make_shared<const HashingEncoder>();
    return encoder;
}

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DataError("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace longrec
