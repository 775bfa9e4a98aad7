#include "longrec/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace longrec::llm {

namespace {

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

std::size_t find_marker(std::string_view text, std::string_view marker) {
    if (marker.size() > text.size()) {
        return std::string_view::npos;
    }
    for (std::size_t i = 0; i + marker.size() <= text.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < marker.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(text[i + k])) !=
                std::tolower(static_cast<unsigned char>(marker[k]))) {
                match = false;
                break;
            }
        }
        if (match) {
            return i;
        }
    }
    return std::string_view::npos;
}

/// Parses the first decimal number at or after `from`. A number is an optional
/// sign followed by digits with an optional fractional part.
std::optional<double> first_number(std::string_view text, std::size_t from) {
    for (std::size_t i = from; i < text.size(); ++i) {
        if (!is_digit(text[i])) {
            continue;
        }
        std::size_t start = i;
        if (start > from && (text[start - 1] == '-' || text[start - 1] == '+')) {
            --start;
        }
        std::size_t end = i;
        while (end < text.size() && is_digit(text[end])) {
            ++end;
        }
        if (end < text.size() && text[end] == '.' && end + 1 < text.size() &&
            is_digit(text[end + 1])) {
            ++end;
            while (end < text.size() && is_digit(text[end])) {
                ++end;
            }
        }
        double value = 0.0;
        const auto result = std::from_chars(text.data() + start, text.data() + end, value);
        if (result.ec == std::errc()) {
            return value;
        }
        i = end;
    }
    return std::nullopt;
}

std::optional<double> last_number(std::string_view text) {
    std::optional<double> found;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!is_digit(text[pos])) {
            ++pos;
            continue;
        }
        std::size_t start = pos;
        if (start > 0 && (text[start - 1] == '-' || text[start - 1] == '+')) {
            --start;
        }
        std::size_t end = pos;
        while (end < text.size() && is_digit(text[end])) {
            ++end;
        }
        if (end < text.size() && text[end] == '.' && end + 1 < text.size() &&
            is_digit(text[end + 1])) {
            ++end;
            while (end < text.size() && is_digit(text[end])) {
                ++end;
            }
        }
        double value = 0.0;
        const auto result = std::from_chars(text.data() + start, text.data() + end, value);
        if (result.ec == std::errc()) {
            found = value;
        }
        pos = end;
    }
    return found;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view strip_wrappers(std::string_view s) {
    const std::string_view open = "\"'[({<";
    const std::string_view close = "\"'])}>";
    s = trim(s);
    while (!s.empty() && open.find(s.front()) != std::string_view::npos) {
        s.remove_prefix(1);
        s = trim(s);
    }
    while (!s.empty() && close.find(s.back()) != std::string_view::npos) {
        s.remove_suffix(1);
        s = trim(s);
    }
    return s;
}

}  // namespace

std::optional<double> parse_value(std::string_view text, double v_max) {
    std::optional<double> value;
    const auto marker = find_marker(text, "value:");
    if (marker != std::string_view::npos) {
        value = first_number(text, marker + 6);
    }
    if (!value) {
        value = last_number(text);
    }
    if (!value || !std::isfinite(*value)) {
        return std::nullopt;
    }
    return std::clamp(*value, 0.0, v_max);
}

std::optional<std::string> parse_action(std::string_view text) {
    for (const std::string_view marker : {"action:", "recommend:"}) {
        const auto pos = find_marker(text, marker);
        if (pos == std::string_view::npos) {
            continue;
        }
        std::string_view span = text.substr(pos + marker.size());
        const auto newline = span.find('\n');
        if (newline != std::string_view::npos) {
            span = span.substr(0, newline);
        }
        const auto cleaned = strip_wrappers(span);
        if (cleaned.empty()) {
            return std::nullopt;
        }
        return std::string(cleaned);
    }
    const auto whole = trim(text);
    if (whole.empty()) {
        return std::nullopt;
    }
    return std::string(whole);
}

}  // namespace longrec::llm
