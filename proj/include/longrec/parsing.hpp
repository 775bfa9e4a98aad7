#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace longrec::llm {

/// Extracts a value estimate from free-form model output: the first decimal
/// number after a case-insensitive "VALUE:" marker, falling back to the last
/// standalone number anywhere in the text. The result is clamped to
/// [0, v_max]. Returns nullopt when no number exists; never throws.
std::optional<double> parse_value(std::string_view text, double v_max);

/// Extracts the recommended item text: the remainder of the line after a
/// case-insensitive "ACTION:" or "Recommend:" marker, stripped of surrounding
/// quotes and brackets; the whole trimmed text when no marker is present.
/// Returns nullopt when the extraction is empty; never throws.
std::optional<std::string> parse_action(std::string_view text);

}  // namespace longrec::llm
