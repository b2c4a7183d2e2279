#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace labelscout::text {

/// Splits on Unicode whitespace and detaches punctuation (ASCII punctuation
/// plus the General Punctuation block and a few CJK/guillemet marks) as
/// standalone tokens. Input must be UTF-8; invalid bytes are kept as-is.
std::vector<std::string> tokenize(std::string_view input);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string trim(std::string_view s);

/// ASCII lowercase; non-ASCII bytes pass through.
std::string to_lower(std::string_view s);

/// Trim and collapse internal whitespace runs to one space.
std::string collapse_whitespace(std::string_view s);

/// Lowercase, collapse whitespace, strip surrounding quotes and
/// sentence punctuation. Idempotent.
std::string normalize_phrase(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

bool is_word_token(std::string_view token);

}  // namespace labelscout::text
