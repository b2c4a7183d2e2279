#include "labelscout/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace labelscout::text {

namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;  // bytes consumed; value is U+FFFD on invalid input
};

CodePoint decode(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (pos + len > s.size()) return {0xFFFD, 1};
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

bool is_space(char32_t cp) {
    if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return true;
    switch (cp) {
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_punct(char32_t cp) {
    if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
    if (cp >= 0x2010 && cp <= 0x2027) return true;  // dashes, quotes, ellipsis
    if (cp >= 0x2030 && cp <= 0x205E) return true;
    switch (cp) {
        case 0xA1: case 0xAB: case 0xBB: case 0xBF:
        case 0x3001: case 0x3002: case 0xFF0C: case 0xFF0E:
            return true;
        default:
            return false;
    }
}

bool is_strippable_edge(std::string_view s, std::size_t pos, std::size_t& len) {
    const CodePoint cp = decode(s, pos);
    len = cp.length;
    if (is_space(cp.value)) return true;
    if (cp.value < 0x80) {
        constexpr std::string_view edge = "\"'`.,;:!?()[]{}*";
        return edge.find(static_cast<char>(cp.value)) != std::string_view::npos;
    }
    return cp.value == 0x2018 || cp.value == 0x2019 || cp.value == 0x201C ||
           cp.value == 0x201D || cp.value == 0xAB || cp.value == 0xBB;
}

std::string strip_edges(std::string_view s) {
    std::size_t begin = 0;
    while (begin < s.size()) {
        std::size_t len = 0;
        if (!is_strippable_edge(s, begin, len)) break;
        begin += len;
    }
    std::size_t end = s.size();
    while (end > begin) {
        // walk back to the start of the last code point
        std::size_t start = end - 1;
        while (start > begin && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
        std::size_t len = 0;
        if (!is_strippable_edge(s, start, len) || start + len != end) break;
        end = start;
    }
    return std::string(s.substr(begin, end - begin));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < input.size()) {
        const CodePoint cp = decode(input, pos);
        const std::string_view raw = input.substr(pos, cp.length);
        if (is_space(cp.value)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (is_punct(cp.value)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            tokens.emplace_back(raw);
        } else {
            current.append(raw);
        }
        pos += cp.length;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    });
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string normalize_phrase(std::string_view s) {
    std::string current = collapse_whitespace(to_lower(s));
    while (true) {
        std::string next = collapse_whitespace(strip_edges(current));
        if (next == current) return next;
        current = std::move(next);
    }
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_word_token(std::string_view token) {
    return !token.empty() && std::all_of(token.begin(), token.end(), [](unsigned char c) {
        return std::isalpha(c) != 0;
    });
}

}  // namespace labelscout::text
