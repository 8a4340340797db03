#ifndef VVAE_TEXT_HPP
#define VVAE_TEXT_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by canonicalization and the benchmark detectors.
namespace vvae::text {

constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8 leniently; malformed sequences become U+FFFD.
inline std::vector<char32_t> decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > s.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

inline bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
           cp == 0x00A0 || cp == 0x3000;
}

/// Variation selectors and Fitzpatrick skin-tone modifiers. These change how
/// an emoji renders but not which emoji it is.
inline bool is_emoji_modifier(char32_t cp) {
    return cp == 0xFE0E || cp == 0xFE0F || (cp >= 0x1F3FB && cp <= 0x1F3FF);
}

/// Letters and digits that can continue a word. Latin-script letters count;
/// scripts written without spaces (CJK) do not, so terms in them match anywhere.
inline bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9') ||
               cp == '_';
    }
    return (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7);
}

inline char32_t ascii_lower(char32_t cp) {
    return (cp >= 'A' && cp <= 'Z') ? cp + ('a' - 'A') : cp;
}

/// Trim, collapse whitespace runs to one ASCII space, optionally lowercase
/// ASCII letters, optionally drop emoji modifiers.
inline std::string normalize(std::string_view raw, bool lowercase, bool strip_modifiers) {
    std::vector<char32_t> out;
    bool pending_space = false;
    for (char32_t cp : decode(raw)) {
        if (strip_modifiers && is_emoji_modifier(cp)) continue;
        if (is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(lowercase ? ascii_lower(cp) : cp);
    }
    return encode(out);
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// True iff `term` occurs in `haystack` with no word character directly
/// before or after it.
inline bool contains_word(std::string_view haystack, std::string_view term) {
    if (term.empty()) return false;
    const auto hay = decode(haystack);
    const auto needle = decode(term);
    if (needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            if (hay[i + k] != needle[k]) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        const bool left_ok = i == 0 || !is_word_char(hay[i - 1]) || !is_word_char(needle.front());
        const std::size_t end = i + needle.size();
        const bool right_ok =
            end == hay.size() || !is_word_char(hay[end]) || !is_word_char(needle.back());
        if (left_ok && right_ok) return true;
    }
    return false;
}

} // namespace vvae::text

#endif // VVAE_TEXT_HPP
