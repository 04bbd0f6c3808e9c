#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "patclass/errors.hpp"
#include "patclass/vocab.hpp"

namespace patclass {

// Fixed-length model input for one claim.
struct TokenizedExample {
    std::vector<std::int32_t> token_ids;     // length == max_seq_length
    std::vector<std::uint8_t> attention_mask;  // 1 for real positions, 0 for pad
    std::size_t n_real = 0;
};

namespace uni {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes UTF-8; malformed bytes become U+FFFD (dropped later with controls).
inline std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool bad = false;
        for (std::size_t j = 1; j < len; ++j) {
            const unsigned char bj = static_cast<unsigned char>(s[i + j]);
            if ((bj & 0xC0) != 0x80) {
                bad = true;
                break;
            }
            cp = (cp << 6) | (bj & 0x3F);
        }
        if (bad || cp > 0x10FFFF) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& s, char32_t cp) {
    if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_whitespace(char32_t cp) {
    switch (cp) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case 0x00A0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

inline bool is_control(char32_t cp) {
    if (cp == U'\t' || cp == U'\n' || cp == U'\r') return false;  // whitespace, not control
    if (cp < 0x20) return true;
    if (cp >= 0x7F && cp <= 0x9F) return true;
    if (cp >= 0x200B && cp <= 0x200F) return true;  // zero-width / direction marks
    if (cp >= 0x202A && cp <= 0x202E) return true;
    if (cp >= 0x2060 && cp <= 0x2064) return true;
    if (cp == 0xFEFF) return true;
    return false;
}

inline bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0x2A700 && cp <= 0x2B73F) ||
           (cp >= 0x2B740 && cp <= 0x2B81F) || (cp >= 0x2B820 && cp <= 0x2CEAF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x2F800 && cp <= 0x2FA1F);
}

// ASCII symbol ranges plus the common Unicode punctuation blocks.
inline bool is_punctuation(char32_t cp) {
    if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
        (cp >= 123 && cp <= 126)) {
        return true;
    }
    switch (cp) {
        case 0x00A1:
        case 0x00A7:
        case 0x00AB:
        case 0x00B6:
        case 0x00B7:
        case 0x00BB:
        case 0x00BF:
            return true;
        default:
            break;
    }
    if (cp >= 0x2010 && cp <= 0x2027) return true;
    if (cp >= 0x2030 && cp <= 0x205E) return true;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;
    if (cp >= 0x3001 && cp <= 0x303F) {
        // ideographic iteration/zero marks and Hangzhou numerals are word characters
        if (cp == 0x3005 || cp == 0x3007 || (cp >= 0x3021 && cp <= 0x3029)) return false;
        return true;
    }
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;
    if (cp >= 0xFF1A && cp <= 0xFF20) return true;
    if (cp >= 0xFF3B && cp <= 0xFF40) return true;
    if (cp >= 0xFF5B && cp <= 0xFF65) return true;
    return false;
}

inline bool is_combining_mark(char32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

// Lowercase + NFD accent strip for ASCII, Latin-1 Supplement and Latin
// Extended-A. Letters whose NFD form has no base-letter decomposition
// (stroked/ligature forms) are only lowercased. Other scripts pass through.
inline char32_t latin_fold(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    if (cp < 0x00C0 || cp > 0x017F) return cp;
    if (cp >= 0x00C0 && cp <= 0x00FF) {
        if ((cp >= 0x00C0 && cp <= 0x00C5) || (cp >= 0x00E0 && cp <= 0x00E5)) return U'a';
        if (cp == 0x00C7 || cp == 0x00E7) return U'c';
        if ((cp >= 0x00C8 && cp <= 0x00CB) || (cp >= 0x00E8 && cp <= 0x00EB)) return U'e';
        if ((cp >= 0x00CC && cp <= 0x00CF) || (cp >= 0x00EC && cp <= 0x00EF)) return U'i';
        if (cp == 0x00D1 || cp == 0x00F1) return U'n';
        if ((cp >= 0x00D2 && cp <= 0x00D6) || (cp >= 0x00F2 && cp <= 0x00F6)) return U'o';
        if ((cp >= 0x00D9 && cp <= 0x00DC) || (cp >= 0x00F9 && cp <= 0x00FC)) return U'u';
        if (cp == 0x00DD || cp == 0x00FD || cp == 0x00FF) return U'y';
        if (cp == 0x00C6) return 0x00E6;
        if (cp == 0x00D0) return 0x00F0;
        if (cp == 0x00D8) return 0x00F8;
        if (cp == 0x00DE) return 0x00FE;
        return cp;  // x00D7 x00F7 x00DF x00E6 x00F0 x00F8 x00FE and lowercase bases
    }
    // Latin Extended-A
    if (cp <= 0x0105) return U'a';
    if (cp <= 0x010D) return U'c';
    if (cp <= 0x010F) return U'd';
    if (cp <= 0x0111) return 0x0111;  // d with stroke
    if (cp <= 0x011B) return U'e';
    if (cp <= 0x0123) return U'g';
    if (cp <= 0x0125) return U'h';
    if (cp <= 0x0127) return 0x0127;  // h with stroke
    if (cp <= 0x012F || cp == 0x0130) return U'i';
    if (cp == 0x0131) return 0x0131;  // dotless i
    if (cp <= 0x0133) return 0x0133;  // ij ligature
    if (cp <= 0x0135) return U'j';
    if (cp <= 0x0137) return U'k';
    if (cp == 0x0138) return 0x0138;  // kra
    if (cp <= 0x013E) return U'l';
    if (cp <= 0x0140) return 0x0140;  // l with middle dot
    if (cp <= 0x0142) return 0x0142;  // l with stroke
    if (cp <= 0x0148) return U'n';
    if (cp == 0x0149) return 0x0149;
    if (cp <= 0x014B) return 0x014B;  // eng
    if (cp <= 0x0151) return U'o';
    if (cp <= 0x0153) return 0x0153;  // oe ligature
    if (cp <= 0x0159) return U'r';
    if (cp <= 0x0161) return U's';
    if (cp <= 0x0165) return U't';
    if (cp <= 0x0167) return 0x0167;  // t with stroke
    if (cp <= 0x0173) return U'u';
    if (cp <= 0x0175) return U'w';
    if (cp <= 0x0178) return U'y';
    if (cp <= 0x017E) return U'z';
    return cp;  // long s
}

}  // namespace uni

// Uncased basic tokenization: controls dropped, whitespace split, CJK
// characters isolated, lowercasing with accent stripping, punctuation split
// into single-character tokens. Pure; empty input gives an empty list.
inline std::vector<std::string> basic_tokenize(std::string_view text) {
    const std::vector<char32_t> raw = uni::decode_utf8(text);

    std::vector<char32_t> cleaned;
    cleaned.reserve(raw.size() + 8);
    for (char32_t cp : raw) {
        if (cp == 0 || cp == uni::kReplacement || uni::is_control(cp)) continue;
        if (uni::is_whitespace(cp)) {
            cleaned.push_back(U' ');
            continue;
        }
        if (uni::is_cjk(cp)) {
            cleaned.push_back(U' ');
            cleaned.push_back(cp);
            cleaned.push_back(U' ');
            continue;
        }
        cleaned.push_back(cp);
    }

    std::vector<std::string> words;
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            words.push_back(current);
            current.clear();
        }
    };
    for (char32_t cp : cleaned) {
        if (cp == U' ') {
            flush();
            continue;
        }
        const char32_t folded = uni::latin_fold(cp);
        if (uni::is_combining_mark(folded)) continue;
        if (uni::is_punctuation(folded)) {
            flush();
            std::string p;
            uni::append_utf8(p, folded);
            words.push_back(std::move(p));
            continue;
        }
        uni::append_utf8(current, folded);
    }
    flush();
    return words;
}

inline constexpr std::size_t kMaxWordPieceChars = 100;

// Greedy longest-match-first subword split. A word with any unmatchable
// position, or longer than kMaxWordPieceChars codepoints, maps to ["[UNK]"].
inline std::vector<std::string> wordpiece(const std::string& word, const Vocabulary& vocab) {
    const std::vector<char32_t> chars = uni::decode_utf8(word);
    if (chars.size() > kMaxWordPieceChars) return {kUnkToken};
    if (chars.empty()) return {};

    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < chars.size()) {
        std::size_t end = chars.size();
        std::string match;
        while (start < end) {
            std::string candidate = start > 0 ? "##" : "";
            for (std::size_t i = start; i < end; ++i) uni::append_utf8(candidate, chars[i]);
            if (vocab.contains(candidate)) {
                match = std::move(candidate);
                break;
            }
            --end;
        }
        if (match.empty()) return {kUnkToken};
        pieces.push_back(std::move(match));
        start = end;
    }
    return pieces;
}

// [CLS] + pieces (truncated to max_seq_length-2) + [SEP], padded with [PAD].
inline TokenizedExample encode(std::string_view text, std::size_t max_seq_length,
                               const Vocabulary& vocab) {
    if (max_seq_length < 2) {
        throw ConfigError("max_seq_length must be >= 2, got " + std::to_string(max_seq_length));
    }

    std::vector<std::int32_t> piece_ids;
    for (const std::string& word : basic_tokenize(text)) {
        for (const std::string& piece : wordpiece(word, vocab)) {
            const int id = vocab.id_of(piece);
            piece_ids.push_back(id >= 0 ? id : vocab.unk_id);
        }
    }
    if (piece_ids.size() > max_seq_length - 2) piece_ids.resize(max_seq_length - 2);

    TokenizedExample out;
    out.token_ids.reserve(max_seq_length);
    out.token_ids.push_back(vocab.cls_id);
    out.token_ids.insert(out.token_ids.end(), piece_ids.begin(), piece_ids.end());
    out.token_ids.push_back(vocab.sep_id);
    out.n_real = out.token_ids.size();
    out.token_ids.resize(max_seq_length, vocab.pad_id);
    out.attention_mask.assign(max_seq_length, 0);
    for (std::size_t i = 0; i < out.n_real; ++i) out.attention_mask[i] = 1;
    return out;
}

}  // namespace patclass
