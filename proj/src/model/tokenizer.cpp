#include "frames/model/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>

#include "frames/error.hpp"

namespace frames::model {

namespace {

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (c < 0x80) {
            cp = c;
            len = 1;
        } else if ((c >> 5) == 0x6) {
            cp = c & 0x1F;
            len = 2;
        } else if ((c >> 4) == 0xE) {
            cp = c & 0x0F;
            len = 3;
        } else if ((c >> 3) == 0x1E) {
            cp = c & 0x07;
            len = 4;
        } else {
            out += 0xFFFD;
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > s.size()) {
            out += 0xFFFD;
            break;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out += 0xFFFD;
            ++i;
            continue;
        }
        out += cp;
        i += static_cast<std::size_t>(len);
    }
    return out;
}

void encode_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string to_utf8(std::u32string_view s) {
    std::string out;
    for (char32_t cp : s) encode_utf8(out, cp);
    return out;
}

bool is_whitespace(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_control(char32_t c) {
    if (c == '\t' || c == '\n' || c == '\r') return false;
    return c < 0x20 || (c >= 0x7F && c <= 0x9F) || c == 0xAD || (c >= 0x200B && c <= 0x200F) ||
           (c >= 0x2028 && c <= 0x202E) || (c >= 0x2060 && c <= 0x2064) || c == 0xFEFF ||
           (c >= 0xE000 && c <= 0xF8FF);
}

bool is_punctuation(char32_t c) {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
        (c >= 123 && c <= 126)) {
        return true;
    }
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB ||
           c == 0xBF || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x2043) ||
           (c >= 0x2045 && c <= 0x2051) || (c >= 0x2053 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
           (c >= 0xFF01 && c <= 0xFF03) || (c >= 0xFF05 && c <= 0xFF0A) ||
           (c >= 0xFF0C && c <= 0xFF0F);
}

bool is_cjk(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
           (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x2A700 && c <= 0x2B73F) ||
           (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
           (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

bool is_combining_mark(char32_t c) {
    return (c >= 0x0300 && c <= 0x036F) || (c >= 0x1AB0 && c <= 0x1AFF) ||
           (c >= 0x1DC0 && c <= 0x1DFF) || (c >= 0x20D0 && c <= 0x20FF) ||
           (c >= 0xFE20 && c <= 0xFE2F);
}

// Lowercase, accent-free form of U+00C0..U+017F; 0 marks "keep lowercased".
constexpr std::array<char, 0x180 - 0xC0> kLatinBase = [] {
    std::array<char, 0x180 - 0xC0> t{};
    auto set = [&](char32_t from, char32_t to, char base) {
        for (char32_t c = from; c <= to; ++c) t[c - 0xC0] = base;
    };
    set(0xC0, 0xC5, 'a'); set(0xC7, 0xC7, 'c'); set(0xC8, 0xCB, 'e'); set(0xCC, 0xCF, 'i');
    set(0xD1, 0xD1, 'n'); set(0xD2, 0xD6, 'o'); set(0xD9, 0xDC, 'u'); set(0xDD, 0xDD, 'y');
    set(0xE0, 0xE5, 'a'); set(0xE7, 0xE7, 'c'); set(0xE8, 0xEB, 'e'); set(0xEC, 0xEF, 'i');
    set(0xF1, 0xF1, 'n'); set(0xF2, 0xF6, 'o'); set(0xF9, 0xFC, 'u'); set(0xFD, 0xFD, 'y');
    set(0xFF, 0xFF, 'y');
    set(0x100, 0x105, 'a'); set(0x106, 0x10D, 'c'); set(0x10E, 0x10F, 'd'); set(0x112, 0x11B, 'e');
    set(0x11C, 0x123, 'g'); set(0x124, 0x125, 'h'); set(0x128, 0x130, 'i'); set(0x134, 0x135, 'j');
    set(0x136, 0x137, 'k'); set(0x139, 0x13E, 'l'); set(0x143, 0x148, 'n'); set(0x14C, 0x151, 'o');
    set(0x154, 0x159, 'r'); set(0x15A, 0x161, 's'); set(0x162, 0x165, 't'); set(0x168, 0x173, 'u');
    set(0x174, 0x175, 'w'); set(0x176, 0x178, 'y'); set(0x179, 0x17E, 'z');
    return t;
}();

char32_t lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c < 0x80) return c;
    if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
    if (c >= 0x100 && c <= 0x17F) {
        // Paired upper/lower code points; the exceptions sit at odd offsets.
        if (c == 0x130) return 'i';
        if (c == 0x178) return 0xFF;
        if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
        if (c == 0x131 || c == 0x138 || c == 0x149 || c == 0x17F) return c;
        return (c % 2 == 0) ? c + 1 : c;
    }
    if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    return c;
}

// Lowercase and strip accents, appending to `out`.
void fold_char(char32_t c, std::u32string& out) {
    if (is_combining_mark(c)) return;
    if (c >= 0xC0 && c < 0x180) {
        const char base = kLatinBase[c - 0xC0];
        if (base) {
            out += static_cast<char32_t>(base);
            return;
        }
    }
    out += lower(c);
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second) {
            throw DataError("vocabulary repeats token '" + vocab_[i] + "'");
        }
    }
    auto require = [&](std::string_view token) {
        auto it = ids_.find(std::string(token));
        if (it == ids_.end()) throw DataError("vocabulary lacks " + std::string(token));
        return it->second;
    };
    pad_ = require(kPad);
    unk_ = require(kUnk);
    cls_ = require(kCls);
    sep_ = require(kSep);
}

WordPieceTokenizer WordPieceTokenizer::load(const std::filesystem::path& vocab_file) {
    std::ifstream in(vocab_file, std::ios::binary);
    if (!in) throw LoadError("cannot read vocabulary '" + vocab_file.string() + "'");
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    try {
        return WordPieceTokenizer(std::move(vocab));
    } catch (const DataError& e) {
        throw LoadError("'" + vocab_file.string() + "': " + e.what());
    }
}

void WordPieceTokenizer::save(const std::filesystem::path& vocab_file) const {
    std::ofstream out(vocab_file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + vocab_file.string() + "'");
    for (const auto& t : vocab_) out << t << '\n';
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
    const auto chars = decode_utf8(text);
    std::u32string cleaned;
    cleaned.reserve(chars.size());
    for (char32_t c : chars) {
        if (c == 0 || c == 0xFFFD || is_control(c)) continue;
        if (is_whitespace(c)) {
            cleaned += ' ';
        } else if (is_cjk(c)) {
            cleaned += ' ';
            cleaned += c;
            cleaned += ' ';
        } else {
            cleaned += c;
        }
    }

    std::vector<std::string> tokens;
    std::u32string word;
    auto flush = [&] {
        if (!word.empty()) tokens.push_back(to_utf8(word));
        word.clear();
    };
    std::u32string folded;
    for (char32_t c : cleaned) {
        if (c == ' ') {
            flush();
            continue;
        }
        folded.clear();
        fold_char(c, folded);
        for (char32_t f : folded) {
            if (is_punctuation(f)) {
                flush();
                word += f;
                flush();
            } else {
                word += f;
            }
        }
    }
    flush();
    return tokens;
}

std::vector<std::string> WordPieceTokenizer::wordpiece(std::string_view word) const {
    constexpr std::size_t kMaxCharsPerWord = 100;
    const auto chars = decode_utf8(word);
    if (chars.size() > kMaxCharsPerWord) return {std::string(kUnk)};
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < chars.size()) {
        std::size_t end = chars.size();
        std::string match;
        while (start < end) {
            std::string candidate = start > 0 ? "##" : "";
            candidate += to_utf8(std::u32string_view(chars).substr(start, end - start));
            if (ids_.contains(candidate)) {
                match = std::move(candidate);
                break;
            }
            --end;
        }
        if (match.empty()) return {std::string(kUnk)};
        pieces.push_back(std::move(match));
        start = end;
    }
    return pieces;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> out;
    for (const auto& word : basic_tokenize(text)) {
        for (auto& piece : wordpiece(word)) out.push_back(std::move(piece));
    }
    return out;
}

std::vector<int> WordPieceTokenizer::token_ids(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& t : tokenize(text)) ids.push_back(id_of(t));
    return ids;
}

int WordPieceTokenizer::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? unk_ : it->second;
}

std::vector<std::string> build_vocabulary(std::span<const std::string> texts, std::size_t max_size) {
    // A throwaway tokenizer only for the basic (pre-WordPiece) split.
    const WordPieceTokenizer basic({std::string(WordPieceTokenizer::kPad),
                                    std::string(WordPieceTokenizer::kUnk),
                                    std::string(WordPieceTokenizer::kCls),
                                    std::string(WordPieceTokenizer::kSep)});
    std::map<std::string, std::size_t> word_counts;
    std::set<std::string> chars;
    for (const auto& text : texts) {
        for (const auto& word : basic.basic_tokenize(text)) {
            ++word_counts[word];
            for (char32_t c : decode_utf8(word)) chars.insert(to_utf8(std::u32string(1, c)));
        }
    }
    std::vector<std::string> vocab = {
        std::string(WordPieceTokenizer::kPad), std::string(WordPieceTokenizer::kUnk),
        std::string(WordPieceTokenizer::kCls), std::string(WordPieceTokenizer::kSep),
        std::string(WordPieceTokenizer::kMask)};
    std::set<std::string> present(vocab.begin(), vocab.end());
    auto add = [&](const std::string& t) {
        if (vocab.size() < max_size && present.insert(t).second) vocab.push_back(t);
    };
    for (const auto& c : chars) add(c);
    for (const auto& c : chars) add("##" + c);

    std::vector<std::pair<std::string, std::size_t>> ranked(word_counts.begin(), word_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    for (const auto& [word, _] : ranked) add(word);
    return vocab;
}

}  // namespace frames::model
