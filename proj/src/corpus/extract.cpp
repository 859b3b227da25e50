#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <string>

#include "frames/corpus.hpp"
#include "frames/error.hpp"

namespace frames {

namespace {

constexpr std::array<std::string_view, 44> kBlockTags = {
    "address", "article", "aside",   "blockquote", "body",   "caption", "dd",
    "details", "dialog",  "div",     "dl",         "dt",     "fieldset", "figcaption",
    "figure",  "footer",  "form",    "h1",         "h2",     "h3",      "h4",
    "h5",      "h6",      "header",  "hr",         "html",   "li",      "main",
    "nav",     "ol",      "p",       "pre",        "section", "summary", "table",
    "tbody",   "td",      "tfoot",   "th",         "thead",  "tr",      "ul",
    "menu",    "legend"};

// Elements whose content is never paragraph text.
constexpr std::array<std::string_view, 8> kSkipTags = {
    "script", "style", "head", "noscript", "template", "svg", "iframe", "object"};

bool is_block_tag(std::string_view name) {
    return std::find(kBlockTags.begin(), kBlockTags.end(), name) != kBlockTags.end();
}

bool is_skip_tag(std::string_view name) {
    return std::find(kSkipTags.begin(), kSkipTags.end(), name) != kSkipTags.end();
}

void append_utf8(std::string& out, char32_t cp) {
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

struct NamedEntity {
    std::string_view name;
    char32_t cp;
};

constexpr std::array<NamedEntity, 20> kEntities = {{
    {"amp", U'&'},      {"lt", U'<'},       {"gt", U'>'},       {"quot", U'"'},
    {"apos", U'\''},    {"nbsp", 0xA0},     {"ndash", 0x2013},  {"mdash", 0x2014},
    {"lsquo", 0x2018},  {"rsquo", 0x2019},  {"ldquo", 0x201C},  {"rdquo", 0x201D},
    {"hellip", 0x2026}, {"euro", 0x20AC},   {"copy", 0xA9},     {"laquo", 0xAB},
    {"raquo", 0xBB},    {"auml", 0xE4},     {"ouml", 0xF6},     {"uuml", 0xFC},
}};

std::string decode_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out += text[i++];
            continue;
        }
        const auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out += text[i++];
            continue;
        }
        const auto ref = text.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (!ref.empty() && ref[0] == '#') {
            const bool hex = ref.size() > 1 && (ref[1] == 'x' || ref[1] == 'X');
            const auto digits = ref.substr(hex ? 2 : 1);
            if (!digits.empty()) {
                char32_t cp = 0;
                bool valid = true;
                for (char c : digits) {
                    int v = -1;
                    if (c >= '0' && c <= '9') v = c - '0';
                    else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
                    else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
                    if (v < 0 || cp > 0x10FFFF) {
                        valid = false;
                        break;
                    }
                    cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(v);
                }
                if (valid && cp > 0 && cp <= 0x10FFFF) {
                    append_utf8(out, cp);
                    decoded = true;
                }
            }
        } else {
            for (const auto& e : kEntities) {
                if (e.name == ref) {
                    append_utf8(out, e.cp);
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Position just past the '>' closing the tag that starts at `open`, honouring
// quoted attribute values. Returns npos for an unterminated tag.
std::size_t tag_end(std::string_view s, std::size_t open) {
    char quote = 0;
    for (std::size_t i = open + 1; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            return i + 1;
        }
    }
    return std::string_view::npos;
}

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        bool space = is_space_byte(c);
        if (!space && c == 0xC2 && i + 1 < text.size() &&
            static_cast<unsigned char>(text[i + 1]) == 0xA0) {
            space = true;
            ++i;
        }
        if (space) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(c);
    }
    return out;
}

std::size_t utf8_length(std::string_view text) noexcept {
    return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

bool looks_like_markup(std::string_view body) {
    static const std::regex tag(
        R"(<\s*/?\s*(html|body|p|div|br|h[1-6]|li|ul|ol|table|tr|td|section|article|span|a|blockquote|header|footer|main|nav)(\s[^>]*)?/?>)",
        std::regex::icase | std::regex::optimize);
    return std::regex_search(body.begin(), body.end(), tag);
}

std::vector<std::string> split_markup_blocks(std::string_view s) {
    std::vector<std::string> blocks;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            blocks.push_back(decode_entities(current));
            current.clear();
        }
    };

    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '<') {
            current += s[i++];
            continue;
        }
        if (s.substr(i, 4) == "<!--") {
            const auto close = s.find("-->", i + 4);
            i = close == std::string_view::npos ? s.size() : close + 3;
            continue;
        }
        if (i + 1 < s.size() && (s[i + 1] == '!' || s[i + 1] == '?')) {
            const auto close = s.find('>', i);
            i = close == std::string_view::npos ? s.size() : close + 1;
            continue;
        }
        const bool closing = i + 1 < s.size() && s[i + 1] == '/';
        const std::size_t name_start = i + (closing ? 2 : 1);
        if (name_start >= s.size() || !std::isalpha(static_cast<unsigned char>(s[name_start]))) {
            current += s[i++];
            continue;
        }
        std::size_t name_end = name_start;
        while (name_end < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[name_end])) || s[name_end] == '-')) {
            ++name_end;
        }
        const std::string name = lower_ascii(s.substr(name_start, name_end - name_start));
        const std::size_t end = tag_end(s, i);
        if (end == std::string_view::npos) {
            current.append(s.substr(i));
            break;
        }
        const bool self_closing = end >= 2 && s[end - 2] == '/';
        if (!closing && !self_closing && is_skip_tag(name)) {
            flush();
            // Skip to the matching close tag (case-insensitive search).
            const std::string lowered_rest = lower_ascii(s.substr(end));
            const auto close = lowered_rest.find("</" + name);
            if (close == std::string::npos) {
                i = s.size();
            } else {
                const auto after = tag_end(s, end + close);
                i = after == std::string_view::npos ? s.size() : after;
            }
            continue;
        }
        if (is_block_tag(name)) {
            flush();
        } else {
            // Inline tags (and <br>) separate words but not paragraphs.
            current += ' ';
        }
        i = end;
    }
    flush();
    return blocks;
}

std::vector<std::string> split_plain_blocks(std::string_view text) {
    std::vector<std::string> blocks;
    std::string current;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        const bool blank = std::all_of(line.begin(), line.end(), [](char c) {
            return is_space_byte(static_cast<unsigned char>(c));
        });
        if (blank) {
            if (!current.empty()) blocks.push_back(std::move(current));
            current.clear();
        } else {
            if (!current.empty()) current += '\n';
            current.append(line);
        }
        pos = nl + 1;
    }
    if (!current.empty()) blocks.push_back(std::move(current));
    return blocks;
}

std::string make_para_id(std::string_view doc_id, int ordinal) {
    return std::string(doc_id) + "#" + std::to_string(ordinal);
}

std::vector<Paragraph> extract_paragraphs(const SourceDocument& doc, const ExtractOptions& options) {
    if (normalize_whitespace(doc.body).empty()) {
        throw IngestionError("document '" + doc.doc_id + "' has an empty body");
    }
    const auto blocks = looks_like_markup(doc.body) ? split_markup_blocks(doc.body)
                                                    : split_plain_blocks(doc.body);
    std::vector<Paragraph> paragraphs;
    for (const auto& block : blocks) {
        auto text = normalize_whitespace(block);
        if (text.empty() || utf8_length(text) < options.min_paragraph_chars) continue;
        const int ordinal = static_cast<int>(paragraphs.size());
        paragraphs.push_back({make_para_id(doc.doc_id, ordinal), doc.doc_id, ordinal, std::move(text)});
    }
    return paragraphs;
}

SourceDocument translate_document(const SourceDocument& doc, TranslationClient& client) {
    const auto lang = lower_ascii(doc.language);
    if (lang == "en" || lang.starts_with("en-")) return doc;
    SourceDocument out = doc;
    try {
        out.body = client.translate(doc.body, doc.language);
    } catch (const TranslationError&) {
        throw;
    } catch (const std::exception& e) {
        throw TranslationError(doc.doc_id, e.what());
    }
    out.language = "en";
    return out;
}

}  // namespace frames
