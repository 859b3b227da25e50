#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace frames::model {

// Uncased BERT tokenization: text cleanup, lowercasing with accent stripping,
// punctuation splitting, then greedy longest-match-first WordPiece.
//
// Unicode coverage is limited to what English (and translated Western
// European) text needs: Latin-1 and Latin Extended-A letters are folded to
// their unaccented lowercase form, Greek and Cyrillic capitals are lowercased,
// combining marks are dropped, and common Unicode punctuation and spaces are
// recognised.
class WordPieceTokenizer {
public:
    static constexpr std::string_view kPad = "[PAD]";
    static constexpr std::string_view kUnk = "[UNK]";
    static constexpr std::string_view kCls = "[CLS]";
    static constexpr std::string_view kSep = "[SEP]";
    static constexpr std::string_view kMask = "[MASK]";

    // Token ids are positions in `vocab`. Throws DataError if a special token
    // other than [MASK] is missing or a token repeats.
    explicit WordPieceTokenizer(std::vector<std::string> vocab);

    // One token per line, as in a BERT vocab.txt. Throws LoadError.
    static WordPieceTokenizer load(const std::filesystem::path& vocab_file);
    void save(const std::filesystem::path& vocab_file) const;

    std::vector<std::string> basic_tokenize(std::string_view text) const;
    std::vector<std::string> wordpiece(std::string_view word) const;
    std::vector<std::string> tokenize(std::string_view text) const;
    std::vector<int> token_ids(std::string_view text) const;

    int id_of(std::string_view token) const;  // unk id when absent
    const std::string& token_of(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }

    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    int pad_id() const noexcept { return pad_; }
    int unk_id() const noexcept { return unk_; }
    int cls_id() const noexcept { return cls_; }
    int sep_id() const noexcept { return sep_; }

    const std::vector<std::string>& vocab() const noexcept { return vocab_; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> ids_;
    int pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
};

// Vocabulary for a small encoder trained from scratch: the special tokens,
// every character seen (bare and as a "##" continuation), then the most
// frequent basic tokens until `max_size` entries. Deterministic.
std::vector<std::string> build_vocabulary(std::span<const std::string> texts, std::size_t max_size);

}  // namespace frames::model
