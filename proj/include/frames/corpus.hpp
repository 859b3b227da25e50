#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frames/codebook.hpp"

namespace frames {

struct SourceDocument {
    std::string doc_id;
    std::string url;
    std::string language = "en";
    std::string body;

    friend bool operator==(const SourceDocument&, const SourceDocument&) = default;
};

struct Paragraph {
    std::string para_id;
    std::string doc_id;
    int ordinal = 0;
    std::string text;

    friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

enum class Split { train, gold };
enum class DatasetSplit { train, gold, mixed };

std::string_view split_name(Split split) noexcept;
Split parse_split(std::string_view text);

struct LabeledParagraph {
    Paragraph paragraph;
    LabelSet labels;
    std::string coder_id;
    Split split = Split::train;

    friend bool operator==(const LabeledParagraph&, const LabeledParagraph&) = default;
};

struct Dataset {
    std::vector<LabeledParagraph> records;
    DatasetSplit split = DatasetSplit::mixed;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Builds a dataset whose split tag is derived from its records: all-train gives
// train, all-gold gives gold, anything else (including empty) gives mixed.
Dataset make_dataset(std::vector<LabeledParagraph> records);

// Throws ValidationError on duplicate para_ids, duplicate (doc_id, ordinal),
// untrimmed or empty text, an invalid label set, or a split tag mismatch.
void validate_dataset(const Dataset& ds);

// ---------------------------------------------------------------------------
// Ingestion

inline constexpr std::size_t kDefaultMinParagraphChars = 40;

struct ExtractOptions {
    std::size_t min_paragraph_chars = kDefaultMinParagraphChars;
};

// Collapses every whitespace run (ASCII whitespace and U+00A0) to one space and
// trims both ends.
std::string normalize_whitespace(std::string_view text);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text) noexcept;

bool looks_like_markup(std::string_view body);

// Candidate blocks before normalization and filtering. Markup: one block per
// block-level element, script/style/head content discarded, entities decoded.
// Plain text: runs separated by blank lines.
std::vector<std::string> split_markup_blocks(std::string_view markup);
std::vector<std::string> split_plain_blocks(std::string_view text);

std::string make_para_id(std::string_view doc_id, int ordinal);

// Paragraphs in document order with ordinals 0, 1, ... after filtering.
// Throws IngestionError on an empty body.
std::vector<Paragraph> extract_paragraphs(const SourceDocument& doc,
                                          const ExtractOptions& options = {});

class TranslationClient {
public:
    virtual ~TranslationClient() = default;
    virtual std::string translate(std::string_view text, std::string_view source_language) = 0;
};

class IdentityTranslator final : public TranslationClient {
public:
    std::string translate(std::string_view text, std::string_view) override {
        return std::string(text);
    }
};

// English documents pass through without a client call. Client exceptions are
// rethrown as TranslationError naming the document.
SourceDocument translate_document(const SourceDocument& doc, TranslationClient& client);

// ---------------------------------------------------------------------------
// Statistics, sampling, leakage

struct FrameCounts {
    std::array<std::size_t, kNumFrames> by_frame{};
    std::size_t total = 0;

    std::size_t operator[](FrameCode code) const { return by_frame[frame_index(code)]; }
};

// Tally of records by main frame.
FrameCounts dataset_stats(const Dataset& ds);

// Uniform sample without replacement, deterministic for a given seed. Throws
// SamplingError when n exceeds the corpus size.
std::vector<SourceDocument> sample_documents(std::span<const SourceDocument> corpus,
                                             std::size_t n, std::uint64_t seed);

struct LeakageReport {
    std::vector<std::string> shared_para_ids;
    std::vector<std::string> shared_doc_ids;

    bool clean() const noexcept { return shared_para_ids.empty() && shared_doc_ids.empty(); }
};

LeakageReport check_split_leakage(const Dataset& train, const Dataset& gold);
// Same check between the train- and gold-tagged records of one dataset.
LeakageReport check_split_leakage(const Dataset& mixed);

// Throws LeakageError if the report is not clean.
void require_no_leakage(const LeakageReport& report);

// ---------------------------------------------------------------------------
// Persistence (JSON Lines, UTF-8, codes as literal strings)

void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

void write_paragraphs(std::ostream& out, std::span<const Paragraph> paragraphs);
std::vector<Paragraph> read_paragraphs(std::istream& in);
void save_paragraphs(std::span<const Paragraph> paragraphs, const std::filesystem::path& path);
std::vector<Paragraph> load_paragraphs(const std::filesystem::path& path);

// Documents come either as JSON Lines ({"doc_id", "url", "language", "body"})
// or as a directory of files, one document per file named by its stem.
std::vector<SourceDocument> load_documents(const std::filesystem::path& path);
void save_documents(std::span<const SourceDocument> docs, const std::filesystem::path& path);

}  // namespace frames
