#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "frames/codebook.hpp"
#include "frames/corpus.hpp"

namespace frames {

// ---------------------------------------------------------------------------
// Agreement

enum class AgreementBand { poor, slight, fair, moderate, substantial, almost_perfect };

std::string_view band_name(AgreementBand band) noexcept;

// Landis-Koch interpretation: <0 poor, <=0.20 slight, <=0.40 fair,
// <=0.60 moderate, <=0.80 substantial, above that almost perfect.
AgreementBand landis_koch_band(double kappa) noexcept;

struct AgreementReport {
    double kappa = 0.0;
    double p_observed = 0.0;
    double p_expected = 0.0;
    std::size_t n_items = 0;
    AgreementBand band = AgreementBand::poor;
};

// Cohen's kappa over main-frame labels. Throws InputError on empty or
// mismatched input and DegenerateAgreementError when p_expected is 1.
AgreementReport cohen_kappa(std::span<const FrameCode> labels_a, std::span<const FrameCode> labels_b);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

// Asymptotic normal interval using the Fleiss-Cohen-Everitt large-sample
// variance of kappa, clipped to [-1, 1]. Throws InputError for fewer than two
// items or a level outside (0, 1).
Interval kappa_confidence_interval(const AgreementReport& report, std::span<const FrameCode> labels_a,
                                   std::span<const FrameCode> labels_b, double level = 0.95);

// Coder-a by coder-b contingency counts in codebook order.
using AgreementMatrix = std::array<std::array<std::size_t, kNumFrames>, kNumFrames>;
AgreementMatrix agreement_matrix(std::span<const FrameCode> labels_a, std::span<const FrameCode> labels_b);

nlohmann::ordered_json to_json(const AgreementReport& report);

// ---------------------------------------------------------------------------
// Annotation store

struct AnnotationRecord {
    std::string para_id;
    std::string coder_id;
    LabelSet labels;
    std::string timestamp;  // UTC, ISO-8601 with a trailing 'Z'

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

nlohmann::ordered_json to_json(const AnnotationRecord& record);
// Throws ParseError (line 0 when no line is known) on schema violations.
AnnotationRecord annotation_from_json(const nlohmann::json& obj, std::size_t line = 0);

std::string utc_timestamp_now();

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

// Append-only record store, optionally backed by a JSON Lines file. Writes are
// serialized; reads take a snapshot.
class AnnotationStore {
public:
    using Clock = std::function<std::string()>;

    // In-memory store.
    explicit AnnotationStore(Clock clock = utc_timestamp_now);
    // File-backed store; existing records are loaded, new ones appended.
    explicit AnnotationStore(std::filesystem::path path, Clock clock = utc_timestamp_now);

    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    // Validates the label set (ValidationError) and the (para_id, coder)
    // uniqueness (ConflictError) before persisting.
    AnnotationRecord append(const std::string& para_id, const std::string& coder_id,
                            const LabelSet& labels);

    bool contains(const std::string& para_id, const std::string& coder_id) const;
    std::vector<AnnotationRecord> records() const;
    std::vector<AnnotationRecord> records_for(const std::string& coder_id) const;
    std::map<std::string, std::size_t> counts_by_coder() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> path_;
    Clock clock_;
    std::vector<AnnotationRecord> records_;
};

// Kappa over the main frames of the para_ids both record sets share, aligned
// by para_id. Throws InputError when the intersection is empty.
AgreementReport agreement_from_records(std::span<const AnnotationRecord> coder_a,
                                       std::span<const AnnotationRecord> coder_b);

// Aligned main-frame lists over the shared para_ids, in para_id order.
std::pair<std::vector<FrameCode>, std::vector<FrameCode>> align_main_frames(
    std::span<const AnnotationRecord> coder_a, std::span<const AnnotationRecord> coder_b);

AgreementReport agreement_report(const AnnotationStore& store, const std::string& coder_a,
                                 const std::string& coder_b);

// ---------------------------------------------------------------------------
// Labelling sessions

struct AnnotationSession {
    std::string session_id;
    std::string coder_id;
    std::vector<std::string> queue;
    std::size_t cursor = 0;

    bool done() const noexcept { return cursor >= queue.size(); }
};

class SessionManager {
public:
    // `paragraphs` is the corpus to be labelled; its order becomes queue order.
    SessionManager(std::vector<Paragraph> paragraphs, AnnotationStore& store);

    // New session over the paragraphs this coder has not labelled yet.
    AnnotationSession open(const std::string& coder_id);

    AnnotationSession session(const std::string& session_id) const;

    // queue[cursor], or nullopt once the queue is exhausted. Does not advance.
    std::optional<Paragraph> next_paragraph(const std::string& session_id) const;

    // Checks in order: unknown session (SessionError), label validity
    // (ValidationError), duplicate (para_id, coder) (ConflictError), and
    // para_id == queue[cursor] (SequencingError). Advances the cursor on success.
    AnnotationRecord submit(const std::string& session_id, const std::string& para_id,
                            const LabelSet& labels);

    std::size_t corpus_size() const noexcept { return paragraphs_.size(); }
    const std::vector<Paragraph>& paragraphs() const noexcept { return paragraphs_; }

private:
    std::vector<Paragraph> paragraphs_;
    std::unordered_map<std::string, std::size_t> index_;
    AnnotationStore& store_;
    mutable std::mutex mutex_;
    std::map<std::string, AnnotationSession> sessions_;
    std::size_t next_id_ = 1;
};

}  // namespace frames
