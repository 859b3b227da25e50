#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace frames {

// The six coding variables. The enumerator value is the classifier head index
// and the column order of every report, so the order must never change.
enum class FrameCode : int { AR01 = 0, HI02 = 1, CF03 = 2, MF04 = 3, EF05 = 4, NO06 = 5 };

inline constexpr std::size_t kNumFrames = 6;

inline constexpr std::array<FrameCode, kNumFrames> kAllFrames = {
    FrameCode::AR01, FrameCode::HI02, FrameCode::CF03,
    FrameCode::MF04, FrameCode::EF05, FrameCode::NO06};

int frame_index(FrameCode code) noexcept;

// Throws EncodingError when index is outside 0..5.
FrameCode frame_from_index(int index);

// Literal code string, e.g. "AR01".
std::string_view frame_name(FrameCode code) noexcept;

// Inverse of frame_name. Throws EncodingError on an unknown code.
FrameCode parse_frame_code(std::string_view text);

struct FrameDefinition {
    FrameCode code;
    std::string name;
    std::vector<std::string> guiding_questions;
};

// All six definitions in frame_index order.
const std::vector<FrameDefinition>& codebook_text();

// Markdown rendering of the codebook, used for coder training handouts.
std::string codebook_markdown();

struct LabelSet {
    std::set<FrameCode> frames;
    FrameCode main = FrameCode::NO06;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

namespace rules {
inline constexpr std::string_view kNonEmpty = "frames must be non-empty";
inline constexpr std::string_view kMainInFrames = "main not in frames";
inline constexpr std::string_view kNoFrameExclusive = "NO06 must be exclusive";
}  // namespace rules

struct LabelSetVerdict {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

LabelSetVerdict validate_label_set(const LabelSet& labels);

// Throws ValidationError listing every violated rule.
void require_valid(const LabelSet& labels, std::string_view context = {});

}  // namespace frames
