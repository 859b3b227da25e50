#include "frames/codebook.hpp"

#include <sstream>

#include "frames/error.hpp"

namespace frames {

namespace {

constexpr std::array<std::string_view, kNumFrames> kCodeNames = {
    "AR01", "HI02", "CF03", "MF04", "EF05", "NO06"};

std::vector<FrameDefinition> build_codebook() {
    return {
        {FrameCode::AR01,
         "Attribution of responsibility",
         {"Does the paragraph suggest that an individual (e.g. a politician) or a group "
          "(e.g. a party, state, governmental departments, society, civilian groups) is "
          "responsible for the problem or can resolve it?",
          "Does the paragraph suggest a solution to the problem or call for urgent action "
          "over it?"}},
        {FrameCode::HI02,
         "Human interest frame",
         {"Does the paragraph use a human example or emphasise the effect of a problem on "
          "humans? Is the human the central focus of the paragraph?",
          "Does the paragraph use emotive language that may invoke an emotional response in "
          "the reader (like outrage, empathy-caring, sympathy, or compassion)?"}},
        {FrameCode::CF03,
         "Conflict frame",
         {"Does the paragraph refer to any form of negative interaction or framing "
          "(disagreement, confrontation, spat, etc.) between two sides of any kind (actors, "
          "problem, viewpoints)?"}},
        {FrameCode::MF04,
         "Morality frame",
         {"Does the paragraph contain any form of morality (what is good or bad? Does it talk "
          "about Good and Evil? Does it talk about religious tenets or prescribe a socially "
          "apt behaviour or ethics?)"}},
        {FrameCode::EF05,
         "Economic frame",
         {"Does the paragraph speak about economic changes in policy or law or refer to any "
          "form of economic loss/gain, expense, costs, or economic consequences of a current "
          "policy or law?"}},
        {FrameCode::NO06, "No frame", {}},
    };
}

}  // namespace

int frame_index(FrameCode code) noexcept { return static_cast<int>(code); }

FrameCode frame_from_index(int index) {
    if (index < 0 || index >= static_cast<int>(kNumFrames)) {
        throw EncodingError("frame index out of range: " + std::to_string(index));
    }
    return static_cast<FrameCode>(index);
}

std::string_view frame_name(FrameCode code) noexcept {
    return kCodeNames[static_cast<std::size_t>(code)];
}

FrameCode parse_frame_code(std::string_view text) {
    for (std::size_t i = 0; i < kCodeNames.size(); ++i) {
        if (kCodeNames[i] == text) return static_cast<FrameCode>(i);
    }
    throw EncodingError("unknown frame code '" + std::string(text) + "'");
}

const std::vector<FrameDefinition>& codebook_text() {
    static const std::vector<FrameDefinition> book = build_codebook();
    return book;
}

std::string codebook_markdown() {
    std::ostringstream out;
    out << "# Generic news frame codebook\n\n"
        << "Unit of coding: one paragraph. Frames AR01-EF05 may co-occur; mark every frame "
           "present and select the most pronounced one as the main frame. NO06 is "
           "exclusive.\n";
    for (const auto& def : codebook_text()) {
        out << "\n## " << def.name << " (" << frame_name(def.code) << ")\n\n";
        if (def.guiding_questions.empty()) {
            out << "None of the frames above applies.\n";
        }
        int n = 1;
        for (const auto& q : def.guiding_questions) out << n++ << ". " << q << "\n";
    }
    return out.str();
}

LabelSetVerdict validate_label_set(const LabelSet& labels) {
    LabelSetVerdict verdict;
    if (labels.frames.empty()) verdict.violations.emplace_back(rules::kNonEmpty);
    if (!labels.frames.contains(labels.main)) verdict.violations.emplace_back(rules::kMainInFrames);
    if (labels.frames.contains(FrameCode::NO06) && labels.frames.size() > 1) {
        verdict.violations.emplace_back(rules::kNoFrameExclusive);
    }
    return verdict;
}

void require_valid(const LabelSet& labels, std::string_view context) {
    auto verdict = validate_label_set(labels);
    if (verdict.ok()) return;
    std::string message = context.empty() ? "invalid label set" : std::string(context);
    message += ":";
    for (const auto& v : verdict.violations) message += " [" + v + "]";
    throw ValidationError(message, std::move(verdict.violations));
}

}  // namespace frames
