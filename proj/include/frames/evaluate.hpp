#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frames/codebook.hpp"
#include "frames/corpus.hpp"
#include "frames/train.hpp"

namespace frames {

// Rows are actual codes, columns predicted codes, both in frame_index order.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumFrames>, kNumFrames> counts{};

    std::size_t& at(FrameCode actual, FrameCode predicted) {
        return counts[static_cast<std::size_t>(frame_index(actual))][static_cast<std::size_t>(frame_index(predicted))];
    }
    std::size_t at(FrameCode actual, FrameCode predicted) const {
        return counts[static_cast<std::size_t>(frame_index(actual))][static_cast<std::size_t>(frame_index(predicted))];
    }
    std::size_t row_sum(std::size_t i) const noexcept;
    std::size_t column_sum(std::size_t j) const noexcept;
    std::size_t trace() const noexcept;
    std::size_t total() const noexcept;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws InputError on empty or unequal-length inputs.
ConfusionMatrix confusion(std::span<const FrameCode> y_true, std::span<const FrameCode> y_pred);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

using PerClassMetrics = std::array<ClassMetrics, kNumFrames>;

// An empty predicted column gives precision 0; an empty row gives recall 0;
// f1 is 0 whenever precision + recall is 0.
PerClassMetrics class_metrics(const ConfusionMatrix& cm);

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    PerClassMetrics per_class{};
    AverageMetrics macro;
    AverageMetrics weighted;
    double accuracy = 0.0;
    std::size_t total = 0;

    const ClassMetrics& operator[](FrameCode code) const {
        return per_class[static_cast<std::size_t>(frame_index(code))];
    }
};

// Macro means run over all six classes. Throws InputError for an empty matrix.
EvalReport aggregate(const PerClassMetrics& per_class, const ConfusionMatrix& cm);
EvalReport evaluate_matrix(const ConfusionMatrix& cm);

// decimals < 0 keeps full precision; otherwise values are rounded for display.
nlohmann::ordered_json to_json(const EvalReport& report, int decimals = -1);
nlohmann::ordered_json to_json(const ConfusionMatrix& cm);

// Fixed-width text table with two-decimal values.
std::string format_report(const EvalReport& report);

// CSV with the header "actual\predicted,AR01,...". Columns may appear in any
// order; rows are matched by their first cell. Throws ParseError.
ConfusionMatrix read_confusion_csv(std::istream& in);
ConfusionMatrix load_confusion_csv(const std::filesystem::path& path);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// Folds and cross-validation

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    bool stratified = false;
    std::map<std::string, int> assignments;  // para_id -> fold

    std::vector<std::size_t> fold_sizes() const;
};

// Deterministic for a fixed seed. Unstratified: shuffled records dealt to
// folds in turn. Stratified: the same within each main-frame class, the
// dealing position carrying over from one class to the next. Throws
// InputError when k < 2 or k exceeds the dataset size.
FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed, bool stratified = false);

// Builds a predictor from a training portion. `heldout` is the fold about to
// be predicted; trainers may use it for progress reporting only.
using FoldTrainer =
    std::function<std::unique_ptr<FramePredictor>(const Dataset& train, const Dataset& heldout, int fold)>;

struct OutOfFoldPrediction {
    std::string para_id;
    int fold = 0;
    FrameCode actual = FrameCode::AR01;
    Prediction prediction;
};

struct CrossValidationResult {
    FoldPlan plan;
    ConfusionMatrix pooled;
    EvalReport report;
    std::vector<OutOfFoldPrediction> predictions;  // dataset order
};

CrossValidationResult cross_validate(const Dataset& ds, const FoldPlan& plan, const FoldTrainer& trainer);
CrossValidationResult cross_validate(const Dataset& ds, int k, std::uint64_t seed, bool stratified,
                                     const FoldTrainer& trainer);

struct FineTuneTrainerOptions {
    // Evaluate on the held-out fold at every logging step. Only the log is
    // affected; the final weights are the same either way.
    bool log_heldout_metrics = true;
};

// Fine-tunes a fresh model per fold under base.output_dir/fold-<i>.
FoldTrainer fine_tune_trainer(const TrainingConfig& base, FineTuneTrainerOptions options = {});

// Predicts main frames for a gold set and scores them. Throws LeakageError
// when a gold doc_id appears in `training_doc_ids`, InputError when the set is
// empty or not tagged gold.
EvalReport evaluate_gold(const FramePredictor& predictor, const Dataset& gold,
                         std::span<const std::string> training_doc_ids);

// Uses the artifact's recorded training documents for the leakage check.
EvalReport evaluate_gold(const ModelArtifact& artifact, const Dataset& gold);

}  // namespace frames
