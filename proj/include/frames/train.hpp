#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frames/codebook.hpp"
#include "frames/corpus.hpp"
#include "frames/model/bert.hpp"
#include "frames/model/tokenizer.hpp"

namespace frames {

struct TrainingConfig {
    std::string pretrained_encoder_id = "bert-base-uncased";
    int num_labels = static_cast<int>(kNumFrames);
    double learning_rate = 2e-5;
    int train_batch_size = 4;
    int eval_batch_size = 4;
    int epochs = 5;
    int logging_steps = 10;
    int max_sequence_length = 512;
    std::optional<std::uint64_t> seed;
    std::filesystem::path output_dir;
    bool overwrite_output = true;

    // Optimizer settings. These follow the usual trainer defaults and are
    // written to training_config.json with everything else.
    std::string optimizer = "adamw";
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.0;
    int warmup_steps = 0;
    std::string lr_schedule = "linear";
    double max_grad_norm = 1.0;

    // Throws DataError naming the first bad field. A missing seed is an error.
    void validate() const;
};

TrainingConfig training_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TrainingConfig& config);
TrainingConfig load_training_config(const std::filesystem::path& path);

// Stable hex digest of every setting that affects the trained weights
// (everything except output_dir and overwrite_output).
std::string config_fingerprint(const TrainingConfig& config);

// Optimizer updates for a training set of `n` records.
std::int64_t total_training_steps(std::size_t n, const TrainingConfig& config);

// ---------------------------------------------------------------------------

struct TokenSequence {
    std::vector<int> ids;  // [CLS] ... [SEP]
    bool truncated = false;

    int length() const noexcept { return static_cast<int>(ids.size()); }
};

// Word pieces wrapped in [CLS]/[SEP], cut at the tail so the whole sequence
// fits in `max_length` tokens (the closing [SEP] is always kept).
TokenSequence encode(const model::WordPieceTokenizer& tokenizer, std::string_view text, int max_length);

// Probabilities in frame_index order.
struct ScoreVector {
    std::array<double, kNumFrames> probs{};

    double operator[](FrameCode code) const { return probs[static_cast<std::size_t>(frame_index(code))]; }
    double sum() const noexcept;
    // Highest score, ties to the lowest frame index.
    FrameCode argmax() const noexcept;
};

ScoreVector softmax_scores(std::span<const float> logits);

struct Prediction {
    ScoreVector scores;
    FrameCode main = FrameCode::AR01;
};

nlohmann::ordered_json to_json(const ScoreVector& scores);
nlohmann::ordered_json to_json(const Prediction& prediction);

// Anything that maps paragraph texts to main-frame predictions. Implementations
// must be safe for concurrent calls.
class FramePredictor {
public:
    virtual ~FramePredictor() = default;
    virtual std::vector<Prediction> predict_batch(std::span<const std::string> texts) const = 0;
    Prediction predict(const std::string& text) const;
};

// The head index -> code table written to label_map.json.
nlohmann::ordered_json label_map_json();

struct ModelArtifact {
    std::filesystem::path dir;
    std::filesystem::path weights;    // model.bin
    std::filesystem::path tokenizer;  // vocab.txt
    std::map<std::string, int> label_map;
    std::string config_fingerprint;
    std::vector<std::string> training_doc_ids;

    // Reads the metadata of a trained model directory. Throws LoadError.
    static ModelArtifact open(const std::filesystem::path& dir);
};

class Classifier final : public FramePredictor {
public:
    Classifier(model::WordPieceTokenizer tokenizer, model::BertClassifier model, int max_sequence_length);

    // Throws LoadError on a missing or corrupt artifact.
    static Classifier load(const std::filesystem::path& dir);

    Prediction predict_one(std::string_view text) const;
    std::vector<Prediction> predict_batch(std::span<const std::string> texts) const override;

    const model::WordPieceTokenizer& tokenizer() const noexcept { return tokenizer_; }
    model::BertClassifier& model() noexcept { return model_; }
    const model::BertClassifier& model() const noexcept { return model_; }
    int max_sequence_length() const noexcept { return max_len_; }

private:
    model::WordPieceTokenizer tokenizer_;
    model::BertClassifier model_;
    int max_len_;
};

// ---------------------------------------------------------------------------

struct TrainLogEntry {
    std::int64_t step = 0;
    double epoch = 0.0;
    double train_loss = 0.0;
    std::optional<std::map<std::string, double>> eval_metrics;
};

nlohmann::ordered_json to_json(const TrainLogEntry& entry);

struct TrainingResult {
    ModelArtifact artifact;
    std::vector<TrainLogEntry> log;
    std::int64_t steps = 0;  // optimizer updates taken
};

struct FineTuneHooks {
    // Called after every log entry is written.
    std::function<void(const TrainLogEntry&)> on_log;
};

// Directory holding config.json, vocab.txt and model.bin for an encoder id:
// the id itself if it names a directory, else $FRAMES_ENCODER_HOME/<id>.
// Throws EnvironmentError when neither exists.
std::filesystem::path resolve_encoder(const std::string& encoder_id);

TrainingResult fine_tune(const TrainingConfig& config, const Dataset& train_set, const Dataset& eval_set,
                         const FineTuneHooks& hooks = {});

struct PretrainOptions {
    int epochs = 0;
    double learning_rate = 1e-3;
    int batch_size = 16;
    int max_sequence_length = 128;
    std::uint64_t seed = 0;
};

// Label-free pretraining of the encoder and pooler: a temporary head predicts
// each text's word-piece distribution from the pooled [CLS] state (softmax
// cross-entropy against the normalised bag of word pieces, special tokens
// excluded). Returns the mean loss of every epoch.
std::vector<double> pretrain_encoder(model::BertClassifier& net, const model::WordPieceTokenizer& tokenizer,
                                     std::span<const std::string> texts, const PretrainOptions& options);

// Settings for a small encoder built from a corpus.
// Below about 256 hidden units the logits barely move at the default
// fine-tuning rate, so that is the default width.
struct EncoderSpec {
    int hidden_size = 256;
    int num_layers = 2;
    int num_heads = 4;
    int intermediate_size = 512;
    int max_position_embeddings = 512;
    std::size_t vocab_limit = 8000;
    std::uint64_t seed = 0;
    PretrainOptions pretrain{.epochs = 10};
};

// Writes an encoder directory (config.json, vocab.txt, model.bin) whose
// vocabulary comes from `texts`. Weights are randomly initialised, then
// pretrained on `texts` when spec.pretrain.epochs > 0.
void init_encoder(const std::filesystem::path& dir, std::span<const std::string> texts, const EncoderSpec& spec);

}  // namespace frames
