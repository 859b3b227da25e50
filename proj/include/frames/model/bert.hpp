#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frames/model/weights.hpp"
#include "frames/rng.hpp"

namespace frames::model {

// Architecture hyperparameters. Keys mirror a Hugging Face BertConfig so a
// converted checkpoint's config.json can be read unchanged.
struct EncoderConfig {
    int vocab_size = 30522;
    int hidden_size = 768;
    int num_hidden_layers = 12;
    int num_attention_heads = 12;
    int intermediate_size = 3072;
    int max_position_embeddings = 512;
    int type_vocab_size = 2;
    int pad_token_id = 0;
    float layer_norm_eps = 1e-12f;
    float hidden_dropout_prob = 0.1f;
    float attention_probs_dropout_prob = 0.1f;
    float initializer_range = 0.02f;

    int head_dim() const { return hidden_size / num_attention_heads; }

    // Throws DataError for inconsistent values.
    void validate() const;
};

EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const EncoderConfig& config);

struct Parameter {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> value;
    std::vector<float> grad;
    bool decay = true;  // false for biases and LayerNorm parameters

    std::size_t size() const noexcept { return value.size(); }
};

// Token ids of a padded batch, row-major [batch, seq_len]; mask is 1 for real
// tokens. Every row starts with a real token.
struct Batch {
    int batch_size = 0;
    int seq_len = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
};

// Pads sequences to the longest one with `pad_id`.
Batch collate(std::span<const std::vector<int>> sequences, int pad_id);

// BERT encoder + pooler + linear head over the pooled [CLS] state
// (BertForSequenceClassification). Post-LayerNorm blocks, exact-erf GELU,
// dropout on embeddings, attention probabilities, block outputs and the
// pooled state. Gradients are computed by hand; see bert.cpp.
class BertClassifier {
public:
    BertClassifier(EncoderConfig config, int num_labels);

    const EncoderConfig& config() const noexcept { return config_; }
    int num_labels() const noexcept { return num_labels_; }

    // Normal(0, initializer_range) matrices, zero biases, unit LayerNorm
    // gains, zeroed padding embedding.
    void init_random(std::uint64_t seed);
    // Re-initialises only the classification head.
    void init_head(std::uint64_t seed);

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    Parameter& parameter(const std::string& name);
    const Parameter& parameter(const std::string& name) const;
    std::size_t parameter_count() const noexcept;

    // Logits for each row of the batch, [batch, num_labels]. Inference mode.
    std::vector<float> logits(const Batch& batch) const;
    // Single unpadded sequence.
    std::vector<float> logits(std::span<const int> ids) const;

    // Mean cross-entropy of the batch. With `dropout` non-null the pass runs
    // in training mode. Gradients are added into Parameter::grad.
    float forward_backward(const Batch& batch, std::span<const int> labels, Rng* dropout);

    // Mean cross-entropy without touching gradients (inference mode).
    float loss(const Batch& batch, std::span<const int> labels) const;

    // Runs the encoder and pooler, hands the pooled states [batch, hidden] to
    // `head`, which returns a loss and fills d(loss)/d(pooled), then
    // backpropagates into the encoder and pooler. The classification head is
    // not used. For auxiliary objectives such as encoder pretraining.
    using PooledHead = std::function<float(std::span<const float> pooled, std::span<float> dpooled)>;
    float forward_backward_pooled(const Batch& batch, const PooledHead& head, Rng* dropout);

    void zero_grad();

    std::vector<NamedTensor> export_tensors() const;

    // Copies matching tensors by name. Missing encoder tensors or shape
    // mismatches throw LoadError; a missing or mis-shaped head is left for the
    // caller and reported by the return value (true = head loaded).
    bool import_tensors(std::span<const NamedTensor> tensors);

private:
    struct LayerIndex {
        std::size_t q_w, q_b, k_w, k_b, v_w, v_b, ao_w, ao_b, ln1_g, ln1_b;
        std::size_t i_w, i_b, o_w, o_b, ln2_g, ln2_b;
    };

    struct Activations;

    std::size_t add_param(std::string name, std::vector<std::int64_t> shape, bool decay);
    void forward(const Batch& batch, Activations& acts, Rng* dropout) const;
    void backward(const Batch& batch, Activations& acts, std::span<const float> dlogits);
    void backward_from_pooled(const Batch& batch, Activations& acts, std::vector<float> dpooled_used);

    EncoderConfig config_;
    int num_labels_;
    std::vector<Parameter> params_;
    std::size_t word_emb_, pos_emb_, type_emb_, emb_ln_g_, emb_ln_b_;
    std::vector<LayerIndex> layers_;
    std::size_t pool_w_, pool_b_, cls_w_, cls_b_;
};

}  // namespace frames::model
