#include "frames/model/bert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frames/error.hpp"
#include "frames/kernels.hpp"

namespace frames::model {

namespace {

using Vec = std::vector<float>;

constexpr float kInvSqrt2 = 0.70710678118654752440f;
constexpr float kInvSqrt2Pi = 0.39894228040143267794f;

float gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * kInvSqrt2)); }

float gelu_grad(float x) {
    const float cdf = 0.5f * (1.0f + std::erf(x * kInvSqrt2));
    return cdf + x * kInvSqrt2Pi * std::exp(-0.5f * x * x);
}

// y[rows, out] = x[rows, in] * W[out, in]^T + b
void linear(const kernels::KernelSet& ks, int rows, int in, int out, const float* x, const Parameter& w,
            const Parameter& b, float* y) {
    ks.gemm_nt(rows, out, in, x, in, w.value.data(), in, y, out, false);
    for (int r = 0; r < rows; ++r) ks.axpy(1.0f, b.value.data(), y + static_cast<std::ptrdiff_t>(r) * out, out);
}

// Accumulates dW, db; writes (or adds, with accumulate_dx) dx.
void linear_backward(const kernels::KernelSet& ks, int rows, int in, int out, const float* dy, const float* x,
                     Parameter& w, Parameter& b, float* dx, bool accumulate_dx) {
    ks.gemm_tn(out, in, rows, dy, out, x, in, w.grad.data(), in, true);
    for (int r = 0; r < rows; ++r) ks.axpy(1.0f, dy + static_cast<std::ptrdiff_t>(r) * out, b.grad.data(), out);
    if (dx) ks.gemm_nn(rows, in, out, dy, out, w.value.data(), in, dx, in, accumulate_dx);
}

void layer_norm(int rows, int width, const float* x, const Parameter& g, const Parameter& b, float eps,
                float* y, float* xhat, float* rstd) {
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + static_cast<std::ptrdiff_t>(r) * width;
        double mean = 0.0;
        for (int i = 0; i < width; ++i) mean += xr[i];
        mean /= width;
        double var = 0.0;
        for (int i = 0; i < width; ++i) {
            const double d = xr[i] - mean;
            var += d * d;
        }
        var /= width;
        const auto inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        rstd[r] = inv;
        float* hr = xhat + static_cast<std::ptrdiff_t>(r) * width;
        float* yr = y + static_cast<std::ptrdiff_t>(r) * width;
        for (int i = 0; i < width; ++i) {
            hr[i] = static_cast<float>(xr[i] - mean) * inv;
            yr[i] = hr[i] * g.value[i] + b.value[i];
        }
    }
}

// dx = d/dx of LayerNorm given upstream dy. Accumulates dg, db.
void layer_norm_backward(int rows, int width, const float* dy, const float* xhat, const float* rstd,
                         Parameter& g, Parameter& b, float* dx) {
    for (int r = 0; r < rows; ++r) {
        const float* dyr = dy + static_cast<std::ptrdiff_t>(r) * width;
        const float* hr = xhat + static_cast<std::ptrdiff_t>(r) * width;
        float* dxr = dx + static_cast<std::ptrdiff_t>(r) * width;
        double mean_dh = 0.0;
        double mean_dh_h = 0.0;
        for (int i = 0; i < width; ++i) {
            g.grad[i] += dyr[i] * hr[i];
            b.grad[i] += dyr[i];
            const float dh = dyr[i] * g.value[i];
            mean_dh += dh;
            mean_dh_h += static_cast<double>(dh) * hr[i];
        }
        mean_dh /= width;
        mean_dh_h /= width;
        for (int i = 0; i < width; ++i) {
            const float dh = dyr[i] * g.value[i];
            dxr[i] = rstd[r] * static_cast<float>(dh - mean_dh - hr[i] * mean_dh_h);
        }
    }
}

// Inverted dropout. An empty mask means the pass ran without dropout.
void dropout(Vec& data, Vec& mask, float p, Rng* rng) {
    if (!rng || p <= 0.0f) {
        mask.clear();
        return;
    }
    mask.resize(data.size());
    const float keep_scale = 1.0f / (1.0f - p);
    for (std::size_t i = 0; i < data.size(); ++i) {
        mask[i] = rng->uniform() >= p ? keep_scale : 0.0f;
        data[i] *= mask[i];
    }
}

void apply_mask(Vec& grad, const Vec& mask) {
    if (mask.empty()) return;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
}

}  // namespace

// ---------------------------------------------------------------------------

void EncoderConfig::validate() const {
    auto fail = [](const std::string& what) { throw DataError("encoder config: " + what); };
    if (vocab_size <= 0 || hidden_size <= 0 || num_hidden_layers <= 0 || num_attention_heads <= 0 ||
        intermediate_size <= 0 || max_position_embeddings <= 0 || type_vocab_size <= 0) {
        fail("all sizes must be positive");
    }
    if (hidden_size % num_attention_heads != 0) fail("hidden_size must be divisible by num_attention_heads");
    if (pad_token_id < 0 || pad_token_id >= vocab_size) fail("pad_token_id out of range");
    if (hidden_dropout_prob < 0.0f || hidden_dropout_prob >= 1.0f || attention_probs_dropout_prob < 0.0f ||
        attention_probs_dropout_prob >= 1.0f) {
        fail("dropout probabilities must lie in [0, 1)");
    }
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    try {
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.hidden_size = j.value("hidden_size", c.hidden_size);
        c.num_hidden_layers = j.value("num_hidden_layers", c.num_hidden_layers);
        c.num_attention_heads = j.value("num_attention_heads", c.num_attention_heads);
        c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
        c.max_position_embeddings = j.value("max_position_embeddings", c.max_position_embeddings);
        c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
        c.pad_token_id = j.value("pad_token_id", c.pad_token_id);
        c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
        c.hidden_dropout_prob = j.value("hidden_dropout_prob", c.hidden_dropout_prob);
        c.attention_probs_dropout_prob = j.value("attention_probs_dropout_prob", c.attention_probs_dropout_prob);
        c.initializer_range = j.value("initializer_range", c.initializer_range);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("encoder config: ") + e.what());
    }
    if (j.contains("hidden_act") && j["hidden_act"] != "gelu") {
        throw DataError("encoder config: only hidden_act \"gelu\" is supported");
    }
    if (j.contains("position_embedding_type") && j["position_embedding_type"] != "absolute") {
        throw DataError("encoder config: only absolute position embeddings are supported");
    }
    c.validate();
    return c;
}

nlohmann::ordered_json to_json(const EncoderConfig& c) {
    nlohmann::ordered_json j;
    j["model_type"] = "bert";
    j["vocab_size"] = c.vocab_size;
    j["hidden_size"] = c.hidden_size;
    j["num_hidden_layers"] = c.num_hidden_layers;
    j["num_attention_heads"] = c.num_attention_heads;
    j["intermediate_size"] = c.intermediate_size;
    j["max_position_embeddings"] = c.max_position_embeddings;
    j["type_vocab_size"] = c.type_vocab_size;
    j["pad_token_id"] = c.pad_token_id;
    j["layer_norm_eps"] = c.layer_norm_eps;
    j["hidden_dropout_prob"] = c.hidden_dropout_prob;
    j["attention_probs_dropout_prob"] = c.attention_probs_dropout_prob;
    j["initializer_range"] = c.initializer_range;
    j["hidden_act"] = "gelu";
    j["position_embedding_type"] = "absolute";
    return j;
}

Batch collate(std::span<const std::vector<int>> sequences, int pad_id) {
    Batch batch;
    batch.batch_size = static_cast<int>(sequences.size());
    for (const auto& s : sequences) batch.seq_len = std::max(batch.seq_len, static_cast<int>(s.size()));
    const auto cells = static_cast<std::size_t>(batch.batch_size) * static_cast<std::size_t>(batch.seq_len);
    batch.ids.assign(cells, pad_id);
    batch.mask.assign(cells, 0);
    for (std::size_t b = 0; b < sequences.size(); ++b) {
        if (sequences[b].empty()) throw DataError("cannot collate an empty sequence");
        std::copy(sequences[b].begin(), sequences[b].end(),
                  batch.ids.begin() + static_cast<std::ptrdiff_t>(b * static_cast<std::size_t>(batch.seq_len)));
        std::fill_n(batch.mask.begin() + static_cast<std::ptrdiff_t>(b * static_cast<std::size_t>(batch.seq_len)),
                    sequences[b].size(), std::uint8_t{1});
    }
    return batch;
}

// ---------------------------------------------------------------------------

struct BertClassifier::Activations {
    struct Layer {
        Vec x_in, q, k, v;
        Vec probs, probs_mask, probs_used;
        Vec ctx, attn_out, attn_mask, xhat1, rstd1, x1;
        Vec inter_pre, inter, out, out_mask, xhat2, rstd2;
    };

    Vec emb_xhat, emb_rstd, emb_mask, x0;
    std::vector<Layer> layers;
    Vec x_out;
    Vec cls, pooled, pool_mask, pooled_used, logits;
};

BertClassifier::BertClassifier(EncoderConfig config, int num_labels)
    : config_(config), num_labels_(num_labels) {
    config_.validate();
    if (num_labels_ <= 0) throw DataError("num_labels must be positive");
    const std::int64_t h = config_.hidden_size;
    const std::int64_t inter = config_.intermediate_size;
    word_emb_ = add_param("bert.embeddings.word_embeddings.weight", {config_.vocab_size, h}, true);
    pos_emb_ = add_param("bert.embeddings.position_embeddings.weight", {config_.max_position_embeddings, h}, true);
    type_emb_ = add_param("bert.embeddings.token_type_embeddings.weight", {config_.type_vocab_size, h}, true);
    emb_ln_g_ = add_param("bert.embeddings.LayerNorm.weight", {h}, false);
    emb_ln_b_ = add_param("bert.embeddings.LayerNorm.bias", {h}, false);
    for (int l = 0; l < config_.num_hidden_layers; ++l) {
        const std::string p = "bert.encoder.layer." + std::to_string(l) + ".";
        LayerIndex li{};
        li.q_w = add_param(p + "attention.self.query.weight", {h, h}, true);
        li.q_b = add_param(p + "attention.self.query.bias", {h}, false);
        li.k_w = add_param(p + "attention.self.key.weight", {h, h}, true);
        li.k_b = add_param(p + "attention.self.key.bias", {h}, false);
        li.v_w = add_param(p + "attention.self.value.weight", {h, h}, true);
        li.v_b = add_param(p + "attention.self.value.bias", {h}, false);
        li.ao_w = add_param(p + "attention.output.dense.weight", {h, h}, true);
        li.ao_b = add_param(p + "attention.output.dense.bias", {h}, false);
        li.ln1_g = add_param(p + "attention.output.LayerNorm.weight", {h}, false);
        li.ln1_b = add_param(p + "attention.output.LayerNorm.bias", {h}, false);
        li.i_w = add_param(p + "intermediate.dense.weight", {inter, h}, true);
        li.i_b = add_param(p + "intermediate.dense.bias", {inter}, false);
        li.o_w = add_param(p + "output.dense.weight", {h, inter}, true);
        li.o_b = add_param(p + "output.dense.bias", {h}, false);
        li.ln2_g = add_param(p + "output.LayerNorm.weight", {h}, false);
        li.ln2_b = add_param(p + "output.LayerNorm.bias", {h}, false);
        layers_.push_back(li);
    }
    pool_w_ = add_param("bert.pooler.dense.weight", {h, h}, true);
    pool_b_ = add_param("bert.pooler.dense.bias", {h}, false);
    cls_w_ = add_param("classifier.weight", {num_labels_, h}, true);
    cls_b_ = add_param("classifier.bias", {num_labels_}, false);
}

std::size_t BertClassifier::add_param(std::string name, std::vector<std::int64_t> shape, bool decay) {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    Parameter p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(n, 0.0f);
    p.grad.assign(n, 0.0f);
    p.decay = decay;
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

Parameter& BertClassifier::parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw DataError("no parameter named '" + name + "'");
}

const Parameter& BertClassifier::parameter(const std::string& name) const {
    return const_cast<BertClassifier*>(this)->parameter(name);
}

std::size_t BertClassifier::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

void BertClassifier::init_random(std::uint64_t seed) {
    Rng rng(seed);
    const double std_dev = config_.initializer_range;
    for (auto& p : params_) {
        const bool is_ln_gain = p.name.ends_with("LayerNorm.weight");
        if (is_ln_gain) {
            std::fill(p.value.begin(), p.value.end(), 1.0f);
        } else if (p.shape.size() == 2) {
            for (auto& x : p.value) x = static_cast<float>(rng.normal() * std_dev);
        } else {
            std::fill(p.value.begin(), p.value.end(), 0.0f);
        }
    }
    auto& words = params_[word_emb_];
    std::fill_n(words.value.begin() + static_cast<std::ptrdiff_t>(config_.pad_token_id) * config_.hidden_size,
                config_.hidden_size, 0.0f);
}

void BertClassifier::init_head(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& x : params_[cls_w_].value) x = static_cast<float>(rng.normal() * config_.initializer_range);
    std::fill(params_[cls_b_].value.begin(), params_[cls_b_].value.end(), 0.0f);
}

void BertClassifier::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
}

std::vector<NamedTensor> BertClassifier::export_tensors() const {
    std::vector<NamedTensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back({p.name, p.shape, p.value});
    return out;
}

bool BertClassifier::import_tensors(std::span<const NamedTensor> tensors) {
    bool head_loaded = true;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        const bool is_head = i == cls_w_ || i == cls_b_;
        auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.name == p.name; });
        if (it == tensors.end() || it->shape != p.shape) {
            if (is_head) {
                head_loaded = false;
                continue;
            }
            throw LoadError(it == tensors.end() ? "weights lack tensor '" + p.name + "'"
                                                : "tensor '" + p.name + "' has the wrong shape");
        }
        p.value = it->data;
    }
    return head_loaded;
}

// ---------------------------------------------------------------------------

void BertClassifier::forward(const Batch& batch, Activations& a, Rng* drop) const {
    const auto& ks = kernels::active();
    const int B = batch.batch_size;
    const int T = batch.seq_len;
    const int R = B * T;
    const int H = config_.hidden_size;
    const int I = config_.intermediate_size;
    const int heads = config_.num_attention_heads;
    const int d = config_.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const auto RH = static_cast<std::size_t>(R) * H;
    if (T > config_.max_position_embeddings) {
        throw DataError("sequence length " + std::to_string(T) + " exceeds max_position_embeddings");
    }

    // Embeddings.
    Vec emb(RH);
    const auto& words = params_[word_emb_].value;
    const auto& pos = params_[pos_emb_].value;
    const auto& type = params_[type_emb_].value;
    for (int r = 0; r < R; ++r) {
        const int id = batch.ids[static_cast<std::size_t>(r)];
        if (id < 0 || id >= config_.vocab_size) throw DataError("token id out of vocabulary range");
        const int t = r % T;
        float* er = emb.data() + static_cast<std::ptrdiff_t>(r) * H;
        const float* w = words.data() + static_cast<std::ptrdiff_t>(id) * H;
        const float* p = pos.data() + static_cast<std::ptrdiff_t>(t) * H;
        for (int i = 0; i < H; ++i) er[i] = w[i] + p[i] + type[static_cast<std::size_t>(i)];
    }
    a.x0.resize(RH);
    a.emb_xhat.resize(RH);
    a.emb_rstd.resize(static_cast<std::size_t>(R));
    layer_norm(R, H, emb.data(), params_[emb_ln_g_], params_[emb_ln_b_], config_.layer_norm_eps, a.x0.data(),
               a.emb_xhat.data(), a.emb_rstd.data());
    dropout(a.x0, a.emb_mask, config_.hidden_dropout_prob, drop);

    a.layers.resize(layers_.size());
    const Vec* x = &a.x0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& li = layers_[l];
        auto& c = a.layers[l];
        c.x_in = *x;
        c.q.resize(RH);
        c.k.resize(RH);
        c.v.resize(RH);
        linear(ks, R, H, H, c.x_in.data(), params_[li.q_w], params_[li.q_b], c.q.data());
        linear(ks, R, H, H, c.x_in.data(), params_[li.k_w], params_[li.k_b], c.k.data());
        linear(ks, R, H, H, c.x_in.data(), params_[li.v_w], params_[li.v_b], c.v.data());

        const auto TT = static_cast<std::size_t>(T) * T;
        c.probs.assign(static_cast<std::size_t>(B) * heads * TT, 0.0f);
        for (int b = 0; b < B; ++b) {
            const std::uint8_t* mask = batch.mask.data() + static_cast<std::ptrdiff_t>(b) * T;
            for (int h = 0; h < heads; ++h) {
                const auto off = static_cast<std::ptrdiff_t>(b) * T * H + static_cast<std::ptrdiff_t>(h) * d;
                float* S = c.probs.data() + (static_cast<std::size_t>(b) * heads + h) * TT;
                ks.gemm_nt(T, T, d, c.q.data() + off, H, c.k.data() + off, H, S, T, false);
                for (int i = 0; i < T; ++i) {
                    float* row = S + static_cast<std::ptrdiff_t>(i) * T;
                    float mx = -std::numeric_limits<float>::infinity();
                    for (int j = 0; j < T; ++j) {
                        if (mask[j]) mx = std::max(mx, row[j] * scale);
                    }
                    double sum = 0.0;
                    for (int j = 0; j < T; ++j) {
                        row[j] = mask[j] ? std::exp(row[j] * scale - mx) : 0.0f;
                        sum += row[j];
                    }
                    const auto inv = static_cast<float>(1.0 / sum);
                    for (int j = 0; j < T; ++j) row[j] *= inv;
                }
            }
        }
        c.probs_used = c.probs;
        dropout(c.probs_used, c.probs_mask, config_.attention_probs_dropout_prob, drop);

        c.ctx.resize(RH);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < heads; ++h) {
                const auto off = static_cast<std::ptrdiff_t>(b) * T * H + static_cast<std::ptrdiff_t>(h) * d;
                const float* P = c.probs_used.data() + (static_cast<std::size_t>(b) * heads + h) * TT;
                ks.gemm_nn(T, d, T, P, T, c.v.data() + off, H, c.ctx.data() + off, H, false);
            }
        }

        c.attn_out.resize(RH);
        linear(ks, R, H, H, c.ctx.data(), params_[li.ao_w], params_[li.ao_b], c.attn_out.data());
        dropout(c.attn_out, c.attn_mask, config_.hidden_dropout_prob, drop);
        Vec sum1(RH);
        for (std::size_t i = 0; i < RH; ++i) sum1[i] = c.attn_out[i] + c.x_in[i];
        c.x1.resize(RH);
        c.xhat1.resize(RH);
        c.rstd1.resize(static_cast<std::size_t>(R));
        layer_norm(R, H, sum1.data(), params_[li.ln1_g], params_[li.ln1_b], config_.layer_norm_eps, c.x1.data(),
                   c.xhat1.data(), c.rstd1.data());

        const auto RI = static_cast<std::size_t>(R) * I;
        c.inter_pre.resize(RI);
        c.inter.resize(RI);
        linear(ks, R, H, I, c.x1.data(), params_[li.i_w], params_[li.i_b], c.inter_pre.data());
        for (std::size_t i = 0; i < RI; ++i) c.inter[i] = gelu(c.inter_pre[i]);
        c.out.resize(RH);
        linear(ks, R, I, H, c.inter.data(), params_[li.o_w], params_[li.o_b], c.out.data());
        dropout(c.out, c.out_mask, config_.hidden_dropout_prob, drop);
        Vec sum2(RH);
        for (std::size_t i = 0; i < RH; ++i) sum2[i] = c.out[i] + c.x1[i];
        c.xhat2.resize(RH);
        c.rstd2.resize(static_cast<std::size_t>(R));
        Vec y(RH);
        layer_norm(R, H, sum2.data(), params_[li.ln2_g], params_[li.ln2_b], config_.layer_norm_eps, y.data(),
                   c.xhat2.data(), c.rstd2.data());
        if (l + 1 == layers_.size()) {
            a.x_out = std::move(y);
            x = &a.x_out;
        } else {
            a.layers[l + 1].x_in = std::move(y);
            x = &a.layers[l + 1].x_in;
        }
    }
    if (layers_.empty()) a.x_out = a.x0;

    // Pooler over [CLS] (position 0) and classification head.
    a.cls.resize(static_cast<std::size_t>(B) * H);
    for (int b = 0; b < B; ++b) {
        std::copy_n(a.x_out.begin() + static_cast<std::ptrdiff_t>(b) * T * H, H,
                    a.cls.begin() + static_cast<std::ptrdiff_t>(b) * H);
    }
    a.pooled.resize(static_cast<std::size_t>(B) * H);
    linear(ks, B, H, H, a.cls.data(), params_[pool_w_], params_[pool_b_], a.pooled.data());
    for (auto& v : a.pooled) v = std::tanh(v);
    a.pooled_used = a.pooled;
    dropout(a.pooled_used, a.pool_mask, config_.hidden_dropout_prob, drop);
    a.logits.resize(static_cast<std::size_t>(B) * num_labels_);
    linear(ks, B, H, num_labels_, a.pooled_used.data(), params_[cls_w_], params_[cls_b_], a.logits.data());
}

void BertClassifier::backward(const Batch& batch, Activations& a, std::span<const float> dlogits) {
    const auto& ks = kernels::active();
    const int B = batch.batch_size;
    const int H = config_.hidden_size;
    Vec dpooled(static_cast<std::size_t>(B) * H);
    linear_backward(ks, B, H, num_labels_, dlogits.data(), a.pooled_used.data(), params_[cls_w_], params_[cls_b_],
                    dpooled.data(), false);
    backward_from_pooled(batch, a, std::move(dpooled));
}

void BertClassifier::backward_from_pooled(const Batch& batch, Activations& a, std::vector<float> dpooled) {
    const auto& ks = kernels::active();
    const int B = batch.batch_size;
    const int T = batch.seq_len;
    const int R = B * T;
    const int H = config_.hidden_size;
    const int I = config_.intermediate_size;
    const int heads = config_.num_attention_heads;
    const int d = config_.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const auto RH = static_cast<std::size_t>(R) * H;
    const auto TT = static_cast<std::size_t>(T) * T;

    apply_mask(dpooled, a.pool_mask);
    for (std::size_t i = 0; i < dpooled.size(); ++i) dpooled[i] *= 1.0f - a.pooled[i] * a.pooled[i];
    Vec dcls(static_cast<std::size_t>(B) * H);
    linear_backward(ks, B, H, H, dpooled.data(), a.cls.data(), params_[pool_w_], params_[pool_b_], dcls.data(),
                    false);

    Vec dx(RH, 0.0f);
    for (int b = 0; b < B; ++b) {
        std::copy_n(dcls.begin() + static_cast<std::ptrdiff_t>(b) * H, H,
                    dx.begin() + static_cast<std::ptrdiff_t>(b) * T * H);
    }

    Vec dsum(RH), dtmp(RH), dq(RH), dk(RH), dv(RH), dctx(RH);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& li = layers_[l];
        auto& c = a.layers[l];

        // Output block: y = LN(dropout(W_o gelu(W_i x1)) + x1)
        layer_norm_backward(R, H, dx.data(), c.xhat2.data(), c.rstd2.data(), params_[li.ln2_g], params_[li.ln2_b],
                            dsum.data());
        dtmp = dsum;
        apply_mask(dtmp, c.out_mask);
        const auto RI = static_cast<std::size_t>(R) * I;
        Vec dinter(RI);
        linear_backward(ks, R, I, H, dtmp.data(), c.inter.data(), params_[li.o_w], params_[li.o_b], dinter.data(),
                        false);
        for (std::size_t i = 0; i < RI; ++i) dinter[i] *= gelu_grad(c.inter_pre[i]);
        Vec dx1 = dsum;  // residual path
        linear_backward(ks, R, H, I, dinter.data(), c.x1.data(), params_[li.i_w], params_[li.i_b], dx1.data(), true);

        // Attention block: x1 = LN(dropout(W_ao ctx) + x_in)
        layer_norm_backward(R, H, dx1.data(), c.xhat1.data(), c.rstd1.data(), params_[li.ln1_g], params_[li.ln1_b],
                            dsum.data());
        dtmp = dsum;
        apply_mask(dtmp, c.attn_mask);
        linear_backward(ks, R, H, H, dtmp.data(), c.ctx.data(), params_[li.ao_w], params_[li.ao_b], dctx.data(),
                        false);

        std::fill(dv.begin(), dv.end(), 0.0f);
        Vec dP(TT);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < heads; ++h) {
                const auto off = static_cast<std::ptrdiff_t>(b) * T * H + static_cast<std::ptrdiff_t>(h) * d;
                const std::size_t poff = (static_cast<std::size_t>(b) * heads + h) * TT;
                const float* P = c.probs.data() + poff;
                const float* Pu = c.probs_used.data() + poff;
                ks.gemm_nt(T, T, d, dctx.data() + off, H, c.v.data() + off, H, dP.data(), T, false);
                ks.gemm_tn(T, d, T, Pu, T, dctx.data() + off, H, dv.data() + off, H, true);
                if (!c.probs_mask.empty()) {
                    const float* m = c.probs_mask.data() + poff;
                    for (std::size_t i = 0; i < TT; ++i) dP[i] *= m[i];
                }
                for (int i = 0; i < T; ++i) {
                    float* dr = dP.data() + static_cast<std::ptrdiff_t>(i) * T;
                    const float* pr = P + static_cast<std::ptrdiff_t>(i) * T;
                    double inner = 0.0;
                    for (int j = 0; j < T; ++j) inner += static_cast<double>(dr[j]) * pr[j];
                    for (int j = 0; j < T; ++j) dr[j] = pr[j] * (dr[j] - static_cast<float>(inner)) * scale;
                }
                ks.gemm_nn(T, d, T, dP.data(), T, c.k.data() + off, H, dq.data() + off, H, false);
                ks.gemm_tn(T, d, T, dP.data(), T, c.q.data() + off, H, dk.data() + off, H, false);
            }
        }

        dx = dsum;  // residual path into x_in
        linear_backward(ks, R, H, H, dq.data(), c.x_in.data(), params_[li.q_w], params_[li.q_b], dx.data(), true);
        linear_backward(ks, R, H, H, dk.data(), c.x_in.data(), params_[li.k_w], params_[li.k_b], dx.data(), true);
        linear_backward(ks, R, H, H, dv.data(), c.x_in.data(), params_[li.v_w], params_[li.v_b], dx.data(), true);
    }

    apply_mask(dx, a.emb_mask);
    layer_norm_backward(R, H, dx.data(), a.emb_xhat.data(), a.emb_rstd.data(), params_[emb_ln_g_],
                        params_[emb_ln_b_], dsum.data());
    auto& words = params_[word_emb_].grad;
    auto& pos = params_[pos_emb_].grad;
    auto& type = params_[type_emb_].grad;
    for (int r = 0; r < R; ++r) {
        const float* g = dsum.data() + static_cast<std::ptrdiff_t>(r) * H;
        const int id = batch.ids[static_cast<std::size_t>(r)];
        if (id != config_.pad_token_id) ks.axpy(1.0f, g, words.data() + static_cast<std::ptrdiff_t>(id) * H, H);
        ks.axpy(1.0f, g, pos.data() + static_cast<std::ptrdiff_t>(r % T) * H, H);
        ks.axpy(1.0f, g, type.data(), H);
    }
}

namespace {

// Mean cross-entropy; optionally writes d(loss)/d(logits).
float cross_entropy(std::span<const float> logits, std::span<const int> labels, int num_labels, float* dlogits) {
    const auto B = labels.size();
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const float* row = logits.data() + b * static_cast<std::size_t>(num_labels);
        const int y = labels[b];
        if (y < 0 || y >= num_labels) throw DataError("label index out of range");
        double mx = row[0];
        for (int c = 1; c < num_labels; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double sum = 0.0;
        for (int c = 0; c < num_labels; ++c) sum += std::exp(row[c] - mx);
        const double lse = mx + std::log(sum);
        total += lse - row[y];
        if (dlogits) {
            for (int c = 0; c < num_labels; ++c) {
                const double p = std::exp(row[c] - lse);
                dlogits[b * static_cast<std::size_t>(num_labels) + static_cast<std::size_t>(c)] =
                    static_cast<float>((p - (c == y ? 1.0 : 0.0)) / static_cast<double>(B));
            }
        }
    }
    return static_cast<float>(total / static_cast<double>(B));
}

}  // namespace

std::vector<float> BertClassifier::logits(const Batch& batch) const {
    Activations a;
    forward(batch, a, nullptr);
    return a.logits;
}

std::vector<float> BertClassifier::logits(std::span<const int> ids) const {
    Batch batch;
    batch.batch_size = 1;
    batch.seq_len = static_cast<int>(ids.size());
    batch.ids.assign(ids.begin(), ids.end());
    batch.mask.assign(ids.size(), 1);
    return logits(batch);
}

float BertClassifier::forward_backward(const Batch& batch, std::span<const int> labels, Rng* dropout_rng) {
    if (labels.size() != static_cast<std::size_t>(batch.batch_size)) {
        throw DataError("label count does not match batch size");
    }
    Activations a;
    forward(batch, a, dropout_rng);
    std::vector<float> dlogits(a.logits.size());
    const float loss = cross_entropy(a.logits, labels, num_labels_, dlogits.data());
    backward(batch, a, dlogits);
    return loss;
}

float BertClassifier::forward_backward_pooled(const Batch& batch, const PooledHead& head, Rng* dropout_rng) {
    Activations a;
    forward(batch, a, dropout_rng);
    std::vector<float> dpooled(a.pooled_used.size(), 0.0f);
    const float loss = head(a.pooled_used, dpooled);
    backward_from_pooled(batch, a, std::move(dpooled));
    return loss;
}

float BertClassifier::loss(const Batch& batch, std::span<const int> labels) const {
    if (labels.size() != static_cast<std::size_t>(batch.batch_size)) {
        throw DataError("label count does not match batch size");
    }
    const auto out = logits(batch);
    return cross_entropy(out, labels, num_labels_, nullptr);
}

}  // namespace frames::model
