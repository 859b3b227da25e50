#include <algorithm>
#include <cmath>
#include <fstream>

#include "frames/error.hpp"
#include "frames/model/weights.hpp"
#include "frames/train.hpp"

namespace frames {

namespace fs = std::filesystem;

double ScoreVector::sum() const noexcept {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

FrameCode ScoreVector::argmax() const noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return kAllFrames[best];
}

ScoreVector softmax_scores(std::span<const float> logits) {
    if (logits.size() != kNumFrames) throw DataError("expected one logit per frame code");
    ScoreVector s;
    double mx = logits[0];
    for (float v : logits) mx = std::max(mx, static_cast<double>(v));
    double total = 0.0;
    for (std::size_t i = 0; i < kNumFrames; ++i) {
        s.probs[i] = std::exp(static_cast<double>(logits[i]) - mx);
        total += s.probs[i];
    }
    for (auto& p : s.probs) p /= total;
    return s;
}

nlohmann::ordered_json to_json(const ScoreVector& scores) {
    nlohmann::ordered_json j;
    for (auto code : kAllFrames) j[std::string(frame_name(code))] = scores[code];
    return j;
}

nlohmann::ordered_json to_json(const Prediction& p) {
    nlohmann::ordered_json j;
    j["scores"] = to_json(p.scores);
    j["main"] = std::string(frame_name(p.main));
    return j;
}

Prediction FramePredictor::predict(const std::string& text) const {
    const std::string one[] = {text};
    return predict_batch(one).at(0);
}

namespace {

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("missing '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

ModelArtifact ModelArtifact::open(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw LoadError("model directory '" + dir.string() + "' does not exist");
    ModelArtifact a;
    a.dir = dir;
    a.weights = dir / "model.bin";
    a.tokenizer = dir / "vocab.txt";
    if (!fs::exists(a.weights)) throw LoadError("missing '" + a.weights.string() + "'");
    if (!fs::exists(a.tokenizer)) throw LoadError("missing '" + a.tokenizer.string() + "'");
    const auto labels = read_json_file(dir / "label_map.json");
    try {
        a.label_map = labels.get<std::map<std::string, int>>();
    } catch (const nlohmann::json::exception&) {
        throw LoadError("label_map.json is not a code -> index table");
    }
    std::map<std::string, int> expected;
    for (auto code : kAllFrames) expected[std::string(frame_name(code))] = frame_index(code);
    if (a.label_map != expected) throw LoadError("label_map.json does not match the codebook");
    const auto docs = read_json_file(dir / "training_docs.json");
    try {
        a.config_fingerprint = docs.at("config_fingerprint").get<std::string>();
        a.training_doc_ids = docs.at("doc_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("training_docs.json: ") + e.what());
    }
    return a;
}

Classifier::Classifier(model::WordPieceTokenizer tokenizer, model::BertClassifier model, int max_sequence_length)
    : tokenizer_(std::move(tokenizer)),
      model_(std::move(model)),
      max_len_(std::min(max_sequence_length, model_.config().max_position_embeddings)) {
    if (model_.num_labels() != static_cast<int>(kNumFrames)) throw DataError("classifier head must have 6 outputs");
    if (tokenizer_.vocab_size() > static_cast<std::size_t>(model_.config().vocab_size)) {
        throw DataError("tokenizer vocabulary is larger than the embedding table");
    }
}

Classifier Classifier::load(const fs::path& dir) {
    const auto artifact = ModelArtifact::open(dir);
    model::EncoderConfig enc;
    try {
        enc = model::encoder_config_from_json(read_json_file(dir / "config.json"));
    } catch (const DataError& e) {
        throw LoadError(e.what());
    }
    int max_len = enc.max_position_embeddings;
    if (fs::exists(dir / "training_config.json")) {
        const auto tc = read_json_file(dir / "training_config.json");
        max_len = tc.value("max_sequence_length", max_len);
    }
    auto tokenizer = model::WordPieceTokenizer::load(artifact.tokenizer);
    model::BertClassifier net(enc, static_cast<int>(kNumFrames));
    const auto tensors = model::load_tensors(artifact.weights);
    if (!net.import_tensors(tensors)) throw LoadError("model.bin lacks the classification head");
    try {
        return Classifier(std::move(tokenizer), std::move(net), max_len);
    } catch (const DataError& e) {
        throw LoadError(e.what());
    }
}

Prediction Classifier::predict_one(std::string_view text) const {
    const auto seq = encode(tokenizer_, text, max_len_);
    const auto logits = model_.logits(std::span<const int>(seq.ids));
    Prediction p;
    p.scores = softmax_scores(logits);
    p.main = p.scores.argmax();
    return p;
}

// Each text runs unpadded, so results match predict_one exactly regardless
// of what else is in the batch.
std::vector<Prediction> Classifier::predict_batch(std::span<const std::string> texts) const {
    std::vector<Prediction> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(predict_one(t));
    return out;
}

}  // namespace frames
