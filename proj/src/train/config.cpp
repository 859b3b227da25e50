#include <cstdio>
#include <fstream>
#include <set>

#include "frames/error.hpp"
#include "frames/train.hpp"

namespace frames {

void TrainingConfig::validate() const {
    auto fail = [](const std::string& what) { throw DataError("training config: " + what); };
    if (pretrained_encoder_id.empty()) fail("pretrained_encoder_id is empty");
    if (num_labels != static_cast<int>(kNumFrames)) fail("num_labels must equal the number of frame codes (6)");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (train_batch_size <= 0) fail("train_batch_size must be positive");
    if (eval_batch_size <= 0) fail("eval_batch_size must be positive");
    if (epochs <= 0) fail("epochs must be positive");
    if (logging_steps <= 0) fail("logging_steps must be positive");
    if (max_sequence_length < 2) fail("max_sequence_length must leave room for [CLS] and [SEP]");
    if (!seed) fail("seed is required");
    if (optimizer != "adamw") fail("unsupported optimizer '" + optimizer + "'");
    if (lr_schedule != "linear") fail("unsupported lr_schedule '" + lr_schedule + "'");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) fail("betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
    if (warmup_steps < 0) fail("warmup_steps must be non-negative");
    if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be positive");
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "pretrained_encoder_id", "num_labels",   "learning_rate", "train_batch_size", "eval_batch_size",
        "epochs",                "logging_steps", "max_sequence_length", "seed",      "output_dir",
        "overwrite_output",      "optimizer",    "adam_beta1",    "adam_beta2",       "adam_epsilon",
        "weight_decay",          "warmup_steps", "lr_schedule",   "max_grad_norm"};
    if (!j.is_object()) throw DataError("training config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw DataError("training config: unknown field '" + key + "'");
    }
    TrainingConfig c;
    try {
        c.pretrained_encoder_id = j.value("pretrained_encoder_id", c.pretrained_encoder_id);
        c.num_labels = j.value("num_labels", c.num_labels);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.train_batch_size = j.value("train_batch_size", c.train_batch_size);
        c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.logging_steps = j.value("logging_steps", c.logging_steps);
        c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
        if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        c.overwrite_output = j.value("overwrite_output", c.overwrite_output);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
        c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
        c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("training config: ") + e.what());
    }
    return c;
}

nlohmann::ordered_json to_json(const TrainingConfig& c) {
    nlohmann::ordered_json j;
    j["pretrained_encoder_id"] = c.pretrained_encoder_id;
    j["num_labels"] = c.num_labels;
    j["learning_rate"] = c.learning_rate;
    j["train_batch_size"] = c.train_batch_size;
    j["eval_batch_size"] = c.eval_batch_size;
    j["epochs"] = c.epochs;
    j["logging_steps"] = c.logging_steps;
    j["max_sequence_length"] = c.max_sequence_length;
    j["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr);
    j["output_dir"] = c.output_dir.string();
    j["overwrite_output"] = c.overwrite_output;
    j["optimizer"] = c.optimizer;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["weight_decay"] = c.weight_decay;
    j["warmup_steps"] = c.warmup_steps;
    j["lr_schedule"] = c.lr_schedule;
    j["max_grad_norm"] = c.max_grad_norm;
    return j;
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read training config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("training config '" + path.string() + "': " + e.what());
    }
    return training_config_from_json(j);
}

std::string config_fingerprint(const TrainingConfig& config) {
    auto j = to_json(config);
    j.erase("output_dir");
    j.erase("overwrite_output");
    const std::string text = j.dump();
    // 64-bit FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::int64_t total_training_steps(std::size_t n, const TrainingConfig& config) {
    const auto batch = static_cast<std::size_t>(config.train_batch_size);
    return static_cast<std::int64_t>((n + batch - 1) / batch) * config.epochs;
}

TokenSequence encode(const model::WordPieceTokenizer& tokenizer, std::string_view text, int max_length) {
    TokenSequence seq;
    auto pieces = tokenizer.token_ids(text);
    const auto room = static_cast<std::size_t>(std::max(0, max_length - 2));
    if (pieces.size() > room) {
        pieces.resize(room);
        seq.truncated = true;
    }
    seq.ids.reserve(pieces.size() + 2);
    seq.ids.push_back(tokenizer.cls_id());
    seq.ids.insert(seq.ids.end(), pieces.begin(), pieces.end());
    seq.ids.push_back(tokenizer.sep_id());
    return seq;
}

nlohmann::ordered_json label_map_json() {
    nlohmann::ordered_json j;
    for (auto code : kAllFrames) j[std::string(frame_name(code))] = frame_index(code);
    return j;
}

nlohmann::ordered_json to_json(const TrainLogEntry& e) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    if (e.eval_metrics) {
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& [k, v] : *e.eval_metrics) m[k] = v;
        j["eval_metrics"] = m;
    }
    return j;
}

}  // namespace frames
