#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"
#include "frames/model/optimizer.hpp"
#include "frames/model/weights.hpp"
#include "frames/rng.hpp"
#include "frames/train.hpp"

namespace frames {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDropoutStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kHeadStream = 0xd1b54a32d192ed03ULL;

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

struct LoadedEncoder {
    model::EncoderConfig config;
    model::WordPieceTokenizer tokenizer;
    std::vector<model::NamedTensor> tensors;
};

LoadedEncoder load_encoder(const std::string& id) {
    const auto dir = resolve_encoder(id);
    try {
        std::ifstream in(dir / "config.json");
        if (!in) throw LoadError("missing config.json");
        auto config = model::encoder_config_from_json(nlohmann::json::parse(in));
        auto tokenizer = model::WordPieceTokenizer::load(dir / "vocab.txt");
        auto tensors = model::load_tensors(dir / "model.bin");
        return {config, std::move(tokenizer), std::move(tensors)};
    } catch (const EnvironmentError&) {
        throw;
    } catch (const std::exception& e) {
        throw EnvironmentError("encoder '" + id + "' at '" + dir.string() + "' is unreadable: " + e.what());
    }
}

bool non_empty_directory(const fs::path& dir) {
    std::error_code ec;
    return fs::is_directory(dir, ec) && !fs::is_empty(dir, ec);
}

struct Encoded {
    std::vector<std::vector<int>> ids;
    std::vector<int> labels;
};

Encoded encode_dataset(const Dataset& ds, const model::WordPieceTokenizer& tok, int max_len) {
    Encoded e;
    e.ids.reserve(ds.size());
    e.labels.reserve(ds.size());
    for (const auto& r : ds.records) {
        e.ids.push_back(encode(tok, r.paragraph.text, max_len).ids);
        e.labels.push_back(frame_index(r.labels.main));
    }
    return e;
}

std::map<std::string, double> evaluate_during_training(const model::BertClassifier& net, const Encoded& eval,
                                                       int batch_size) {
    double loss_sum = 0.0;
    std::vector<FrameCode> truth, pred;
    for (std::size_t start = 0; start < eval.ids.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(eval.ids.size(), start + static_cast<std::size_t>(batch_size));
        const std::span<const std::vector<int>> seqs(eval.ids.data() + start, end - start);
        const std::span<const int> labels(eval.labels.data() + start, end - start);
        const auto batch = model::collate(seqs, net.config().pad_token_id);
        const auto logits = net.logits(batch);
        for (std::size_t b = 0; b < seqs.size(); ++b) {
            const std::span<const float> row(logits.data() + b * kNumFrames, kNumFrames);
            const auto scores = softmax_scores(row);
            loss_sum -= std::log(std::max(scores.probs[static_cast<std::size_t>(labels[b])], 1e-300));
            truth.push_back(frame_from_index(labels[b]));
            pred.push_back(scores.argmax());
        }
    }
    const auto report = evaluate_matrix(confusion(truth, pred));
    return {{"eval_loss", loss_sum / static_cast<double>(truth.size())},
            {"eval_accuracy", report.accuracy},
            {"eval_macro_precision", report.macro.precision},
            {"eval_macro_recall", report.macro.recall},
            {"eval_macro_f1", report.macro.f1},
            {"eval_weighted_f1", report.weighted.f1}};
}

}  // namespace

fs::path resolve_encoder(const std::string& encoder_id) {
    std::error_code ec;
    if (fs::is_directory(encoder_id, ec)) return encoder_id;
    if (const char* home = std::getenv("FRAMES_ENCODER_HOME"); home && *home) {
        const fs::path candidate = fs::path(home) / encoder_id;
        if (fs::is_directory(candidate, ec)) return candidate;
    }
    throw EnvironmentError("pretrained encoder '" + encoder_id +
                           "' not found (pass a directory or set FRAMES_ENCODER_HOME)");
}

TrainingResult fine_tune(const TrainingConfig& config, const Dataset& train_set, const Dataset& eval_set,
                         const FineTuneHooks& hooks) {
    config.validate();
    if (config.output_dir.empty()) throw DataError("training config: output_dir is required");
    if (train_set.empty()) throw DataError("training set is empty");
    for (const auto* ds : {&train_set, &eval_set}) {
        for (const auto& r : ds->records) {
            if (!validate_label_set(r.labels).ok() || frame_index(r.labels.main) < 0 ||
                frame_index(r.labels.main) >= static_cast<int>(kNumFrames)) {
                throw DataError("record '" + r.paragraph.para_id + "' has an invalid label set");
            }
        }
    }
    if (!config.overwrite_output && non_empty_directory(config.output_dir)) {
        throw OutputConflictError("output directory '" + config.output_dir.string() +
                                  "' exists and overwrite_output is false");
    }

    auto encoder = load_encoder(config.pretrained_encoder_id);
    const std::uint64_t seed = *config.seed;
    model::BertClassifier net(encoder.config, config.num_labels);
    if (!net.import_tensors(encoder.tensors)) net.init_head(seed ^ kHeadStream);
    encoder.tensors.clear();

    const int max_len = std::min(config.max_sequence_length, encoder.config.max_position_embeddings);
    const auto train = encode_dataset(train_set, encoder.tokenizer, max_len);
    const auto eval = encode_dataset(eval_set, encoder.tokenizer, max_len);

    model::AdamWOptions opt_options;
    opt_options.lr = config.learning_rate;
    opt_options.beta1 = config.adam_beta1;
    opt_options.beta2 = config.adam_beta2;
    opt_options.eps = config.adam_epsilon;
    opt_options.weight_decay = config.weight_decay;
    model::AdamW optimizer(net.parameters(), opt_options);

    const auto total_steps = total_training_steps(train_set.size(), config);
    const auto steps_per_epoch =
        static_cast<double>((train_set.size() + static_cast<std::size_t>(config.train_batch_size) - 1) /
                            static_cast<std::size_t>(config.train_batch_size));
    Rng order_rng(seed);
    Rng dropout_rng(seed ^ kDropoutStream);

    fs::create_directories(config.output_dir);
    std::ofstream log_file(config.output_dir / "training_log.jsonl", std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log in '" + config.output_dir.string() + "'");

    TrainingResult result;
    std::vector<std::size_t> order(train_set.size());
    std::int64_t step = 0;
    double loss_since_log = 0.0;
    int batches_since_log = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.train_batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.train_batch_size));
            std::vector<std::vector<int>> seqs;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                seqs.push_back(train.ids[order[i]]);
                labels.push_back(train.labels[order[i]]);
            }
            const auto batch = model::collate(seqs, encoder.config.pad_token_id);
            net.zero_grad();
            loss_since_log += net.forward_backward(batch, labels, &dropout_rng);
            ++batches_since_log;
            model::clip_grad_norm(net.parameters(), config.max_grad_norm);
            optimizer.step(net.parameters(), model::linear_schedule(config.learning_rate, step, total_steps,
                                                                   config.warmup_steps));
            ++step;

            if (step % config.logging_steps == 0) {
                TrainLogEntry entry;
                entry.step = step;
                entry.epoch = static_cast<double>(step) / steps_per_epoch;
                entry.train_loss = loss_since_log / batches_since_log;
                if (!eval.ids.empty()) entry.eval_metrics = evaluate_during_training(net, eval, config.eval_batch_size);
                loss_since_log = 0.0;
                batches_since_log = 0;
                log_file << to_json(entry).dump() << '\n';
                log_file.flush();
                result.log.push_back(entry);
                if (hooks.on_log) hooks.on_log(entry);
            }
        }
    }

    const auto tensors = net.export_tensors();
    model::save_tensors(config.output_dir / "model.bin", tensors);
    encoder.tokenizer.save(config.output_dir / "vocab.txt");
    write_json(config.output_dir / "config.json", model::to_json(encoder.config));
    write_json(config.output_dir / "label_map.json", label_map_json());
    write_json(config.output_dir / "training_config.json", to_json(config));

    std::set<std::string> doc_ids;
    for (const auto& r : train_set.records) doc_ids.insert(r.paragraph.doc_id);
    nlohmann::ordered_json docs;
    docs["config_fingerprint"] = config_fingerprint(config);
    docs["doc_ids"] = std::vector<std::string>(doc_ids.begin(), doc_ids.end());
    write_json(config.output_dir / "training_docs.json", docs);

    result.steps = step;
    result.artifact = ModelArtifact::open(config.output_dir);
    return result;
}

void init_encoder(const fs::path& dir, std::span<const std::string> texts, const EncoderSpec& spec) {
    auto vocab = model::build_vocabulary(texts, spec.vocab_limit);
    model::WordPieceTokenizer tokenizer(vocab);
    model::EncoderConfig config;
    config.vocab_size = static_cast<int>(vocab.size());
    config.hidden_size = spec.hidden_size;
    config.num_hidden_layers = spec.num_layers;
    config.num_attention_heads = spec.num_heads;
    config.intermediate_size = spec.intermediate_size;
    config.max_position_embeddings = spec.max_position_embeddings;
    config.pad_token_id = tokenizer.pad_id();
    config.validate();
    model::BertClassifier net(config, static_cast<int>(kNumFrames));
    net.init_random(spec.seed);
    pretrain_encoder(net, tokenizer, texts, spec.pretrain);

    std::vector<model::NamedTensor> encoder_only;
    for (auto& t : net.export_tensors()) {
        if (!t.name.starts_with("classifier.")) encoder_only.push_back(std::move(t));
    }
    fs::create_directories(dir);
    tokenizer.save(dir / "vocab.txt");
    write_json(dir / "config.json", model::to_json(config));
    model::save_tensors(dir / "model.bin", encoder_only);
}

}  // namespace frames
