#include <cmath>
#include <map>
#include <numeric>

#include "frames/error.hpp"
#include "frames/kernels.hpp"
#include "frames/model/optimizer.hpp"
#include "frames/rng.hpp"
#include "frames/train.hpp"

namespace frames {

namespace {

constexpr std::uint64_t kPretrainHeadStream = 0x632be59bd9b4e019ULL;
constexpr std::uint64_t kPretrainDropoutStream = 0x85ebca6b0a1c2e37ULL;

// Normalised bag of word pieces, special tokens left out.
std::vector<std::pair<int, float>> bag_of_pieces(const std::vector<int>& ids, const model::WordPieceTokenizer& tok) {
    std::map<int, int> counts;
    int n = 0;
    for (int id : ids) {
        if (id == tok.cls_id() || id == tok.sep_id() || id == tok.pad_id()) continue;
        ++counts[id];
        ++n;
    }
    std::vector<std::pair<int, float>> bag;
    for (const auto& [id, c] : counts) bag.emplace_back(id, static_cast<float>(c) / static_cast<float>(n));
    return bag;
}

}  // namespace

std::vector<double> pretrain_encoder(model::BertClassifier& net, const model::WordPieceTokenizer& tokenizer,
                                     std::span<const std::string> texts, const PretrainOptions& options) {
    if (options.epochs <= 0) return {};
    if (options.batch_size <= 0 || !(options.learning_rate > 0.0)) throw DataError("invalid pretraining options");
    const int H = net.config().hidden_size;
    const int V = static_cast<int>(tokenizer.vocab_size());
    const int max_len = std::min(options.max_sequence_length, net.config().max_position_embeddings);

    std::vector<std::vector<int>> seqs;
    std::vector<std::vector<std::pair<int, float>>> bags;
    for (const auto& t : texts) {
        auto ids = encode(tokenizer, t, max_len).ids;
        auto bag = bag_of_pieces(ids, tokenizer);
        if (bag.empty()) continue;
        seqs.push_back(std::move(ids));
        bags.push_back(std::move(bag));
    }
    if (seqs.empty()) throw DataError("no usable pretraining text");

    std::vector<model::Parameter> head(2);
    head[0].name = "pretrain.weight";
    head[0].shape = {V, H};
    head[0].value.resize(static_cast<std::size_t>(V) * H);
    head[0].grad.assign(head[0].value.size(), 0.0f);
    head[1].name = "pretrain.bias";
    head[1].shape = {V};
    head[1].value.assign(static_cast<std::size_t>(V), 0.0f);
    head[1].grad.assign(head[1].value.size(), 0.0f);
    head[1].decay = false;
    Rng init(options.seed ^ kPretrainHeadStream);
    for (auto& w : head[0].value) w = static_cast<float>(init.normal() * net.config().initializer_range);

    model::AdamWOptions opt;
    opt.lr = options.learning_rate;
    model::AdamW encoder_opt(net.parameters(), opt);
    model::AdamW head_opt(head, opt);

    const auto batch_size = static_cast<std::size_t>(options.batch_size);
    const auto steps_per_epoch = static_cast<std::int64_t>((seqs.size() + batch_size - 1) / batch_size);
    const auto total_steps = steps_per_epoch * options.epochs;
    Rng order_rng(options.seed);
    Rng dropout_rng(options.seed ^ kPretrainDropoutStream);
    const auto& ks = kernels::active();

    std::vector<double> epoch_losses;
    std::vector<std::size_t> order(seqs.size());
    std::int64_t step = 0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::int64_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const auto end = std::min(order.size(), start + batch_size);
            std::vector<std::vector<int>> batch_seqs;
            std::vector<const std::vector<std::pair<int, float>>*> batch_bags;
            for (std::size_t i = start; i < end; ++i) {
                batch_seqs.push_back(seqs[order[i]]);
                batch_bags.push_back(&bags[order[i]]);
            }
            const auto batch = model::collate(batch_seqs, net.config().pad_token_id);
            const int B = batch.batch_size;

            auto head_loss = [&](std::span<const float> pooled, std::span<float> dpooled) {
                std::vector<float> logits(static_cast<std::size_t>(B) * V);
                ks.gemm_nt(B, V, H, pooled.data(), H, head[0].value.data(), H, logits.data(), V, false);
                double loss = 0.0;
                for (int b = 0; b < B; ++b) {
                    float* z = logits.data() + static_cast<std::ptrdiff_t>(b) * V;
                    ks.axpy(1.0f, head[1].value.data(), z, static_cast<std::size_t>(V));
                    double mx = z[0];
                    for (int v = 1; v < V; ++v) mx = std::max(mx, static_cast<double>(z[v]));
                    double sum = 0.0;
                    for (int v = 0; v < V; ++v) sum += std::exp(z[v] - mx);
                    const double lse = mx + std::log(sum);
                    const auto& bag = *batch_bags[static_cast<std::size_t>(b)];
                    for (const auto& [id, q] : bag) loss -= q * (z[id] - lse);
                    // z becomes d(loss)/dz = (softmax - target) / B
                    for (int v = 0; v < V; ++v) z[v] = static_cast<float>(std::exp(z[v] - lse) / B);
                    for (const auto& [id, q] : bag) z[id] -= q / static_cast<float>(B);
                }
                ks.gemm_tn(V, H, B, logits.data(), V, pooled.data(), H, head[0].grad.data(), H, true);
                for (int b = 0; b < B; ++b) {
                    ks.axpy(1.0f, logits.data() + static_cast<std::ptrdiff_t>(b) * V, head[1].grad.data(),
                            static_cast<std::size_t>(V));
                }
                ks.gemm_nn(B, H, V, logits.data(), V, head[0].value.data(), H, dpooled.data(), H, false);
                return static_cast<float>(loss / B);
            };

            net.zero_grad();
            for (auto& p : head) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
            loss_sum += net.forward_backward_pooled(batch, head_loss, &dropout_rng);
            ++batches;
            model::clip_grad_norm(net.parameters(), 1.0);
            model::clip_grad_norm(head, 1.0);
            const double lr = model::linear_schedule(options.learning_rate, step, total_steps);
            encoder_opt.step(net.parameters(), lr);
            head_opt.step(head, lr);
            ++step;
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(batches));
    }
    net.zero_grad();
    return epoch_losses;
}

}  // namespace frames
