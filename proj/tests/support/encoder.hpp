#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "frames/train.hpp"

namespace frames::testing {

inline std::vector<std::string> texts_of(const Dataset& ds) {
    std::vector<std::string> texts;
    for (const auto& r : ds.records) texts.push_back(r.paragraph.text);
    return texts;
}

// A very small randomly initialised encoder, fast enough for unit tests.
inline void write_tiny_encoder(const std::filesystem::path& dir, const std::vector<std::string>& texts,
                               int max_positions = 512) {
    EncoderSpec spec;
    spec.hidden_size = 16;
    spec.num_layers = 1;
    spec.num_heads = 2;
    spec.intermediate_size = 32;
    spec.max_position_embeddings = max_positions;
    spec.seed = 3;
    spec.pretrain.epochs = 0;
    init_encoder(dir, texts, spec);
}

}  // namespace frames::testing
