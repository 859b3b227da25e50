#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "frames/train.hpp"

namespace frames {

// Settings shared by the CLI and the service. Read from one JSON file; the
// FRAMES_CONFIG environment variable names it when no path is given.
struct AppConfig {
    std::filesystem::path corpus;       // paragraph JSONL offered for labelling
    std::filesystem::path annotations;  // annotation store (JSONL, appended)
    std::filesystem::path models;       // trained model directory for /api/classify
    std::string host = "127.0.0.1";
    int port = 8080;
    TrainingConfig training;
    std::size_t min_paragraph_chars = kDefaultMinParagraphChars;
    int cv_k = 5;
    bool cv_stratified = false;
    std::uint64_t cv_seed = 0;

    // Port in [1, 65535], cv_k >= 2. Throws DataError.
    void validate() const;
    // corpus and models must exist when set; the annotation file's directory
    // must exist. Throws EnvironmentError.
    void check_paths() const;
};

// Relative paths are resolved against `base_dir`.
AppConfig app_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json to_json(const AppConfig& config);

// `path` if given, else $FRAMES_CONFIG, else defaults.
AppConfig load_app_config(const std::optional<std::filesystem::path>& path);

}  // namespace frames
