#include "frames/app_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "frames/error.hpp"

namespace frames {

namespace fs = std::filesystem;

void AppConfig::validate() const {
    if (port < 1 || port > 65535) throw DataError("port must lie in [1, 65535], got " + std::to_string(port));
    if (cv_k < 2) throw DataError("cv k must be at least 2");
    if (host.empty()) throw DataError("host is empty");
}

void AppConfig::check_paths() const {
    std::error_code ec;
    if (!corpus.empty() && !fs::exists(corpus, ec)) {
        throw EnvironmentError("corpus '" + corpus.string() + "' does not exist");
    }
    if (!models.empty() && !fs::is_directory(models, ec)) {
        throw EnvironmentError("model directory '" + models.string() + "' does not exist");
    }
    if (!annotations.empty()) {
        const auto parent = annotations.has_parent_path() ? annotations.parent_path() : fs::path(".");
        if (!fs::is_directory(parent, ec)) {
            throw EnvironmentError("annotation directory '" + parent.string() + "' does not exist");
        }
    }
}

AppConfig app_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    static const std::set<std::string> known = {"corpus",        "annotations",   "models", "host",
                                                "port",          "training",      "min_paragraph_chars",
                                                "cv"};
    if (!j.is_object()) throw DataError("app config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw DataError("app config: unknown field '" + key + "'");
    }
    auto resolve = [&](const std::string& p) -> fs::path {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    AppConfig c;
    try {
        if (j.contains("corpus")) c.corpus = resolve(j["corpus"].get<std::string>());
        if (j.contains("annotations")) c.annotations = resolve(j["annotations"].get<std::string>());
        if (j.contains("models")) c.models = resolve(j["models"].get<std::string>());
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        if (j.contains("training")) c.training = training_config_from_json(j["training"]);
        c.min_paragraph_chars = j.value("min_paragraph_chars", c.min_paragraph_chars);
        if (j.contains("cv")) {
            const auto& cv = j["cv"];
            c.cv_k = cv.value("k", c.cv_k);
            c.cv_stratified = cv.value("stratified", c.cv_stratified);
            c.cv_seed = cv.value("seed", c.cv_seed);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("app config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::ordered_json to_json(const AppConfig& c) {
    nlohmann::ordered_json j;
    j["corpus"] = c.corpus.string();
    j["annotations"] = c.annotations.string();
    j["models"] = c.models.string();
    j["host"] = c.host;
    j["port"] = c.port;
    j["training"] = to_json(c.training);
    j["min_paragraph_chars"] = c.min_paragraph_chars;
    j["cv"] = {{"k", c.cv_k}, {"stratified", c.cv_stratified}, {"seed", c.cv_seed}};
    return j;
}

AppConfig load_app_config(const std::optional<fs::path>& path) {
    std::optional<fs::path> chosen = path;
    if (!chosen) {
        if (const char* env = std::getenv("FRAMES_CONFIG"); env && *env) chosen = fs::path(env);
    }
    if (!chosen) return AppConfig{};
    std::ifstream in(*chosen);
    if (!in) throw EnvironmentError("cannot read config '" + chosen->string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config '" + chosen->string() + "': " + e.what());
    }
    return app_config_from_json(j, chosen->parent_path());
}

}  // namespace frames
