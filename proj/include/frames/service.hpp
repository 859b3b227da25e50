#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "frames/annotate.hpp"
#include "frames/corpus.hpp"
#include "frames/train.hpp"

namespace frames {

struct ApiRequest {
    std::string method;  // "GET", "POST"
    std::string path;    // without the query string
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    nlohmann::ordered_json body;
};

// The JSON API behind the labelling frontend. `handle` is transport-free so
// it can be exercised directly; `start`/`run` put it behind an HTTP server.
//
//   GET  /api/codebook
//   POST /api/session                    {"coder_id"}
//   GET  /api/session/{id}/next
//   POST /api/session/{id}/annotations   {"para_id", "frames", "main"}
//   GET  /api/agreement?coders=a,b
//   GET  /api/progress
//   POST /api/classify                   {"texts": [...]}
//
// Errors carry {"error": kind, "message", "violations"?}: 400 malformed
// request, 404 unknown session or route, 409 duplicate or out-of-order
// annotation, 422 invalid label set, 503 no model loaded.
class AnnotationService {
public:
    AnnotationService(std::vector<Paragraph> corpus, AnnotationStore& store,
                      std::shared_ptr<const FramePredictor> model = nullptr);
    ~AnnotationService();

    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    ApiResponse handle(const ApiRequest& request);

    // Binds and serves on a background thread. Port 0 picks a free port; the
    // bound port is returned. Throws EnvironmentError when binding fails.
    int start(const std::string& host, int port);
    // Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Server;

    ApiResponse codebook() const;
    ApiResponse open_session(const nlohmann::json& body);
    ApiResponse next(const std::string& session_id) const;
    ApiResponse annotate(const std::string& session_id, const nlohmann::json& body);
    ApiResponse agreement(const std::map<std::string, std::string>& query) const;
    ApiResponse progress() const;
    ApiResponse classify(const nlohmann::json& body) const;

    AnnotationStore& store_;
    SessionManager sessions_;
    std::shared_ptr<const FramePredictor> model_;
    std::unique_ptr<Server> server_;
};

}  // namespace frames
