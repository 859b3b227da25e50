#include "frames/service.hpp"

#include <thread>

#include <httplib.h>

#include "frames/error.hpp"

namespace frames {

namespace {

using ojson = nlohmann::ordered_json;

ApiResponse error_response(int status, const std::string& kind, const std::string& message,
                           const std::vector<std::string>& violations = {}) {
    ApiResponse r;
    r.status = status;
    r.body["error"] = kind;
    r.body["message"] = message;
    if (!violations.empty()) r.body["violations"] = violations;
    return r;
}

ojson paragraph_json(const Paragraph& p) {
    ojson j;
    j["para_id"] = p.para_id;
    j["doc_id"] = p.doc_id;
    j["ordinal"] = p.ordinal;
    j["text"] = p.text;
    return j;
}

ojson session_json(const AnnotationSession& s) {
    ojson j;
    j["session_id"] = s.session_id;
    j["coder_id"] = s.coder_id;
    j["queue_length"] = s.queue.size();
    j["position"] = s.cursor;
    j["remaining"] = s.queue.size() - s.cursor;
    return j;
}

nlohmann::json parse_body(const std::string& body) {
    try {
        auto j = nlohmann::json::parse(body);
        if (!j.is_object()) throw InputError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::string required_string(const nlohmann::json& body, const char* field) {
    if (!body.contains(field) || !body[field].is_string() || body[field].get<std::string>().empty()) {
        throw InputError(std::string("'") + field + "' must be a non-empty string");
    }
    return body[field].get<std::string>();
}

// Unknown codes are reported like rule violations so the client can show them
// next to the others.
LabelSet label_set_from(const nlohmann::json& body) {
    if (!body.contains("frames") || !body["frames"].is_array()) throw InputError("'frames' must be an array");
    if (!body.contains("main") || !body["main"].is_string()) throw InputError("'main' must be a frame code");
    std::vector<std::string> unknown;
    LabelSet labels;
    for (const auto& f : body["frames"]) {
        if (!f.is_string()) throw InputError("'frames' must hold frame code strings");
        try {
            labels.frames.insert(parse_frame_code(f.get<std::string>()));
        } catch (const EncodingError&) {
            unknown.push_back("unknown frame code '" + f.get<std::string>() + "'");
        }
    }
    try {
        labels.main = parse_frame_code(body["main"].get<std::string>());
    } catch (const EncodingError&) {
        unknown.push_back("unknown frame code '" + body["main"].get<std::string>() + "'");
    }
    if (!unknown.empty()) throw ValidationError("label set uses unknown codes", unknown);
    return labels;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        const auto end = path.find('/', start);
        const auto part = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!part.empty()) parts.push_back(part);
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return parts;
}

}  // namespace

struct AnnotationService::Server {
    httplib::Server http;
    std::thread thread;
};

AnnotationService::AnnotationService(std::vector<Paragraph> corpus, AnnotationStore& store,
                                     std::shared_ptr<const FramePredictor> model)
    : store_(store), sessions_(std::move(corpus), store), model_(std::move(model)) {}

AnnotationService::~AnnotationService() { stop(); }

ApiResponse AnnotationService::handle(const ApiRequest& req) {
    try {
        const auto parts = split_path(req.path);
        const bool get = req.method == "GET";
        const bool post = req.method == "POST";
        if (parts.size() < 2 || parts[0] != "api") return error_response(404, "not_found", "no route " + req.path);
        const auto& what = parts[1];
        if (parts.size() == 2) {
            if (what == "codebook" && get) return codebook();
            if (what == "session" && post) return open_session(parse_body(req.body));
            if (what == "agreement" && get) return agreement(req.query);
            if (what == "progress" && get) return progress();
            if (what == "classify" && post) return classify(parse_body(req.body));
        } else if (parts.size() == 4 && what == "session") {
            if (parts[3] == "next" && get) return next(parts[2]);
            if (parts[3] == "annotations" && post) return annotate(parts[2], parse_body(req.body));
        }
        return error_response(404, "not_found", "no route " + req.method + " " + req.path);
    } catch (const ValidationError& e) {
        return error_response(422, e.kind(), e.what(), e.violations());
    } catch (const SessionError& e) {
        return error_response(404, e.kind(), e.what());
    } catch (const ConflictError& e) {
        return error_response(409, e.kind(), e.what());
    } catch (const SequencingError& e) {
        return error_response(409, e.kind(), e.what());
    } catch (const InputError& e) {
        return error_response(400, e.kind(), e.what());
    } catch (const Error& e) {
        return error_response(500, e.kind(), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

ApiResponse AnnotationService::codebook() const {
    ApiResponse r;
    ojson frames = ojson::array();
    for (const auto& def : codebook_text()) {
        ojson f;
        f["code"] = std::string(frame_name(def.code));
        f["index"] = frame_index(def.code);
        f["name"] = def.name;
        f["guiding_questions"] = def.guiding_questions;
        frames.push_back(f);
    }
    r.body["frames"] = frames;
    r.body["rules"] = {std::string(rules::kNonEmpty), std::string(rules::kMainInFrames),
                       std::string(rules::kNoFrameExclusive)};
    return r;
}

ApiResponse AnnotationService::open_session(const nlohmann::json& body) {
    const auto coder = required_string(body, "coder_id");
    ApiResponse r;
    r.status = 201;
    r.body = session_json(sessions_.open(coder));
    return r;
}

ApiResponse AnnotationService::next(const std::string& session_id) const {
    const auto s = sessions_.session(session_id);
    const auto p = sessions_.next_paragraph(session_id);
    ApiResponse r;
    r.body["session_id"] = s.session_id;
    r.body["done"] = !p.has_value();
    if (p) r.body["paragraph"] = paragraph_json(*p);
    r.body["position"] = s.cursor;
    r.body["remaining"] = s.queue.size() - s.cursor;
    return r;
}

ApiResponse AnnotationService::annotate(const std::string& session_id, const nlohmann::json& body) {
    sessions_.session(session_id);  // 404 before looking at the payload
    const auto para_id = required_string(body, "para_id");
    const auto labels = label_set_from(body);
    const auto record = sessions_.submit(session_id, para_id, labels);
    ApiResponse r;
    r.status = 201;
    r.body = to_json(record);
    return r;
}

ApiResponse AnnotationService::agreement(const std::map<std::string, std::string>& query) const {
    const auto it = query.find("coders");
    if (it == query.end()) throw InputError("query parameter 'coders=a,b' is required");
    const auto comma = it->second.find(',');
    if (comma == std::string::npos || it->second.find(',', comma + 1) != std::string::npos) {
        throw InputError("'coders' must name exactly two coders separated by a comma");
    }
    const auto a = it->second.substr(0, comma);
    const auto b = it->second.substr(comma + 1);
    if (a.empty() || b.empty()) throw InputError("coder ids must be non-empty");

    const auto ra = store_.records_for(a);
    const auto rb = store_.records_for(b);
    const auto [la, lb] = align_main_frames(ra, rb);
    ApiResponse r;
    r.body["coders"] = {a, b};
    r.body["n_items"] = la.size();
    r.body["labels"] = ojson::array();
    for (auto code : kAllFrames) r.body["labels"].push_back(std::string(frame_name(code)));
    if (la.empty()) {
        r.body["kappa"] = nullptr;
        r.body["message"] = "the two coders have no paragraphs in common";
        return r;
    }
    const auto matrix = agreement_matrix(la, lb);
    r.body["matrix"] = ojson::array();
    for (const auto& row : matrix) r.body["matrix"].push_back(row);
    try {
        const auto report = cohen_kappa(la, lb);
        const auto fields = to_json(report);
        for (const auto& [k, v] : fields.items()) r.body[k] = v;
        if (la.size() >= 2) {
            const auto ci = kappa_confidence_interval(report, la, lb);
            r.body["ci"] = {{"level", 0.95}, {"lower", ci.lower}, {"upper", ci.upper}};
        }
    } catch (const DegenerateAgreementError& e) {
        r.body["kappa"] = nullptr;
        r.body["message"] = e.what();
    }
    return r;
}

ApiResponse AnnotationService::progress() const {
    ApiResponse r;
    r.body["corpus_size"] = sessions_.corpus_size();
    ojson coders = ojson::object();
    for (const auto& [coder, n] : store_.counts_by_coder()) coders[coder] = n;
    r.body["coders"] = coders;
    r.body["total_annotations"] = store_.size();
    return r;
}

ApiResponse AnnotationService::classify(const nlohmann::json& body) const {
    if (!model_) return error_response(503, "model_unavailable", "no model is loaded");
    if (!body.contains("texts") || !body["texts"].is_array() || body["texts"].empty()) {
        throw InputError("'texts' must be a non-empty array of strings");
    }
    std::vector<std::string> texts;
    for (const auto& t : body["texts"]) {
        if (!t.is_string()) throw InputError("'texts' must hold strings");
        texts.push_back(t.get<std::string>());
    }
    const auto preds = model_->predict_batch(texts);
    ApiResponse r;
    r.body["results"] = ojson::array();
    for (const auto& p : preds) r.body["results"].push_back(to_json(p));
    return r;
}

// ---------------------------------------------------------------------------

namespace {

void install_routes(httplib::Server& http, AnnotationService& service) {
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        ApiRequest api;
        api.method = req.method;
        api.path = req.path;
        for (const auto& [k, v] : req.params) api.query[k] = v;
        api.body = req.body;
        const auto out = service.handle(api);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    http.Get(R"(/api/.*)", forward);
    http.Post(R"(/api/.*)", forward);
}

}  // namespace

int AnnotationService::start(const std::string& host, int port) {
    stop();
    server_ = std::make_unique<Server>();
    install_routes(server_->http, *this);
    int bound = port;
    if (port == 0) {
        bound = server_->http.bind_to_any_port(host);
        if (bound <= 0) throw EnvironmentError("cannot bind " + host);
    } else if (!server_->http.bind_to_port(host, port)) {
        throw EnvironmentError("cannot bind " + host + ":" + std::to_string(port));
    }
    server_->thread = std::thread([srv = server_.get()] { srv->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return bound;
}

void AnnotationService::run(const std::string& host, int port) {
    stop();
    server_ = std::make_unique<Server>();
    install_routes(server_->http, *this);
    if (!server_->http.bind_to_port(host, port)) {
        throw EnvironmentError("cannot bind " + host + ":" + std::to_string(port));
    }
    server_->http.listen_after_bind();
}

void AnnotationService::stop() {
    if (!server_) return;
    server_->http.stop();
    if (server_->thread.joinable()) server_->thread.join();
    server_.reset();
}

}  // namespace frames
