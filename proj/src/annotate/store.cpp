#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "frames/annotate.hpp"
#include "frames/error.hpp"

namespace frames {

std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::ordered_json to_json(const AnnotationRecord& record) {
    nlohmann::ordered_json j;
    j["para_id"] = record.para_id;
    j["coder"] = record.coder_id;
    auto frames = nlohmann::ordered_json::array();
    for (auto code : record.labels.frames) frames.push_back(frame_name(code));
    j["frames"] = std::move(frames);
    j["main"] = frame_name(record.labels.main);
    j["ts"] = record.timestamp;
    return j;
}

AnnotationRecord annotation_from_json(const nlohmann::json& obj, std::size_t line) {
    if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
    auto str = [&](const char* key) {
        auto it = obj.find(key);
        if (it == obj.end()) throw ParseError(line, std::string("missing field \"") + key + "\"");
        if (!it->is_string()) throw ParseError(line, std::string("field \"") + key + "\" must be a string");
        return it->get<std::string>();
    };
    auto code = [&](const std::string& text) {
        try {
            return parse_frame_code(text);
        } catch (const EncodingError& e) {
            throw ParseError(line, e.what());
        }
    };
    AnnotationRecord rec;
    rec.para_id = str("para_id");
    rec.coder_id = str("coder");
    rec.timestamp = str("ts");
    auto frames = obj.find("frames");
    if (frames == obj.end() || !frames->is_array()) {
        throw ParseError(line, "field \"frames\" must be an array");
    }
    for (const auto& f : *frames) {
        if (!f.is_string()) throw ParseError(line, "frame codes must be strings");
        rec.labels.frames.insert(code(f.get<std::string>()));
    }
    rec.labels.main = code(str("main"));
    return rec;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::vector<AnnotationRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(number, std::string("malformed JSON: ") + e.what());
        }
        auto rec = annotation_from_json(obj, number);
        require_valid(rec.labels, "annotation '" + rec.para_id + "' by '" + rec.coder_id + "'");
        if (!seen.insert({rec.para_id, rec.coder_id}).second) {
            throw ConflictError("duplicate annotation of '" + rec.para_id + "' by '" + rec.coder_id +
                                "' at line " + std::to_string(number));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

AnnotationStore::AnnotationStore(Clock clock) : clock_(std::move(clock)) {}

AnnotationStore::AnnotationStore(std::filesystem::path path, Clock clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
    if (std::filesystem::exists(*path_)) {
        records_ = load_annotations(*path_);
    } else if (path_->has_parent_path()) {
        std::filesystem::create_directories(path_->parent_path());
    }
}

AnnotationRecord AnnotationStore::append(const std::string& para_id, const std::string& coder_id,
                                         const LabelSet& labels) {
    require_valid(labels, "annotation of '" + para_id + "'");
    std::lock_guard lock(mutex_);
    const bool duplicate = std::any_of(records_.begin(), records_.end(), [&](const auto& r) {
        return r.para_id == para_id && r.coder_id == coder_id;
    });
    if (duplicate) {
        throw ConflictError("'" + para_id + "' is already annotated by '" + coder_id + "'");
    }
    AnnotationRecord rec{para_id, coder_id, labels, clock_()};
    if (path_) {
        std::ofstream out(*path_, std::ios::binary | std::ios::app);
        out << to_json(rec).dump() << '\n';
        out.flush();
        if (!out) throw IoError("failed appending to '" + path_->string() + "'");
    }
    records_.push_back(rec);
    return rec;
}

bool AnnotationStore::contains(const std::string& para_id, const std::string& coder_id) const {
    std::lock_guard lock(mutex_);
    return std::any_of(records_.begin(), records_.end(), [&](const auto& r) {
        return r.para_id == para_id && r.coder_id == coder_id;
    });
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<AnnotationRecord> AnnotationStore::records_for(const std::string& coder_id) const {
    std::lock_guard lock(mutex_);
    std::vector<AnnotationRecord> out;
    std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                 [&](const auto& r) { return r.coder_id == coder_id; });
    return out;
}

std::map<std::string, std::size_t> AnnotationStore::counts_by_coder() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records_) ++counts[r.coder_id];
    return counts;
}

std::size_t AnnotationStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::pair<std::vector<FrameCode>, std::vector<FrameCode>> align_main_frames(
    std::span<const AnnotationRecord> coder_a, std::span<const AnnotationRecord> coder_b) {
    std::map<std::string, FrameCode> a_main;
    for (const auto& r : coder_a) a_main.emplace(r.para_id, r.labels.main);
    std::map<std::string, FrameCode> b_main;
    for (const auto& r : coder_b) b_main.emplace(r.para_id, r.labels.main);
    std::vector<FrameCode> a, b;
    for (const auto& [id, code] : a_main) {
        if (auto it = b_main.find(id); it != b_main.end()) {
            a.push_back(code);
            b.push_back(it->second);
        }
    }
    return {std::move(a), std::move(b)};
}

AgreementReport agreement_from_records(std::span<const AnnotationRecord> coder_a,
                                       std::span<const AnnotationRecord> coder_b) {
    const auto [a, b] = align_main_frames(coder_a, coder_b);
    if (a.empty()) throw InputError("the two coders share no annotated paragraphs");
    return cohen_kappa(a, b);
}

AgreementReport agreement_report(const AnnotationStore& store, const std::string& coder_a,
                                 const std::string& coder_b) {
    const auto a = store.records_for(coder_a);
    const auto b = store.records_for(coder_b);
    if (a.empty() || b.empty()) {
        throw InputError("both coders need annotations ('" + coder_a + "': " +
                         std::to_string(a.size()) + ", '" + coder_b + "': " +
                         std::to_string(b.size()) + ")");
    }
    return agreement_from_records(a, b);
}

}  // namespace frames
