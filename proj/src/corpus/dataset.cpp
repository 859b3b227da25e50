#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frames/corpus.hpp"
#include "frames/error.hpp"
#include "frames/rng.hpp"

namespace frames {

using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    return in;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

// Field access with line-numbered parse errors.
class LineReader {
public:
    LineReader(const nlohmann::json& obj, std::size_t line) : obj_(obj), line_(line) {}

    const nlohmann::json& field(const char* name) const {
        auto it = obj_.find(name);
        if (it == obj_.end()) throw ParseError(line_, std::string("missing field \"") + name + "\"");
        return *it;
    }

    std::string str(const char* name) const {
        const auto& v = field(name);
        if (!v.is_string()) throw ParseError(line_, std::string("field \"") + name + "\" must be a string");
        return v.get<std::string>();
    }

    int integer(const char* name) const {
        const auto& v = field(name);
        if (!v.is_number_integer()) {
            throw ParseError(line_, std::string("field \"") + name + "\" must be an integer");
        }
        return v.get<int>();
    }

    FrameCode code(const nlohmann::json& v) const {
        if (!v.is_string()) throw ParseError(line_, "frame codes must be strings");
        try {
            return parse_frame_code(v.get<std::string>());
        } catch (const EncodingError& e) {
            throw ParseError(line_, e.what());
        }
    }

    void only(std::initializer_list<const char*> allowed) const {
        for (const auto& [key, _] : obj_.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                throw ParseError(line_, "unexpected field \"" + key + "\"");
            }
        }
    }

private:
    const nlohmann::json& obj_;
    std::size_t line_;
};

nlohmann::json parse_line(const std::string& line, std::size_t number) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(number, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(number, "expected a JSON object");
    return obj;
}

Paragraph paragraph_from(const LineReader& r) {
    Paragraph p;
    p.para_id = r.str("para_id");
    p.doc_id = r.str("doc_id");
    p.ordinal = r.integer("ordinal");
    p.text = r.str("text");
    return p;
}

ordered_json paragraph_json(const Paragraph& p) {
    ordered_json j;
    j["para_id"] = p.para_id;
    j["doc_id"] = p.doc_id;
    j["ordinal"] = p.ordinal;
    j["text"] = p.text;
    return j;
}

void check_paragraph(const Paragraph& p, std::vector<std::string>& violations) {
    if (p.para_id.empty()) violations.emplace_back("para_id must be non-empty");
    if (p.ordinal < 0) violations.emplace_back("ordinal must be >= 0");
    if (p.text.empty()) violations.emplace_back("text must be non-empty");
    if (!p.text.empty() && (std::isspace(static_cast<unsigned char>(p.text.front())) ||
                            std::isspace(static_cast<unsigned char>(p.text.back())))) {
        violations.emplace_back("text must not have leading or trailing whitespace");
    }
}

}  // namespace

std::string_view split_name(Split split) noexcept {
    return split == Split::train ? "train" : "gold";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "gold") return Split::gold;
    throw EncodingError("unknown split '" + std::string(text) + "'");
}

Dataset make_dataset(std::vector<LabeledParagraph> records) {
    Dataset ds;
    ds.records = std::move(records);
    const bool all_train = std::all_of(ds.records.begin(), ds.records.end(),
                                       [](const auto& r) { return r.split == Split::train; });
    const bool all_gold = std::all_of(ds.records.begin(), ds.records.end(),
                                      [](const auto& r) { return r.split == Split::gold; });
    if (ds.records.empty()) ds.split = DatasetSplit::mixed;
    else if (all_train) ds.split = DatasetSplit::train;
    else if (all_gold) ds.split = DatasetSplit::gold;
    else ds.split = DatasetSplit::mixed;
    return ds;
}

void validate_dataset(const Dataset& ds) {
    std::set<std::string> ids;
    std::set<std::pair<std::string, int>> positions;
    for (const auto& rec : ds.records) {
        std::vector<std::string> violations;
        check_paragraph(rec.paragraph, violations);
        for (auto& v : validate_label_set(rec.labels).violations) violations.push_back(std::move(v));
        if (!ids.insert(rec.paragraph.para_id).second) violations.emplace_back("duplicate para_id");
        if (!positions.insert({rec.paragraph.doc_id, rec.paragraph.ordinal}).second) {
            violations.emplace_back("duplicate (doc_id, ordinal)");
        }
        if ((ds.split == DatasetSplit::train && rec.split != Split::train) ||
            (ds.split == DatasetSplit::gold && rec.split != Split::gold)) {
            violations.emplace_back("record split does not match dataset split");
        }
        if (!violations.empty()) {
            std::string message = "record '" + rec.paragraph.para_id + "' is invalid:";
            for (const auto& v : violations) message += " [" + v + "]";
            throw ValidationError(message, std::move(violations));
        }
    }
}

FrameCounts dataset_stats(const Dataset& ds) {
    FrameCounts counts;
    for (const auto& rec : ds.records) ++counts.by_frame[frame_index(rec.labels.main)];
    counts.total = ds.records.size();
    return counts;
}

std::vector<SourceDocument> sample_documents(std::span<const SourceDocument> corpus,
                                             std::size_t n, std::uint64_t seed) {
    if (n > corpus.size()) {
        throw SamplingError("cannot sample " + std::to_string(n) + " documents from a corpus of " +
                            std::to_string(corpus.size()));
    }
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(order[i], order[i + rng.below(order.size() - i)]);
    }
    std::vector<SourceDocument> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(corpus[order[i]]);
    return out;
}

LeakageReport check_split_leakage(const Dataset& train, const Dataset& gold) {
    std::set<std::string> train_paras, train_docs;
    for (const auto& r : train.records) {
        train_paras.insert(r.paragraph.para_id);
        train_docs.insert(r.paragraph.doc_id);
    }
    std::set<std::string> shared_paras, shared_docs;
    for (const auto& r : gold.records) {
        if (train_paras.contains(r.paragraph.para_id)) shared_paras.insert(r.paragraph.para_id);
        if (train_docs.contains(r.paragraph.doc_id)) shared_docs.insert(r.paragraph.doc_id);
    }
    return {{shared_paras.begin(), shared_paras.end()}, {shared_docs.begin(), shared_docs.end()}};
}

LeakageReport check_split_leakage(const Dataset& mixed) {
    Dataset train, gold;
    for (const auto& r : mixed.records) {
        (r.split == Split::train ? train : gold).records.push_back(r);
    }
    return check_split_leakage(train, gold);
}

void require_no_leakage(const LeakageReport& report) {
    if (report.clean()) return;
    std::string message = "gold/train overlap:";
    if (!report.shared_doc_ids.empty()) {
        message += " " + std::to_string(report.shared_doc_ids.size()) + " shared doc_id(s), first '" +
                   report.shared_doc_ids.front() + "'";
    }
    if (!report.shared_para_ids.empty()) {
        message += " " + std::to_string(report.shared_para_ids.size()) +
                   " shared para_id(s), first '" + report.shared_para_ids.front() + "'";
    }
    throw LeakageError(message);
}

// ---------------------------------------------------------------------------

void write_dataset(std::ostream& out, const Dataset& ds) {
    for (const auto& rec : ds.records) {
        ordered_json j = paragraph_json(rec.paragraph);
        auto frames = ordered_json::array();
        for (auto code : rec.labels.frames) frames.push_back(frame_name(code));
        j["frames"] = std::move(frames);
        j["main"] = frame_name(rec.labels.main);
        j["coder"] = rec.coder_id;
        j["split"] = split_name(rec.split);
        out << j.dump() << '\n';
    }
}

Dataset read_dataset(std::istream& in) {
    std::vector<LabeledParagraph> records;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (is_blank(line)) continue;
        const auto obj = parse_line(line, number);
        LineReader r(obj, number);
        r.only({"para_id", "doc_id", "ordinal", "text", "frames", "main", "coder", "split"});
        LabeledParagraph rec;
        rec.paragraph = paragraph_from(r);
        const auto& frames = r.field("frames");
        if (!frames.is_array()) throw ParseError(number, "field \"frames\" must be an array");
        for (const auto& f : frames) rec.labels.frames.insert(r.code(f));
        rec.labels.main = r.code(r.field("main"));
        rec.coder_id = r.str("coder");
        try {
            rec.split = parse_split(r.str("split"));
        } catch (const EncodingError& e) {
            throw ParseError(number, e.what());
        }
        records.push_back(std::move(rec));
    }
    auto ds = make_dataset(std::move(records));
    validate_dataset(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_dataset(out, ds);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    return read_dataset(in);
}

void write_paragraphs(std::ostream& out, std::span<const Paragraph> paragraphs) {
    for (const auto& p : paragraphs) out << paragraph_json(p).dump() << '\n';
}

std::vector<Paragraph> read_paragraphs(std::istream& in) {
    std::vector<Paragraph> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (is_blank(line)) continue;
        const auto obj = parse_line(line, number);
        LineReader r(obj, number);
        r.only({"para_id", "doc_id", "ordinal", "text"});
        auto p = paragraph_from(r);
        std::vector<std::string> violations;
        check_paragraph(p, violations);
        if (!ids.insert(p.para_id).second) violations.emplace_back("duplicate para_id");
        if (!violations.empty()) {
            throw ValidationError("paragraph '" + p.para_id + "' is invalid: " + violations.front(),
                                  std::move(violations));
        }
        out.push_back(std::move(p));
    }
    return out;
}

void save_paragraphs(std::span<const Paragraph> paragraphs, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_paragraphs(out, paragraphs);
}

std::vector<Paragraph> load_paragraphs(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    return read_paragraphs(in);
}

std::vector<SourceDocument> load_documents(const std::filesystem::path& path) {
    std::vector<SourceDocument> docs;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            auto in = open_for_read(file);
            std::ostringstream body;
            body << in.rdbuf();
            docs.push_back({file.stem().string(), "", "en", body.str()});
        }
    } else {
        auto in = open_for_read(path);
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (is_blank(line)) continue;
            const auto obj = parse_line(line, number);
            LineReader r(obj, number);
            r.only({"doc_id", "url", "language", "body"});
            SourceDocument doc;
            doc.doc_id = r.str("doc_id");
            doc.body = r.str("body");
            if (obj.contains("url")) doc.url = r.str("url");
            if (obj.contains("language")) doc.language = r.str("language");
            docs.push_back(std::move(doc));
        }
    }
    std::set<std::string> ids;
    for (const auto& d : docs) {
        if (!ids.insert(d.doc_id).second) {
            throw ValidationError("duplicate doc_id '" + d.doc_id + "'", {"duplicate doc_id"});
        }
    }
    return docs;
}

void save_documents(std::span<const SourceDocument> docs, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    for (const auto& d : docs) {
        ordered_json j;
        j["doc_id"] = d.doc_id;
        j["url"] = d.url;
        j["language"] = d.language;
        j["body"] = d.body;
        out << j.dump() << '\n';
    }
}

}  // namespace frames
