#include "frames/annotate.hpp"
#include "frames/error.hpp"

namespace frames {

SessionManager::SessionManager(std::vector<Paragraph> paragraphs, AnnotationStore& store)
    : paragraphs_(std::move(paragraphs)), store_(store) {
    for (std::size_t i = 0; i < paragraphs_.size(); ++i) {
        if (!index_.emplace(paragraphs_[i].para_id, i).second) {
            throw ValidationError("duplicate para_id '" + paragraphs_[i].para_id + "' in corpus",
                                  {"duplicate para_id"});
        }
    }
}

AnnotationSession SessionManager::open(const std::string& coder_id) {
    if (coder_id.empty()) throw InputError("coder_id must be non-empty");
    AnnotationSession s;
    s.coder_id = coder_id;
    for (const auto& p : paragraphs_) {
        if (!store_.contains(p.para_id, coder_id)) s.queue.push_back(p.para_id);
    }
    std::lock_guard lock(mutex_);
    s.session_id = "session-" + std::to_string(next_id_++);
    sessions_.emplace(s.session_id, s);
    return s;
}

AnnotationSession SessionManager::session(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw SessionError("unknown session '" + session_id + "'");
    return it->second;
}

std::optional<Paragraph> SessionManager::next_paragraph(const std::string& session_id) const {
    const auto s = session(session_id);
    if (s.done()) return std::nullopt;
    return paragraphs_[index_.at(s.queue[s.cursor])];
}

AnnotationRecord SessionManager::submit(const std::string& session_id, const std::string& para_id,
                                        const LabelSet& labels) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw SessionError("unknown session '" + session_id + "'");
    auto& s = it->second;
    require_valid(labels, "annotation of '" + para_id + "'");
    if (store_.contains(para_id, s.coder_id)) {
        throw ConflictError("'" + para_id + "' is already annotated by '" + s.coder_id + "'");
    }
    if (s.done() || s.queue[s.cursor] != para_id) {
        throw SequencingError("expected " +
                              (s.done() ? std::string("no further items") : "'" + s.queue[s.cursor] + "'") +
                              ", got '" + para_id + "'");
    }
    auto rec = store_.append(para_id, s.coder_id, labels);
    ++s.cursor;
    return rec;
}

}  // namespace frames
