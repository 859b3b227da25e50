#include <cmath>
#include <cstdio>
#include <sstream>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"

namespace frames {

std::size_t ConfusionMatrix::row_sum(std::size_t i) const noexcept {
    std::size_t s = 0;
    for (auto v : counts[i]) s += v;
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t j) const noexcept {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[j];
    return s;
}

std::size_t ConfusionMatrix::trace() const noexcept {
    std::size_t s = 0;
    for (std::size_t i = 0; i < kNumFrames; ++i) s += counts[i][i];
    return s;
}

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t s = 0;
    for (std::size_t i = 0; i < kNumFrames; ++i) s += row_sum(i);
    return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
    for (std::size_t i = 0; i < kNumFrames; ++i) {
        for (std::size_t j = 0; j < kNumFrames; ++j) counts[i][j] += other.counts[i][j];
    }
    return *this;
}

ConfusionMatrix confusion(std::span<const FrameCode> y_true, std::span<const FrameCode> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw InputError("y_true has " + std::to_string(y_true.size()) + " items but y_pred has " +
                         std::to_string(y_pred.size()));
    }
    if (y_true.empty()) throw InputError("no items to tally");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) ++cm.at(y_true[i], y_pred[i]);
    return cm;
}

PerClassMetrics class_metrics(const ConfusionMatrix& cm) {
    PerClassMetrics out{};
    for (std::size_t c = 0; c < kNumFrames; ++c) {
        const auto tp = static_cast<double>(cm.counts[c][c]);
        const auto predicted = cm.column_sum(c);
        const auto actual = cm.row_sum(c);
        auto& m = out[c];
        m.support = actual;
        m.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
        m.recall = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    }
    return out;
}

EvalReport aggregate(const PerClassMetrics& per_class, const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw InputError("confusion matrix is empty");
    EvalReport r;
    r.per_class = per_class;
    r.total = total;
    for (const auto& m : per_class) {
        r.macro.precision += m.precision;
        r.macro.recall += m.recall;
        r.macro.f1 += m.f1;
        const auto w = static_cast<double>(m.support);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
    }
    const auto n = static_cast<double>(kNumFrames);
    r.macro.precision /= n;
    r.macro.recall /= n;
    r.macro.f1 /= n;
    const auto t = static_cast<double>(total);
    r.weighted.precision /= t;
    r.weighted.recall /= t;
    r.weighted.f1 /= t;
    r.accuracy = static_cast<double>(cm.trace()) / t;
    return r;
}

EvalReport evaluate_matrix(const ConfusionMatrix& cm) { return aggregate(class_metrics(cm), cm); }

namespace {

double shown(double v, int decimals) {
    if (decimals < 0) return v;
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

nlohmann::ordered_json triple(const AverageMetrics& m, int decimals) {
    nlohmann::ordered_json j;
    j["precision"] = shown(m.precision, decimals);
    j["recall"] = shown(m.recall, decimals);
    j["f1"] = shown(m.f1, decimals);
    return j;
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report, int decimals) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (auto code : kAllFrames) {
        const auto& m = report[code];
        nlohmann::ordered_json row;
        row["precision"] = shown(m.precision, decimals);
        row["recall"] = shown(m.recall, decimals);
        row["f1"] = shown(m.f1, decimals);
        row["support"] = m.support;
        per[std::string(frame_name(code))] = row;
    }
    j["per_class"] = per;
    j["macro"] = triple(report.macro, decimals);
    j["weighted"] = triple(report.weighted, decimals);
    j["accuracy"] = shown(report.accuracy, decimals);
    j["total"] = report.total;
    return j;
}

nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (auto code : kAllFrames) labels.push_back(std::string(frame_name(code)));
    j["labels"] = labels;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : cm.counts) rows.push_back(row);
    j["counts"] = rows;
    return j;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-14s%10s%10s%10s%10s\n", "", "precision", "recall", "f1-score", "support");
    out << line << '\n';
    for (auto code : kAllFrames) {
        const auto& m = r[code];
        std::snprintf(line, sizeof line, "%-14s%10.2f%10.2f%10.2f%10zu\n", std::string(frame_name(code)).c_str(),
                      m.precision, m.recall, m.f1, m.support);
        out << line;
    }
    out << '\n';
    std::snprintf(line, sizeof line, "%-14s%10s%10s%10.2f%10zu\n", "accuracy", "", "", r.accuracy, r.total);
    out << line;
    std::snprintf(line, sizeof line, "%-14s%10.2f%10.2f%10.2f%10zu\n", "macro avg", r.macro.precision,
                  r.macro.recall, r.macro.f1, r.total);
    out << line;
    std::snprintf(line, sizeof line, "%-14s%10.2f%10.2f%10.2f%10zu\n", "weighted avg", r.weighted.precision,
                  r.weighted.recall, r.weighted.f1, r.total);
    out << line;
    return out.str();
}

}  // namespace frames
