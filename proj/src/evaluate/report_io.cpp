#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"

namespace frames {

namespace {

constexpr std::string_view kCorner = "actual\\predicted";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

FrameCode code_at(const std::string& cell, std::size_t line) {
    try {
        return parse_frame_code(cell);
    } catch (const EncodingError&) {
        throw ParseError(line, "unknown frame code '" + cell + "'");
    }
}

}  // namespace

ConfusionMatrix read_confusion_csv(std::istream& in) {
    std::string raw;
    std::size_t line_no = 0;
    std::vector<FrameCode> columns;
    std::array<bool, kNumFrames> row_seen{};
    ConfusionMatrix cm;
    bool header_done = false;
    std::size_t rows = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (line_no == 1 && raw.starts_with("\xEF\xBB\xBF")) raw.erase(0, 3);
        const auto text = trim(raw);
        if (text.empty()) continue;
        const auto cells = split_cells(text);
        if (!header_done) {
            if (cells.size() != kNumFrames + 1) {
                throw ParseError(line_no, "header must have 7 cells, found " + std::to_string(cells.size()));
            }
            if (cells[0] != kCorner) throw ParseError(line_no, "header must start with 'actual\\predicted'");
            std::array<bool, kNumFrames> seen{};
            for (std::size_t i = 1; i < cells.size(); ++i) {
                const auto code = code_at(cells[i], line_no);
                auto& flag = seen[static_cast<std::size_t>(frame_index(code))];
                if (flag) throw ParseError(line_no, "column '" + cells[i] + "' repeats");
                flag = true;
                columns.push_back(code);
            }
            header_done = true;
            continue;
        }
        if (cells.size() != kNumFrames + 1) {
            throw ParseError(line_no, "row must have 7 cells, found " + std::to_string(cells.size()));
        }
        const auto actual = code_at(cells[0], line_no);
        auto& flag = row_seen[static_cast<std::size_t>(frame_index(actual))];
        if (flag) throw ParseError(line_no, "row '" + cells[0] + "' repeats");
        flag = true;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const auto& cell = cells[i];
            if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos) {
                throw ParseError(line_no, "count '" + cell + "' is not a non-negative integer");
            }
            try {
                cm.at(actual, columns[i - 1]) = std::stoull(cell);
            } catch (const std::out_of_range&) {
                throw ParseError(line_no, "count '" + cell + "' is too large");
            }
        }
        ++rows;
    }
    if (!header_done) throw ParseError(line_no + 1, "missing header");
    if (rows != kNumFrames) throw ParseError(line_no + 1, "expected 6 rows, found " + std::to_string(rows));
    return cm;
}

ConfusionMatrix load_confusion_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    return read_confusion_csv(in);
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
    out << kCorner;
    for (auto code : kAllFrames) out << ',' << frame_name(code);
    out << '\n';
    for (auto actual : kAllFrames) {
        out << frame_name(actual);
        for (auto predicted : kAllFrames) out << ',' << cm.at(actual, predicted);
        out << '\n';
    }
}

void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_confusion_csv(out, cm);
}

}  // namespace frames
