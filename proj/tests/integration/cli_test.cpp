#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "frames/annotate.hpp"
#include "frames/corpus.hpp"
#include "frames/evaluate.hpp"
#include "../support/synthetic.hpp"
#include "../support/temp_dir.hpp"

using namespace frames;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run frames_cli(const testing::TempDir& tmp, const std::vector<std::string>& args) {
    std::string cmd = quote(FRAMES_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = tmp.path() / "stdout.txt", err = tmp.path() / "stderr.txt";
    cmd += " > " + quote(out.string()) + " 2> " + quote(err.string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

// The last JSON document on stdout (commands may print log lines first).
json last_json(const std::string& out) {
    const auto pos = out.rfind("\n{");
    return json::parse(pos == std::string::npos ? out : out.substr(pos + 1));
}

}  // namespace

TEST_CASE("report reproduces the expected metrics from the confusion matrix") {
    testing::TempDir tmp;
    const auto r = frames_cli(tmp, {"report", "--cm", FRAMES_FIXTURES "/reference_confusion.csv", "--decimals", "2"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["accuracy"] == 0.98);
    CHECK(j["macro"]["precision"] == 0.80);
    CHECK(j["macro"]["recall"] == 0.81);
    CHECK(j["macro"]["f1"] == 0.81);
    CHECK(j["per_class"]["CF03"]["f1"] == 0.90);
    CHECK(j["per_class"]["MF04"]["f1"] == 0.0);

    const auto text = frames_cli(tmp, {"report", "--cm", FRAMES_FIXTURES "/reference_confusion.csv", "--text"});
    CHECK(text.code == 0);
    CHECK(text.out.find("NO06") != std::string::npos);
}

TEST_CASE("exit codes and error lines") {
    testing::TempDir tmp;
    auto r = frames_cli(tmp, {});
    CHECK(r.code == 2);
    r = frames_cli(tmp, {"report"});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: usage:", 0) == 0);
    r = frames_cli(tmp, {"serve", "--port", "0"});
    CHECK(r.code == 2);
    r = frames_cli(tmp, {"report", "--cm", (tmp.path() / "missing.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: ", 0) == 0);
    r = frames_cli(tmp, {"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("cv") != std::string::npos);
}

TEST_CASE("kappa command") {
    testing::TempDir tmp;
    {
        AnnotationStore a(tmp.path() / "a.jsonl"), b(tmp.path() / "b.jsonl");
        const FrameCode av[] = {FrameCode::AR01, FrameCode::AR01, FrameCode::HI02, FrameCode::HI02};
        const FrameCode bv[] = {FrameCode::AR01, FrameCode::HI02, FrameCode::HI02, FrameCode::HI02};
        for (int i = 0; i < 4; ++i) {
            a.append("p#" + std::to_string(i), "a", {{av[i]}, av[i]});
            b.append("p#" + std::to_string(i), "b", {{bv[i]}, bv[i]});
        }
    }
    auto r = frames_cli(tmp, {"kappa", "--a", (tmp.path() / "a.jsonl").string(), "--b", (tmp.path() / "a.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["kappa"] == 1.0);
    r = frames_cli(tmp, {"kappa", "--a", (tmp.path() / "a.jsonl").string(), "--b", (tmp.path() / "b.jsonl").string()});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["kappa"] == 0.5);
    CHECK(j["band"] == "moderate");
    CHECK(j["ci"]["lower"].get<double>() < 0.5);
}

TEST_CASE("ingest, sample and stats") {
    testing::TempDir tmp;
    fs::create_directories(tmp.path() / "docs");
    std::ofstream(tmp.path() / "docs" / "one.txt")
        << "A first paragraph that is certainly longer than forty characters.\n\nShort one.\n\n"
           "And a second paragraph that also passes the length threshold.";
    std::ofstream(tmp.path() / "docs" / "two.html")
        << "<p>The only paragraph in the second document, long enough to keep.</p>";
    auto r = frames_cli(tmp, {"ingest", "--in", (tmp.path() / "docs").string(), "--out",
                              (tmp.path() / "paras.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["paragraphs"] == 3);
    CHECK(load_paragraphs(tmp.path() / "paras.jsonl").size() == 3);

    std::vector<SourceDocument> docs;
    for (int i = 0; i < 20; ++i) docs.push_back({"d" + std::to_string(i), "u", "en", "body"});
    save_documents(docs, tmp.path() / "docs.jsonl");
    r = frames_cli(tmp, {"sample", "--in", (tmp.path() / "docs.jsonl").string(), "--out",
                         (tmp.path() / "sample.jsonl").string(), "--n", "5", "--seed", "1"});
    REQUIRE(r.code == 0);
    CHECK(load_documents(tmp.path() / "sample.jsonl").size() == 5);
    r = frames_cli(tmp, {"sample", "--in", (tmp.path() / "docs.jsonl").string(), "--out",
                         (tmp.path() / "sample.jsonl").string(), "--n", "50", "--seed", "1"});
    CHECK(r.code == 1);
    CHECK(r.err.find("sampling") != std::string::npos);

    save_dataset(testing::dataset_with_counts({541, 780, 83, 14, 365, 953}), tmp.path() / "ds.jsonl");
    r = frames_cli(tmp, {"stats", "--data", (tmp.path() / "ds.jsonl").string()});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["AR01"] == 541);
    CHECK(j["MF04"] == 14);
    CHECK(j["total"] == 2736);
}

TEST_CASE("encoder, training, evaluation and classification through the CLI") {
    testing::TempDir tmp;
    const auto train = testing::synthetic_dataset(3, 1);
    const auto gold = testing::synthetic_dataset(1, 2, 3, 9, Split::gold);
    // Gold doc ids must not collide with the training ones.
    auto gold_records = gold.records;
    for (auto& r : gold_records) {
        r.paragraph.doc_id = "gold-" + r.paragraph.doc_id;
        r.paragraph.para_id = make_para_id(r.paragraph.doc_id, 0);
    }
    save_dataset(train, tmp.path() / "train.jsonl");
    save_dataset(make_dataset(gold_records), tmp.path() / "gold.jsonl");
    const auto enc = (tmp.path() / "enc").string();

    auto r = frames_cli(tmp, {"init-encoder", "--texts", (tmp.path() / "train.jsonl").string(), "--out", enc,
                              "--hidden", "16", "--layers", "1", "--heads", "2", "--intermediate", "32",
                              "--pretrain-epochs", "1"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(fs::path(enc) / "model.bin"));

    std::ofstream(tmp.path() / "train_config.json") << R"({"seed": 5, "epochs": 1, "logging_steps": 2})";
    const auto model = (tmp.path() / "model").string();
    r = frames_cli(tmp, {"train", "--config", (tmp.path() / "train_config.json").string(), "--train",
                         (tmp.path() / "train.jsonl").string(), "--eval", (tmp.path() / "gold.jsonl").string(),
                         "--out", model, "--encoder", enc});
    REQUIRE(r.code == 0);
    const auto summary = last_json(r.out);
    CHECK(summary["steps"] == 5);  // 18 records, batch 4
    CHECK(summary["log_entries"] == 2);

    r = frames_cli(tmp, {"evaluate", "--model", model, "--gold", (tmp.path() / "gold.jsonl").string(), "--report",
                         (tmp.path() / "gold_report.json").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(read_file(tmp.path() / "gold_report.json"))["total"] == 6);

    // Scoring the training set as gold is leakage.
    auto leaked = train.records;
    for (auto& rec : leaked) rec.split = Split::gold;
    save_dataset(make_dataset(leaked), tmp.path() / "leaky_gold.jsonl");
    r = frames_cli(tmp, {"evaluate", "--model", model, "--gold", (tmp.path() / "leaky_gold.jsonl").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("leakage") != std::string::npos);

    r = frames_cli(tmp, {"classify", "--model", model, "--in", (tmp.path() / "gold.jsonl").string(), "--out",
                         (tmp.path() / "pred.jsonl").string()});
    REQUIRE(r.code == 0);
    std::ifstream preds(tmp.path() / "pred.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(preds, line)) {
        const auto j = json::parse(line);
        double sum = 0.0;
        for (const auto& [code, v] : j["scores"].items()) sum += v.get<double>();
        CHECK(std::abs(sum - 1.0) <= 1e-6);
        ++n;
    }
    CHECK(n == 6);

    const auto cv_out = (tmp.path() / "cv").string();
    r = frames_cli(tmp, {"cv", "--config", (tmp.path() / "train_config.json").string(), "--data",
                         (tmp.path() / "train.jsonl").string(), "--out", cv_out, "--k", "3", "--seed", "2",
                         "--stratified", "--encoder", enc});
    REQUIRE(r.code == 0);
    const auto cv = json::parse(r.out);
    CHECK(cv["fold_sizes"] == json::array({6, 6, 6}));
    CHECK(load_confusion_csv(fs::path(cv_out) / "confusion_matrix.csv").total() == 18);
    CHECK(fs::exists(fs::path(cv_out) / "fold-0" / "model.bin"));
    CHECK(fs::exists(fs::path(cv_out) / "predictions.jsonl"));

    r = frames_cli(tmp, {"train", "--train", (tmp.path() / "train.jsonl").string(), "--out", model, "--seed", "1",
                         "--encoder", (tmp.path() / "no-encoder").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("environment") != std::string::npos);
}
