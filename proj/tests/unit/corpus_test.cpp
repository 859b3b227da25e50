#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "frames/corpus.hpp"
#include "frames/error.hpp"
#include "frames/rng.hpp"
#include "../support/synthetic.hpp"
#include "../support/temp_dir.hpp"

using namespace frames;

namespace {

SourceDocument doc(std::string body, std::string id = "d1", std::string lang = "en") {
    SourceDocument d;
    d.doc_id = std::move(id);
    d.url = "https://example.org/" + d.doc_id;
    d.language = std::move(lang);
    d.body = std::move(body);
    return d;
}

LabeledParagraph record(std::string doc_id, int ordinal, FrameCode main, Split split = Split::train) {
    LabeledParagraph r;
    r.paragraph.doc_id = std::move(doc_id);
    r.paragraph.ordinal = ordinal;
    r.paragraph.para_id = make_para_id(r.paragraph.doc_id, ordinal);
    r.paragraph.text = "Some paragraph text for " + r.paragraph.para_id;
    r.labels = {{main}, main};
    r.coder_id = "c1";
    r.split = split;
    return r;
}

class CountingTranslator : public TranslationClient {
public:
    int calls = 0;
    std::string translate(std::string_view text, std::string_view) override {
        ++calls;
        return std::string(text);
    }
};

class FailingTranslator : public TranslationClient {
public:
    std::string translate(std::string_view, std::string_view) override { throw std::runtime_error("offline"); }
};

}  // namespace

TEST_CASE("single block body") {
    ExtractOptions opts;
    opts.min_paragraph_chars = 1;  // the default of 40 would drop this 15-character block
    const auto ps = extract_paragraphs(doc("Only one block."), opts);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].ordinal == 0);
    CHECK(ps[0].text == "Only one block.");
    CHECK(ps[0].para_id == "d1#0");
    CHECK(ps[0].doc_id == "d1");
}

TEST_CASE("blank lines separate plain-text blocks") {
    const std::string a = "The first block of text runs well past forty characters in length.";
    const std::string b = "The second block also has more than forty characters\nacross two lines.";
    const auto ps = extract_paragraphs(doc(a + "\n\n  \n" + b));
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].ordinal == 0);
    CHECK(ps[1].ordinal == 1);
    CHECK(ps[0].text == a);
    CHECK(ps[1].text == "The second block also has more than forty characters across two lines.");
}

TEST_CASE("short blocks are dropped and ordinals stay dense") {
    const std::string long1 = "A long enough paragraph that easily passes the forty character bar.";
    const std::string long2 = "Another paragraph which is also comfortably above the threshold.";
    const auto ps = extract_paragraphs(doc(long1 + "\n\nTen chars.\n\n" + long2));
    REQUIRE(ps.size() == 2);
    CHECK(ps[1].text == long2);
    CHECK(ps[1].ordinal == 1);
}

TEST_CASE("minimum length counts code points, not bytes") {
    ExtractOptions opts;
    opts.min_paragraph_chars = 5;
    CHECK(extract_paragraphs(doc("ééééé\n\nabc d e f"), opts).size() == 2);
    opts.min_paragraph_chars = 6;
    CHECK(extract_paragraphs(doc("ééééé\n\nabc d e f"), opts).size() == 1);
    CHECK(utf8_length("ééééé") == 5);
}

TEST_CASE("markup extraction") {
    const std::string html =
        "<html><head><title>Headline</title><style>p{color:red}</style></head><body>"
        "<script>var x = '<p>not text</p>';</script>"
        "<p>First paragraph with <b>bold</b> words and an &amp; entity, long enough.</p>"
        "<div>Second&nbsp;paragraph<br>continues after a line break, long enough too.</div>"
        "<p>Short.</p><!-- a comment that is long enough to be a paragraph if kept -->"
        "</body></html>";
    const auto ps = extract_paragraphs(doc(html));
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].text == "First paragraph with bold words and an & entity, long enough.");
    CHECK(ps[1].text == "Second paragraph continues after a line break, long enough too.");
}

TEST_CASE("empty body is an ingestion error") {
    CHECK_THROWS_AS(extract_paragraphs(doc("")), IngestionError);
    CHECK_THROWS_AS(extract_paragraphs(doc(" \n\t ")), IngestionError);
}

TEST_CASE("normalize_whitespace collapses runs including no-break spaces") {
    CHECK(normalize_whitespace("  a \t\n b\xC2\xA0\xC2\xA0 c  ") == "a b c");
    CHECK(normalize_whitespace("") == "");
}

TEST_CASE("translation contract") {
    CountingTranslator counting;
    const auto en = doc("English body text.", "e1", "en");
    CHECK(translate_document(en, counting) == en);
    CHECK(counting.calls == 0);

    IdentityTranslator identity;
    const auto de = translate_document(doc("Deutscher Text.", "g1", "de"), identity);
    CHECK(de.body == "Deutscher Text.");
    CHECK(de.language == "en");

    FailingTranslator failing;
    try {
        translate_document(doc("Texte.", "f1", "fr"), failing);
        FAIL("expected TranslationError");
    } catch (const TranslationError& e) {
        CHECK(e.doc_id() == "f1");
    }
}

TEST_CASE("dataset_stats") {
    std::vector<LabeledParagraph> recs;
    for (int i = 0; i < 3; ++i) recs.push_back(record("d" + std::to_string(i), 0, FrameCode::NO06));
    const auto counts = dataset_stats(make_dataset(recs));
    CHECK(counts[FrameCode::NO06] == 3);
    CHECK(counts.total == 3);
    CHECK(counts[FrameCode::AR01] == 0);

    // Random dataset against an independent tally.
    Rng rng(17);
    std::vector<LabeledParagraph> random_recs;
    std::map<FrameCode, std::size_t> oracle;
    for (int i = 0; i < 50; ++i) {
        const auto code = frame_from_index(static_cast<int>(rng.below(6)));
        ++oracle[code];
        random_recs.push_back(record("r" + std::to_string(i), 0, code));
    }
    const auto c = dataset_stats(make_dataset(random_recs));
    for (auto code : kAllFrames) CHECK(c[code] == oracle[code]);
    CHECK(c.total == 50);
}

TEST_CASE("make_dataset derives the split tag") {
    CHECK(make_dataset({record("a", 0, FrameCode::AR01)}).split == DatasetSplit::train);
    CHECK(make_dataset({record("a", 0, FrameCode::AR01, Split::gold)}).split == DatasetSplit::gold);
    CHECK(make_dataset({record("a", 0, FrameCode::AR01), record("b", 0, FrameCode::AR01, Split::gold)}).split ==
          DatasetSplit::mixed);
}

TEST_CASE("dataset round trip is byte-identical") {
    std::vector<LabeledParagraph> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(record("doc" + std::to_string(i), i, kAllFrames[static_cast<std::size_t>(i)]));
    recs[1].labels = {{FrameCode::HI02, FrameCode::EF05}, FrameCode::EF05};
    recs[2].paragraph.text = "Unicode text: café, naïve, “quoted”.";
    const auto ds = make_dataset(recs);
    std::ostringstream first;
    write_dataset(first, ds);
    std::istringstream in(first.str());
    const auto back = read_dataset(in);
    CHECK(back == ds);
    std::ostringstream second;
    write_dataset(second, back);
    CHECK(second.str() == first.str());
}

TEST_CASE("dataset parse errors carry line numbers") {
    std::ostringstream good;
    write_dataset(good, make_dataset({record("a", 0, FrameCode::AR01)}));
    const std::string missing_main =
        R"({"para_id":"b#0","doc_id":"b","ordinal":0,"text":"x","frames":["AR01"],"coder":"c","split":"train"})";
    std::istringstream in(good.str() + "\n" + missing_main + "\n");
    try {
        read_dataset(in);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream bad_json("{not json}\n");
    CHECK_THROWS_AS(read_dataset(bad_json), ParseError);
}

TEST_CASE("invalid label sets in a dataset file are validation errors") {
    const std::string line =
        R"({"para_id":"b#0","doc_id":"b","ordinal":0,"text":"x","frames":["NO06","HI02"],"main":"NO06","coder":"c","split":"train"})";
    std::istringstream in(line + "\n");
    try {
        read_dataset(in);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("b#0") != std::string::npos);
        bool named = false;
        for (const auto& v : e.violations()) named = named || v.find(rules::kNoFrameExclusive) != std::string::npos;
        CHECK(named);
    }
}

TEST_CASE("duplicate para_ids are rejected") {
    auto r = record("a", 0, FrameCode::AR01);
    CHECK_THROWS_AS(validate_dataset(make_dataset({r, r})), ValidationError);
}

TEST_CASE("paragraph files round trip") {
    std::vector<Paragraph> ps = {{"d#0", "d", 0, "alpha text"}, {"d#1", "d", 1, "beta text"}};
    std::ostringstream out;
    write_paragraphs(out, ps);
    std::istringstream in(out.str());
    CHECK(read_paragraphs(in) == ps);
}

TEST_CASE("sample_documents") {
    std::vector<SourceDocument> corpus;
    for (int i = 0; i < 100; ++i) corpus.push_back(doc("body", "doc" + std::to_string(i)));

    auto all = sample_documents(corpus, corpus.size(), 1);
    CHECK(all.size() == corpus.size());
    std::set<std::string> ids;
    for (const auto& d : all) ids.insert(d.doc_id);
    CHECK(ids.size() == corpus.size());

    CHECK(sample_documents(corpus, 10, 42) == sample_documents(corpus, 10, 42));
    CHECK_THROWS_AS(sample_documents(corpus, 101, 1), SamplingError);

    // Inclusion frequency of each document should be near 10%.
    std::map<std::string, int> hits;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        for (const auto& d : sample_documents(corpus, 10, seed)) ++hits[d.doc_id];
    }
    for (const auto& d : corpus) {
        const double freq = hits[d.doc_id] / 1000.0;
        CHECK(std::abs(freq - 0.10) <= 0.05);
    }
}

TEST_CASE("split leakage") {
    const auto train = make_dataset({record("a", 0, FrameCode::AR01), record("b", 0, FrameCode::HI02)});
    const auto gold_clean = make_dataset({record("c", 0, FrameCode::AR01, Split::gold)});
    CHECK(check_split_leakage(train, gold_clean).clean());

    // Same document, different paragraph: still leakage.
    const auto gold_leaky = make_dataset({record("b", 1, FrameCode::HI02, Split::gold)});
    const auto report = check_split_leakage(train, gold_leaky);
    CHECK_FALSE(report.clean());
    REQUIRE(report.shared_doc_ids.size() == 1);
    CHECK(report.shared_doc_ids[0] == "b");
    CHECK_THROWS_AS(require_no_leakage(report), LeakageError);

    auto mixed = make_dataset({record("a", 0, FrameCode::AR01), record("a", 1, FrameCode::AR01, Split::gold)});
    CHECK_FALSE(check_split_leakage(mixed).clean());
}

TEST_CASE("dataset with the reference class counts tallies exactly") {
    const auto ds = testing::dataset_with_counts({541, 780, 83, 14, 365, 953});
    const auto c = dataset_stats(ds);
    CHECK(c[FrameCode::AR01] == 541);
    CHECK(c[FrameCode::HI02] == 780);
    CHECK(c[FrameCode::CF03] == 83);
    CHECK(c[FrameCode::MF04] == 14);
    CHECK(c[FrameCode::EF05] == 365);
    CHECK(c[FrameCode::NO06] == 953);
    CHECK(c.total == 2736);
}

TEST_CASE("documents load from JSONL and from a directory") {
    testing::TempDir tmp;
    std::vector<SourceDocument> docs = {doc("first body", "a"), doc("second body", "b", "de")};
    save_documents(docs, tmp.path() / "docs.jsonl");
    CHECK(load_documents(tmp.path() / "docs.jsonl") == docs);

    std::filesystem::create_directories(tmp.path() / "pages");
    std::ofstream(tmp.path() / "pages" / "story.html") << "<p>Hello</p>";
    const auto from_dir = load_documents(tmp.path() / "pages");
    REQUIRE(from_dir.size() == 1);
    CHECK(from_dir[0].doc_id == "story");
    CHECK(from_dir[0].body == "<p>Hello</p>");
}
