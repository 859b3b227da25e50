#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"
#include "frames/rng.hpp"
#include "../support/synthetic.hpp"
#include "../support/temp_dir.hpp"

using namespace frames;
using F = FrameCode;

namespace {

// Metrics straight from label lists, without a confusion matrix.
struct Oracle {
    double precision[6]{}, recall[6]{}, f1[6]{};
    std::size_t support[6]{};
    double accuracy = 0.0, macro_f1 = 0.0, weighted_f1 = 0.0;
};

Oracle oracle(const std::vector<F>& t, const std::vector<F>& p) {
    Oracle o;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
    o.accuracy = static_cast<double>(correct) / static_cast<double>(t.size());
    for (int c = 0; c < 6; ++c) {
        const auto code = frame_from_index(c);
        std::size_t tp = 0, pred = 0, actual = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            tp += t[i] == code && p[i] == code;
            pred += p[i] == code;
            actual += t[i] == code;
        }
        o.precision[c] = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
        o.recall[c] = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        const double s = o.precision[c] + o.recall[c];
        o.f1[c] = s > 0 ? 2 * o.precision[c] * o.recall[c] / s : 0.0;
        o.support[c] = actual;
        o.macro_f1 += o.f1[c] / 6.0;
        o.weighted_f1 += o.f1[c] * static_cast<double>(actual) / static_cast<double>(t.size());
    }
    return o;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

class ConstantPredictor : public FramePredictor {
public:
    explicit ConstantPredictor(F code) : code_(code) {}
    std::vector<Prediction> predict_batch(std::span<const std::string> texts) const override {
        Prediction p;
        p.scores.probs[static_cast<std::size_t>(frame_index(code_))] = 1.0;
        p.main = code_;
        return std::vector<Prediction>(texts.size(), p);
    }

private:
    F code_;
};

// Predicts the class whose keyword appears in the text.
class KeywordPredictor : public FramePredictor {
public:
    std::vector<Prediction> predict_batch(std::span<const std::string> texts) const override {
        std::vector<Prediction> out;
        for (const auto& t : texts) {
            Prediction p;
            p.main = F::NO06;
            for (auto code : kAllFrames) {
                for (const auto& kw : testing::class_keywords()[static_cast<std::size_t>(frame_index(code))]) {
                    if (t.find(kw) != std::string::npos) p.main = code;
                }
            }
            p.scores.probs[static_cast<std::size_t>(frame_index(p.main))] = 1.0;
            out.push_back(p);
        }
        return out;
    }
};

}  // namespace

TEST_CASE("metrics agree with a direct computation on random labels") {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = 1 + static_cast<std::size_t>(rng.below(80));
        std::vector<F> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = frame_from_index(static_cast<int>(rng.below(6)));
            p[i] = rng.below(3) == 0 ? frame_from_index(static_cast<int>(rng.below(6))) : t[i];
        }
        const auto cm = confusion(t, p);
        CHECK(cm.total() == n);
        const auto r = evaluate_matrix(cm);
        const auto o = oracle(t, p);
        CHECK(r.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
        CHECK(r.macro.f1 == doctest::Approx(o.macro_f1).epsilon(1e-12));
        CHECK(r.weighted.f1 == doctest::Approx(o.weighted_f1).epsilon(1e-12));
        for (int c = 0; c < 6; ++c) {
            const auto& m = r.per_class[static_cast<std::size_t>(c)];
            CHECK(m.precision == doctest::Approx(o.precision[c]).epsilon(1e-12));
            CHECK(m.recall == doctest::Approx(o.recall[c]).epsilon(1e-12));
            CHECK(m.f1 == doctest::Approx(o.f1[c]).epsilon(1e-12));
            CHECK(m.support == o.support[c]);
        }
        // Micro-averaged recall equals accuracy for single-label data.
        double weighted_recall = 0.0;
        for (int c = 0; c < 6; ++c) weighted_recall += o.recall[c] * static_cast<double>(o.support[c]) / static_cast<double>(n);
        CHECK(r.weighted.recall == doctest::Approx(r.accuracy).epsilon(1e-12));
        CHECK(weighted_recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("confusion input errors") {
    const std::vector<F> a = {F::AR01}, b = {F::AR01, F::HI02}, none;
    CHECK_THROWS_AS(confusion(a, b), InputError);
    CHECK_THROWS_AS(confusion(none, none), InputError);
    CHECK_THROWS_AS(evaluate_matrix(ConfusionMatrix{}), InputError);
}

TEST_CASE("reference confusion matrix reproduces the expected metrics") {
    const auto cm = load_confusion_csv(FRAMES_FIXTURES "/reference_confusion.csv");
    CHECK(cm.total() == 2736);
    const auto r = evaluate_matrix(cm);
    struct Row {
        F code;
        double p, r, f1;
        std::size_t support;
    };
    const Row rows[] = {{F::AR01, 0.97, 0.99, 0.98, 541}, {F::HI02, 0.98, 0.99, 0.99, 780},
                        {F::CF03, 0.88, 0.92, 0.90, 83},  {F::MF04, 0.00, 0.00, 0.00, 14},
                        {F::EF05, 1.00, 0.99, 0.99, 365}, {F::NO06, 0.99, 0.99, 0.99, 953}};
    for (const auto& row : rows) {
        CAPTURE(frame_name(row.code));
        CHECK(round2(r[row.code].precision) == row.p);
        CHECK(round2(r[row.code].recall) == row.r);
        CHECK(round2(r[row.code].f1) == row.f1);
        CHECK(r[row.code].support == row.support);
    }
    CHECK(round2(r.accuracy) == 0.98);
    CHECK(round2(r.macro.precision) == 0.80);
    CHECK(round2(r.macro.recall) == 0.81);
    CHECK(round2(r.macro.f1) == 0.81);
    CHECK(round2(r.weighted.f1) == 0.98);
}

TEST_CASE("a class never predicted scores zero without failing") {
    std::vector<F> t = {F::MF04, F::MF04, F::AR01, F::HI02};
    std::vector<F> p = {F::AR01, F::HI02, F::AR01, F::HI02};
    const auto r = evaluate_matrix(confusion(t, p));
    CHECK(r[F::MF04].precision == 0.0);
    CHECK(r[F::MF04].recall == 0.0);
    CHECK(r[F::MF04].f1 == 0.0);
    CHECK(r[F::MF04].support == 2);
    CHECK(r[F::CF03].support == 0);
    CHECK(std::isfinite(r.macro.f1));
    CHECK(r.macro.f1 == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0) / 6.0));
}

TEST_CASE("confusion CSV round trip and column order") {
    Rng rng(1);
    ConfusionMatrix cm;
    for (auto& row : cm.counts) {
        for (auto& v : row) v = rng.below(50);
    }
    std::stringstream buf;
    write_confusion_csv(buf, cm);
    CHECK(buf.str().rfind("actual\\predicted,AR01,HI02,CF03,MF04,EF05,NO06\n", 0) == 0);
    CHECK(read_confusion_csv(buf) == cm);

    // Permuted columns and rows read to the same matrix.
    const int order[] = {4, 0, 5, 2, 1, 3};
    std::ostringstream permuted;
    permuted << "\xEF\xBB\xBF" << "actual\\predicted";
    for (int j : order) permuted << ',' << frame_name(frame_from_index(j));
    permuted << "\r\n";
    for (int i : {5, 3, 1, 0, 2, 4}) {
        permuted << frame_name(frame_from_index(i));
        for (int j : order) permuted << ',' << cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        permuted << "\r\n";
    }
    std::istringstream in(permuted.str());
    CHECK(read_confusion_csv(in) == cm);
}

TEST_CASE("malformed confusion CSV") {
    auto bad = [](const std::string& text) {
        std::istringstream in(text);
        return read_confusion_csv(in);
    };
    const std::string header = "actual\\predicted,AR01,HI02,CF03,MF04,EF05,NO06\n";
    CHECK_THROWS_AS(bad(""), ParseError);
    CHECK_THROWS_AS(bad("x,AR01,HI02,CF03,MF04,EF05,NO06\n"), ParseError);
    CHECK_THROWS_AS(bad("actual\\predicted,AR01,AR01,CF03,MF04,EF05,NO06\n"), ParseError);
    CHECK_THROWS_AS(bad(header + "AR01,1,2,3,4,5\n"), ParseError);
    CHECK_THROWS_AS(bad(header + "AR01,1,2,3,4,5,x\n"), ParseError);
    CHECK_THROWS_AS(bad(header + "AR01,1,2,3,4,5,-6\n"), ParseError);
    try {
        bad(header + "AR01,1,2,3,4,5,6\nAR01,1,2,3,4,5,6\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(bad(header + "AR01,1,2,3,4,5,6\n"), ParseError);  // rows missing
}

TEST_CASE("report JSON and text") {
    const auto cm = load_confusion_csv(FRAMES_FIXTURES "/reference_confusion.csv");
    const auto r = evaluate_matrix(cm);
    const auto j = to_json(r, 2);
    CHECK(j["per_class"]["AR01"]["precision"] == 0.97);
    CHECK(j["accuracy"] == 0.98);
    CHECK(j["macro"]["f1"] == 0.81);
    CHECK(j["per_class"]["MF04"]["support"] == 14);
    const auto text = format_report(r);
    CHECK(text.find("MF04") != std::string::npos);
    CHECK(text.find("0.81") != std::string::npos);
}

TEST_CASE("fold sizes for the reference class counts") {
    const auto ds = testing::dataset_with_counts({541, 780, 83, 14, 365, 953});
    const auto plan = make_folds(ds, 5, 7, false);
    CHECK(plan.fold_sizes() == std::vector<std::size_t>{548, 547, 547, 547, 547});
    const auto strat = make_folds(ds, 5, 7, true);
    CHECK(strat.fold_sizes() == std::vector<std::size_t>{548, 547, 547, 547, 547});

    // Each class spread as evenly as possible; the 14 MF04 paragraphs land 2 or 3 per fold.
    std::map<std::pair<int, F>, std::size_t> per;
    for (const auto& r : ds.records) ++per[{strat.assignments.at(r.paragraph.para_id), r.labels.main}];
    for (int f = 0; f < 5; ++f) {
        const auto mf = per[{f, F::MF04}];
        CHECK(mf >= 2);
        CHECK(mf <= 3);
    }
}

TEST_CASE("fold laws on random datasets") {
    Rng rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        std::array<std::size_t, kNumFrames> counts{};
        for (auto& c : counts) c = rng.below(30);
        counts[0] += 10;
        const auto ds = testing::dataset_with_counts(counts);
        for (int k : {2, 5, 10}) {
            for (bool strat : {false, true}) {
                const auto seed = rng.next();
                const auto plan = make_folds(ds, k, seed, strat);
                CHECK(plan.assignments.size() == ds.size());
                const auto sizes = plan.fold_sizes();
                const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
                CHECK(*hi - *lo <= 1);
                CHECK(make_folds(ds, k, seed, strat).assignments == plan.assignments);
                if (strat) {
                    for (auto code : kAllFrames) {
                        std::vector<std::size_t> c(static_cast<std::size_t>(k));
                        for (const auto& r : ds.records) {
                            if (r.labels.main == code) ++c[static_cast<std::size_t>(plan.assignments.at(r.paragraph.para_id))];
                        }
                        const auto [a, b] = std::minmax_element(c.begin(), c.end());
                        CHECK(*b - *a <= 1);
                    }
                }
            }
        }
    }
    const auto ten = testing::dataset_with_counts({2, 2, 2, 2, 1, 1});
    CHECK(make_folds(ten, 5, 1).fold_sizes() == std::vector<std::size_t>{2, 2, 2, 2, 2});
    CHECK_THROWS_AS(make_folds(ten, 1, 1), InputError);
    CHECK_THROWS_AS(make_folds(ten, 11, 1), InputError);
}

TEST_CASE("cross-validation with a stub trainer") {
    const auto ds = testing::synthetic_dataset(10, 4);
    std::vector<int> folds_seen;
    std::set<std::string> all_heldout;
    auto trainer = [&](const Dataset& train, const Dataset& heldout, int fold) -> std::unique_ptr<FramePredictor> {
        folds_seen.push_back(fold);
        CHECK(train.size() + heldout.size() == ds.size());
        for (const auto& h : heldout.records) {
            CHECK(all_heldout.insert(h.paragraph.para_id).second);
            for (const auto& t : train.records) REQUIRE(t.paragraph.para_id != h.paragraph.para_id);
        }
        return std::make_unique<KeywordPredictor>();
    };
    const auto result = cross_validate(ds, 5, 3, true, trainer);
    CHECK(folds_seen == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(all_heldout.size() == ds.size());
    CHECK(result.pooled.total() == ds.size());
    CHECK(result.report.accuracy == 1.0);
    REQUIRE(result.predictions.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(result.predictions[i].para_id == ds.records[i].paragraph.para_id);
        CHECK(result.predictions[i].fold == result.plan.assignments.at(ds.records[i].paragraph.para_id));
    }

    const auto constant = cross_validate(ds, 5, 3, false, [](const Dataset&, const Dataset&, int) {
        return std::make_unique<ConstantPredictor>(F::AR01);
    });
    CHECK(constant.report.accuracy == doctest::Approx(1.0 / 6.0));
    CHECK(constant.report[F::HI02].f1 == 0.0);
}

TEST_CASE("gold evaluation") {
    const auto gold = testing::synthetic_dataset(3, 5, 3, 9, Split::gold);
    const KeywordPredictor predictor;
    const std::vector<std::string> train_docs = {"unrelated-doc"};
    const auto r = evaluate_gold(predictor, gold, train_docs);
    CHECK(r.accuracy == 1.0);
    CHECK(r.total == gold.size());

    const std::vector<std::string> leaky = {gold.records[0].paragraph.doc_id};
    CHECK_THROWS_AS(evaluate_gold(predictor, gold, leaky), LeakageError);
    CHECK_THROWS_AS(evaluate_gold(predictor, testing::synthetic_dataset(1, 5), train_docs), InputError);
    CHECK_THROWS_AS(evaluate_gold(predictor, Dataset{}, train_docs), InputError);
}
