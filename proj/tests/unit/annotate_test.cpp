#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "frames/annotate.hpp"
#include "frames/error.hpp"
#include "frames/rng.hpp"
#include "../support/temp_dir.hpp"

using namespace frames;

namespace {

using F = FrameCode;

// Brute-force kappa: build the contingency table, then apply the formula.
double oracle_kappa(const std::vector<F>& a, const std::vector<F>& b) {
    double table[6][6] = {};
    for (std::size_t i = 0; i < a.size(); ++i) table[frame_index(a[i])][frame_index(b[i])] += 1.0;
    const double n = static_cast<double>(a.size());
    double po = 0.0, pe = 0.0;
    for (int i = 0; i < 6; ++i) {
        po += table[i][i] / n;
        double row = 0.0, col = 0.0;
        for (int j = 0; j < 6; ++j) {
            row += table[i][j];
            col += table[j][i];
        }
        pe += (row / n) * (col / n);
    }
    return (po - pe) / (1.0 - pe);
}

bool degenerate(const std::vector<F>& a, const std::vector<F>& b) {
    return std::all_of(a.begin(), a.end(), [&](F f) { return f == a[0]; }) &&
           std::all_of(b.begin(), b.end(), [&](F f) { return f == a[0]; });
}

std::vector<F> random_labels(Rng& rng, std::size_t n, int codes) {
    std::vector<F> out(n);
    for (auto& f : out) f = frame_from_index(static_cast<int>(rng.below(static_cast<std::uint64_t>(codes))));
    return out;
}

// Percentile bootstrap of kappa; resamples where kappa is undefined are skipped.
Interval bootstrap_interval(const std::vector<F>& a, const std::vector<F>& b, int resamples, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> ks;
    std::vector<F> ra(a.size()), rb(b.size());
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto j = rng.below(a.size());
            ra[i] = a[j];
            rb[i] = b[j];
        }
        if (degenerate(ra, rb)) continue;
        // A resample can still have p_e == 1 only when both are constant and equal; other
        // single-class cases have p_e < 1.
        ks.push_back(oracle_kappa(ra, rb));
    }
    std::sort(ks.begin(), ks.end());
    const auto at = [&](double q) { return ks[static_cast<std::size_t>(q * static_cast<double>(ks.size() - 1))]; };
    return {at(0.025), at(0.975)};
}

AnnotationStore::Clock fixed_clock() {
    return [] { return std::string("2024-01-01T00:00:00Z"); };
}

std::vector<Paragraph> paragraphs(int n) {
    std::vector<Paragraph> ps;
    for (int i = 0; i < n; ++i) ps.push_back({make_para_id("doc", i), "doc", i, "text " + std::to_string(i)});
    return ps;
}

}  // namespace

TEST_CASE("kappa worked examples") {
    const std::vector<F> a1 = {F::AR01, F::AR01, F::HI02, F::HI02};
    const std::vector<F> b1 = {F::AR01, F::HI02, F::HI02, F::HI02};
    const auto r1 = cohen_kappa(a1, b1);
    CHECK(r1.p_observed == 0.75);
    CHECK(r1.p_expected == 0.5);
    CHECK(r1.kappa == 0.5);
    CHECK(r1.band == AgreementBand::moderate);
    CHECK(r1.n_items == 4);

    const std::vector<F> a2 = {F::AR01, F::HI02, F::AR01, F::HI02};
    const std::vector<F> b2 = {F::AR01, F::AR01, F::HI02, F::HI02};
    const auto r2 = cohen_kappa(a2, b2);
    CHECK(r2.p_observed == 0.5);
    CHECK(r2.p_expected == 0.5);
    CHECK(r2.kappa == 0.0);

    std::vector<F> same(35);
    for (std::size_t i = 0; i < same.size(); ++i) same[i] = frame_from_index(static_cast<int>(i % 6));
    const auto r3 = cohen_kappa(same, same);
    CHECK(r3.kappa == 1.0);
    CHECK(r3.band == AgreementBand::almost_perfect);
    const auto ci = kappa_confidence_interval(r3, same, same);
    CHECK(ci.lower == 1.0);
    CHECK(ci.upper == 1.0);
}

TEST_CASE("kappa errors") {
    const std::vector<F> one = {F::AR01};
    const std::vector<F> two = {F::AR01, F::HI02};
    CHECK_THROWS_AS(cohen_kappa(one, two), InputError);
    CHECK_THROWS_AS(cohen_kappa(std::vector<F>{}, std::vector<F>{}), InputError);
    const std::vector<F> constant = {F::CF03, F::CF03, F::CF03};
    CHECK_THROWS_AS(cohen_kappa(constant, constant), DegenerateAgreementError);
    const auto r = cohen_kappa(two, two);
    const std::vector<F> other = {F::HI02};
    CHECK_THROWS_AS(kappa_confidence_interval(cohen_kappa(one, other), one, other), InputError);
    CHECK_THROWS_AS(kappa_confidence_interval(r, two, two, 1.0), InputError);
    CHECK_THROWS_AS(kappa_confidence_interval(r, two, two, 0.0), InputError);
}

TEST_CASE("Landis-Koch bands") {
    CHECK(landis_koch_band(-0.01) == AgreementBand::poor);
    CHECK(landis_koch_band(0.0) == AgreementBand::slight);
    CHECK(landis_koch_band(0.20) == AgreementBand::slight);
    CHECK(landis_koch_band(0.21) == AgreementBand::fair);
    CHECK(landis_koch_band(0.40) == AgreementBand::fair);
    CHECK(landis_koch_band(0.60) == AgreementBand::moderate);
    CHECK(landis_koch_band(0.74) == AgreementBand::substantial);
    CHECK(landis_koch_band(0.80) == AgreementBand::substantial);
    CHECK(landis_koch_band(0.81) == AgreementBand::almost_perfect);
    CHECK(band_name(AgreementBand::almost_perfect) == "almost_perfect");
}

TEST_CASE("kappa matches the brute-force oracle on random pairs") {
    Rng rng(2024);
    int checked = 0;
    for (int t = 0; t < 1500; ++t) {
        const int codes = 2 + static_cast<int>(rng.below(5));
        const auto n = 2 + static_cast<std::size_t>(rng.below(60));
        auto a = random_labels(rng, n, codes);
        auto b = random_labels(rng, n, codes);
        if (rng.below(4) == 0) b = a;  // exercise the high-agreement end too
        if (degenerate(a, b)) {
            CHECK_THROWS_AS(cohen_kappa(a, b), DegenerateAgreementError);
            continue;
        }
        const auto r = cohen_kappa(a, b);
        CHECK(std::abs(r.kappa - oracle_kappa(a, b)) <= 1e-9);
        CHECK(r.kappa <= 1.0);
        CHECK(cohen_kappa(b, a).kappa == r.kappa);

        // Renaming by a random permutation of all six codes.
        std::array<int, 6> perm{};
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<int>(perm));
        auto rename = [&](std::vector<F> v) {
            for (auto& f : v) f = frame_from_index(perm[static_cast<std::size_t>(frame_index(f))]);
            return v;
        };
        CHECK(std::abs(cohen_kappa(rename(a), rename(b)).kappa - r.kappa) <= 1e-12);

        const auto ci = kappa_confidence_interval(r, a, b);
        CHECK(ci.lower <= r.kappa);
        CHECK(r.kappa <= ci.upper);
        CHECK(ci.lower >= -1.0);
        CHECK(ci.upper <= 1.0);
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("agreement matrix") {
    const std::vector<F> a = {F::AR01, F::AR01, F::HI02, F::HI02};
    const std::vector<F> b = {F::AR01, F::HI02, F::HI02, F::HI02};
    const auto m = agreement_matrix(a, b);
    CHECK(m[0][0] == 1);
    CHECK(m[0][1] == 1);
    CHECK(m[1][1] == 2);
    std::size_t total = 0;
    for (const auto& row : m) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
    CHECK(total == 4);
}

TEST_CASE("confidence interval on the 4-item example straddles the estimate") {
    const std::vector<F> a = {F::AR01, F::AR01, F::HI02, F::HI02};
    const std::vector<F> b = {F::AR01, F::HI02, F::HI02, F::HI02};
    const auto r = cohen_kappa(a, b);
    const auto ci = kappa_confidence_interval(r, a, b);
    CHECK(ci.lower < 0.5);
    CHECK(ci.upper > 0.5);
    const auto boot = bootstrap_interval(a, b, 10000, 7);
    CHECK(boot.lower < 0.5);
    CHECK(boot.upper >= 0.5);
}

TEST_CASE("confidence interval agrees with a bootstrap on 200 items") {
    // Two coders who agree about 80% of the time over a skewed label mix.
    Rng rng(31);
    const std::array<double, 6> mix = {0.2, 0.28, 0.05, 0.02, 0.13, 0.32};
    std::vector<F> a, b;
    for (int i = 0; i < 200; ++i) {
        double u = rng.uniform();
        int c = 0;
        while (c < 5 && u >= mix[static_cast<std::size_t>(c)]) u -= mix[static_cast<std::size_t>(c++)];
        a.push_back(frame_from_index(c));
        b.push_back(rng.uniform() < 0.8 ? a.back() : frame_from_index(static_cast<int>(rng.below(6))));
    }
    const auto r = cohen_kappa(a, b);
    const auto ci = kappa_confidence_interval(r, a, b);
    const auto boot = bootstrap_interval(a, b, 10000, 11);
    CHECK(std::abs(ci.lower - boot.lower) <= 0.05);
    CHECK(std::abs(ci.upper - boot.upper) <= 0.05);
}

TEST_CASE("annotation store") {
    testing::TempDir tmp;
    const auto path = tmp.path() / "annotations.jsonl";
    {
        AnnotationStore store(path, fixed_clock());
        const auto rec = store.append("doc#0", "alice", {{F::AR01, F::EF05}, F::EF05});
        CHECK(rec.timestamp == "2024-01-01T00:00:00Z");
        CHECK(store.contains("doc#0", "alice"));
        CHECK_FALSE(store.contains("doc#0", "bob"));
        CHECK_THROWS_AS(store.append("doc#0", "alice", {{F::AR01}, F::AR01}), ConflictError);
        CHECK_THROWS_AS(store.append("doc#1", "alice", {{F::NO06, F::AR01}, F::NO06}), ValidationError);
        store.append("doc#0", "bob", {{F::AR01}, F::AR01});
        CHECK(store.size() == 2);
    }
    AnnotationStore reopened(path, fixed_clock());
    CHECK(reopened.size() == 2);
    CHECK(reopened.records_for("alice").at(0).labels.main == F::EF05);
    CHECK(reopened.counts_by_coder() == std::map<std::string, std::size_t>{{"alice", 1}, {"bob", 1}});
    CHECK(load_annotations(path) == reopened.records());

    std::ofstream(tmp.path() / "bad.jsonl") << R"({"para_id":"x","coder_id":"c"})" << '\n';
    CHECK_THROWS_AS(load_annotations(tmp.path() / "bad.jsonl"), ParseError);
}

TEST_CASE("concurrent appends are serialized") {
    AnnotationStore store(fixed_clock());
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&store, t] {
            for (int i = 0; i < 50; ++i) store.append("p#" + std::to_string(i), "c" + std::to_string(t), {{F::AR01}, F::AR01});
        });
    }
    for (auto& th : threads) th.join();
    CHECK(store.size() == 200);
}

TEST_CASE("agreement over shared items") {
    AnnotationStore store(fixed_clock());
    for (int i = 0; i < 35; ++i) {
        const auto code = frame_from_index(i % 6);
        store.append("p#" + std::to_string(i), "a", {{code}, code});
        store.append("p#" + std::to_string(i), "b", {{code}, code});
    }
    store.append("q#0", "c", {{F::AR01}, F::AR01});
    CHECK(agreement_report(store, "a", "b").kappa == 1.0);
    CHECK(agreement_report(store, "a", "b").n_items == 35);
    CHECK_THROWS_AS(agreement_report(store, "a", "c"), InputError);

    // Randomized overlap: compare against a direct call on manually aligned lists.
    Rng rng(5);
    std::vector<AnnotationRecord> ra, rb;
    std::map<std::string, F> ma, mb;
    for (int i = 0; i < 260; ++i) {
        const auto id = "r#" + std::to_string(i);
        const auto fa = frame_from_index(static_cast<int>(rng.below(6)));
        const auto fb = rng.below(3) == 0 ? frame_from_index(static_cast<int>(rng.below(6))) : fa;
        if (i < 230) {
            ra.push_back({id, "a", {{fa}, fa}, "t"});
            ma[id] = fa;
        }
        if (i >= 30) {
            rb.push_back({id, "b", {{fb}, fb}, "t"});
            mb[id] = fb;
        }
    }
    rng.shuffle(std::span<AnnotationRecord>(rb));
    std::vector<F> la, lb;
    for (const auto& [id, f] : ma) {
        if (auto it = mb.find(id); it != mb.end()) {
            la.push_back(f);
            lb.push_back(it->second);
        }
    }
    CHECK(la.size() == 200);
    const auto via_records = agreement_from_records(ra, rb);
    const auto direct = cohen_kappa(la, lb);
    CHECK(via_records.kappa == direct.kappa);
    CHECK(via_records.n_items == 200);
}

TEST_CASE("labelling session walks the queue") {
    AnnotationStore store(fixed_clock());
    SessionManager sessions(paragraphs(3), store);
    const auto s = sessions.open("alice");
    CHECK(s.queue.size() == 3);
    CHECK(sessions.next_paragraph(s.session_id)->para_id == "doc#0");

    CHECK_THROWS_AS(sessions.submit("nope", "doc#0", {{F::AR01}, F::AR01}), SessionError);
    CHECK_THROWS_AS(sessions.submit(s.session_id, "doc#0", {{F::NO06, F::AR01}, F::AR01}), ValidationError);
    CHECK_THROWS_AS(sessions.submit(s.session_id, "doc#1", {{F::AR01}, F::AR01}), SequencingError);

    sessions.submit(s.session_id, "doc#0", {{F::AR01}, F::AR01});
    CHECK(sessions.next_paragraph(s.session_id)->para_id == "doc#1");
    // A duplicate is reported as a conflict, even though it is also out of sequence.
    CHECK_THROWS_AS(sessions.submit(s.session_id, "doc#0", {{F::AR01}, F::AR01}), ConflictError);
    sessions.submit(s.session_id, "doc#1", {{F::HI02}, F::HI02});
    sessions.submit(s.session_id, "doc#2", {{F::NO06}, F::NO06});
    CHECK_FALSE(sessions.next_paragraph(s.session_id).has_value());
    CHECK(sessions.session(s.session_id).done());

    // A fresh session only queues what this coder has not labelled.
    store.append("doc#1", "bob", {{F::AR01}, F::AR01});
    const auto b = sessions.open("bob");
    CHECK(b.queue == std::vector<std::string>{"doc#0", "doc#2"});
    CHECK(sessions.open("alice").queue.empty());
}
