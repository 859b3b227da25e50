#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "frames/annotate.hpp"
#include "frames/error.hpp"

namespace frames {

namespace {

void check_pair(std::span<const FrameCode> a, std::span<const FrameCode> b) {
    if (a.empty() || b.empty()) throw InputError("agreement needs at least one item per coder");
    if (a.size() != b.size()) {
        throw InputError("label lists differ in length (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
}

}  // namespace

std::string_view band_name(AgreementBand band) noexcept {
    switch (band) {
        case AgreementBand::poor: return "poor";
        case AgreementBand::slight: return "slight";
        case AgreementBand::fair: return "fair";
        case AgreementBand::moderate: return "moderate";
        case AgreementBand::substantial: return "substantial";
        case AgreementBand::almost_perfect: return "almost_perfect";
    }
    return "poor";
}

AgreementBand landis_koch_band(double kappa) noexcept {
    if (kappa < 0.0) return AgreementBand::poor;
    if (kappa <= 0.20) return AgreementBand::slight;
    if (kappa <= 0.40) return AgreementBand::fair;
    if (kappa <= 0.60) return AgreementBand::moderate;
    if (kappa <= 0.80) return AgreementBand::substantial;
    return AgreementBand::almost_perfect;
}

AgreementMatrix agreement_matrix(std::span<const FrameCode> a, std::span<const FrameCode> b) {
    check_pair(a, b);
    AgreementMatrix m{};
    for (std::size_t i = 0; i < a.size(); ++i) ++m[frame_index(a[i])][frame_index(b[i])];
    return m;
}

AgreementReport cohen_kappa(std::span<const FrameCode> a, std::span<const FrameCode> b) {
    check_pair(a, b);
    const auto n = static_cast<long long>(a.size());
    std::array<long long, kNumFrames> count_a{}, count_b{};
    long long agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++count_a[frame_index(a[i])];
        ++count_b[frame_index(b[i])];
        if (a[i] == b[i]) ++agree;
    }
    long long chance = 0;  // n^2 * p_expected
    for (std::size_t c = 0; c < kNumFrames; ++c) chance += count_a[c] * count_b[c];
    if (chance == n * n) {
        throw DegenerateAgreementError("expected agreement is 1; kappa is undefined");
    }

    AgreementReport r;
    r.n_items = a.size();
    r.p_observed = static_cast<double>(agree) / static_cast<double>(n);
    r.p_expected = static_cast<double>(chance) / (static_cast<double>(n) * static_cast<double>(n));
    // Integer numerator/denominator keeps exact cases (0, 1/2, 1) exact.
    r.kappa = static_cast<double>(n * agree - chance) / static_cast<double>(n * n - chance);
    r.band = landis_koch_band(r.kappa);
    return r;
}

Interval kappa_confidence_interval(const AgreementReport& report, std::span<const FrameCode> a,
                                   std::span<const FrameCode> b, double level) {
    check_pair(a, b);
    if (a.size() < 2) throw InputError("confidence interval needs at least two items");
    if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");

    const auto m = agreement_matrix(a, b);
    const double n = static_cast<double>(a.size());
    std::array<double, kNumFrames> row{}, col{};
    std::array<std::array<double, kNumFrames>, kNumFrames> p{};
    for (std::size_t i = 0; i < kNumFrames; ++i) {
        for (std::size_t j = 0; j < kNumFrames; ++j) {
            p[i][j] = static_cast<double>(m[i][j]) / n;
            row[i] += p[i][j];
            col[j] += p[i][j];
        }
    }
    const double k = report.kappa;
    const double pe = report.p_expected;

    double diag = 0.0;
    double off = 0.0;
    for (std::size_t i = 0; i < kNumFrames; ++i) {
        const double t = 1.0 - (row[i] + col[i]) * (1.0 - k);
        diag += p[i][i] * t * t;
        for (std::size_t j = 0; j < kNumFrames; ++j) {
            if (i == j) continue;
            const double s = col[i] + row[j];
            off += p[i][j] * s * s;
        }
    }
    off *= (1.0 - k) * (1.0 - k);
    const double last = k - pe * (1.0 - k);
    double variance = (diag + off - last * last) / (n * (1.0 - pe) * (1.0 - pe));
    variance = std::max(variance, 0.0);  // rounding can push the exact-zero case negative

    const boost::math::normal_distribution<double> standard;
    const double z = boost::math::quantile(standard, 0.5 + level / 2.0);
    const double half = z * std::sqrt(variance);
    return {std::clamp(k - half, -1.0, 1.0), std::clamp(k + half, -1.0, 1.0)};
}

nlohmann::ordered_json to_json(const AgreementReport& report) {
    nlohmann::ordered_json j;
    j["kappa"] = report.kappa;
    j["p_observed"] = report.p_observed;
    j["p_expected"] = report.p_expected;
    j["n_items"] = report.n_items;
    j["band"] = band_name(report.band);
    return j;
}

}  // namespace frames
