#pragma once

// Metacognitive analytics: calibration difference, confidence bias,
// self-awareness, pooled calibration fit, and the quadrant analysis.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "stats.hpp"
#include "study_data.hpp"

namespace crossfuse {

// One review with its outcome: confidence in [1,10], correct = prediction
// matched ground truth.
struct ScoredReview {
    double confidence;
    bool correct;
};

inline std::vector<ScoredReview> scored_reviews_of(const StudyLog& log,
                                                   const std::string& reader_id, Arm arm) {
    std::vector<ScoredReview> out;
    for (const auto* a : log.assessments_of(reader_id, arm)) {
        const CaseRecord* c = log.find_case(a->case_id);
        out.push_back({a->confidence, a->prediction == c->ground_truth});
    }
    return out;
}

namespace detail {

// linear-interpolation percentile (position (n-1)*q on the sorted values)
inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * double(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

struct CalibrationDifference {
    double value = 0;
    bool degenerate_confidence = false;  // all confidences equal
};

// Accuracy among confidence >= P75 minus accuracy among confidence <= P25.
// Boundary values are inclusive on both sides.
inline CalibrationDifference calibration_difference(const std::vector<ScoredReview>& reviews) {
    if (reviews.size() < 4) throw TooFewCases("calibration difference needs >= 4 reviews");
    std::vector<double> conf;
    conf.reserve(reviews.size());
    for (const auto& r : reviews) conf.push_back(r.confidence);
    double p25 = detail::percentile(conf, 0.25);
    double p75 = detail::percentile(conf, 0.75);
    if (p25 == p75) {
        bool all_equal = std::all_of(reviews.begin(), reviews.end(),
                                     [&](const ScoredReview& r) { return r.confidence == conf[0]; });
        if (all_equal) return {0.0, true};
    }
    std::size_t hi_n = 0, hi_c = 0, lo_n = 0, lo_c = 0;
    for (const auto& r : reviews) {
        if (r.confidence >= p75) {
            ++hi_n;
            if (r.correct) ++hi_c;
        }
        if (r.confidence <= p25) {
            ++lo_n;
            if (r.correct) ++lo_c;
        }
    }
    if (hi_n == 0 || lo_n == 0) throw TooFewCases("empty percentile subset");
    return {double(hi_c) / double(hi_n) - double(lo_c) / double(lo_n), false};
}

// Mean confidence on correct minus mean confidence on incorrect reviews.
inline double confidence_bias(const std::vector<ScoredReview>& reviews) {
    double sc = 0, si = 0;
    std::size_t nc = 0, ni = 0;
    for (const auto& r : reviews) {
        if (r.correct) {
            sc += r.confidence;
            ++nc;
        } else {
            si += r.confidence;
            ++ni;
        }
    }
    if (nc == 0 || ni == 0) throw OneOutcomeOnly("confidence bias needs both outcomes present");
    return sc / double(nc) - si / double(ni);
}

// Point-biserial correlation between confidence and correctness.
inline double self_awareness(const std::vector<ScoredReview>& reviews) {
    std::vector<double> conf, corr;
    conf.reserve(reviews.size());
    corr.reserve(reviews.size());
    for (const auto& r : reviews) {
        conf.push_back(r.confidence);
        corr.push_back(r.correct ? 1.0 : 0.0);
    }
    return stats::pearson(conf, corr).statistic;  // throws ZeroVariance on constant input
}

struct PooledCalibrationFit {
    double slope = 0;
    double intercept = 0;
    double mean_accuracy_deviation = 0;  // vs the ideal line accuracy = confidence/10
    std::size_t n_bins = 0;
};

// Bin pooled reviews by integer confidence 1..10, weighted least squares
// of bin accuracy on confidence (weights = bin counts).
inline PooledCalibrationFit pooled_calibration_fit(const std::vector<ScoredReview>& reviews) {
    std::map<int, std::pair<std::size_t, std::size_t>> bins;  // conf -> (n, n_correct)
    for (const auto& r : reviews) {
        int c = static_cast<int>(std::lround(r.confidence));
        c = std::clamp(c, 1, 10);
        bins[c].first++;
        if (r.correct) bins[c].second++;
    }
    if (bins.size() < 2) throw TooFewBins("pooled calibration fit needs >= 2 confidence bins");

    PooledCalibrationFit fit;
    fit.n_bins = bins.size();
    double W = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, dev = 0;
    for (const auto& [c, nn] : bins) {
        double w = double(nn.first);
        double x = double(c);
        double y = double(nn.second) / double(nn.first);
        W += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        dev += w * std::fabs(y - x / 10.0);
    }
    double denom = W * sxx - sx * sx;
    if (denom == 0.0) throw TooFewBins("degenerate confidence spread");
    fit.slope = (W * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / W;
    fit.mean_accuracy_deviation = dev / W;
    return fit;
}

// ---------------------------------------------------------------------------
// quadrant analysis

struct CalibrationSummary {
    std::string agent_id;
    Arm arm = Arm::unassisted;
    double self_awareness = 0;
    double calibration_difference = 0;
    double confidence_bias = 0;
    std::size_t n_cases = 0;
};

enum class Quadrant { ideal, aware_uncalibrated, unaware_calibrated, poor };

inline const char* to_string(Quadrant q) {
    switch (q) {
        case Quadrant::ideal: return "ideal";
        case Quadrant::aware_uncalibrated: return "aware_uncalibrated";
        case Quadrant::unaware_calibrated: return "unaware_calibrated";
        case Quadrant::poor: return "poor";
    }
    return "?";
}

struct QuadrantPoint {
    std::string agent_id;
    Arm arm;
    double self_awareness;
    double calibration_difference;
    Quadrant quadrant;
};

struct QuadrantReport {
    std::vector<QuadrantPoint> points;
    double median_self_awareness = 0;
    double median_calibration_difference = 0;
    std::map<Arm, std::size_t> ideal_count;
    std::map<Arm, std::size_t> total_count;
    stats::TestResult fisher;  // arm x in-ideal
};

// Median split on both axes; points exactly on a median go to the
// upper/right side. Ideal = high on both axes.
inline QuadrantReport quadrant_analysis(const std::vector<CalibrationSummary>& summaries) {
    if (summaries.size() < 4) throw TooFewPoints("quadrant analysis needs >= 4 points");
    std::vector<double> xs, ys;
    for (const auto& s : summaries) {
        xs.push_back(s.self_awareness);
        ys.push_back(s.calibration_difference);
    }
    QuadrantReport rep;
    rep.median_self_awareness = detail::percentile(xs, 0.5);
    rep.median_calibration_difference = detail::percentile(ys, 0.5);

    std::uint64_t tab[2][2] = {{0, 0}, {0, 0}};  // [arm][in_ideal]
    for (const auto& s : summaries) {
        bool hi_x = s.self_awareness >= rep.median_self_awareness;
        bool hi_y = s.calibration_difference >= rep.median_calibration_difference;
        Quadrant q = hi_x ? (hi_y ? Quadrant::ideal : Quadrant::aware_uncalibrated)
                          : (hi_y ? Quadrant::unaware_calibrated : Quadrant::poor);
        rep.points.push_back({s.agent_id, s.arm, s.self_awareness, s.calibration_difference, q});
        rep.total_count[s.arm]++;
        if (q == Quadrant::ideal) rep.ideal_count[s.arm]++;
        tab[s.arm == Arm::assisted ? 1 : 0][q == Quadrant::ideal ? 1 : 0]++;
    }
    rep.fisher = stats::fisher_exact_2x2(tab[0][1], tab[0][0], tab[1][1], tab[1][0]);
    return rep;
}

// Convenience: per-agent summaries for every (agent, arm) with assessments.
inline std::vector<CalibrationSummary> calibration_summaries(const StudyLog& log) {
    std::vector<CalibrationSummary> out;
    for (const auto& r : log.readers) {
        for (Arm arm : {Arm::unassisted, Arm::assisted}) {
            auto reviews = scored_reviews_of(log, r.reader_id, arm);
            if (reviews.size() < 4) continue;
            CalibrationSummary s;
            s.agent_id = r.reader_id;
            s.arm = arm;
            s.n_cases = reviews.size();
            try {
                s.self_awareness = self_awareness(reviews);
            } catch (const ZeroVariance&) {
                s.self_awareness = 0.0;
            }
            s.calibration_difference = calibration_difference(reviews).value;
            try {
                s.confidence_bias = confidence_bias(reviews);
            } catch (const OneOutcomeOnly&) {
                s.confidence_bias = 0.0;
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace crossfuse
