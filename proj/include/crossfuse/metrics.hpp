#pragma once

// Classification metrics, percentile bootstrap CIs, Cohen's kappa,
// ROC/PRC curves and throughput statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "study_data.hpp"

namespace crossfuse {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(const std::vector<bool>& preds, const std::vector<bool>& truths) {
    if (preds.size() != truths.size())
        throw LengthMismatch("preds has " + std::to_string(preds.size()) + " entries, truths " +
                             std::to_string(truths.size()));
    if (preds.empty()) throw EmptyInput("confusion on empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (truths[i]) (preds[i] ? c.tp : c.fn)++;
        else (preds[i] ? c.fp : c.tn)++;
    }
    return c;
}

// Undefined metrics (zero denominator) are reported as empty optionals,
// never thrown.
struct MetricReport {
    std::optional<double> balanced_accuracy, sensitivity, specificity, precision, f1, accuracy;
    std::map<std::string, std::pair<double, double>> ci;  // metric name -> (lo, hi)

    std::optional<double> get(const std::string& name) const {
        if (name == "balanced_accuracy") return balanced_accuracy;
        if (name == "sensitivity") return sensitivity;
        if (name == "specificity") return specificity;
        if (name == "precision") return precision;
        if (name == "f1") return f1;
        if (name == "accuracy") return accuracy;
        return std::nullopt;
    }
    static const std::vector<std::string>& names() {
        static const std::vector<std::string> n = {"balanced_accuracy", "sensitivity",
                                                   "specificity", "precision", "f1", "accuracy"};
        return n;
    }
};

inline MetricReport classification_metrics(const ConfusionCounts& c) {
    MetricReport r;
    const double tp = double(c.tp), fp = double(c.fp), tn = double(c.tn), fn = double(c.fn);
    if (c.tp + c.fn > 0) r.sensitivity = tp / (tp + fn);
    if (c.tn + c.fp > 0) r.specificity = tn / (tn + fp);
    if (r.sensitivity && r.specificity)
        r.balanced_accuracy = (*r.sensitivity + *r.specificity) / 2.0;
    if (c.tp + c.fp > 0) r.precision = tp / (tp + fp);
    if (r.precision && r.sensitivity && *r.precision + *r.sensitivity > 0)
        r.f1 = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
    if (c.total() > 0) r.accuracy = (tp + tn) / double(c.total());
    return r;
}

struct ScoredCase {
    bool prediction;
    bool truth;
};

using MetricFn = std::function<std::optional<double>(const std::vector<ScoredCase>&)>;

inline MetricFn metric_fn(const std::string& name) {
    return [name](const std::vector<ScoredCase>& cs) -> std::optional<double> {
        std::vector<bool> p, t;
        p.reserve(cs.size());
        t.reserve(cs.size());
        for (const auto& c : cs) {
            p.push_back(c.prediction);
            t.push_back(c.truth);
        }
        return classification_metrics(confusion(p, t)).get(name);
    };
}

struct BootstrapCi {
    double lo = 0, hi = 0;
    std::size_t skipped = 0;  // resamples where the metric was undefined
};

// Percentile bootstrap over case resamples. Per-resample RNG streams are
// derived from (seed, b) so the result is independent of evaluation order.
inline BootstrapCi bootstrap_ci(const std::vector<ScoredCase>& cases, const MetricFn& metric,
                                std::size_t B = 2000, double level = 0.95,
                                std::uint64_t rng_seed = 0) {
    if (cases.size() < 2) throw EmptyInput("bootstrap needs n >= 2");
    if (B < 100) throw RangeViolation("bootstrap needs B >= 100");
    std::vector<double> stats;
    stats.reserve(B);
    std::size_t skipped = 0;
    std::vector<ScoredCase> resample(cases.size());
    for (std::size_t b = 0; b < B; ++b) {
        Rng rng(mix_seed(rng_seed, 0xB007ULL, b));
        for (std::size_t i = 0; i < cases.size(); ++i)
            resample[i] = cases[rng.below(cases.size())];
        auto v = metric(resample);
        if (v) stats.push_back(*v);
        else ++skipped;
    }
    if (stats.empty()) throw EmptyInput("all bootstrap resamples degenerate");
    std::sort(stats.begin(), stats.end());
    auto quantile = [&](double q) {
        double pos = q * double(stats.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, stats.size() - 1);
        double frac = pos - double(lo);
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    double alpha = (1.0 - level) / 2.0;
    return {quantile(alpha), quantile(1.0 - alpha), skipped};
}

// ---------------------------------------------------------------------------
// agreement

inline double cohens_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) throw LengthMismatch("kappa inputs differ in length");
    if (a.empty()) throw EmptyInput("kappa on empty input");
    const double n = double(a.size());
    double agree = 0, a_pos = 0, b_pos = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) ++agree;
        if (a[i]) ++a_pos;
        if (b[i]) ++b_pos;
    }
    double po = agree / n;
    double pe = (a_pos / n) * (b_pos / n) + (1.0 - a_pos / n) * (1.0 - b_pos / n);
    if (pe >= 1.0) return 1.0;  // both raters constant and identical
    return (po - pe) / (1.0 - pe);
}

struct KappaDiffResult {
    double delta_kappa = 0;
    double p_value = 1;
};

// Paired bootstrap over the shared cases: the same resampled indices are
// applied to both conditions.
inline KappaDiffResult kappa_difference_test(const std::vector<bool>& a_without,
                                             const std::vector<bool>& b_without,
                                             const std::vector<bool>& a_with,
                                             const std::vector<bool>& b_with,
                                             std::size_t B = 5000, std::uint64_t rng_seed = 0) {
    const std::size_t n = a_without.size();
    if (b_without.size() != n || a_with.size() != n || b_with.size() != n)
        throw LengthMismatch("kappa_difference_test inputs differ in length");
    if (n == 0) throw EmptyInput("kappa_difference_test on empty input");

    KappaDiffResult out;
    out.delta_kappa = cohens_kappa(a_with, b_with) - cohens_kappa(a_without, b_without);

    std::size_t le = 0, ge = 0, valid = 0;
    std::vector<bool> ra0(n), rb0(n), ra1(n), rb1(n);
    for (std::size_t b = 0; b < B; ++b) {
        Rng rng(mix_seed(rng_seed, 0xCA99A0ULL, b));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = rng.below(n);
            ra0[i] = a_without[j];
            rb0[i] = b_without[j];
            ra1[i] = a_with[j];
            rb1[i] = b_with[j];
        }
        double d = cohens_kappa(ra1, rb1) - cohens_kappa(ra0, rb0);
        ++valid;
        if (d <= 0) ++le;
        if (d >= 0) ++ge;
    }
    double p = 2.0 * std::min(double(le) / double(valid), double(ge) / double(valid));
    p = std::max(p, 2.0 / double(B));
    out.p_value = std::min(p, 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// curves

struct CurvePoints {
    std::vector<double> threshold;
    std::vector<double> x;
    std::vector<double> y;
    double area = 0;
};

// AUROC via the rank (Mann-Whitney) formulation, ties counted half; curve
// from the descending-score threshold sweep.
inline CurvePoints roc(const std::vector<double>& scores, const std::vector<bool>& truths) {
    if (scores.size() != truths.size()) throw LengthMismatch("roc inputs differ in length");
    std::size_t P = 0, N = 0;
    for (bool t : truths) (t ? P : N)++;
    if (P == 0 || N == 0) throw OneClassOnly("roc needs both classes present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });

    CurvePoints c;
    c.threshold.push_back(std::numeric_limits<double>::infinity());
    c.x.push_back(0.0);
    c.y.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    // pairwise count with half credit for ties, accumulated per tie group
    double wins = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t gp = 0, gn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (truths[order[j]] ? gp : gn)++;
            ++j;
        }
        // positives in this group beat all negatives ranked strictly below
        std::size_t neg_below = N - fp - gn;
        wins += double(gp) * (double(neg_below) + 0.5 * double(gn));
        tp += gp;
        fp += gn;
        c.threshold.push_back(scores[order[i]]);
        c.x.push_back(double(fp) / double(N));
        c.y.push_back(double(tp) / double(P));
        i = j;
    }
    c.area = wins / (double(P) * double(N));
    return c;
}

// AUPRC as average precision (step-wise precision * delta-recall).
inline CurvePoints prc(const std::vector<double>& scores, const std::vector<bool>& truths) {
    if (scores.size() != truths.size()) throw LengthMismatch("prc inputs differ in length");
    std::size_t P = 0;
    for (bool t : truths) if (t) ++P;
    if (P == 0) throw NoPositives("prc needs at least one positive");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });

    CurvePoints c;
    double ap = 0;
    std::size_t tp = 0, seen = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i, gp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (truths[order[j]]) ++gp;
            ++j;
        }
        std::size_t prev_tp = tp;
        tp += gp;
        seen += (j - i);
        double recall = double(tp) / double(P);
        double precision = double(tp) / double(seen);
        ap += precision * (double(tp - prev_tp) / double(P));
        c.threshold.push_back(scores[order[i]]);
        c.x.push_back(recall);
        c.y.push_back(precision);
        i = j;
    }
    c.area = ap;
    return c;
}

// ---------------------------------------------------------------------------
// reader-averaged summaries (two-way bootstrap in place of MRMC variance
// components)

struct ReaderAveraged {
    std::map<std::string, double> mean;                        // metric -> reader mean
    std::map<std::string, std::pair<double, double>> ci;       // metric -> (lo, hi)
    std::size_t n_readers = 0;
};

inline std::vector<ScoredCase> scored_cases_of(const StudyLog& log, const std::string& reader_id,
                                               Arm arm) {
    std::vector<ScoredCase> out;
    for (const auto* a : log.assessments_of(reader_id, arm)) {
        const CaseRecord* c = log.find_case(a->case_id);
        out.push_back({a->prediction, c->ground_truth});
    }
    return out;
}

inline ReaderAveraged reader_averaged_summary(const StudyLog& log, Arm arm,
                                              ReaderKind kind = ReaderKind::human,
                                              std::size_t B = 2000, std::uint64_t rng_seed = 0) {
    std::vector<std::vector<ScoredCase>> per_reader;
    for (const auto& r : log.readers) {
        if (r.kind != kind) continue;
        auto sc = scored_cases_of(log, r.reader_id, arm);
        if (!sc.empty()) per_reader.push_back(std::move(sc));
    }
    if (per_reader.size() < 2 && kind == ReaderKind::human)
        throw TooFewReaders("reader-averaged summary needs >= 2 readers");
    if (per_reader.empty()) throw TooFewReaders("no assessments for requested agent kind");

    ReaderAveraged out;
    out.n_readers = per_reader.size();
    const auto& names = MetricReport::names();

    auto reader_mean = [&](const std::vector<std::vector<ScoredCase>>& readers,
                           const std::string& name) -> std::optional<double> {
        auto fn = metric_fn(name);
        double sum = 0;
        std::size_t n = 0;
        for (const auto& rc : readers) {
            auto v = fn(rc);
            if (!v) return std::nullopt;
            sum += *v;
            ++n;
        }
        return sum / double(n);
    };

    for (const auto& name : names) {
        auto v = reader_mean(per_reader, name);
        if (v) out.mean[name] = *v;
    }

    // joint reader/case resamples
    std::map<std::string, std::vector<double>> stats;
    std::vector<std::vector<ScoredCase>> resampled(per_reader.size());
    for (std::size_t b = 0; b < B; ++b) {
        Rng rng(mix_seed(rng_seed, 0x2A7B007ULL, b));
        for (std::size_t k = 0; k < per_reader.size(); ++k) {
            const auto& src = per_reader[rng.below(per_reader.size())];
            auto& dst = resampled[k];
            dst.resize(src.size());
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[rng.below(src.size())];
        }
        for (const auto& name : names) {
            if (!out.mean.count(name)) continue;
            auto v = reader_mean(resampled, name);
            if (v) stats[name].push_back(*v);
        }
    }
    for (auto& [name, vals] : stats) {
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        auto quantile = [&](double q) {
            double pos = q * double(vals.size() - 1);
            std::size_t lo = static_cast<std::size_t>(pos);
            std::size_t hi = std::min(lo + 1, vals.size() - 1);
            double frac = pos - double(lo);
            return vals[lo] * (1.0 - frac) + vals[hi] * frac;
        };
        out.ci[name] = {quantile(0.025), quantile(0.975)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// throughput

struct ThroughputSummary {
    double mean_seconds = 0;
    double sd_seconds = 0;
    double cases_per_hour = 0;
    double cv = 0;  // sd/mean of per-case times
    std::size_t n = 0;
};

inline ThroughputSummary throughput_summary(const std::vector<double>& times_s) {
    if (times_s.empty()) throw EmptyInput("throughput on empty input");
    for (double t : times_s)
        if (!(t > 0)) throw RangeViolation("nonpositive response time");
    ThroughputSummary s;
    s.n = times_s.size();
    double sum = std::accumulate(times_s.begin(), times_s.end(), 0.0);
    s.mean_seconds = sum / double(s.n);
    double ss = 0;
    for (double t : times_s) ss += (t - s.mean_seconds) * (t - s.mean_seconds);
    s.sd_seconds = s.n > 1 ? std::sqrt(ss / double(s.n - 1)) : 0.0;
    s.cases_per_hour = 3600.0 / s.mean_seconds;
    s.cv = s.sd_seconds / s.mean_seconds;
    return s;
}

}  // namespace crossfuse
