#pragma once

// Uncertainty-gated fusion of model probability and human assessment,
// plus the nested cross-validated hyperparameter search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <set>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "study_data.hpp"

namespace crossfuse {

enum class FusionMode { selective, always };

inline const char* to_string(FusionMode m) {
    return m == FusionMode::selective ? "selective" : "always";
}

struct FusionParams {
    FusionMode mode = FusionMode::always;
    double human_weight = 0.5;    // w in [0.1, 0.8]
    double band_halfwidth = 0.0;  // h in [0, 0.1]; trigger: |p_model - 0.5| <= h
    static constexpr double decision_threshold = 0.5;

    void validate() const {
        if (human_weight < 0.1 || human_weight > 0.8)
            throw RangeViolation("human_weight outside [0.1, 0.8]");
        if (band_halfwidth < 0.0 || band_halfwidth > 0.1)
            throw RangeViolation("band_halfwidth outside [0, 0.1]");
    }
    std::string key() const {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s,w=%.2f,h=%.2f", to_string(mode), human_weight,
                      band_halfwidth);
        return buf;
    }
    bool operator==(const FusionParams&) const = default;
};

struct FusedOutcome {
    std::string case_id;
    std::string reader_id;
    double p_fused = 0.5;
    bool decision = false;
    double confidence_10 = 0;
    bool human_consulted = false;
};

inline double human_probability(bool prediction, double confidence) {
    if (confidence < 1.0 || confidence > 10.0)
        throw RangeViolation("confidence outside [1,10]: " + std::to_string(confidence));
    double s = prediction ? 1.0 : -1.0;
    return 0.5 + s * (confidence / 10.0) * 0.5;
}

inline FusedOutcome fuse_case(double p_model, const Assessment& human, const FusionParams& params) {
    if (p_model < 0.0 || p_model > 1.0)
        throw RangeViolation("p_model outside [0,1]: " + std::to_string(p_model));
    params.validate();
    FusedOutcome out;
    out.case_id = human.case_id;
    out.reader_id = human.reader_id;
    if (params.mode == FusionMode::selective &&
        std::fabs(p_model - 0.5) > params.band_halfwidth) {
        out.p_fused = p_model;
        out.human_consulted = false;
    } else {
        double ph = human_probability(human.prediction, human.confidence);
        out.p_fused = (1.0 - params.human_weight) * p_model + params.human_weight * ph;
        out.human_consulted = true;
    }
    // tie at 0.5 resolves positive
    out.decision = out.p_fused >= FusionParams::decision_threshold;
    out.confidence_10 = 10.0 * std::fabs(2.0 * out.p_fused - 1.0);
    return out;
}

enum class HumanSource { assisted_arm, unassisted_arm };

// One FusedOutcome per (case, consulted human) pair, in case order then
// reader order.
inline std::vector<FusedOutcome> fuse_log(const StudyLog& log, const FusionParams& params,
                                          HumanSource source = HumanSource::unassisted_arm) {
    const Arm arm = source == HumanSource::assisted_arm ? Arm::assisted : Arm::unassisted;
    // (case, reader) -> assessment
    std::map<std::pair<std::string, std::string>, const Assessment*> by_key;
    for (const auto& a : log.assessments) {
        const ReaderProfile* r = log.find_reader(a.reader_id);
        if (r && r->kind == ReaderKind::human && a.arm == arm)
            by_key[{a.case_id, a.reader_id}] = &a;
    }
    if (by_key.empty()) throw MissingHumanAssessment("no human assessments in requested arm");
    std::vector<FusedOutcome> out;
    for (const auto& c : log.cases) {
        for (const auto& r : log.readers) {
            auto it = by_key.find({c.case_id, r.reader_id});
            if (it == by_key.end()) continue;
            const ModelCaseOutput* m = log.find_model_output(c.case_id);
            if (!m) throw MissingModelOutput("case '" + c.case_id + "' has no model output");
            out.push_back(fuse_case(m->p_model, *it->second, params));
        }
    }
    return out;
}

inline std::vector<FusionParams> default_grid() {
    std::vector<FusionParams> grid;
    for (int wi = 1; wi <= 8; ++wi) {
        double w = wi / 10.0;
        grid.push_back({FusionMode::always, w, 0.0});
        for (double h : {0.00, 0.05, 0.10}) grid.push_back({FusionMode::selective, w, h});
    }
    return grid;
}

// ---------------------------------------------------------------------------
// nested cross-validation

struct CvFoldResult {
    std::size_t fold = 0;
    FusionParams params;
    double outer_ba = 0;
    double model_alone_ba = 0;
};

struct CvSeedResult {
    std::uint64_t seed = 0;
    std::vector<CvFoldResult> folds;
    double mean_outer_ba = 0;
    double mean_model_alone_ba = 0;
};

struct NestedCvReport {
    std::vector<CvSeedResult> seeds;
    double mean_ba = 0;  // across seeds (of per-seed means)
    double sd_ba = 0;
    std::map<std::string, std::size_t> selection_frequency;  // params key -> count
    bool degenerate_grid = false;                            // grid had a single config
};

namespace detail {

struct FusionPair {
    std::string case_id;
    double p_model;
    bool human_prediction;
    double human_confidence;
    bool truth;
};

// evaluation phases reported to the leakage observer
enum class CvPhase { selection, outer_eval };

using AccessObserver = std::function<void(const std::string& case_id, CvPhase phase)>;

inline std::optional<double> balanced_accuracy_of(const std::vector<const FusionPair*>& pairs,
                                                  const FusionParams& params) {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (const FusionPair* p : pairs) {
        Assessment a;
        a.case_id = p->case_id;
        a.prediction = p->human_prediction;
        a.confidence = p->human_confidence;
        bool decision = fuse_case(p->p_model, a, params).decision;
        if (p->truth) (decision ? tp : fn)++;
        else (decision ? fp : tn)++;
    }
    if (tp + fn == 0 || tn + fp == 0) return std::nullopt;
    double sens = double(tp) / double(tp + fn);
    double spec = double(tn) / double(tn + fp);
    return (sens + spec) / 2.0;
}

inline std::optional<double> model_alone_ba(const std::vector<const FusionPair*>& pairs) {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (const FusionPair* p : pairs) {
        bool decision = p->p_model >= 0.5;
        if (p->truth) (decision ? tp : fn)++;
        else (decision ? fp : tn)++;
    }
    if (tp + fn == 0 || tn + fp == 0) return std::nullopt;
    return (double(tp) / double(tp + fn) + double(tn) / double(tn + fp)) / 2.0;
}

// Stratified fold ids per case: seeded shuffle within class, then
// round-robin.
inline std::map<std::string, std::size_t> stratified_folds(
    const std::vector<std::pair<std::string, bool>>& case_labels, std::size_t k,
    std::uint64_t seed) {
    std::vector<std::string> pos, neg;
    for (const auto& [id, truth] : case_labels) (truth ? pos : neg).push_back(id);
    if (pos.size() < k || neg.size() < k)
        throw InfeasibleStratification("need >= " + std::to_string(k) + " cases per class, have " +
                                       std::to_string(pos.size()) + "/" + std::to_string(neg.size()));
    std::map<std::string, std::size_t> fold_of;
    std::size_t tag = 0;
    for (auto* cls : {&pos, &neg}) {
        Rng rng(mix_seed(seed, 0xF01D5ULL, tag++));
        rng.shuffle(*cls);
        for (std::size_t i = 0; i < cls->size(); ++i) fold_of[(*cls)[i]] = i % k;
    }
    return fold_of;
}

}  // namespace detail

struct NestedCvSettings {
    std::size_t n_outer = 5;
    std::size_t n_inner = 3;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    HumanSource human_source = HumanSource::unassisted_arm;
    std::size_t n_threads = 1;
    detail::AccessObserver observer;  // optional leakage audit hook
};

inline NestedCvReport nested_cv_optimize(const StudyLog& log,
                                         const std::vector<FusionParams>& grid,
                                         const NestedCvSettings& settings = {}) {
    if (grid.empty()) throw EmptyGrid("nested CV with empty grid");
    for (const auto& g : grid) g.validate();

    // assemble (case, human) fusion pairs from the requested arm
    const Arm arm = settings.human_source == HumanSource::assisted_arm ? Arm::assisted
                                                                       : Arm::unassisted;
    std::vector<detail::FusionPair> pairs;
    std::vector<std::pair<std::string, bool>> case_labels;
    {
        std::map<std::pair<std::string, std::string>, const Assessment*> by_key;
        for (const auto& a : log.assessments) {
            const ReaderProfile* r = log.find_reader(a.reader_id);
            if (r && r->kind == ReaderKind::human && a.arm == arm)
                by_key[{a.case_id, a.reader_id}] = &a;
        }
        std::set<std::string> seen_cases;
        for (const auto& c : log.cases) {
            for (const auto& r : log.readers) {
                if (r.kind != ReaderKind::human) continue;
                auto it = by_key.find({c.case_id, r.reader_id});
                if (it == by_key.end()) continue;
                const Assessment* found = it->second;
                const ModelCaseOutput* m = log.find_model_output(c.case_id);
                if (!m) throw MissingModelOutput("case '" + c.case_id + "' has no model output");
                pairs.push_back({c.case_id, m->p_model, found->prediction, found->confidence,
                                 c.ground_truth});
                if (seen_cases.insert(c.case_id).second)
                    case_labels.push_back({c.case_id, c.ground_truth});
            }
        }
    }
    if (pairs.empty()) throw MissingHumanAssessment("no (case, human) pairs in requested arm");

    NestedCvReport report;
    report.degenerate_grid = grid.size() == 1;
    report.seeds.resize(settings.seeds.size());

    auto run_seed = [&](std::size_t si) {
        const std::uint64_t seed = settings.seeds[si];
        CvSeedResult sr;
        sr.seed = seed;
        auto outer_fold = detail::stratified_folds(case_labels, settings.n_outer, seed);
        for (std::size_t f = 0; f < settings.n_outer; ++f) {
            // split pairs by the fold of their case
            std::vector<const detail::FusionPair*> train, test;
            std::vector<std::pair<std::string, bool>> train_cases;
            {
                std::set<std::string> seen;
                for (const auto& p : pairs) {
                    if (outer_fold.at(p.case_id) == f) test.push_back(&p);
                    else {
                        train.push_back(&p);
                        if (seen.insert(p.case_id).second)
                            train_cases.push_back({p.case_id, p.truth});
                    }
                }
            }
            // inner selection on the outer-training portion only
            auto inner_fold = detail::stratified_folds(train_cases, settings.n_inner,
                                                       mix_seed(seed, 0x1EEE2ULL, f));
            std::size_t best = 0;
            double best_obj = -2.0;
            for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                double sum = 0;
                std::size_t nvalid = 0;
                for (std::size_t inf = 0; inf < settings.n_inner; ++inf) {
                    std::vector<const detail::FusionPair*> val;
                    for (const auto* p : train)
                        if (inner_fold.at(p->case_id) == inf) val.push_back(p);
                    if (settings.observer)
                        for (const auto* p : val)
                            settings.observer(p->case_id, detail::CvPhase::selection);
                    auto ba = detail::balanced_accuracy_of(val, grid[gi]);
                    if (ba) {
                        sum += *ba;
                        ++nvalid;
                    }
                }
                double obj = nvalid ? sum / double(nvalid) : -1.0;
                if (obj > best_obj) {
                    best_obj = obj;
                    best = gi;
                }
            }
            if (settings.observer)
                for (const auto* p : test) settings.observer(p->case_id, detail::CvPhase::outer_eval);
            CvFoldResult fr;
            fr.fold = f;
            fr.params = grid[best];
            fr.outer_ba = detail::balanced_accuracy_of(test, grid[best]).value_or(0.0);
            fr.model_alone_ba = detail::model_alone_ba(test).value_or(0.0);
            sr.folds.push_back(fr);
        }
        double s = 0, sm = 0;
        for (const auto& fr : sr.folds) {
            s += fr.outer_ba;
            sm += fr.model_alone_ba;
        }
        sr.mean_outer_ba = s / double(sr.folds.size());
        sr.mean_model_alone_ba = sm / double(sr.folds.size());
        report.seeds[si] = std::move(sr);
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(settings.n_threads, settings.seeds.size()));
    if (workers == 1 || settings.observer) {
        for (std::size_t si = 0; si < settings.seeds.size(); ++si) run_seed(si);
    } else {
        std::vector<std::thread> threads;
        std::atomic<std::size_t> next{0};
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back([&] {
                for (;;) {
                    std::size_t si = next.fetch_add(1);
                    if (si >= settings.seeds.size()) break;
                    run_seed(si);
                }
            });
        for (auto& t : threads) t.join();
    }

    double sum = 0;
    for (const auto& sr : report.seeds) {
        sum += sr.mean_outer_ba;
        for (const auto& fr : sr.folds) report.selection_frequency[fr.params.key()]++;
    }
    report.mean_ba = sum / double(report.seeds.size());
    double ss = 0;
    for (const auto& sr : report.seeds)
        ss += (sr.mean_outer_ba - report.mean_ba) * (sr.mean_outer_ba - report.mean_ba);
    report.sd_ba = report.seeds.size() > 1 ? std::sqrt(ss / double(report.seeds.size() - 1)) : 0.0;
    return report;
}

}  // namespace crossfuse
