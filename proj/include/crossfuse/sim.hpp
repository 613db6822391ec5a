#pragma once

// Synthetic cohort and crossover-study generator, plus brute-force
// oracles used only by tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fusion.hpp"
#include "rng.hpp"
#include "study_data.hpp"

namespace crossfuse {

struct AgentSpec {
    std::string reader_id;
    double years_experience = 10;
    double base_sensitivity = 0.8;
    double base_specificity = 0.6;
    double assisted_gain_slope = 0.003;  // accuracy gain per year when assisted
    double base_confidence = 6.0;
    double confidence_gain_correct = 1.5;
    double confidence_noise_sd = 1.5;
    double time_mu = 3.5;  // lognormal parameters for seconds per case
    double time_sigma = 0.7;
    double assisted_time_scale = 0.67;

    void validate() const {
        auto in01 = [](double p) { return p > 0.0 && p < 1.0; };
        if (!in01(base_sensitivity) || !in01(base_specificity))
            throw RangeViolation("base sensitivity/specificity must lie in (0,1)");
        if (assisted_time_scale <= 0.0 || assisted_time_scale > 1.0)
            throw RangeViolation("assisted_time_scale must lie in (0,1]");
        if (years_experience < 0) throw RangeViolation("years_experience must be nonnegative");
    }
};

struct ModelSpec {
    // p_model | truth drawn from Beta distributions
    double pos_alpha = 6, pos_beta = 2;
    double neg_alpha = 2, neg_beta = 6;
    double time_s = 4.10;

    void validate() const {
        if (pos_alpha <= 0 || pos_beta <= 0 || neg_alpha <= 0 || neg_beta <= 0)
            throw RangeViolation("Beta parameters must be positive");
    }
};

struct CohortProportions {
    // defaults mirror the pathology mix 753/155/100/70/31
    std::vector<std::pair<Pathology, double>> pathology = {
        {Pathology::presurgical_glioma, 753},
        {Pathology::postop_glioma, 155},
        {Pathology::meningioma, 100},
        {Pathology::metastasis, 70},
        {Pathology::paediatric_glioma, 31},
    };
    std::vector<std::pair<Site, double>> site = {
        {Site::UK, 0.6}, {Site::USA, 0.2}, {Site::NL, 0.1}, {Site::SSA, 0.1}};
};

inline std::vector<CaseRecord> generate_cohort(std::size_t n_cases, double prevalence = 0.5,
                                               std::uint64_t rng_seed = 0,
                                               const CohortProportions& props = {}) {
    if (n_cases < 2) throw RangeViolation("cohort needs n >= 2");
    Rng rng(mix_seed(rng_seed, 0xC0047ULL));
    double path_total = 0, site_total = 0;
    for (const auto& [p, w] : props.pathology) path_total += w;
    for (const auto& [s, w] : props.site) site_total += w;

    std::vector<CaseRecord> out;
    out.reserve(n_cases);
    for (std::size_t i = 0; i < n_cases; ++i) {
        CaseRecord c;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "case_%05zu", i);
        c.case_id = buf;
        c.ground_truth = rng.bernoulli(prevalence);
        double u = rng.uniform() * path_total;
        for (const auto& [p, w] : props.pathology) {
            if (u < w) {
                c.pathology = p;
                break;
            }
            u -= w;
        }
        u = rng.uniform() * site_total;
        c.site = props.site.back().first;
        for (const auto& [s, w] : props.site) {
            if (u < w) {
                c.site = s;
                break;
            }
            u -= w;
        }
        c.age_years = std::clamp(rng.normal(52.0, 16.0), 18.0, 90.0);
        c.sex = rng.bernoulli(0.5) ? Sex::M : Sex::F;
        if (c.ground_truth) c.lesion_volume_cm3 = rng.lognormal(1.5, 1.0);
        out.push_back(std::move(c));
    }
    return out;
}

// Crossover study: every agent reviews its assigned cases in both arms.
// Unassisted responses follow (sens, spec); assisted responses get an
// accuracy boost of assisted_gain_slope * years, clipped into (0,1).
// Model outputs are drawn per case from the ModelSpec Betas; the single
// model reader is scored in both arms (assisted = fused with one human).
struct StudyGenSettings {
    std::size_t per_reader = 100;
    FusionParams model_assist_params{FusionMode::always, 0.5, 0.0};
};

inline StudyLog generate_study(const std::vector<CaseRecord>& cohort,
                               const std::vector<AgentSpec>& agents, const ModelSpec& model,
                               std::uint64_t rng_seed, const StudyGenSettings& settings = {}) {
    for (const auto& a : agents) a.validate();
    model.validate();
    if (agents.empty()) throw RangeViolation("need at least one agent");

    StudyLog log;
    log.seed = rng_seed;
    log.cases = cohort;
    for (const auto& a : agents) {
        ReaderProfile p;
        p.reader_id = a.reader_id;
        p.kind = ReaderKind::human;
        p.years_experience = a.years_experience;
        log.readers.push_back(std::move(p));
    }
    log.readers.push_back({"model", ReaderKind::model, std::nullopt});

    auto assignment = assign_cases(cohort, agents.size(), settings.per_reader,
                                   mix_seed(rng_seed, 0xA5516ULL));

    std::map<std::string, const CaseRecord*> case_of;
    for (const auto& c : log.cases) case_of[c.case_id] = &c;

    // model outputs for every case (per-case substream)
    std::map<std::string, double> p_model_of;
    for (std::size_t i = 0; i < log.cases.size(); ++i) {
        const auto& c = log.cases[i];
        Rng rng(mix_seed(rng_seed, 0x30DE1ULL, i));
        ModelCaseOutput m;
        m.case_id = c.case_id;
        m.p_model = c.ground_truth ? rng.beta(model.pos_alpha, model.pos_beta)
                                   : rng.beta(model.neg_alpha, model.neg_beta);
        double dice = c.ground_truth ? std::clamp(m.p_model + rng.normal(0.0, 0.05), 0.0, 1.0)
                                     : std::clamp(rng.normal(0.02, 0.02), 0.0, 1.0);
        m.dice_vs_truth = dice;
        p_model_of[c.case_id] = m.p_model;
        log.model_outputs.push_back(std::move(m));
    }

    auto clamp01 = [](double p) { return std::clamp(p, 0.02, 0.98); };

    // human assessments: per-agent substream
    for (std::size_t ai = 0; ai < agents.size(); ++ai) {
        const AgentSpec& spec = agents[ai];
        Rng rng(mix_seed(rng_seed, 0x46E27ULL, ai));
        for (const std::string& cid : assignment[ai]) {
            const CaseRecord* c = case_of.at(cid);
            for (Arm arm : {Arm::unassisted, Arm::assisted}) {
                double p_correct = c->ground_truth ? spec.base_sensitivity : spec.base_specificity;
                if (arm == Arm::assisted)
                    p_correct = clamp01(p_correct + spec.assisted_gain_slope * spec.years_experience);
                bool correct = rng.bernoulli(p_correct);
                Assessment a;
                a.reader_id = spec.reader_id;
                a.case_id = cid;
                a.arm = arm;
                a.prediction = correct == c->ground_truth;
                double conf = spec.base_confidence +
                              (correct ? spec.confidence_gain_correct : 0.0) +
                              rng.normal(0.0, spec.confidence_noise_sd);
                a.confidence = std::clamp(std::round(conf), 1.0, 10.0);
                double t = rng.lognormal(spec.time_mu, spec.time_sigma);
                if (arm == Arm::assisted) t *= spec.assisted_time_scale;
                a.response_time_s = std::max(t, 0.5);
                a.image_quality = std::clamp(std::round(rng.normal(7.0, 1.5)), 1.0, 10.0);
                log.assessments.push_back(std::move(a));
            }
        }
    }

    // model assessments over the union of human-reviewed cases, unassisted
    // from p_model, assisted by fusing the first reviewing human's
    // unassisted response
    {
        std::map<std::string, Assessment> first_human;  // case -> assessment (copied:
        // pushing model rows below reallocates log.assessments)
        for (const auto& a : log.assessments)
            if (a.arm == Arm::unassisted && !first_human.count(a.case_id))
                first_human[a.case_id] = a;
        for (const auto& [cid, human] : first_human) {
            double p = p_model_of.at(cid);
            Assessment ua;
            ua.reader_id = "model";
            ua.case_id = cid;
            ua.arm = Arm::unassisted;
            ua.prediction = p >= 0.5;
            ua.confidence = std::clamp(10.0 * std::fabs(2.0 * p - 1.0), 1.0, 10.0);
            ua.response_time_s = model.time_s;
            log.assessments.push_back(std::move(ua));

            FusedOutcome fo = fuse_case(p, human, settings.model_assist_params);
            Assessment aa;
            aa.reader_id = "model";
            aa.case_id = cid;
            aa.arm = Arm::assisted;
            aa.prediction = fo.decision;
            aa.confidence = std::clamp(fo.confidence_10, 1.0, 10.0);
            aa.response_time_s = model.time_s;
            log.assessments.push_back(std::move(aa));
        }
    }

    log.reindex();
    validate_study(log);
    return log;
}

// Presets used by tests and the CLI.
inline std::vector<AgentSpec> paper_like_agents() {
    // 11 readers, 5-20 years, tuned so reader-averaged unassisted BA lands
    // around 0.7 with a few-point assisted gain; unassisted performance
    // rises with experience so the experience-accuracy fit is meaningful
    std::vector<AgentSpec> agents;
    const double years[] = {5, 6, 7, 8, 9, 11, 12, 14, 16, 18, 20};
    for (int i = 0; i < 11; ++i) {
        AgentSpec a;
        a.reader_id = "reader_" + std::to_string(i + 1);
        a.years_experience = years[i];
        a.base_sensitivity = 0.645 + 0.012 * years[i];
        a.base_specificity = 0.485 + 0.012 * years[i];
        a.assisted_gain_slope = 0.004;
        a.base_confidence = 5.5 + 0.1 * years[i];
        a.confidence_gain_correct = 1.2;
        a.confidence_noise_sd = 1.6;
        a.time_mu = 3.45;
        a.time_sigma = 0.75;
        a.assisted_time_scale = 0.67;
        agents.push_back(std::move(a));
    }
    return agents;
}

inline std::vector<AgentSpec> skilled_agents() {
    auto agents = paper_like_agents();
    for (auto& a : agents) {
        a.base_sensitivity = 0.92;
        a.base_specificity = 0.90;
        a.confidence_gain_correct = 2.5;
        a.confidence_noise_sd = 0.8;
    }
    return agents;
}

// Humans whose predictions are confidence-weighted coin flips.
inline std::vector<AgentSpec> noise_agents() {
    auto agents = paper_like_agents();
    for (auto& a : agents) {
        a.base_sensitivity = 0.5;
        a.base_specificity = 0.5;
        a.assisted_gain_slope = 0.0;
        a.confidence_gain_correct = 0.0;
        a.confidence_noise_sd = 2.5;
    }
    return agents;
}

// ---------------------------------------------------------------------------
// brute-force oracles (test-only; independent code paths)

struct OracleBundle {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double balanced_accuracy = 0, sensitivity = 0, specificity = 0, precision = 0, f1 = 0,
           accuracy = 0;
    bool precision_defined = true, f1_defined = true;
    double kappa = 0;
    double auroc = 0;       // pairwise counting
    double auprc = 0;       // enumeration over descending thresholds
    double calibration_difference = 0;
    double confidence_bias = 0;
    double self_awareness = 0;
};

struct OracleCase {
    bool prediction;
    bool rater_b;  // second rater for kappa
    bool truth;
    double confidence;
    double score;  // continuous score for curves
};

inline OracleBundle brute_force_oracles(const std::vector<OracleCase>& cases,
                                        std::size_t max_n = 20) {
    if (cases.size() > max_n) throw TooLarge("oracle limited to " + std::to_string(max_n) + " cases");
    if (cases.empty()) throw EmptyInput("oracle on empty input");
    OracleBundle o;
    const double n = double(cases.size());
    for (const auto& c : cases) {
        if (c.truth && c.prediction) o.tp++;
        if (c.truth && !c.prediction) o.fn++;
        if (!c.truth && c.prediction) o.fp++;
        if (!c.truth && !c.prediction) o.tn++;
    }
    o.sensitivity = o.tp + o.fn ? double(o.tp) / double(o.tp + o.fn) : 0.0;
    o.specificity = o.tn + o.fp ? double(o.tn) / double(o.tn + o.fp) : 0.0;
    o.balanced_accuracy = (o.sensitivity + o.specificity) / 2.0;
    o.precision_defined = o.tp + o.fp > 0;
    o.precision = o.precision_defined ? double(o.tp) / double(o.tp + o.fp) : 0.0;
    o.f1_defined = o.precision_defined && (o.precision + o.sensitivity > 0);
    o.f1 = o.f1_defined ? 2.0 * o.precision * o.sensitivity / (o.precision + o.sensitivity) : 0.0;
    o.accuracy = double(o.tp + o.tn) / n;

    // kappa between prediction and rater_b, straight from the 2x2 table
    {
        double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
        for (const auto& c : cases) {
            if (c.prediction && c.rater_b) n11++;
            else if (c.prediction && !c.rater_b) n10++;
            else if (!c.prediction && c.rater_b) n01++;
            else n00++;
        }
        double po = (n11 + n00) / n;
        double pe = ((n11 + n10) / n) * ((n11 + n01) / n) + ((n01 + n00) / n) * ((n10 + n00) / n);
        o.kappa = pe >= 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
    }

    // AUROC by explicit pairwise comparison over all (pos, neg) pairs
    {
        double wins = 0, pairs = 0;
        for (const auto& p : cases) {
            if (!p.truth) continue;
            for (const auto& q : cases) {
                if (q.truth) continue;
                pairs += 1;
                if (p.score > q.score) wins += 1;
                else if (p.score == q.score) wins += 0.5;
            }
        }
        o.auroc = pairs > 0 ? wins / pairs : 0.0;
    }

    // AUPRC by walking distinct thresholds high to low
    {
        std::vector<double> thresholds;
        for (const auto& c : cases) thresholds.push_back(c.score);
        std::sort(thresholds.rbegin(), thresholds.rend());
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
        double P = 0;
        for (const auto& c : cases) P += c.truth ? 1 : 0;
        double ap = 0, prev_recall = 0;
        for (double th : thresholds) {
            double tp = 0, called = 0;
            for (const auto& c : cases)
                if (c.score >= th) {
                    called += 1;
                    if (c.truth) tp += 1;
                }
            double recall = P > 0 ? tp / P : 0.0;
            double precision = called > 0 ? tp / called : 0.0;
            ap += precision * (recall - prev_recall);
            prev_recall = recall;
        }
        o.auprc = ap;
    }

    // calibration difference: accuracy above P75 minus below P25 of
    // confidence, percentiles by the linear-interpolation rule
    {
        std::vector<double> conf;
        for (const auto& c : cases) conf.push_back(c.confidence);
        std::sort(conf.begin(), conf.end());
        auto pct = [&](double q) {
            double pos = q * (n - 1.0);
            std::size_t lo = static_cast<std::size_t>(pos);
            std::size_t hi = std::min(lo + 1, conf.size() - 1);
            return conf[lo] * (1.0 - (pos - double(lo))) + conf[hi] * (pos - double(lo));
        };
        double p25 = pct(0.25), p75 = pct(0.75);
        double hi_n = 0, hi_c = 0, lo_n = 0, lo_c = 0;
        for (const auto& c : cases) {
            bool correct = c.prediction == c.truth;
            if (c.confidence >= p75) {
                hi_n += 1;
                if (correct) hi_c += 1;
            }
            if (c.confidence <= p25) {
                lo_n += 1;
                if (correct) lo_c += 1;
            }
        }
        o.calibration_difference =
            (hi_n > 0 && lo_n > 0) ? hi_c / hi_n - lo_c / lo_n : 0.0;
    }

    // confidence bias and self-awareness from raw sums
    {
        double sc = 0, si = 0, nc = 0, ni = 0;
        for (const auto& c : cases) {
            if (c.prediction == c.truth) {
                sc += c.confidence;
                nc += 1;
            } else {
                si += c.confidence;
                ni += 1;
            }
        }
        o.confidence_bias = (nc > 0 && ni > 0) ? sc / nc - si / ni : 0.0;

        double mx = 0, my = 0;
        for (const auto& c : cases) {
            mx += c.confidence;
            my += (c.prediction == c.truth) ? 1.0 : 0.0;
        }
        mx /= n;
        my /= n;
        double sxy = 0, sxx = 0, syy = 0;
        for (const auto& c : cases) {
            double x = c.confidence - mx;
            double y = ((c.prediction == c.truth) ? 1.0 : 0.0) - my;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        o.self_awareness = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    }
    return o;
}

}  // namespace crossfuse
