#include <doctest.h>

#include <sstream>

#include <crossfuse/metacognition.hpp>
#include <crossfuse/metrics.hpp>
#include <crossfuse/sim.hpp>

#include "helpers.hpp"

using namespace crossfuse;

TEST_CASE("generate_cohort composition and determinism") {
    auto cohort = generate_cohort(1109, 0.5, 3);
    CHECK(cohort.size() == 1109);
    std::map<Pathology, std::size_t> by_path;
    std::size_t pos = 0;
    for (const auto& c : cohort) {
        by_path[c.pathology]++;
        if (c.ground_truth) ++pos;
    }
    // class counts within +-2% (absolute fraction) of configured proportions
    const double total_w = 753 + 155 + 100 + 70 + 31;
    CHECK(double(by_path[Pathology::presurgical_glioma]) / 1109.0 ==
          doctest::Approx(753 / total_w).epsilon(0.1));
    CHECK(std::fabs(double(by_path[Pathology::postop_glioma]) / 1109.0 - 155 / total_w) < 0.02);
    CHECK(std::fabs(double(pos) / 1109.0 - 0.5) < 0.05);

    auto all_pos = generate_cohort(100, 1.0, 3);
    for (const auto& c : all_pos) CHECK(c.ground_truth);

    auto again = generate_cohort(1109, 0.5, 3);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        CHECK(again[i].case_id == cohort[i].case_id);
        CHECK(again[i].ground_truth == cohort[i].ground_truth);
        CHECK(again[i].pathology == cohort[i].pathology);
    }
}

TEST_CASE("generate_study determinism down to serialized bytes") {
    auto cohort = generate_cohort(120, 0.5, 9);
    auto agents = paper_like_agents();
    auto a = generate_study(cohort, agents, ModelSpec{}, 9, {60, {}});
    auto b = generate_study(cohort, agents, ModelSpec{}, 9, {60, {}});
    auto da = cf_test::temp_dir("sim_det_a"), db = cf_test::temp_dir("sim_det_b");
    save_study(a, da);
    save_study(b, db);
    for (const char* f : {"cases.csv", "readers.csv", "model_outputs.csv", "assessments.csv"}) {
        std::ifstream fa(da / f, std::ios::binary), fb(db / f, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(fa)), {});
        std::string sb((std::istreambuf_iterator<char>(fb)), {});
        CHECK(sa == sb);
    }
}

TEST_CASE("simulated sensitivity converges to base_sensitivity") {
    // single agent over a large positive-only pool
    auto cohort = generate_cohort(20000, 0.5, 14);
    AgentSpec spec;
    spec.reader_id = "r1";
    spec.base_sensitivity = 0.8;
    spec.base_specificity = 0.6;
    spec.assisted_gain_slope = 0.0;
    auto log = generate_study(cohort, {spec}, ModelSpec{}, 14, {10000, {}});
    std::size_t tp = 0, p = 0, tn = 0, n = 0;
    for (const auto* a : log.assessments_of("r1", Arm::unassisted)) {
        bool truth = log.find_case(a->case_id)->ground_truth;
        if (truth) {
            ++p;
            if (a->prediction) ++tp;
        } else {
            ++n;
            if (!a->prediction) ++tn;
        }
    }
    CHECK(double(tp) / double(p) == doctest::Approx(0.8).epsilon(0.025));
    CHECK(double(tn) / double(n) == doctest::Approx(0.6).epsilon(0.034));
}

TEST_CASE("zero assisted gain leaves arms exchangeable in expectation") {
    auto cohort = generate_cohort(4000, 0.5, 15);
    AgentSpec spec;
    spec.reader_id = "r1";
    spec.assisted_gain_slope = 0.0;
    auto log = generate_study(cohort, {spec}, ModelSpec{}, 15, {2000, {}});
    auto acc_of = [&](Arm arm) {
        std::size_t correct = 0, total = 0;
        for (const auto* a : log.assessments_of("r1", arm)) {
            ++total;
            if (a->prediction == log.find_case(a->case_id)->ground_truth) ++correct;
        }
        return double(correct) / double(total);
    };
    CHECK(std::fabs(acc_of(Arm::unassisted) - acc_of(Arm::assisted)) < 0.04);
}

TEST_CASE("oracle agent approaches perfect balanced accuracy") {
    auto cohort = generate_cohort(2000, 0.5, 16);
    AgentSpec spec;
    spec.reader_id = "r1";
    spec.base_sensitivity = 0.999;
    spec.base_specificity = 0.999;
    auto log = generate_study(cohort, {spec}, ModelSpec{}, 16, {1000, {}});
    auto sc = scored_cases_of(log, "r1", Arm::unassisted);
    std::vector<bool> p, t;
    for (const auto& c : sc) {
        p.push_back(c.prediction);
        t.push_back(c.truth);
    }
    CHECK(*classification_metrics(confusion(p, t)).balanced_accuracy > 0.98);
}

TEST_CASE("paper-like preset lands in the target performance band") {
    auto cohort = generate_cohort(1109, 0.5, 20240101);
    auto log = generate_study(cohort, paper_like_agents(), ModelSpec{}, 20240101, {100, {}});
    auto un = reader_averaged_summary(log, Arm::unassisted, ReaderKind::human, 200, 1);
    auto as = reader_averaged_summary(log, Arm::assisted, ReaderKind::human, 200, 1);
    double ba_un = un.mean.at("balanced_accuracy");
    double ba_as = as.mean.at("balanced_accuracy");
    CHECK(ba_un >= 0.65);
    CHECK(ba_un <= 0.75);
    CHECK(ba_as - ba_un >= 0.03);
    CHECK(ba_as - ba_un <= 0.07);
}

TEST_CASE("brute-force oracles agree with the metric modules") {
    Rng rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 4 + rng.below(17);
        std::vector<OracleCase> cases;
        for (std::size_t i = 0; i < n; ++i) {
            OracleCase c;
            c.truth = rng.bernoulli(0.5);
            c.prediction = rng.bernoulli(0.5);
            c.rater_b = rng.bernoulli(0.5);
            c.confidence = 1.0 + double(rng.below(10));
            c.score = rng.uniform();
            cases.push_back(c);
        }
        auto o = brute_force_oracles(cases);

        std::vector<bool> preds, raters, truths;
        std::vector<double> scores, confs;
        for (const auto& c : cases) {
            preds.push_back(c.prediction);
            raters.push_back(c.rater_b);
            truths.push_back(c.truth);
            scores.push_back(c.score);
            confs.push_back(c.confidence);
        }
        auto cc = confusion(preds, truths);
        CHECK(cc.tp == o.tp);
        CHECK(cc.fn == o.fn);
        auto m = classification_metrics(cc);
        if (m.balanced_accuracy)
            CHECK(*m.balanced_accuracy == doctest::Approx(o.balanced_accuracy).epsilon(1e-12));
        CHECK(cohens_kappa(preds, raters) == doctest::Approx(o.kappa).epsilon(1e-12));

        bool both_classes = cc.tp + cc.fn > 0 && cc.tn + cc.fp > 0;
        if (both_classes) {
            CHECK(roc(scores, truths).area == doctest::Approx(o.auroc).epsilon(1e-12));
            CHECK(prc(scores, truths).area == doctest::Approx(o.auprc).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(brute_force_oracles(std::vector<OracleCase>(25)), TooLarge);
}

TEST_CASE("oracle matches metacognition quantities on a fixed fixture") {
    std::vector<OracleCase> cases;
    Rng rng(42);
    for (int i = 0; i < 8; ++i) {
        OracleCase c;
        c.truth = i % 2;
        c.prediction = rng.bernoulli(0.6);
        c.rater_b = c.prediction;
        c.confidence = 1.0 + double(rng.below(10));
        c.score = rng.uniform();
        cases.push_back(c);
    }
    auto o = brute_force_oracles(cases);
    std::vector<ScoredReview> reviews;
    for (const auto& c : cases) reviews.push_back({c.confidence, c.prediction == c.truth});
    CHECK(calibration_difference(reviews).value ==
          doctest::Approx(o.calibration_difference).epsilon(1e-12));
    bool has_both = false, has_correct = false, has_wrong = false;
    for (const auto& r : reviews) (r.correct ? has_correct : has_wrong) = true;
    has_both = has_correct && has_wrong;
    if (has_both)
        CHECK(confidence_bias(reviews) == doctest::Approx(o.confidence_bias).epsilon(1e-12));
    try {
        CHECK(self_awareness(reviews) == doctest::Approx(o.self_awareness).epsilon(1e-10));
    } catch (const ZeroVariance&) {
    }
}
