#include <doctest.h>

#include <crossfuse/metacognition.hpp>
#include <crossfuse/rng.hpp>

using namespace crossfuse;

TEST_CASE("calibration difference") {
    // confident-right, doubtful-wrong -> +1
    std::vector<ScoredReview> clean = {{9, true}, {9, true}, {2, false}, {2, false}};
    CHECK(calibration_difference(clean).value == doctest::Approx(1.0));

    std::vector<ScoredReview> flat(6, {5, true});
    auto deg = calibration_difference(flat);
    CHECK(deg.value == doctest::Approx(0.0));
    CHECK(deg.degenerate_confidence);

    CHECK_THROWS_AS(calibration_difference({{5, true}, {6, false}}), TooFewCases);

    // mixed fixture: 0.8 accuracy above P75, 0.5 below P25. Sorted
    // confidences are 2 x8, 5 x10, 9 x10, so the interpolated P25 is 2
    // (position 6.75) and P75 is 9 (position 20.25): the subsets are the
    // low and high blocks exactly.
    std::vector<ScoredReview> fixture;
    for (int i = 0; i < 8; ++i) fixture.push_back({2, i < 4});       // 4/8 correct
    for (int i = 0; i < 10; ++i) fixture.push_back({5, i % 2 == 0});
    for (int i = 0; i < 10; ++i) fixture.push_back({9, i < 8});      // 8/10 correct
    auto cd = calibration_difference(fixture);
    CHECK(cd.value == doctest::Approx(0.3));
}

TEST_CASE("calibration difference stays within [-1, 1]") {
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<ScoredReview> rs;
        int n = 4 + int(rng.below(30));
        for (int i = 0; i < n; ++i)
            rs.push_back({1.0 + double(rng.below(10)), rng.bernoulli(0.6)});
        auto v = calibration_difference(rs).value;
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("confidence bias") {
    std::vector<ScoredReview> equal = {{7, true}, {7, false}, {7, true}};
    CHECK(confidence_bias(equal) == doctest::Approx(0.0));

    std::vector<ScoredReview> biased = {{8, true}, {8, true}, {8, true}, {5, false}, {5, false}};
    CHECK(confidence_bias(biased) == doctest::Approx(3.0));

    std::vector<ScoredReview> one_sided = {{8, true}, {9, true}};
    CHECK_THROWS_AS(confidence_bias(one_sided), OneOutcomeOnly);

    // bounded by the Likert span
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<ScoredReview> rs = {{1, false}, {10, true}};
        int n = int(rng.below(20));
        for (int i = 0; i < n; ++i)
            rs.push_back({1.0 + double(rng.below(10)), rng.bernoulli(0.5)});
        double b = confidence_bias(rs);
        CHECK(b >= -9.0);
        CHECK(b <= 9.0);
    }
}

TEST_CASE("self awareness") {
    // confidence 10 when right, 1 when wrong -> r = 1
    std::vector<ScoredReview> perfect = {{10, true}, {1, false}, {10, true}, {1, false}, {10, true}};
    CHECK(self_awareness(perfect) == doctest::Approx(1.0));

    // independent confidence -> |r| small at n=1000
    Rng rng(12);
    std::vector<ScoredReview> indep;
    for (int i = 0; i < 1000; ++i)
        indep.push_back({1.0 + double(rng.below(10)), rng.bernoulli(0.7)});
    CHECK(std::fabs(self_awareness(indep)) < 0.08);

    std::vector<ScoredReview> constant = {{5, true}, {5, false}, {5, true}, {5, true}};
    CHECK_THROWS_AS(self_awareness(constant), ZeroVariance);
}

TEST_CASE("self awareness invariant under positive affine confidence transforms") {
    Rng rng(13);
    std::vector<ScoredReview> base;
    for (int i = 0; i < 60; ++i) {
        bool correct = rng.bernoulli(0.6);
        base.push_back({std::clamp(5.0 + (correct ? 1.5 : -1.0) + rng.normal(0, 2), 1.0, 10.0),
                        correct});
    }
    double r0 = self_awareness(base);
    // affine transforms leave [1,10]; pearson itself does not care about range
    std::vector<ScoredReview> scaled = base;
    for (auto& s : scaled) s.confidence = 0.3 * s.confidence + 2.0;
    CHECK(self_awareness(scaled) == doctest::Approx(r0).epsilon(1e-10));
}

TEST_CASE("pooled calibration fit") {
    // bins exactly on accuracy = confidence/10
    std::vector<ScoredReview> ideal;
    for (int c = 1; c <= 10; ++c)
        for (int i = 0; i < 10; ++i) ideal.push_back({double(c), i < c});
    auto fit = pooled_calibration_fit(ideal);
    CHECK(fit.slope == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(fit.mean_accuracy_deviation == doctest::Approx(0.0).epsilon(1e-12));

    // flat response
    std::vector<ScoredReview> flat;
    for (int c : {2, 5, 8})
        for (int i = 0; i < 10; ++i) flat.push_back({double(c), i < 7});
    auto ffit = pooled_calibration_fit(flat);
    CHECK(ffit.slope == doctest::Approx(0.0).epsilon(1e-12));
    double expect_dev = (std::fabs(0.7 - 0.2) + std::fabs(0.7 - 0.5) + std::fabs(0.7 - 0.8)) / 3.0;
    CHECK(ffit.mean_accuracy_deviation == doctest::Approx(expect_dev));

    // two-point weighted fit
    std::vector<ScoredReview> two;
    for (int i = 0; i < 10; ++i) two.push_back({5, i < 5});
    for (int i = 0; i < 10; ++i) two.push_back({8, i < 9});
    auto tfit = pooled_calibration_fit(two);
    CHECK(tfit.slope == doctest::Approx(0.4 / 3.0).epsilon(1e-12));

    std::vector<ScoredReview> one_bin(10, {5, true});
    CHECK_THROWS_AS(pooled_calibration_fit(one_bin), TooFewBins);
}

TEST_CASE("quadrant analysis") {
    // 4 corner points -> one per quadrant
    std::vector<CalibrationSummary> corners = {
        {"a", Arm::unassisted, 0.8, 0.8, 0, 10},
        {"b", Arm::unassisted, 0.8, -0.5, 0, 10},
        {"c", Arm::unassisted, -0.5, 0.8, 0, 10},
        {"d", Arm::unassisted, -0.5, -0.5, 0, 10},
    };
    auto rep = quadrant_analysis(corners);
    std::map<Quadrant, int> count;
    for (const auto& p : rep.points) count[p.quadrant]++;
    CHECK(count[Quadrant::ideal] == 1);
    CHECK(count[Quadrant::aware_uncalibrated] == 1);
    CHECK(count[Quadrant::unaware_calibrated] == 1);
    CHECK(count[Quadrant::poor] == 1);

    // all identical -> all ideal by the tie rule, Fisher p = 1
    std::vector<CalibrationSummary> same(6, {"x", Arm::unassisted, 0.2, 0.2, 0, 10});
    auto srep = quadrant_analysis(same);
    for (const auto& p : srep.points) CHECK(p.quadrant == Quadrant::ideal);
    CHECK(srep.fisher.p_value == doctest::Approx(1.0));

    CHECK_THROWS_AS(quadrant_analysis({{"a", Arm::unassisted, 0, 0, 0, 1}}), TooFewPoints);
}

TEST_CASE("quadrant occupancy shift 2/12 -> 9/12 is significant") {
    // constructed 12-agent fixture across both arms; each axis has exactly
    // 12 points on either side of the pooled median so the split is clean
    std::vector<CalibrationSummary> pts;
    for (int i = 0; i < 12; ++i) {
        double x_un, y_un;
        if (i < 2) x_un = y_un = 0.5;                       // ideal
        else if (i == 2) { x_un = 0.5; y_un = -0.5; }       // aware, uncalibrated
        else x_un = y_un = -0.5 - 0.01 * i;                 // poor
        pts.push_back({"agent" + std::to_string(i), Arm::unassisted, x_un, y_un, 0, 100});
        double x_as, y_as;
        if (i < 9) x_as = y_as = 0.6 + 0.01 * i;            // ideal
        else if (i == 9) { x_as = -0.5; y_as = 0.6; }       // unaware, calibrated
        else x_as = y_as = -0.6 - 0.01 * i;                 // poor
        pts.push_back({"agent" + std::to_string(i), Arm::assisted, x_as, y_as, 0, 100});
    }
    auto rep = quadrant_analysis(pts);
    CHECK(rep.ideal_count[Arm::unassisted] == 2);
    CHECK(rep.ideal_count[Arm::assisted] == 9);
    CHECK(rep.fisher.p_value < 0.05);
}

TEST_CASE("quadrant counts invariant under monotone axis rescaling") {
    Rng rng(31);
    std::vector<CalibrationSummary> pts;
    for (int i = 0; i < 16; ++i)
        pts.push_back({"p" + std::to_string(i), i % 2 ? Arm::assisted : Arm::unassisted,
                       rng.uniform(-1, 1), rng.uniform(-1, 1), 0, 10});
    auto rep = quadrant_analysis(pts);
    auto scaled = pts;
    for (auto& p : scaled) {
        p.self_awareness = std::tanh(2.0 * p.self_awareness);  // strictly increasing
        p.calibration_difference = p.calibration_difference * 3.0 + 0.1;
    }
    auto rep2 = quadrant_analysis(scaled);
    REQUIRE(rep.points.size() == rep2.points.size());
    for (std::size_t i = 0; i < rep.points.size(); ++i)
        CHECK(rep.points[i].quadrant == rep2.points[i].quadrant);
}
