#include <doctest.h>

#include <crossfuse/economics.hpp>
#include <crossfuse/rng.hpp>

using namespace crossfuse;

TEST_CASE("fit_ols recovers exact lines and handles degenerate input") {
    std::vector<double> x = {2, 5, 9, 14, 20};
    std::vector<double> y;
    for (double v : x) y.push_back(0.6 + 0.005 * v);
    auto f = fit_ols(x, y);
    CHECK(f.beta0 == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(f.beta1 == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(f.p_slope < 1e-6);

    std::vector<double> flat = {0.7, 0.7, 0.7, 0.7, 0.7};
    auto fc = fit_ols(x, flat);
    CHECK(fc.beta1 == doctest::Approx(0.0));
    CHECK(fc.r2 == doctest::Approx(0.0));

    std::vector<double> same_x = {3, 3, 3};
    CHECK_THROWS_AS(fit_ols(same_x, {1, 2, 3}), ZeroVarianceX);
    CHECK_THROWS_AS(fit_ols({1, 2}, {1, 2}), EmptyInput);
}

TEST_CASE("fit_ols against hand-computed normal equations") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y = {2.1, 2.9, 4.2, 4.8, 6.1};
    // normal equations by hand: sx=15 sy=20.1 sxx=55 sxy=70.2, n=5
    // b1 = (5*70.2 - 15*20.1) / (5*55 - 225) = 49.5/50 = 0.99
    // b0 = (20.1 - 0.99*15)/5 = 1.05
    auto f = fit_ols(x, y);
    CHECK(f.beta1 == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(f.beta0 == doctest::Approx(1.05).epsilon(1e-12));

    // residuals sum to zero
    double rsum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rsum += y[i] - (f.beta0 + f.beta1 * x[i]);
    CHECK(rsum == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("aic drops when noise is removed at fixed n") {
    std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> noisy, clean;
    Rng rng(4);
    for (double v : x) {
        clean.push_back(1.0 + 0.5 * v);
        noisy.push_back(1.0 + 0.5 * v + rng.normal(0, 0.3));
    }
    CHECK(fit_ols(x, clean).aic < fit_ols(x, noisy).aic);
}

TEST_CASE("equivalent experience inversion") {
    RegressionFit acc{0.6, 0.005, 1.0, 0.01, 0, 11};
    RegressionFit conf{5.0, 0.2, 1.0, 0.01, 0, 11};
    auto eq = equivalent_experience(acc, conf, 0.7, 9.0);
    CHECK(eq.years == doctest::Approx(20.0));

    // fixed point: supported metrics equal fitted values at actual years
    double years = 12;
    auto fix = equivalent_experience(acc, conf, 0.6 + 0.005 * years, 5.0 + 0.2 * years);
    CHECK(fix.years == doctest::Approx(years).epsilon(1e-12));

    RegressionFit bad{0.6, -0.001, 0.2, 0.5, 0, 11};
    CHECK_THROWS_AS(equivalent_experience(bad, conf, 0.7, 9.0), NonPositiveSlope);

    // affine in each supported metric; doubling both slopes halves the
    // leverage for a fixed gain
    RegressionFit acc2 = acc;
    acc2.beta1 *= 2;
    RegressionFit conf2 = conf;
    conf2.beta1 *= 2;
    double base_years = 10;
    double gain_acc = 0.02, gain_conf = 0.8;
    auto lev1 = equivalent_experience(acc, conf, 0.6 + 0.005 * base_years + gain_acc,
                                      5.0 + 0.2 * base_years + gain_conf);
    auto lev2 = equivalent_experience(acc2, conf2,
                                      0.6 + 0.01 * base_years + gain_acc,
                                      5.0 + 0.4 * base_years + gain_conf);
    CHECK(lev1.years - base_years == doctest::Approx(2.0 * (lev2.years - base_years)).epsilon(1e-9));
}

TEST_CASE("cumulative value over banded schedules") {
    PaySchedule flat{{{0, 100000}}, "GBP"};
    CHECK(cumulative_value(10, flat) == doctest::Approx(1000000.0));
    CHECK(cumulative_value(0, flat) == doctest::Approx(0.0));

    PaySchedule banded{{{0, 60000}, {5, 80000}}, "GBP"};
    CHECK(cumulative_value(7.5, banded) == doctest::Approx(500000.0));
    CHECK(cumulative_value(5, banded) == doctest::Approx(300000.0));
    CHECK(cumulative_value(5.5, banded) == doctest::Approx(340000.0));

    // nondecreasing, piecewise-linear
    double prev = 0;
    for (double y = 0; y <= 12; y += 0.25) {
        double v = cumulative_value(y, banded);
        CHECK(v >= prev);
        prev = v;
    }

    PaySchedule empty;
    CHECK_THROWS_AS(cumulative_value(1, empty), EmptySchedule);
    PaySchedule bad{{{1, 50000}}, "GBP"};
    CHECK_THROWS_AS(cumulative_value(1, bad), RangeViolation);
}

TEST_CASE("support_leverage") {
    RegressionFit acc{0.6, 0.005, 1.0, 0.01, 0, 11};
    RegressionFit conf{5.0, 0.2, 1.0, 0.01, 0, 11};
    PaySchedule sched{{{0, 60000}, {5, 80000}, {10, 100000}}, "GBP"};

    // assisted metrics identical to the unassisted fit values -> leverage 0
    std::vector<AgentSupportMetrics> no_gain;
    for (double y : {4.0, 8.0, 15.0})
        no_gain.push_back({"a" + std::to_string(int(y)), y, 0.6 + 0.005 * y, 5.0 + 0.2 * y});
    auto rep0 = support_leverage(no_gain, acc, conf, sched);
    for (const auto& a : rep0.agents) {
        CHECK(a.leveraged_years == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(a.leveraged_value == doctest::Approx(0.0).epsilon(1e-6));
    }
    CHECK(rep0.median_leveraged_years == doctest::Approx(0.0).epsilon(1e-9));

    // +0.03 accuracy and +1.2 confidence at slope 0.005 / 0.2 -> 6 years
    std::vector<AgentSupportMetrics> gain;
    for (double y : {4.0, 8.0, 15.0})
        gain.push_back({"g" + std::to_string(int(y)), y, 0.6 + 0.005 * (y + 6), 5.0 + 0.2 * (y + 6)});
    auto rep6 = support_leverage(gain, acc, conf, sched);
    CHECK(rep6.median_leveraged_years == doctest::Approx(6.0).epsilon(1e-9));

    // model block: place the model's own metrics on the human fits
    ModelSupportMetrics model{0.6 + 0.005 * 45, 5.0 + 0.2 * 45, 0.6 + 0.005 * 49, 5.0 + 0.2 * 49};
    auto repm = support_leverage(gain, acc, conf, sched, model);
    REQUIRE(repm.model.has_value());
    CHECK(repm.model->base_years == doctest::Approx(45.0).epsilon(1e-9));
    CHECK(repm.model->leveraged_years == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(repm.model->extrapolated);
    CHECK(repm.model->leveraged_value ==
          doctest::Approx(cumulative_value(49, sched) - cumulative_value(45, sched)));
}
