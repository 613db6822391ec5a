#pragma once

// Experience-performance regressions and the pay-schedule valuation of
// support-induced gains.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dist.hpp"
#include "errors.hpp"

namespace crossfuse {

struct RegressionFit {
    double beta0 = 0;
    double beta1 = 0;
    double r2 = 0;
    double p_slope = 1;
    double aic = 0;
    std::size_t n = 0;
};

inline RegressionFit fit_ols(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("fit_ols inputs differ in length");
    if (x.size() < 3) throw EmptyInput("fit_ols needs n >= 3");
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ZeroVarianceX("fit_ols: constant predictor");

    RegressionFit f;
    f.n = n;
    f.beta1 = sxy / sxx;
    f.beta0 = my - f.beta1 * mx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.beta0 + f.beta1 * x[i]);
        rss += e * e;
    }
    f.r2 = syy == 0.0 ? 0.0 : 1.0 - rss / syy;
    if (f.r2 < 0.0) f.r2 = 0.0;
    if (f.r2 > 1.0) f.r2 = 1.0;
    const double df = double(n - 2);
    if (rss > 0.0 && syy > 0.0) {
        double se = std::sqrt(rss / df / sxx);
        double t = f.beta1 / se;
        f.p_slope = dist::t_sf2(t, df);
    } else {
        f.p_slope = f.beta1 == 0.0 ? 1.0 : 0.0;
    }
    // Gaussian concentrated likelihood, constant dropped; k = 2
    f.aic = rss > 0.0 ? double(n) * std::log(rss / double(n)) + 4.0
                      : -std::numeric_limits<double>::infinity();
    return f;
}

// Years at which the unassisted fits would predict the supported metrics;
// the accuracy- and confidence-implied years are averaged.
struct EquivalentExperience {
    double years = 0;
    bool extrapolated = false;  // beyond max observed years
};

inline EquivalentExperience equivalent_experience(const RegressionFit& fit_acc,
                                                  const RegressionFit& fit_conf,
                                                  double supported_accuracy,
                                                  double supported_confidence,
                                                  std::optional<double> max_observed_years =
                                                      std::nullopt) {
    if (fit_acc.beta1 <= 0.0 || fit_conf.beta1 <= 0.0)
        throw NonPositiveSlope("equivalent_experience needs positive slopes");
    double ya = (supported_accuracy - fit_acc.beta0) / fit_acc.beta1;
    double yc = (supported_confidence - fit_conf.beta0) / fit_conf.beta1;
    EquivalentExperience out;
    out.years = (ya + yc) / 2.0;
    if (max_observed_years && out.years > *max_observed_years) out.extrapolated = true;
    return out;
}

struct PayBand {
    int years_from = 0;
    double annual_salary = 0;
};

struct PaySchedule {
    std::vector<PayBand> bands;  // years_from strictly increasing, starting at 0
    std::string currency = "GBP";

    void validate() const {
        if (bands.empty()) throw EmptySchedule("pay schedule has no bands");
        if (bands.front().years_from != 0) throw RangeViolation("first band must start at year 0");
        for (std::size_t i = 0; i < bands.size(); ++i) {
            if (bands[i].annual_salary <= 0) throw RangeViolation("salaries must be positive");
            if (i && bands[i].years_from <= bands[i - 1].years_from)
                throw RangeViolation("years_from must be strictly increasing");
        }
    }
};

// Salary accumulated over `years`: whole years at their band rate plus a
// pro-rata fraction of the final partial year.
inline double cumulative_value(double years, const PaySchedule& schedule) {
    schedule.validate();
    if (years < 0) throw RangeViolation("years must be nonnegative");
    auto rate_at = [&](double y) {
        double r = schedule.bands.front().annual_salary;
        for (const auto& b : schedule.bands)
            if (y >= double(b.years_from)) r = b.annual_salary;
        return r;
    };
    double total = 0;
    double whole = std::floor(years);
    for (double y = 0; y < whole; y += 1.0) total += rate_at(y);
    total += (years - whole) * rate_at(whole);
    return total;
}

struct AgentValue {
    std::string agent_id;
    double actual_years = 0;
    double equivalent_years = 0;
    double leveraged_years = 0;
    double cumulative_value = 0;  // at actual years
    double leveraged_value = 0;   // value(equivalent) - value(actual)
    bool extrapolated = false;
};

struct ModelValueBlock {
    double base_years = 0;
    double base_value = 0;
    double supported_years = 0;
    double supported_value = 0;
    double leveraged_years = 0;
    double leveraged_value = 0;
    bool extrapolated = false;
};

struct ValueReport {
    std::vector<AgentValue> agents;
    double median_leveraged_years = 0;
    double iqr_leveraged_years_lo = 0, iqr_leveraged_years_hi = 0;
    double median_leveraged_value = 0;
    double iqr_leveraged_value_lo = 0, iqr_leveraged_value_hi = 0;
    std::optional<ModelValueBlock> model;
    std::string currency;
};

namespace detail {

inline double quantile_sorted(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * double(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

// Per-agent measurement feeding the value report: unassisted fits are
// supplied by the caller (fit over agents of years vs accuracy and years
// vs mean confidence in the unassisted arm).
struct AgentSupportMetrics {
    std::string agent_id;
    double actual_years = 0;
    double supported_accuracy = 0;
    double supported_confidence = 0;
};

struct ModelSupportMetrics {
    double base_accuracy = 0;
    double base_confidence = 0;
    double supported_accuracy = 0;
    double supported_confidence = 0;
};

inline ValueReport support_leverage(const std::vector<AgentSupportMetrics>& agents,
                                    const RegressionFit& fit_acc, const RegressionFit& fit_conf,
                                    const PaySchedule& schedule,
                                    std::optional<ModelSupportMetrics> model = std::nullopt) {
    schedule.validate();
    ValueReport rep;
    rep.currency = schedule.currency;
    double max_years = 0;
    for (const auto& a : agents) max_years = std::max(max_years, a.actual_years);

    std::vector<double> lev_years, lev_values;
    for (const auto& a : agents) {
        auto eq = equivalent_experience(fit_acc, fit_conf, a.supported_accuracy,
                                        a.supported_confidence, max_years);
        AgentValue v;
        v.agent_id = a.agent_id;
        v.actual_years = a.actual_years;
        v.equivalent_years = eq.years;
        v.leveraged_years = eq.years - a.actual_years;
        v.cumulative_value = cumulative_value(a.actual_years, schedule);
        double eq_value = cumulative_value(std::max(0.0, eq.years), schedule);
        v.leveraged_value = eq_value - v.cumulative_value;
        v.extrapolated = eq.extrapolated;
        lev_years.push_back(v.leveraged_years);
        lev_values.push_back(v.leveraged_value);
        rep.agents.push_back(std::move(v));
    }
    if (!lev_years.empty()) {
        rep.median_leveraged_years = detail::quantile_sorted(lev_years, 0.5);
        rep.iqr_leveraged_years_lo = detail::quantile_sorted(lev_years, 0.25);
        rep.iqr_leveraged_years_hi = detail::quantile_sorted(lev_years, 0.75);
        rep.median_leveraged_value = detail::quantile_sorted(lev_values, 0.5);
        rep.iqr_leveraged_value_lo = detail::quantile_sorted(lev_values, 0.25);
        rep.iqr_leveraged_value_hi = detail::quantile_sorted(lev_values, 0.75);
    }
    if (model) {
        ModelValueBlock mb;
        auto base = equivalent_experience(fit_acc, fit_conf, model->base_accuracy,
                                          model->base_confidence, max_years);
        auto sup = equivalent_experience(fit_acc, fit_conf, model->supported_accuracy,
                                         model->supported_confidence, max_years);
        mb.base_years = base.years;
        mb.supported_years = sup.years;
        mb.base_value = cumulative_value(std::max(0.0, base.years), schedule);
        mb.supported_value = cumulative_value(std::max(0.0, sup.years), schedule);
        mb.leveraged_years = sup.years - base.years;
        mb.leveraged_value = mb.supported_value - mb.base_value;
        mb.extrapolated = base.extrapolated || sup.extrapolated;
        rep.model = mb;
    }
    return rep;
}

}  // namespace crossfuse
