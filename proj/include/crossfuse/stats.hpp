#pragma once

// Hypothesis tests: McNemar, Fisher exact, t-tests, Mann-Whitney U,
// Levene, one-way ANOVA, chi-square, Pearson/Spearman, Bonferroni.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dist.hpp"
#include "errors.hpp"

namespace crossfuse::stats {

enum class Method {
    chi_square,
    mcnemar_exact,
    mcnemar_cc,
    t_paired,
    t_independent,
    mann_whitney,
    fisher_exact,
    levene,
    anova_oneway,
    pearson,
    spearman
};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::chi_square: return "chi_square";
        case Method::mcnemar_exact: return "mcnemar_exact";
        case Method::mcnemar_cc: return "mcnemar_cc";
        case Method::t_paired: return "t_paired";
        case Method::t_independent: return "t_independent";
        case Method::mann_whitney: return "mann_whitney";
        case Method::fisher_exact: return "fisher_exact";
        case Method::levene: return "levene";
        case Method::anova_oneway: return "anova_oneway";
        case Method::pearson: return "pearson";
        case Method::spearman: return "spearman";
    }
    return "?";
}

struct TestResult {
    double statistic = 0;
    double p_value = 1;
    Method method = Method::chi_square;
    double df = 0;
    std::size_t n = 0;
    bool degenerate = false;  // zero-variance shortcut taken
};

// Exact two-sided binomial p when b+c < 25, continuity-corrected
// chi-square otherwise.
inline TestResult mcnemar(std::uint64_t b, std::uint64_t c) {
    const std::uint64_t n = b + c;
    if (n == 0) throw NoDiscordant("mcnemar with b+c=0");
    TestResult r;
    r.n = n;
    if (n < 25) {
        r.method = Method::mcnemar_exact;
        std::uint64_t k = std::min(b, c);
        // 2 * P(X <= k | Binomial(n, 1/2))
        double tail = 0;
        for (std::uint64_t i = 0; i <= k; ++i)
            tail += std::exp(dist::lchoose(double(n), double(i)) - double(n) * std::log(2.0));
        r.statistic = double(k);
        r.p_value = dist::clamp_p(2.0 * tail);
    } else {
        r.method = Method::mcnemar_cc;
        double diff = std::fabs(double(b) - double(c)) - 1.0;
        if (diff < 0) diff = 0;
        r.statistic = diff * diff / double(n);
        r.df = 1;
        r.p_value = dist::chi2_sf(r.statistic, 1);
    }
    return r;
}

// Two-sided p: sum of hypergeometric probabilities of all tables at the
// observed margins with probability <= observed (with a small relative
// slack for float comparisons).
inline TestResult fisher_exact_2x2(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                   std::uint64_t d) {
    const std::uint64_t n = a + b + c + d;
    if (n == 0) throw EmptyInput("fisher on empty table");
    const double r1 = double(a + b), r2 = double(c + d);
    const double c1 = double(a + c);
    TestResult res;
    res.method = Method::fisher_exact;
    res.n = n;

    auto log_prob = [&](double x) {
        // table [[x, r1-x], [c1-x, r2-(c1-x)]]
        return dist::lchoose(r1, x) + dist::lchoose(r2, c1 - x) - dist::lchoose(double(n), c1);
    };
    const double lp_obs = log_prob(double(a));
    const double lo = std::max(0.0, c1 - r2);
    const double hi = std::min(r1, c1);
    double p = 0;
    for (double x = lo; x <= hi + 0.5; x += 1.0) {
        double lp = log_prob(x);
        if (lp <= lp_obs + 1e-7) p += std::exp(lp);
    }
    res.statistic = std::exp(lp_obs);
    res.p_value = dist::clamp_p(p);
    return res;
}

namespace detail {

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}
inline double sample_var(const std::vector<double>& v, double m) {
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / double(v.size() - 1);
}

}  // namespace detail

inline TestResult t_test(const std::vector<double>& x, const std::vector<double>& y, bool paired) {
    TestResult r;
    if (paired) {
        if (x.size() != y.size()) throw LengthMismatch("paired t-test inputs differ in length");
        if (x.size() < 2) throw EmptyInput("paired t-test needs n >= 2");
        r.method = Method::t_paired;
        r.n = x.size();
        std::vector<double> d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
        double m = detail::mean(d);
        double v = detail::sample_var(d, m);
        r.df = double(x.size() - 1);
        if (v == 0.0) {
            if (m == 0.0) throw ZeroVariance("paired t-test: zero-variance identical samples");
            // constant nonzero difference: degenerate-significant
            r.degenerate = true;
            r.statistic = m > 0 ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
            return r;
        }
        r.statistic = m / std::sqrt(v / double(x.size()));
        r.p_value = dist::t_sf2(r.statistic, r.df);
        return r;
    }
    if (x.size() < 2 || y.size() < 2) throw EmptyInput("independent t-test needs n >= 2 per group");
    r.method = Method::t_independent;
    r.n = x.size() + y.size();
    double mx = detail::mean(x), my = detail::mean(y);
    double vx = detail::sample_var(x, mx), vy = detail::sample_var(y, my);
    // pooled variance (no Welch correction)
    double df = double(x.size() + y.size() - 2);
    double sp2 = ((double(x.size()) - 1) * vx + (double(y.size()) - 1) * vy) / df;
    r.df = df;
    if (sp2 == 0.0) {
        if (mx == my) throw ZeroVariance("independent t-test: zero variance, equal means");
        r.degenerate = true;
        r.statistic = mx > my ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
    }
    r.statistic = (mx - my) / std::sqrt(sp2 * (1.0 / double(x.size()) + 1.0 / double(y.size())));
    r.p_value = dist::t_sf2(r.statistic, r.df);
    return r;
}

namespace detail {

// ranks with ties averaged
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> rk(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        double avg = (double(i) + double(j - 1)) / 2.0 + 1.0;
        for (std::size_t k = i; k < j; ++k) rk[order[k]] = avg;
        i = j;
    }
    return rk;
}

inline bool has_ties(const std::vector<double>& pooled) {
    std::vector<double> s = pooled;
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) != s.end();
}

// Exact null distribution of U for tie-free samples: count subsets of
// size n1 from ranks {1..n1+n2} by rank sum, then shift to U.
inline std::vector<double> u_exact_counts(std::size_t n1, std::size_t n2) {
    const std::size_t N = n1 + n2;
    const std::size_t smax = N * (N + 1) / 2;
    std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(smax + 1, 0.0));
    dp[0][0] = 1.0;
    for (std::size_t rank = 1; rank <= N; ++rank)
        for (std::size_t j = std::min(n1, rank); j >= 1; --j)
            for (std::size_t s = smax; s >= rank; --s)
                dp[j][s] += dp[j - 1][s - rank];
    const std::size_t shift = n1 * (n1 + 1) / 2;  // min rank sum
    std::vector<double> counts(n1 * n2 + 1, 0.0);
    for (std::size_t s = shift; s <= smax && s - shift <= n1 * n2; ++s)
        counts[s - shift] = dp[n1][s];
    return counts;
}

}  // namespace detail

// Exact enumeration when tie-free and n_x * n_y <= 400, otherwise normal
// approximation with tie correction.
inline TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw EmptyInput("mann-whitney needs both samples nonempty");
    TestResult r;
    r.method = Method::mann_whitney;
    r.n = x.size() + y.size();
    std::vector<double> pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    auto rk = detail::ranks(pooled);
    double rx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rx += rk[i];
    const double n1 = double(x.size()), n2 = double(y.size());
    double u = rx - n1 * (n1 + 1.0) / 2.0;
    r.statistic = u;
    const bool tied = detail::has_ties(pooled);

    if (!tied && x.size() * y.size() <= 400) {
        auto counts = detail::u_exact_counts(x.size(), y.size());
        double total = 0;
        for (double cnt : counts) total += cnt;
        std::size_t ui = static_cast<std::size_t>(u + 0.5);
        double lo_tail = 0, hi_tail = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (k <= ui) lo_tail += counts[k];
            if (k >= ui) hi_tail += counts[k];
        }
        r.p_value = dist::clamp_p(2.0 * std::min(lo_tail, hi_tail) / total);
        return r;
    }

    const double n = n1 + n2;
    double mu = n1 * n2 / 2.0;
    double tie_term = 0;
    {
        std::vector<double> s = pooled;
        std::sort(s.begin(), s.end());
        std::size_t i = 0;
        while (i < s.size()) {
            std::size_t j = i;
            while (j < s.size() && s[j] == s[i]) ++j;
            double t = double(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
    }
    double sigma2 = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (sigma2 <= 0.0) {
        r.p_value = 1.0;
        r.degenerate = true;
        return r;
    }
    double z = (u - mu) / std::sqrt(sigma2);
    r.p_value = dist::clamp_p(2.0 * (1.0 - dist::normal_cdf(std::fabs(z))));
    return r;
}

// Mean-centered (classic) Levene.
inline TestResult levene(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw TooFewGroups("levene needs >= 2 groups");
    for (const auto& g : groups)
        if (g.size() < 2) throw TooFewGroups("levene needs >= 2 values per group");
    std::vector<std::vector<double>> z;
    for (const auto& g : groups) {
        double m = detail::mean(g);
        std::vector<double> zg;
        zg.reserve(g.size());
        for (double v : g) zg.push_back(std::fabs(v - m));
        z.push_back(std::move(zg));
    }
    // one-way ANOVA F on the absolute deviations
    double grand = 0;
    std::size_t n = 0;
    for (const auto& g : z) {
        for (double v : g) grand += v;
        n += g.size();
    }
    grand /= double(n);
    double ssb = 0, ssw = 0;
    for (const auto& g : z) {
        double m = detail::mean(g);
        ssb += double(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    const double df1 = double(groups.size() - 1);
    const double df2 = double(n - groups.size());
    TestResult r;
    r.method = Method::levene;
    r.n = n;
    r.df = df1;
    if (ssw == 0.0) {
        r.degenerate = true;
        r.statistic = ssb == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = ssb == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (ssb / df1) / (ssw / df2);
    r.p_value = dist::f_sf(r.statistic, df1, df2);
    return r;
}

inline TestResult oneway_anova(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw TooFewGroups("anova needs >= 2 groups");
    for (const auto& g : groups)
        if (g.size() < 2) throw TooFewGroups("anova needs >= 2 values per group");
    double grand = 0;
    std::size_t n = 0;
    for (const auto& g : groups) {
        for (double v : g) grand += v;
        n += g.size();
    }
    grand /= double(n);
    double ssb = 0, ssw = 0;
    for (const auto& g : groups) {
        double m = detail::mean(g);
        ssb += double(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    const double df1 = double(groups.size() - 1);
    const double df2 = double(n - groups.size());
    TestResult r;
    r.method = Method::anova_oneway;
    r.n = n;
    r.df = df1;
    if (ssw == 0.0) {
        r.degenerate = true;
        r.statistic = ssb == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = ssb == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (ssb / df1) / (ssw / df2);
    r.p_value = dist::f_sf(r.statistic, df1, df2);
    return r;
}

inline TestResult chi_square(const std::vector<std::vector<double>>& table) {
    if (table.empty() || table[0].empty()) throw EmptyInput("chi-square on empty table");
    const std::size_t R = table.size(), C = table[0].size();
    std::vector<double> row(R, 0.0), col(C, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < R; ++i) {
        if (table[i].size() != C) throw LengthMismatch("ragged contingency table");
        for (std::size_t j = 0; j < C; ++j) {
            row[i] += table[i][j];
            col[j] += table[i][j];
            total += table[i][j];
        }
    }
    if (total <= 0) throw EmptyInput("chi-square on zero-total table");
    TestResult r;
    r.method = Method::chi_square;
    r.n = static_cast<std::size_t>(total);
    r.df = double((R - 1) * (C - 1));
    double stat = 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            double e = row[i] * col[j] / total;
            if (e > 0) stat += (table[i][j] - e) * (table[i][j] - e) / e;
        }
    r.statistic = stat;
    r.p_value = r.df > 0 ? dist::chi2_sf(stat, r.df) : 1.0;
    return r;
}

inline TestResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("pearson inputs differ in length");
    if (x.size() < 3) throw EmptyInput("pearson needs n >= 3");
    double mx = detail::mean(x), my = detail::mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("pearson on constant input");
    TestResult r;
    r.method = Method::pearson;
    r.n = x.size();
    r.df = double(x.size() - 2);
    double corr = sxy / std::sqrt(sxx * syy);
    if (corr > 1.0) corr = 1.0;
    if (corr < -1.0) corr = -1.0;
    r.statistic = corr;
    if (std::fabs(corr) >= 1.0) {
        r.p_value = 0.0;
        return r;
    }
    double t = corr * std::sqrt(r.df / (1.0 - corr * corr));
    r.p_value = dist::t_sf2(t, r.df);
    return r;
}

inline TestResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto rx = detail::ranks(x);
    auto ry = detail::ranks(y);
    TestResult r = pearson(rx, ry);
    r.method = Method::spearman;
    return r;
}

inline std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t family_size) {
    if (p_values.empty()) throw EmptyInput("bonferroni on empty list");
    if (family_size < p_values.size())
        throw RangeViolation("family size smaller than number of p-values");
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) out.push_back(std::min(1.0, double(family_size) * p));
    return out;
}

}  // namespace crossfuse::stats
