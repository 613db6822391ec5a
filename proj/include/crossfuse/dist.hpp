#pragma once

// Distribution tail functions used by the hypothesis tests. Incomplete
// beta/gamma via continued fractions (modified Lentz) converged to 1e-12,
// so p-values are bit-stable without an external statistics dependency.

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace crossfuse::dist {

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace detail {

constexpr double kEps = 1e-12;
constexpr int kMaxIter = 500;

// Continued fraction for the regularized incomplete beta, Lentz's method.
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// Regularized lower incomplete gamma P(a, x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction (x >= a+1).
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lnfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(lnfront);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

inline double t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double p = 0.5 * incbeta(df / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

inline double chi2_cdf(double x, double df) {
    return gamma_p(df / 2.0, x / 2.0);
}

inline double f_cdf(double x, double df1, double df2) {
    if (x <= 0.0) return 0.0;
    return incbeta(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2));
}

// Two-sided p-values (survival-based, clipped into [0, 1]).
inline double clamp_p(double p) {
    if (p < 0.0) return 0.0;
    if (p > 1.0) return 1.0;
    return p;
}

inline double t_sf2(double t, double df) {  // 2 * P(T >= |t|)
    return clamp_p(2.0 * (1.0 - t_cdf(std::fabs(t), df)));
}

inline double chi2_sf(double x, double df) {
    return clamp_p(1.0 - chi2_cdf(x, df));
}

inline double f_sf(double x, double df1, double df2) {
    return clamp_p(1.0 - f_cdf(x, df1, df2));
}

// log C(n, k)
inline double lchoose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace crossfuse::dist
