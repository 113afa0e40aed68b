#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "dsrw/error.hpp"

namespace dsrw {

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// log|Gamma(x)| and the sign of Gamma(x); x must not be a nonpositive integer.
inline std::pair<double, int> signed_lgamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) throw DomainError("signed_lgamma: pole at nonpositive integer");
    const double lg = std::lgamma(x);
    if (x > 0.0) return {lg, 1};
    const long fl = static_cast<long>(std::floor(x));
    return {lg, (fl % 2 == 0) ? 1 : -1};
}

inline double signed_gamma(double x) {
    const auto [lg, s] = signed_lgamma(x);
    return s * std::exp(lg);
}

// log(1 - exp(y)) for y <= 0.
inline double log1mexp(double y) {
    if (y > -std::numbers::ln2) return std::log(-std::expm1(y));
    return std::log1p(-std::exp(y));
}

// log(x^a e^-x / Gamma(a + 1)); the Stirling split avoids cancelling O(a log a) terms.
inline double log_poisson_term(double a, double x) {
    if (a == 0.0) return -x;
    if (a < 10.0) return a * std::log(x) - x - std::lgamma(a + 1.0);
    const double ia = 1.0 / a, ia2 = ia * ia;
    const double corr = ia * (1.0 / 12.0 - ia2 * (1.0 / 360.0 - ia2 * (1.0 / 1260.0 - ia2 / 1680.0)));
    return a * std::log1p((x - a) / a) + (a - x) - 0.5 * std::log(2.0 * std::numbers::pi * a) - corr;
}

namespace detail {

// log sum_{k<n} x^k/k! - x evaluated from the largest term k = n-1 downward.
inline double log_erlang_upper_sum(long n, double x) {
    double term = 1.0, acc = 1.0;
    for (long k = n - 1; k >= 1; --k) {
        term *= double(k) / x;
        acc += term;
        if (term < 1e-18 * acc) break;
    }
    return log_poisson_term(double(n - 1), x) + std::log(acc);
}

// log sum_{k>=n} x^k/k! - x evaluated from k = n upward.
inline double log_erlang_lower_sum(long n, double x) {
    double term = 1.0, acc = 1.0;
    for (long j = 1;; ++j) {
        term *= x / double(n + j);
        acc += term;
        if (term < 1e-18 * acc) break;
    }
    return log_poisson_term(double(n), x) + std::log(acc);
}

}  // namespace detail

// log Q(n, x), Q the regularized upper incomplete gamma function at integer order.
inline double log_erlang_q(long n, double x) {
    if (n < 1) throw DomainError("erlang: n must be >= 1");
    if (x <= 0.0) return 0.0;
    if (x > double(n) - 1.0) return detail::log_erlang_upper_sum(n, x);
    return log1mexp(detail::log_erlang_lower_sum(n, x));
}

// log P(n, x) = log(1 - Q(n, x)).
inline double log_erlang_p(long n, double x) {
    if (n < 1) throw DomainError("erlang: n must be >= 1");
    if (x <= 0.0) return -inf;
    if (x > double(n) - 1.0) return log1mexp(detail::log_erlang_upper_sum(n, x));
    return detail::log_erlang_lower_sum(n, x);
}

inline double log_erlang_survival(long n, double t, double rate) { return log_erlang_q(n, rate * t); }

inline double erlang_survival(long n, double t, double rate) { return std::exp(log_erlang_survival(n, t, rate)); }

// Euler-Maclaurin with 50 direct terms; truncation error far below 1e-12 for x > 1.
inline double riemann_zeta(double x) {
    if (!(x > 1.0)) throw DomainError("riemann_zeta: requires x > 1");
    constexpr int N = 50;
    double s = 0.0;
    for (int n = N - 1; n >= 1; --n) s += std::pow(double(n), -x);
    const double nx = std::pow(double(N), -x);
    s += double(N) * nx / (x - 1.0) + 0.5 * nx;
    constexpr double b[] = {1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0};
    double rising = x, fact = 2.0, npow = nx / double(N);
    for (int k = 1; k <= 5; ++k) {
        s += b[k - 1] / fact * rising * npow;
        rising *= (x + 2.0 * k - 1.0) * (x + 2.0 * k);
        fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
        npow /= double(N) * double(N);
    }
    return s;
}

// sum_{n>=0} s^n / Gamma(1 + n alpha).
inline double ml_mgf_series(double alpha, double s, int max_terms = 100000) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("ml_mgf_series: alpha must lie in (0, 1]");
    if (s < 0.0) throw DomainError("ml_mgf_series: s must be nonnegative");
    if (s == 0.0) return 1.0;
    const double ls = std::log(s);
    double acc = 1.0, prev = 1.0;
    for (int n = 1; n < max_terms; ++n) {
        const double term = std::exp(n * ls - std::lgamma(1.0 + n * alpha));
        if (!std::isfinite(term)) break;
        acc += term;
        // past the peak the terms decrease monotonically
        if (term < prev && term < 1e-14 * acc) return acc;
        prev = term;
    }
    throw ConvergenceError("ml_mgf_series: series did not converge; s too large", prev / acc);
}

}  // namespace dsrw

namespace dsrw {

namespace detail {

inline double log_gamma_p_series(double a, double x) {
    double term = 1.0, acc = 1.0;
    for (int j = 1; j < 100000; ++j) {
        term *= x / (a + j);
        acc += term;
        if (term < 1e-17 * acc) break;
    }
    return log_poisson_term(a, x) + std::log(acc);
}

// Modified Lentz evaluation of the continued fraction for Q(a, x), x > a + 1.
inline double log_gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return log_poisson_term(a, x) + std::log(a) + std::log(h);
}

}  // namespace detail

// log of the regularized upper incomplete gamma function Q(a, x), a > 0.
inline double log_gamma_q(double a, double x) {
    if (!(a > 0.0)) throw DomainError("log_gamma_q: a must be positive");
    if (x <= 0.0) return 0.0;
    if (x > a + 1.0) return detail::log_gamma_q_fraction(a, x);
    return log1mexp(detail::log_gamma_p_series(a, x));
}

inline double log_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw DomainError("log_gamma_p: a must be positive");
    if (x <= 0.0) return -inf;
    if (x > a + 1.0) return log1mexp(detail::log_gamma_q_fraction(a, x));
    return detail::log_gamma_p_series(a, x);
}

}  // namespace dsrw
