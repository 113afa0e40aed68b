#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dsrw/decoupled.hpp"
#include "dsrw/error.hpp"
#include "dsrw/increment_law.hpp"
#include "dsrw/lattice.hpp"
#include "dsrw/quadrature.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"
#include "dsrw/stable.hpp"

namespace dsrw {

// full: s over the whole mgf domain (the Cramer rate, positive on both sides of the mean).
// nonnegative: s in J = [0, sup J); equals the full rate for x >= mu and 0 below.
enum class LegendreDomain { full, nonnegative };

struct LegendreValue {
    double value;
    double argmax;
    bool boundary;  // supremum approached at an end of the domain, not attained inside
};

class RateFunction {
public:
    explicit RateFunction(const IncrementLaw& law, LegendreDomain domain = LegendreDomain::full, double tol = 1e-9)
        : law_(law), domain_(domain), tol_(tol), sup_j_(law.mgf_domain_sup()) {}

    const IncrementLaw& law() const noexcept { return law_; }
    LegendreDomain domain() const noexcept { return domain_; }
    double tolerance() const noexcept { return tol_; }
    double sup_j() const noexcept { return sup_j_; }

    LegendreValue evaluate(double x) const;
    double operator()(double x) const { return evaluate(x).value; }

private:
    IncrementLaw law_;
    LegendreDomain domain_;
    double tol_;
    double sup_j_;
};

inline LegendreValue RateFunction::evaluate(double x) const {
    if (!(x > 0.0)) throw DomainError("legendre: x must be positive");
    const double mu = law_.mean();
    auto g = [&](double s) { return s * x - law_.log_mgf(s); };
    if (x == mu) return {0.0, 0.0, false};
    const bool upward = !(x < mu);
    if (!upward && domain_ == LegendreDomain::nonnegative) return {0.0, 0.0, true};
    if (upward && sup_j_ == 0.0) return {0.0, 0.0, true};

    const double scale = 1.0 / detail::chernoff_scale(law_);
    auto probe = [&](int k) {
        if (!upward) return -std::ldexp(scale, k - 20);
        if (std::isfinite(sup_j_)) return sup_j_ * -std::expm1(-std::ldexp(1.0, k - 20));
        return std::ldexp(scale, k - 20);
    };
    // g is concave with g(0) = 0: walk outward until it turns down, then golden section on the last gap
    auto golden = [&](double lo, double hi) {
        if (lo > hi) std::swap(lo, hi);
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        double p = hi - r * (hi - lo), q = lo + r * (hi - lo);
        double gp = g(p), gq = g(q);
        for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::fabs(lo)); ++it) {
            if (gp > gq) {
                hi = q;
                q = p;
                gq = gp;
                p = hi - r * (hi - lo);
                gp = g(p);
            } else {
                lo = p;
                p = q;
                gp = gq;
                q = lo + r * (hi - lo);
                gq = g(q);
            }
        }
        return gp > gq ? LegendreValue{std::max(gp, 0.0), p, false} : LegendreValue{std::max(gq, 0.0), q, false};
    };
    double s0 = 0.0, s1 = probe(0), g1 = g(s1);
    if (!(g1 > 0.0)) return golden(0.0, s1);
    for (int k = 1; k <= 100; ++k) {
        const double s2 = probe(k), g2 = g(s2);
        if (!(g2 >= g1)) {
            const auto v = golden(s0, s2);
            return v.value >= g1 ? v : LegendreValue{g1, s1, false};
        }
        s0 = s1;
        s1 = s2;
        g1 = g2;
    }
    // still increasing at the end of the probed range
    if (!upward || !std::isfinite(sup_j_)) return {inf, upward ? inf : -inf, true};
    return {g1, s1, true};
}

inline LegendreValue legendre(const RateFunction& rf, double x) { return rf.evaluate(x); }

// Conditions for the light-tail limit: some exponential moment, and int_0^1 -y log P{xi > 1/y} dy finite.
struct LightTailCheck {
    bool s0;
    bool integral;
};

inline LightTailCheck light_tail_conditions(const IncrementLaw& law) {
    switch (law.family()) {
        case Family::exponential:
        case Family::gamma: return {true, true};
        case Family::pareto: return {false, true};
        case Family::weibull: return {law.first() >= 1.0, law.first() < 2.0};
    }
    return {false, false};
}

// int_0^{1/mu} y I(1/y) dy = int_mu^inf I(x) x^-3 dx.
inline double rate_light(const RateFunction& rf, double tol = 1e-6) {
    const auto& law = rf.law();
    const auto c = light_tail_conditions(law);
    if (!c.s0) throw PreconditionError("rate_light: no exponential moment E exp(s0 xi) < inf for s0 > 0");
    if (!c.integral) throw PreconditionError("rate_light: int_0^1 -y log P{xi > 1/y} dy diverges");
    const double mu = law.mean();
    const RateFunction up(law, LegendreDomain::full, rf.tolerance());
    auto f = [&](double x) {
        if (!(x > mu)) return 0.0;
        const double v = up(x);
        return std::isfinite(v) ? v / (x * x * x) : 0.0;
    };
    // the integrand is smooth except for its O(x^-2) or slower decay; split at a few means
    const double head = quad::smooth("rate_light", f, mu, 4.0 * mu, 0.01 * tol).value;
    const double tail = quad::half_line("rate_light", f, 4.0 * mu, 0.01 * tol).value;
    return head + tail;
}

enum class HoleCase { min_a, min_b1, min_b2, heavy_a, heavy_b, semi };

inline std::string_view to_string(HoleCase c) {
    switch (c) {
        case HoleCase::min_a: return "min-a";
        case HoleCase::min_b1: return "min-b1";
        case HoleCase::min_b2: return "min-b2";
        case HoleCase::heavy_a: return "heavy-a";
        case HoleCase::heavy_b: return "heavy-b";
        case HoleCase::semi: return "semi";
    }
    return "?";
}

inline HoleCase parse_hole_case(std::string_view s) {
    for (auto c : {HoleCase::min_a, HoleCase::min_b1, HoleCase::min_b2, HoleCase::heavy_a, HoleCase::heavy_b,
                   HoleCase::semi})
        if (to_string(c) == s) return c;
    throw ConfigurationError("unknown case '" + std::string(s) + "' (min-a|min-b1|min-b2|heavy-a|heavy-b|semi)");
}

// Parameters of the closed-form limits: c and alpha of the tail, mu the mean.
struct ConstantParams {
    double c = 1.0;
    double alpha = 0.0;
    double mu = 0.0;
};

inline double closed_form_constant(HoleCase which, const ConstantParams& p) {
    switch (which) {
        case HoleCase::min_b1:
            if (!(p.c > 0.0)) throw DomainError("min-b1: requires c > 0");
            return p.c;
        case HoleCase::min_b2:
            if (!(p.alpha > 2.0)) throw DomainError("min-b2: requires alpha > 2 (log-tail index)");
            if (!(p.c > 0.0)) throw DomainError("min-b2: requires c > 0");
            return p.c * riemann_zeta(p.alpha - 1.0);
        case HoleCase::heavy_b:
            if (!(p.alpha > 1.0)) throw DomainError("heavy-b: requires a regularly varying tail with alpha > 1");
            if (!(p.mu > 0.0 && std::isfinite(p.mu))) throw DomainError("heavy-b: requires a finite mean");
            return (p.alpha - 1.0) / p.mu;
        case HoleCase::semi:
            if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw DomainError("semi: requires alpha in (0, 1)");
            if (!(p.mu > 0.0 && std::isfinite(p.mu))) throw DomainError("semi: requires a finite mean");
            return 1.0 / (p.mu * (p.alpha + 1.0));
        case HoleCase::min_a:
        case HoleCase::heavy_a: break;
    }
    throw NotSupportedError(std::string(to_string(which)) + ": limit has no closed form");
}

// Checks that the law matches the regime of the case.
inline void require_regime(const IncrementLaw& law, HoleCase which) {
    const auto f = law.family();
    const double a = law.first();
    bool ok = false;
    switch (which) {
        case HoleCase::min_a: {
            const auto c = light_tail_conditions(law);
            ok = c.s0 && c.integral;
            break;
        }
        case HoleCase::min_b1: ok = f == Family::weibull && a == 2.0; break;
        case HoleCase::min_b2: ok = f == Family::weibull && a > 2.0; break;
        case HoleCase::heavy_a: ok = f == Family::pareto && a < 1.0; break;
        case HoleCase::heavy_b: ok = f == Family::pareto && a > 1.0; break;
        case HoleCase::semi: ok = f == Family::weibull && a < 1.0; break;
    }
    if (!ok)
        throw PreconditionError("case " + std::string(to_string(which)) + " does not match the tail regime of " +
                                law.spec());
}

inline ConstantParams constant_params(const IncrementLaw& law) {
    const auto t = law.tail();
    return {t.constant, t.index, law.mean()};
}

// Slowly varying ell: c, c (log y)^beta, or a user function.
struct SlowlyVarying {
    enum class Kind { constant, log_power, custom };
    Kind kind = Kind::constant;
    double c = 1.0;
    double beta = 0.0;
    std::function<double(double)> f;

    static SlowlyVarying constant(double c) { return {Kind::constant, c, 0.0, {}}; }
    static SlowlyVarying log_power(double c, double beta) { return {Kind::log_power, c, beta, {}}; }
    static SlowlyVarying custom(std::function<double(double)> f) { return {Kind::custom, 1.0, 0.0, std::move(f)}; }

    double operator()(double y) const {
        switch (kind) {
            case Kind::constant: return c;
            case Kind::log_power: return c * std::pow(std::log(y), beta);
            case Kind::custom: return f(y);
        }
        return 0.0;
    }
};

// ell*(t) = int_1^t ell(y) / y dy.
inline double ell_star(double t, const SlowlyVarying& ell) {
    if (!(t >= 1.0)) throw DomainError("ell_star: t must be >= 1");
    const double lt = std::log(t);
    switch (ell.kind) {
        case SlowlyVarying::Kind::constant: return ell.c * lt;
        case SlowlyVarying::Kind::log_power:
            if (!(ell.beta > -1.0)) throw DomainError("ell_star: (log y)^beta needs beta > -1 for integrability at 1");
            return ell.c * std::pow(lt, ell.beta + 1.0) / (ell.beta + 1.0);
        case SlowlyVarying::Kind::custom:
            // y = e^u
            return quad::finite("ell_star", [&](double u) { return ell.f(std::exp(u)); }, 0.0, lt, 1e-10).value;
    }
    return 0.0;
}

struct HeavyAOptions {
    double x_min = 1e-3;
    double x_max = 0.0;  // 0: empirical 1 - 10/reps quantile
    std::size_t batches = 20;
};

struct HeavyAEstimate {
    double estimate;
    double std_error;
    double head;        // x_min (1 - log x_min)
    double tail_bound;  // int_{x_max}^inf (1 - F)/F from the empirical law, excluded from the estimate
    double x_max;
};

namespace detail {

struct EcdfIntegrals {
    double main;
    double tail;
};

// Integrals of -log F and (1 - F)/F for the step ECDF of sorted samples on [x0, x1] and [x1, max].
inline EcdfIntegrals ecdf_integrals(const std::vector<double>& sorted, double x0, double x1) {
    const double m = double(sorted.size());
    const auto first = std::upper_bound(sorted.begin(), sorted.end(), x0);
    double count = double(first - sorted.begin());
    if (count == 0.0) throw ConvergenceError("rate_heavy_a: no sample below x_min; raise x_min or reps", inf);
    double main = 0.0, tail = 0.0, x = x0;
    for (auto it = first; it != sorted.end(); ++it) {
        const double f = count / m;
        const double next = *it;
        if (x < x1) {
            const double e = std::min(next, x1);
            main += (e - x) * -std::log(f);
            if (next > x1) tail += (next - x1) * (1.0 - f) / f;
        } else {
            tail += (next - x) * (1.0 - f) / f;
        }
        x = std::max(x, next);
        count += 1.0;
    }
    return {main, tail};
}

}  // namespace detail

// int_0^inf -log P{W^<-(1) <= x} dx from Mittag-Leffler draws.
// Head: P{W^<-(1) <= x} = P{W(x) > 1} = P{W(1) > x^(-1/alpha)} ~ x as x -> 0, since the Levy tail of W is
// y^(-alpha) for the Laplace exponent Gamma(1-alpha) z^alpha; hence int_0^{x_min} -log F ~ x_min(1 - log x_min).
// Standard error: delete-one-batch jackknife over contiguous replication batches.
inline HeavyAEstimate rate_heavy_a(double alpha, std::size_t reps, RandomStream& rs, HeavyAOptions opt = {}) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("rate_heavy_a: alpha must lie in (0, 1)");
    if (reps < 100 * opt.batches) throw PreconditionError("rate_heavy_a: too few replications for the batch count");
    std::vector<double> x(reps);
    for (auto& v : x) v = sample_mittag_leffler(alpha, rs);
    const double head = opt.x_min * (1.0 - std::log(opt.x_min));
    auto estimate = [&](std::vector<double> s, double xmax) {
        std::sort(s.begin(), s.end());
        return detail::ecdf_integrals(s, opt.x_min, xmax);
    };
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    double xmax = opt.x_max;
    if (!(xmax > 0.0)) xmax = sorted[std::size_t(double(reps) * (1.0 - 10.0 / double(reps)))];
    const auto all = detail::ecdf_integrals(sorted, opt.x_min, xmax);
    const std::size_t per = reps / opt.batches;
    std::vector<double> jack(opt.batches);
    for (std::size_t b = 0; b < opt.batches; ++b) {
        std::vector<double> rest;
        rest.reserve(reps - per);
        rest.insert(rest.end(), x.begin(), x.begin() + b * per);
        rest.insert(rest.end(), x.begin() + (b + 1) * per, x.end());
        jack[b] = estimate(std::move(rest), xmax).main;
    }
    double jm = 0.0;
    for (double v : jack) jm += v;
    jm /= double(opt.batches);
    double ss = 0.0;
    for (double v : jack) ss += (v - jm) * (v - jm);
    const double se = std::sqrt(ss * double(opt.batches - 1) / double(opt.batches));
    return {head + all.main, se, head, all.tail, xmax};
}

struct HoleOptions {
    double h = 0.0;     // lattice step; 0: max(0.01, t / 32768)
    long horizon = 0;   // 0: automatic
    double heavy_b = 50.0;  // infinite mean: horizon b / P{xi > t}
};

struct HoleBracket {
    double lo;
    double hi;
    long horizon;
    double remainder;
    bool truncated;  // hi covers only n <= horizon
    bool exact_path;
};

// Lambda(t) = sum_n -log P{S_n > t}.
inline HoleBracket hole_log_prob(const IncrementLaw& law, double t, HoleOptions opt = {}) {
    if (!(t > 0.0)) throw DomainError("hole_log_prob: t must be positive");
    const double mu = law.mean();
    long n = opt.horizon;
    if (n <= 0) {
        if (std::isfinite(mu)) n = std::max<long>(1, long(std::ceil(2.0 * t / mu)));
        else n = std::max<long>(1, long(std::ceil(opt.heavy_b / law.survival(t))));
    }
    if (law.has_gamma_sums()) {
        // extend until the Laplace bound on the rest is negligible
        double rem = inf;
        for (;; n *= 2) {
            try {
                rem = chernoff_remainder(law, t, n);
            } catch (const PreconditionError&) {
                rem = inf;
            }
            if (rem < 1e-12 * std::max(1.0, t)) break;
        }
        double s = 0.0;
        for (long k = 1; k <= n; ++k) s -= log_sum_survival(law, k, t);
        return {s * (1.0 - 1e-12), (s + rem) * (1.0 + 1e-12), n, rem, false, true};
    }
    const double h = opt.h > 0.0 ? opt.h : std::max(0.01, t / 32768.0);
    SurvivalTableOptions so;
    so.horizon = n;
    const auto tab = survival_table(law, t, h, so);
    double lo = 0.0, hi = 0.0;
    for (const auto& r : tab.rows) {
        lo -= std::log(r.hi);
        hi -= std::log(r.lo);
    }
    if (tab.remainder_available) return {lo, hi + tab.remainder, n, tab.remainder, false, false};
    return {lo, hi, n, inf, true, false};
}

inline double hole_normalization(const IncrementLaw& law, HoleCase which, double t) {
    const auto tail = law.tail();
    switch (which) {
        case HoleCase::min_a: return t * t;
        case HoleCase::min_b1: return t * t * ell_star(std::max(t, 1.0), SlowlyVarying::constant(1.0));
        case HoleCase::min_b2: return std::pow(t, tail.index);
        case HoleCase::heavy_a: return 1.0 / law.survival(t);
        case HoleCase::heavy_b: return t * std::log(t);
        case HoleCase::semi: return tail.constant * std::pow(t, tail.index + 1.0);
    }
    return 1.0;
}

struct HolePoint {
    double t;
    double lambda_lo;
    double lambda_hi;
    double norm;
    double normalized_lo;
    double normalized_hi;
};

struct HoleCurve {
    HoleCase which = HoleCase::min_a;
    std::string law;
    std::vector<HolePoint> points;
    double theoretical_limit = 0.0;
    std::string limit_source;

    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "t,lambda_lo,lambda_hi,norm,normalized_lo,normalized_hi,theoretical_limit\n";
        for (const auto& p : points)
            os << p.t << ',' << p.lambda_lo << ',' << p.lambda_hi << ',' << p.norm << ',' << p.normalized_lo << ','
               << p.normalized_hi << ',' << theoretical_limit << '\n';
    }
};

struct HoleCurveOptions {
    HoleOptions hole;
    std::size_t heavy_a_reps = 1000000;
    std::uint64_t seed = 20240611;
};

// Limit constant of the case, produced by the analytics above.
inline double theoretical_limit(const IncrementLaw& law, HoleCase which, const HoleCurveOptions& opt,
                                std::string* source = nullptr) {
    require_regime(law, which);
    switch (which) {
        case HoleCase::min_a:
            if (source) *source = "rate_light: int_0^{1/mu} y I(1/y) dy";
            return rate_light(RateFunction(law));
        case HoleCase::heavy_a: {
            if (source) *source = "rate_heavy_a: int_0^inf -log P{W^<-(1) <= x} dx (Monte Carlo)";
            RandomStream rs(opt.seed, 0);
            return rate_heavy_a(law.first(), opt.heavy_a_reps, rs).estimate;
        }
        case HoleCase::min_b1:
            if (source) *source = "closed form: c";
            break;
        case HoleCase::min_b2:
            if (source) *source = "closed form: c zeta(alpha - 1)";
            break;
        case HoleCase::heavy_b:
            if (source) *source = "closed form: (alpha - 1) / mu";
            break;
        case HoleCase::semi:
            if (source) *source = "closed form: 1 / (mu (alpha + 1))";
            break;
    }
    return closed_form_constant(which, constant_params(law));
}

inline HoleCurve normalized_hole_curve(const IncrementLaw& law, const std::vector<double>& grid, HoleCase which,
                                       const HoleCurveOptions& opt = {}) {
    require_regime(law, which);
    HoleCurve c;
    c.which = which;
    c.law = law.spec();
    c.theoretical_limit = theoretical_limit(law, which, opt, &c.limit_source);
    for (double t : grid) {
        const auto b = hole_log_prob(law, t, opt.hole);
        const double norm = hole_normalization(law, which, t);
        c.points.push_back({t, b.lo, b.hi, norm, b.lo / norm, b.hi / norm});
    }
    return c;
}

}  // namespace dsrw
