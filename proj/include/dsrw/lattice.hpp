#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "dsrw/error.hpp"
#include "dsrw/fft.hpp"
#include "dsrw/increment_law.hpp"

namespace dsrw {

enum class Rounding { down, up, mean_preserving };
enum class ConvolutionMethod { automatic, direct, fft };

inline constexpr std::size_t lattice_max_points = std::size_t(1) << 26;

// Masses on {0, h, ..., (K-1)h}; lump = mass at indices >= K.
struct LatticeLaw {
    double h = 1.0;
    std::vector<double> mass;
    double lump = 0.0;

    std::size_t size() const noexcept { return mass.size(); }

    double total() const {
        double s = lump;
        for (double m : mass) s += m;
        return s;
    }

    // tail[m] = P{index >= m} for m = 0..K, accumulated from the lump downward.
    std::vector<double> tails() const {
        std::vector<double> t(mass.size() + 1);
        t[mass.size()] = lump;
        for (std::size_t m = mass.size(); m-- > 0;) t[m] = t[m + 1] + mass[m];
        return t;
    }

    static LatticeLaw point_mass(double h, std::size_t k) {
        LatticeLaw l{h, std::vector<double>(k, 0.0), 0.0};
        l.mass[0] = 1.0;
        return l;
    }
};

namespace detail {

// S(a) - S(b) for a < b with relative accuracy in the far tail.
inline double survival_difference(const IncrementLaw& law, double a, double b) {
    const double la = law.log_survival(a), lb = law.log_survival(b);
    if (la == -inf) return 0.0;
    return std::max(0.0, -std::exp(la) * std::expm1(lb - la));
}

inline LatticeLaw discretize_unchecked(const IncrementLaw& law, double h, std::size_t k, Rounding dir) {
    if (!(h > 0.0)) throw DomainError("discretize: step must be positive");
    if (k == 0) throw DomainError("discretize: need at least one grid point");
    if (k > lattice_max_points) throw ConfigurationError("discretize: grid exceeds the memory cap");
    LatticeLaw l{h, std::vector<double>(k, 0.0), 0.0};
    switch (dir) {
        case Rounding::down:
            for (std::size_t j = 0; j < k; ++j) l.mass[j] = survival_difference(law, double(j) * h, double(j + 1) * h);
            l.lump = law.survival(double(k) * h);
            break;
        case Rounding::up:
            // continuous laws put no mass at 0
            for (std::size_t j = 1; j < k; ++j) l.mass[j] = survival_difference(law, double(j - 1) * h, double(j) * h);
            l.lump = law.survival(double(k - 1) * h);
            break;
        case Rounding::mean_preserving: {
            if (!std::isfinite(law.mean()))
                throw PreconditionError("discretize: mean-preserving rounding needs a finite mean");
            // hat-function split: mass_j = second difference of T(a) = E(xi - a)_+ divided by h
            std::vector<double> tv(k + 2);
            for (std::size_t j = 0; j < k + 2; ++j) tv[j] = law.integrated_tail((double(j) - 1.0) * h);
            for (std::size_t j = 0; j < k; ++j) l.mass[j] = std::max(0.0, (tv[j] - 2.0 * tv[j + 1] + tv[j + 2]) / h);
            l.lump = std::max(0.0, (tv[k] - tv[k + 1]) / h);
            break;
        }
    }
    return l;
}

}  // namespace detail

inline LatticeLaw discretize(const IncrementLaw& law, double h, std::size_t k, Rounding dir) {
    LatticeLaw l = detail::discretize_unchecked(law, h, k, dir);
    if (l.lump > 0.5) throw ConfigurationError("discretize: grid covers less than half the mass (lump > 0.5)");
    return l;
}

namespace detail {

// a.lump + sum_{i<K} a_i P{B >= K - i}; every term is nonnegative.
inline double convolved_lump(const LatticeLaw& a, const std::vector<double>& btails, std::size_t k) {
    double s = a.lump;
    for (std::size_t i = 0; i < k; ++i) s += a.mass[i] * btails[k - i];
    return s;
}

inline void direct_convolve(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out,
                            std::size_t k) {
    out.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const std::size_t m = k - i;
        double* o = out.data() + i;
        const double* bp = b.data();
        for (std::size_t j = 0; j < m; ++j) o[j] += ai * bp[j];
    }
}

}  // namespace detail

inline LatticeLaw convolve(const LatticeLaw& a, const LatticeLaw& b, ConvolutionMethod method = ConvolutionMethod::direct) {
    if (a.h != b.h) throw PreconditionError("convolve: lattice steps differ");
    const std::size_t k = std::min(a.size(), b.size());
    LatticeLaw out{a.h, {}, 0.0};
    if (method == ConvolutionMethod::fft || (method == ConvolutionMethod::automatic && k > 4096)) {
        FftConvolver fc(k);
        fc.set_kernel(b.mass);
        fc.convolve(a.mass, out.mass);
    } else {
        detail::direct_convolve(a.mass, b.mass, out.mass, k);
    }
    out.lump = detail::convolved_lump(a, b.tails(), k);
    return out;
}

struct SurvivalRow {
    long n;
    double lo;
    double hi;
};

struct SurvivalTableOptions {
    long horizon = 0;  // 0: ceil(2t/mu)
    ConvolutionMethod method = ConvolutionMethod::automatic;
    bool attach_remainder = true;
};

// Rows bracket P{S_n > t}; remainder bounds sum_{n>N} -log P{S_n > t}.
struct SurvivalTable {
    double t = 0.0;
    double h = 0.0;
    long horizon = 0;
    std::vector<SurvivalRow> rows;
    double remainder = inf;
    bool remainder_available = false;
    bool used_fft = false;

    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "n,lo,hi\n";
        for (const auto& r : rows) os << r.n << ',' << r.lo << ',' << r.hi << '\n';
    }
};

double chernoff_remainder(const IncrementLaw& law, double t, long n);

namespace detail {

inline std::size_t level_index(double t, double h) {
    // smallest K with K h > t
    double kd = std::floor(t / h) + 1.0;
    if (kd > double(lattice_max_points)) throw ConfigurationError("survival table: t/h exceeds the memory cap");
    std::size_t k = std::size_t(std::max(1.0, kd));
    while (k > 1 && double(k - 1) * h > t) --k;
    while (double(k) * h <= t) ++k;
    return k;
}

inline bool prefer_fft(const IncrementLaw& law, std::size_t k, long n, ConvolutionMethod m) {
    if (m == ConvolutionMethod::direct) return false;
    if (m == ConvolutionMethod::fft) return true;
    // light tails need the relative precision of the positive direct sums
    if (law.mgf_domain_sup() > 0.0) return double(k) * double(k) * double(n) > 2e11;
    return k > 2048;
}

// Iterates S_{n+1} = S_n (+) xi on one rounding; returns lumps and a cumulative roundoff allowance.
struct LumpSeries {
    std::vector<double> lump;
    std::vector<double> allowance;
};

inline LumpSeries iterate_lumps(const LatticeLaw& xi, long n_max, bool fft) {
    const std::size_t k = xi.size();
    LumpSeries out;
    out.lump.reserve(n_max);
    out.allowance.reserve(n_max);
    const auto tails = xi.tails();
    double tail_mass = 0.0;
    for (std::size_t m = 1; m <= k; ++m) tail_mass += tails[m];
    std::unique_ptr<FftConvolver> fc;
    if (fft) {
        fc = std::make_unique<FftConvolver>(k);
        fc->set_kernel(xi.mass);
    }
    LatticeLaw cur = xi;
    double grid_err = 0.0, lump_err = 0.0;
    out.lump.push_back(cur.lump);
    out.allowance.push_back(0.0);
    std::vector<double> next;
    for (long n = 2; n <= n_max; ++n) {
        const double lump = convolved_lump(cur, tails, k);
        lump_err += grid_err * tail_mass;
        if (fft) {
            grid_err += 2.0 * fc->convolve(cur.mass, next);
        } else {
            direct_convolve(cur.mass, xi.mass, next, k);
        }
        cur.mass.swap(next);
        cur.lump = lump;
        out.lump.push_back(lump);
        out.allowance.push_back(lump_err);
    }
    return out;
}

}  // namespace detail

inline SurvivalTable survival_table(const IncrementLaw& law, double t, double h, SurvivalTableOptions opt = {}) {
    if (!(t >= 0.0)) throw DomainError("survival_table: t must be nonnegative");
    if (!(h > 0.0)) throw DomainError("survival_table: h must be positive");
    const double mu = law.mean();
    long n = opt.horizon;
    if (n <= 0) {
        if (!std::isfinite(mu)) throw PreconditionError("survival_table: infinite mean requires an explicit horizon");
        n = std::max<long>(1, long(std::ceil(2.0 * t / mu)));
    }
    const std::size_t k = detail::level_index(t, h);
    const bool fft = detail::prefer_fft(law, k, n, opt.method);
    const auto down = detail::discretize_unchecked(law, h, k, Rounding::down);
    const auto up = detail::discretize_unchecked(law, h, k, Rounding::up);
    const auto lo = detail::iterate_lumps(down, n, fft);
    const auto hi = detail::iterate_lumps(up, n, fft);
    SurvivalTable tab;
    tab.t = t;
    tab.h = h;
    tab.horizon = n;
    tab.used_fft = fft;
    tab.rows.reserve(n);
    for (long i = 0; i < n; ++i) {
        const double l = std::clamp(lo.lump[i] - lo.allowance[i], 0.0, 1.0);
        const double u = std::clamp(hi.lump[i] + hi.allowance[i], 0.0, 1.0);
        tab.rows.push_back({i + 1, l, std::max(l, u)});
    }
    if (opt.attach_remainder) {
        try {
            tab.remainder = chernoff_remainder(law, t, n);
            tab.remainder_available = true;
        } catch (const PreconditionError&) {
            // horizon too short for the bound; rows remain valid
        }
    }
    return tab;
}

namespace detail {

struct ChernoffPoint {
    double u;
    double value;
};

// Minimizes a bound B(u) over u > 0: log-grid scan then golden section.
template <class F>
ChernoffPoint minimize_over_u(F log_bound, double scale) {
    const int m = 80;
    const double lo = std::log(1e-5 / scale), hi = std::log(1e5 / scale);
    int best = -1;
    double best_v = inf;
    std::vector<double> v(m + 1);
    for (int i = 0; i <= m; ++i) {
        v[i] = log_bound(std::exp(lo + (hi - lo) * i / m));
        if (v[i] < best_v) {
            best_v = v[i];
            best = i;
        }
    }
    if (best < 0) return {0.0, inf};
    double a = lo + (hi - lo) * std::max(0, best - 1) / m, b = lo + (hi - lo) * std::min(m, best + 1) / m;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = log_bound(std::exp(c)), fd = log_bound(std::exp(d));
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = log_bound(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = log_bound(std::exp(d));
        }
    }
    const double u = fc < fd ? std::exp(c) : std::exp(d);
    const double val = std::min({fc, fd, best_v});
    return {val == best_v ? std::exp(lo + (hi - lo) * best / m) : u, val};
}

// Typical size of xi for the u-grid: the mean, or the median when the mean is infinite.
inline double chernoff_scale(const IncrementLaw& law) {
    if (std::isfinite(law.mean())) return law.mean();
    double lo = 0.0, hi = 1.0;
    while (law.survival(hi) > 0.5) hi *= 2.0;
    for (int i = 0; i < 100; ++i) (law.survival(0.5 * (lo + hi)) > 0.5 ? lo : hi) = 0.5 * (lo + hi);
    return hi;
}

}  // namespace detail

// Upper bound on sum_{n>N} -log P{S_n > t}, via P{S_n <= t} <= e^{ut} m(u)^n, m(u) = E e^{-u xi},
// and -log(1 - x) <= x / (1 - xbar) for x <= xbar = e^{ut} m(u)^{N+1}.
inline double chernoff_remainder(const IncrementLaw& law, double t, long n) {
    if (n < 1) throw DomainError("chernoff_remainder: N must be >= 1");
    auto log_bound = [&](double u) {
        const double lm = law.log_laplace(u);
        const double lx = u * t + double(n + 1) * lm;
        if (!(lx < 0.0)) return inf;
        return lx - log1mexp(lm) - log1mexp(lx);
    };
    const auto best = detail::minimize_over_u(log_bound, detail::chernoff_scale(law));
    // -inf: S_n <= t is impossible beyond N (support bounded away from 0)
    if (std::isnan(best.value) || best.value == inf)
        throw PreconditionError("chernoff_remainder: the bound exceeds 1 on the first term; increase N");
    return std::exp(best.value);
}

// Upper bound on sum_{n>N} P{S_n <= t}.
inline double chernoff_cdf_tail(const IncrementLaw& law, double t, long n) {
    auto log_bound = [&](double u) {
        const double lm = law.log_laplace(u);
        return u * t + double(n + 1) * lm - log1mexp(lm);
    };
    return std::exp(detail::minimize_over_u(log_bound, detail::chernoff_scale(law)).value);
}

// Smallest N (doubling search, then bisection) with chernoff_cdf_tail(N) <= eps.
inline long chernoff_horizon(const IncrementLaw& law, double t, double eps, long start = 1) {
    long hi = std::max<long>(1, start);
    while (chernoff_cdf_tail(law, t, hi) > eps) {
        hi *= 2;
        if (hi > (1L << 40)) throw CapReachedError("chernoff_horizon: tolerance unreachable");
    }
    long lo = std::max<long>(1, start) - 1;
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (mid >= 1 && chernoff_cdf_tail(law, t, mid) <= eps) hi = mid;
        else lo = mid;
    }
    return hi;
}

struct Bracket {
    double lo;
    double hi;
    bool contains(double x) const { return lo <= x && x <= hi; }
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
};

// V(t) = sum_n P{S_n <= t}; horizon extended until the Chernoff tail is below tail_tol.
inline Bracket renewal_V(const IncrementLaw& law, double t, double h = 1e-3, double tail_tol = 1e-4) {
    const double mu = law.mean();
    if (!std::isfinite(mu)) throw PreconditionError("renewal_V: requires a finite mean");
    long n = std::max<long>(1, long(std::ceil(2.0 * t / mu)));
    n = std::max(n, chernoff_horizon(law, t, tail_tol, n));
    SurvivalTableOptions opt;
    opt.horizon = n;
    opt.attach_remainder = false;
    const auto tab = survival_table(law, t, h, opt);
    double lo = 0.0, hi = 0.0;
    for (const auto& r : tab.rows) {
        lo += 1.0 - r.hi;
        hi += 1.0 - r.lo;
    }
    return {lo, hi + chernoff_cdf_tail(law, t, n)};
}

// Single-rounding survival estimates P{S_n > t}, n = 1..N (no rigor; used for estimation).
inline std::vector<double> survival_estimates(const IncrementLaw& law, double t, double h, long n, Rounding dir,
                                              ConvolutionMethod method = ConvolutionMethod::automatic) {
    const std::size_t k = detail::level_index(t, h);
    const auto xi = detail::discretize_unchecked(law, h, k, dir);
    return detail::iterate_lumps(xi, n, detail::prefer_fft(law, k, n, method)).lump;
}

}  // namespace dsrw
