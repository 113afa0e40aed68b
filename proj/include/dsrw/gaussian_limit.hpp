#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dsrw/error.hpp"
#include "dsrw/increment_law.hpp"
#include "dsrw/quadrature.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"
#include "dsrw/stable.hpp"
#include "dsrw/stats.hpp"

namespace dsrw {

namespace detail {

// Fritsch-Carlson monotone cubic Hermite interpolation.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)), d_(x_.size()) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw DomainError("MonotoneCubic: need matching grids of length >= 2");
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            delta[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        d_[0] = delta[0];
        d_[n - 1] = delta[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                // weighted harmonic mean keeps each piece monotone
                const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
    }

    double operator()(double x) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - x_.begin()), 1, x_.size() - 1) - 1;
        const double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h, t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
               (t3 - t2) * h * d_[i + 1];
    }

private:
    std::vector<double> x_, y_, d_;
};

// Left tail of the spectrally negative law, P{X <= -y}, from the Laplace exponent
// E exp(-s (-X)) = exp(K s^alpha), K = -Gamma(1 - alpha):
//   P{X <= -y} ~ sum_k -K^k Gamma(k alpha) sin(pi k alpha) / (pi k!) y^(-k alpha).
// Asymptotic, so summed up to its smallest term; err is that term.
struct TailSeries {
    double value;
    double error;
};

inline TailSeries stable_left_tail_series(double alpha, double y) {
    const double logk = std::log(-signed_gamma(1.0 - alpha));
    const double ly = std::log(y);
    double sum = 0.0, last = inf;
    for (int k = 1; k <= 400; ++k) {
        const double s = std::sin(std::numbers::pi * k * alpha);
        const double mag = std::exp(k * logk + std::lgamma(k * alpha) - std::lgamma(k + 1.0) - k * alpha * ly) / std::numbers::pi;
        if (mag > last && k > 2) break;
        last = mag;
        sum -= s * mag;
        if (mag < 1e-17 * std::fabs(sum)) break;
    }
    return {sum, last};
}

// Where the series is trusted: its smallest term must be below 1e-13.
inline double stable_series_cut(double alpha) {
    double y = 40.0;
    while (stable_left_tail_series(alpha, y).error > 1e-13) {
        y *= 1.5;
        if (y > 1e6) throw ConvergenceError("stable_cdf: left-tail series never converges", y);
    }
    return -y;
}

// Gil-Pelaez for alpha < 2,
//   F(x) = 1/2 + pi^-1 int_0^inf exp(-A z^alpha) sin(z x + B z^alpha) / z dz,
// on panels no longer than half the local oscillation period, truncated where
// exp(-A Z^alpha) / (alpha A Z^alpha) < 1e-16.
inline double stable_cdf_inversion(double alpha, double x) {
    const SpectrallyNegativeStable law(alpha);
    const double a = law.real_coef(), b = law.imag_coef();
    double zmax = std::pow(30.0 / a, 1.0 / alpha);
    while (std::exp(-a * std::pow(zmax, alpha)) / (alpha * a * std::pow(zmax, alpha)) > 1e-16) zmax *= 1.25;
    auto f = [&](double z) {
        if (z == 0.0) return x;
        const double za = std::pow(z, alpha);
        return std::exp(-a * za) * std::sin(z * x + b * za) / z;
    };
    const double freq = std::fabs(x) + alpha * std::fabs(b) * std::pow(zmax, alpha - 1.0);
    const double width = std::numbers::pi / std::max(1.0, freq);
    const int panels = static_cast<int>(std::ceil(zmax / width));
    double sum = 0.0, err = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double z0 = zmax * i / panels, z1 = zmax * (i + 1) / panels;
        // z^(alpha - 1) has a singular derivative at 0; tanh_sinh absorbs it
        const auto r = i == 0 ? quad::finite("stable_cdf", f, z0, z1, 1e-12) : quad::smooth("stable_cdf", f, z0, z1, 1e-12);
        sum += r.value;
        err += r.error;
    }
    if (err > 1e-8) throw ConvergenceError("stable_cdf: inversion did not converge", err);
    return std::clamp(0.5 + sum / std::numbers::pi, 0.0, 1.0);
}

}  // namespace detail

// P{S_alpha(1) <= x}: normal at alpha = 2, the tail series far left, inversion elsewhere.
inline double stable_cdf(double alpha, double x) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("stable_cdf: alpha must lie in (1, 2]");
    if (alpha == 2.0) return normal_cdf(x);
    if (std::isnan(x)) throw DomainError("stable_cdf: x is NaN");
    thread_local double cached_alpha = 0.0, cached_cut = 0.0;
    if (cached_alpha != alpha) {
        cached_cut = detail::stable_series_cut(alpha);
        cached_alpha = alpha;
    }
    if (x <= cached_cut) return detail::stable_left_tail_series(alpha, -x).value;
    return detail::stable_cdf_inversion(alpha, x);
}

// Phi_alpha on a grid with monotone cubic interpolation; left of the grid the
// tail series, right of it 1 (the right tail is below 1e-12 there).
class StableCdfTable {
public:
    explicit StableCdfTable(double alpha) : alpha_(alpha) {
        if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("StableCdfTable: alpha must lie in (1, 2]");
        if (alpha == 2.0) {
            lo_ = -40.0;
            hi_ = 40.0;
            return;
        }
        lo_ = detail::stable_series_cut(alpha);
        hi_ = 2.0;
        while (1.0 - stable_cdf(alpha, hi_) > 1e-12) hi_ += 1.0;
        // coarse where the density is a slowly varying power
        std::vector<double> xs;
        const double mid = -10.0;
        for (double x = lo_; x < mid; x += 0.05) xs.push_back(x);
        for (double x = mid; x < hi_; x += 0.005) xs.push_back(x);
        xs.push_back(hi_);
        std::vector<double> ys(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = stable_cdf(alpha, xs[i]);
        // round-off at the 1e-12 level may break ties the wrong way
        for (std::size_t i = 1; i < ys.size(); ++i) ys[i] = std::max(ys[i], ys[i - 1]);
        xs_ = xs;
        ys_ = ys;
        spline_ = detail::MonotoneCubic(std::move(xs), std::move(ys));
    }

    double alpha() const noexcept { return alpha_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    const std::vector<double>& grid() const noexcept { return xs_; }
    const std::vector<double>& values() const noexcept { return ys_; }

    double operator()(double x) const {
        if (alpha_ == 2.0) return normal_cdf(x);
        if (x <= lo_) return std::clamp(detail::stable_left_tail_series(alpha_, -x).value, 0.0, 1.0);
        if (x >= hi_) return 1.0;
        return std::clamp(spline_(x), 0.0, 1.0);
    }

private:
    double alpha_;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> xs_, ys_;
    detail::MonotoneCubic spline_;
};

// Tables are built once per alpha and shared read-only.
inline std::shared_ptr<const StableCdfTable> stable_cdf_table(double alpha) {
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const StableCdfTable>> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(alpha); it != cache.end()) return it->second;
    }
    auto t = std::make_shared<const StableCdfTable>(alpha);
    std::lock_guard lock(mu);
    return cache.try_emplace(alpha, std::move(t)).first->second;
}

// A cdf with its trusted core [lo, hi] and the power index of its left tail
// (F(x) ~ |x|^-index; inf when lighter than any power). Outside the core the
// evaluator must still be accurate; the split only guides quadrature.
struct CdfEvaluator {
    std::function<double(double)> cdf;
    double lo = -40.0;
    double hi = 40.0;
    double left_index = inf;
};

inline CdfEvaluator normal_evaluator() { return {[](double x) { return normal_cdf(x); }, -40.0, 40.0, inf}; }

inline CdfEvaluator stable_evaluator(double alpha) {
    if (alpha == 2.0) return normal_evaluator();
    auto t = stable_cdf_table(alpha);
    return {[t](double x) { return (*t)(x); }, t->lo(), t->hi(), alpha};
}

// I_a = int F(x + a) (1 - F(x)) dx = E(theta_1 - theta_2 + a)_+.
inline double i_integral(const CdfEvaluator& f, double a) {
    if (!(f.left_index > 1.0))
        throw DomainError("i_integral: left tail F(x) ~ |x|^-" + std::to_string(f.left_index) + " is not integrable");
    if (!std::isfinite(a)) throw DomainError("i_integral: a must be finite");
    const auto& F = f.cdf;
    auto g = [&](double x) { return F(x + a) * (1.0 - F(x)); };
    const double lo = f.lo - std::fabs(a), hi = f.hi + std::fabs(a);
    const double tol = 1e-10;
    // the stopping rule is relative, so where F or 1 - F is tiny it would chase
    // round-off; the depth cap bounds that while the absolute check still applies
    const unsigned depth = 6;
    // the core in unit pieces so each adaptive call sees a few features at most
    double core = 0.0;
    const int pieces = static_cast<int>(std::ceil(hi - lo));
    for (int i = 0; i < pieces; ++i) {
        const double x0 = lo + (hi - lo) * i / pieces, x1 = lo + (hi - lo) * (i + 1) / pieces;
        core += quad::smooth("i_integral", g, x0, x1, tol, depth).value;
    }
    auto left = [&](double y) { return g(lo - y); };
    auto right = [&](double y) { return g(hi + y); };
    return quad::half_line("i_integral", left, 0.0, tol).value + core + quad::half_line("i_integral", right, 0.0, tol).value;
}

// Var X_alpha(u) = pi^-1 Gamma(1 - 1/alpha) (2 Gamma(1 - alpha) cos(pi alpha/2))^(1/alpha);
// pi^-1/2 at alpha = 2, the normal convention of the limit.
inline double var_const(double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("var_const: alpha must lie in (1, 2]");
    if (alpha == 2.0) return 1.0 / std::sqrt(std::numbers::pi);
    const double c = 2.0 * signed_gamma(1.0 - alpha) * std::cos(std::numbers::pi * alpha / 2.0);
    return std::tgamma(1.0 - 1.0 / alpha) * std::pow(c, 1.0 / alpha) / std::numbers::pi;
}

// E(theta_1 - theta_2)_+ by simulation. D = theta_1 - theta_2 has P{D > y} ~ y^-alpha, so the plain
// estimator has infinite variance; E min(D_+, M) is simulated and E(D - M)_+ ~ M^(1-alpha)/(alpha-1)
// added back (relative error of the tail term O(M^-alpha)).
inline MeanEstimate var_const_monte_carlo(double alpha, std::size_t pairs, RandomStream& rs, double cap = 50.0) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("var_const_monte_carlo: alpha must lie in (1, 2)");
    if (!(cap > 1.0)) throw DomainError("var_const_monte_carlo: truncation level must exceed 1");
    const SpectrallyNegativeStable law(alpha);
    std::vector<double> x(pairs);
    for (auto& v : x) v = std::min(std::max(law.sample(rs) - law.sample(rs), 0.0), cap);
    auto m = batch_means(x);
    m.mean += std::pow(cap, 1.0 - alpha) / (alpha - 1.0);
    return m;
}

struct CovarianceSpec {
    double alpha = 2.0;
    double mu = 1.0;

    CovarianceSpec() = default;
    CovarianceSpec(double alpha_, double mu_) : alpha(alpha_), mu(mu_) { validate(); }

    void validate() const {
        if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("CovarianceSpec: alpha must lie in (1, 2]");
        if (!(mu > 0.0 && std::isfinite(mu))) throw DomainError("CovarianceSpec: mu must be positive and finite");
    }

    // a_alpha = mu^(1/alpha) alpha / (alpha - 1); 2 mu^(1/2) at alpha = 2
    double a() const { return std::pow(mu, 1.0 / alpha) * alpha / (alpha - 1.0); }
};

enum class CovarianceMethod { automatic, quadrature };

// Cov(X(u), X(v)) = int P{S > a (u v v) + y} P{S <= a (u ^ v) + y} dy = I_{-a|u - v|}.
// Min and max sit where the normal closed form below requires them.
inline double cov_X(const CovarianceSpec& spec, double u, double v, CovarianceMethod m = CovarianceMethod::automatic) {
    spec.validate();
    const double ad = spec.a() * std::fabs(u - v);
    if (spec.alpha == 2.0 && m == CovarianceMethod::automatic)
        return std::exp(-ad * ad / 4.0) / std::sqrt(std::numbers::pi) - ad * (1.0 - normal_cdf(ad / std::numbers::sqrt2));
    return i_integral(stable_evaluator(spec.alpha), -ad);
}

// int (Phi(a (u ^ v) + x) - Phi(a (u ^ v) + x) Phi(a (u v v) + x)) dx with Phi evaluated
// directly (no table), integrated in x on its own grid.
inline double y_cov_whitenoise_form(const CovarianceSpec& spec, double u, double v) {
    spec.validate();
    const double alpha = spec.alpha;
    const double c = spec.a() * std::min(u, v), b = spec.a() * std::max(u, v);
    auto phi = [alpha](double x) { return alpha == 2.0 ? normal_cdf(x) : stable_cdf(alpha, x); };
    auto g = [&](double x) {
        const double p = phi(c + x);
        return p - p * phi(b + x);
    };
    // the integrand lives where c + x is left of the light right tail
    double lo = -40.0 - c, hi = 40.0 - b;
    if (alpha < 2.0) {
        const auto t = stable_cdf_table(alpha);
        lo = t->lo() - c;
        hi = t->hi() - b;
    }
    hi = std::max(hi, lo);
    double core = 0.0;
    const int pieces = static_cast<int>(std::ceil((hi - lo) / 2.0));
    for (int i = 0; i < pieces; ++i)
        core += quad::smooth("y_cov_whitenoise_form", g, lo + (hi - lo) * i / pieces, lo + (hi - lo) * (i + 1) / pieces, 1e-9, 6)
                    .value;
    auto left = [&](double y) { return g(lo - y); };
    return quad::half_line("y_cov_whitenoise_form", left, 0.0, 1e-9).value + core;
}

enum class ScalingRegime { a1, a2, a3 };

struct ScalingParams {
    double sigma2 = 1.0;  // a1
    double alpha = 2.0;   // a3, in (1, 2)
    double ell = 1.0;     // a3, constant slowly varying factor
    double mu = 1.0;
};

struct ScalingFunctions {
    ScalingRegime regime;
    double alpha;
    double mu;
    std::function<double(double)> c, h, dh, b;
};

// a1: c(t) = sigma t^(1/2), h(t) = sigma^2 t^2. a3 with constant ell: t ell c^-alpha = 1,
// so c(t) = (ell t)^(1/alpha) and h inverts t / c(t). b(t) = mu^(-1 - 1/alpha) c(h(t)).
inline ScalingFunctions scaling(ScalingRegime regime, const ScalingParams& p) {
    if (!(p.mu > 0.0)) throw DomainError("scaling: mu must be positive");
    switch (regime) {
        case ScalingRegime::a1: {
            if (!(p.sigma2 > 0.0 && std::isfinite(p.sigma2))) throw DomainError("scaling: (A1) needs 0 < sigma^2 < inf");
            const double s2 = p.sigma2, mu = p.mu, s = std::sqrt(s2);
            return {regime, 2.0, mu, [s](double t) { return s * std::sqrt(t); }, [s2](double t) { return s2 * t * t; },
                    [s2](double t) { return 2.0 * s2 * t; }, [s2, mu](double t) { return std::pow(mu, -1.5) * s2 * t; }};
        }
        case ScalingRegime::a3: {
            if (!(p.alpha > 1.0 && p.alpha < 2.0)) throw DomainError("scaling: (A3) needs alpha in (1, 2)");
            if (!(p.ell > 0.0)) throw DomainError("scaling: ell must be positive");
            const double a = p.alpha, l = p.ell, mu = p.mu, e = a / (a - 1.0);
            auto c = [a, l](double t) { return std::pow(l * t, 1.0 / a); };
            auto h = [e, a, l](double t) { return std::pow(t * std::pow(l, 1.0 / a), e); };
            auto dh = [e, h](double t) { return e * h(t) / t; };
            auto b = [a, mu, c, h](double t) { return std::pow(mu, -1.0 - 1.0 / a) * c(h(t)); };
            return {regime, a, mu, c, h, dh, b};
        }
        case ScalingRegime::a2:
            throw NotSupportedError("scaling: (A2) needs a general slowly varying truncated second moment; only (A1) and "
                                    "Pareto-type (A3) are supported");
    }
    throw NotSupportedError("scaling: unknown regime");
}

// Finite variance gives (A1); a Pareto law with index in (1, 2) gives (A3) with ell = x_m^alpha.
inline ScalingFunctions scaling_for(const IncrementLaw& law) {
    const double mu = law.mean();
    if (!std::isfinite(mu)) throw PreconditionError("scaling_for: infinite mean, no stable attraction with alpha > 1");
    const double var = law.variance();
    if (std::isfinite(var)) return scaling(ScalingRegime::a1, {var, 2.0, 1.0, mu});
    if (law.family() == Family::pareto && law.tail().index < 2.0) {
        const double a = law.tail().index;
        return scaling(ScalingRegime::a3, {0.0, a, law.tail().constant, mu});
    }
    throw NotSupportedError("scaling_for: " + law.spec() + " falls under (A2)");
}

// Var N^(t) ~ var_const(alpha) mu^(-1 - 1/alpha) c_alpha(t).
inline double variance_asymptote(const ScalingFunctions& s, double t) {
    return var_const(s.alpha) * std::pow(s.mu, -1.0 - 1.0 / s.alpha) * s.c(t);
}

inline void check_grid(std::span<const double> grid, std::size_t max_len) {
    if (grid.empty() || grid.size() > max_len)
        throw DomainError("grid length must lie in [1, " + std::to_string(max_len) + "]");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw DomainError("grid must be strictly increasing");
}

// Covariance matrix on a grid; stationarity lets equal lags share one evaluation.
inline Eigen::MatrixXd covariance_matrix(const CovarianceSpec& spec, std::span<const double> grid) {
    check_grid(grid, 2048);
    const std::size_t n = grid.size();
    Eigen::MatrixXd k(n, n);
    std::map<double, double> by_lag;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double lag = grid[i] - grid[j];
            auto it = by_lag.find(lag);
            if (it == by_lag.end()) it = by_lag.emplace(lag, cov_X(spec, 0.0, lag)).first;
            k(i, j) = k(j, i) = it->second;
        }
    return k;
}

inline void write_covariance_csv(std::ostream& os, std::span<const double> grid, const Eigen::MatrixXd& k) {
    os.precision(17);
    os << "u,v,cov\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) os << grid[i] << ',' << grid[j] << ',' << k(i, j) << '\n';
}

// Draws of the centered Gaussian vector (X(u_1), ..., X(u_m)) through L L^T = K + jitter I.
class GaussianProcessSampler {
public:
    GaussianProcessSampler(const CovarianceSpec& spec, std::vector<double> grid) : grid_(std::move(grid)) {
        const Eigen::MatrixXd k = covariance_matrix(spec, grid_);
        const auto n = static_cast<Eigen::Index>(grid_.size());
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        double jitter = 1e-10;
        for (int tries = 0; llt.info() != Eigen::Success; ++tries) {
            if (tries > 10) throw FactorizationError("sample_gp: covariance not positive definite at jitter " + std::to_string(jitter / 2));
            llt.compute(k + jitter * Eigen::MatrixXd::Identity(n, n));
            jitter_ = jitter;
            jitter *= 2.0;
        }
        factor_ = llt.matrixL();
    }

    const std::vector<double>& grid() const noexcept { return grid_; }
    double jitter() const noexcept { return jitter_; }

    std::vector<double> draw(RandomStream& rs) const {
        const auto n = factor_.rows();
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = rs.normal();
        const Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;
        return {x.data(), x.data() + n};
    }

private:
    std::vector<double> grid_;
    Eigen::MatrixXd factor_;
    double jitter_ = 0.0;
};

struct GpDraw {
    std::vector<double> values;
    double jitter = 0.0;
};

inline GpDraw sample_gp(const CovarianceSpec& spec, std::vector<double> grid, RandomStream& rs) {
    const GaussianProcessSampler s(spec, std::move(grid));
    return {s.draw(rs), s.jitter()};
}

inline void write_path_csv(std::ostream& os, std::span<const double> grid, std::span<const double> values) {
    os.precision(17);
    os << "u,x\n";
    for (std::size_t i = 0; i < grid.size(); ++i) os << grid[i] << ',' << values[i] << '\n';
}

}  // namespace dsrw
