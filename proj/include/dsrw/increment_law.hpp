#pragma once

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "dsrw/error.hpp"
#include "dsrw/quadrature.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"

namespace dsrw {

enum class Family { exponential, gamma, pareto, weibull };

struct Moments {
    double mean;
    double variance;
};

struct DistributionValues {
    double cdf;
    double survival;
    double log_survival;
};

// log_tail: -log P{xi > t} ~ constant * t^index.
// regularly_varying: P{xi > t} = constant * t^-index for large t.
struct TailDescriptor {
    enum class Kind { log_tail, regularly_varying } kind;
    double index;
    double constant;
};

inline std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

class IncrementLaw {
public:
    static IncrementLaw exponential(double rate) {
        require(rate > 0.0 && std::isfinite(rate), "exponential rate must be positive");
        return IncrementLaw(Family::exponential, rate, 0.0);
    }
    static IncrementLaw gamma(double shape, double rate) {
        require(shape > 0.0 && rate > 0.0 && std::isfinite(shape) && std::isfinite(rate),
                "gamma shape and rate must be positive");
        return IncrementLaw(Family::gamma, shape, rate);
    }
    static IncrementLaw pareto(double index, double cutoff) {
        require(index > 0.0 && cutoff > 0.0 && std::isfinite(index) && std::isfinite(cutoff),
                "pareto index and cutoff must be positive");
        return IncrementLaw(Family::pareto, index, cutoff);
    }
    static IncrementLaw weibull(double shape, double scale) {
        require(shape > 0.0 && scale > 0.0 && std::isfinite(shape) && std::isfinite(scale),
                "weibull shape and scale must be positive");
        return IncrementLaw(Family::weibull, shape, scale);
    }

    Family family() const noexcept { return family_; }
    double first() const noexcept { return p1_; }
    double second() const noexcept { return p2_; }

    // Mini-grammar family:p1[,p2]; round-trips through parse_law.
    std::string spec() const {
        switch (family_) {
            case Family::exponential: return "exp:" + format_number(p1_);
            case Family::gamma: return "gamma:" + format_number(p1_) + "," + format_number(p2_);
            case Family::pareto: return "pareto:" + format_number(p1_) + "," + format_number(p2_);
            case Family::weibull: return "weibull:" + format_number(p1_) + "," + format_number(p2_);
        }
        return {};
    }

    bool operator==(const IncrementLaw& o) const = default;

    double mean() const {
        switch (family_) {
            case Family::exponential: return 1.0 / p1_;
            case Family::gamma: return p1_ / p2_;
            case Family::pareto: return p1_ > 1.0 ? p1_ * p2_ / (p1_ - 1.0) : inf;
            case Family::weibull: return std::pow(p2_, -1.0 / p1_) * std::tgamma(1.0 + 1.0 / p1_);
        }
        return inf;
    }

    double second_moment() const {
        switch (family_) {
            case Family::exponential: return 2.0 / (p1_ * p1_);
            case Family::gamma: return p1_ * (p1_ + 1.0) / (p2_ * p2_);
            case Family::pareto: return p1_ > 2.0 ? p1_ * p2_ * p2_ / (p1_ - 2.0) : inf;
            case Family::weibull: return std::pow(p2_, -2.0 / p1_) * std::tgamma(1.0 + 2.0 / p1_);
        }
        return inf;
    }

    double variance() const {
        switch (family_) {
            case Family::exponential: return 1.0 / (p1_ * p1_);
            case Family::gamma: return p1_ / (p2_ * p2_);
            case Family::pareto:
                return p1_ > 2.0 ? p2_ * p2_ * p1_ / ((p1_ - 1.0) * (p1_ - 1.0) * (p1_ - 2.0)) : inf;
            case Family::weibull: {
                const double m = mean();
                return second_moment() - m * m;
            }
        }
        return inf;
    }

    Moments moments() const { return {mean(), variance()}; }

    // Computed from the closed form, never as log(1 - cdf).
    double log_survival(double t) const {
        if (t <= 0.0) return 0.0;
        switch (family_) {
            case Family::exponential: return -p1_ * t;
            case Family::gamma: return log_gamma_q(p1_, p2_ * t);
            case Family::pareto: return t <= p2_ ? 0.0 : -p1_ * std::log(t / p2_);
            case Family::weibull: return -p2_ * std::pow(t, p1_);
        }
        return 0.0;
    }

    double survival(double t) const { return std::exp(log_survival(t)); }

    double cdf(double t) const {
        if (t <= 0.0) return 0.0;
        const double ls = log_survival(t);
        return -std::expm1(ls);
    }

    DistributionValues distribution_functions(double t) const {
        const double ls = log_survival(t);
        return {t <= 0.0 ? 0.0 : -std::expm1(ls), std::exp(ls), ls};
    }

    // E(xi - a)_+.
    double integrated_tail(double a) const {
        const double mu = mean();
        if (a <= 0.0) return mu - a;
        switch (family_) {
            case Family::exponential: return std::exp(-p1_ * a) / p1_;
            case Family::gamma: {
                const double x = p2_ * a;
                const double q = std::exp(log_gamma_q(p1_, x));
                const double atom = std::exp(-x + p1_ * std::log(x) - std::lgamma(p1_ + 1.0));
                return std::max(0.0, (mu - a) * q + mu * atom);
            }
            case Family::pareto:
                if (!(p1_ > 1.0)) return inf;
                if (a < p2_) return mu - a;
                return std::pow(p2_, p1_) * std::pow(a, 1.0 - p1_) / (p1_ - 1.0);
            case Family::weibull: {
                const double k = 1.0 / p1_;
                return std::pow(p2_, -k) * k * std::tgamma(k) * std::exp(log_gamma_q(k, p2_ * std::pow(a, p1_)));
            }
        }
        return inf;
    }

    // sup{s >= 0 : E exp(s xi) < inf}.
    double mgf_domain_sup() const {
        switch (family_) {
            case Family::exponential: return p1_;
            case Family::gamma: return p2_;
            case Family::pareto: return 0.0;
            case Family::weibull: return p1_ > 1.0 ? inf : (p1_ == 1.0 ? p2_ : 0.0);
        }
        return 0.0;
    }

    // E exp(-u xi), u >= 0.
    double laplace(double u) const {
        if (u < 0.0) throw DomainError("laplace: argument must be nonnegative");
        if (u == 0.0) return 1.0;
        switch (family_) {
            case Family::exponential: return p1_ / (p1_ + u);
            case Family::gamma: return std::pow(p2_ / (p2_ + u), p1_);
            case Family::pareto: {
                // xi = x_m v^(-1/alpha), v uniform on (0, 1)
                const double a = p1_, xm = p2_;
                auto f = [=](double v) { return v <= 0.0 ? 0.0 : std::exp(-u * xm * std::pow(v, -1.0 / a)); };
                return quad::finite("pareto laplace", f, 0.0, 1.0).value;
            }
            case Family::weibull: {
                if (p1_ == 1.0) return p2_ / (p2_ + u);
                // xi = (y / c)^(1/alpha), y standard exponential
                const double a = p1_, c = p2_;
                auto f = [=](double y) { return std::exp(-u * std::pow(y / c, 1.0 / a) - y); };
                return quad::half_line("weibull laplace", f, 0.0).value;
            }
        }
        return 0.0;
    }

    // log E exp(-u xi) without underflow for supports bounded away from 0.
    double log_laplace(double u) const {
        if (family_ == Family::pareto && u > 0.0) {
            const double a = p1_, xm = p2_;
            auto f = [=](double v) { return v <= 0.0 ? 0.0 : std::exp(-u * xm * (std::pow(v, -1.0 / a) - 1.0)); };
            return -u * xm + std::log(quad::finite("pareto laplace", f, 0.0, 1.0).value);
        }
        return std::log(laplace(u));
    }

    double log_mgf(double s) const {
        if (s == 0.0) return 0.0;
        if (s < 0.0) return log_laplace(-s);
        const double sup = mgf_domain_sup();
        if (s >= sup) return inf;
        switch (family_) {
            case Family::exponential: return -std::log1p(-s / p1_);
            case Family::gamma: return -p1_ * std::log1p(-s / p2_);
            case Family::weibull: {
                if (p1_ == 1.0) return -std::log1p(-s / p2_);
                const double a = p1_, c = p2_, r = 1.0 / a;
                auto phi = [=](double y) { return s * std::pow(y / c, r) - y; };
                const double ystar = std::pow(s * std::pow(c, -r) / a, a / (a - 1.0));
                const double m = ystar * (1.0 / r - 1.0);  // phi(ystar), positive since a > 1
                // tanh_sinh clusters at the peak endpoint; past it, step in units of the curvature width
                const double curv = s * r * (1.0 - r) * std::pow(ystar / c, r) / (ystar * ystar);
                const double w = 1.0 / std::sqrt(curv);
                auto f = [=](double y) { return std::exp(phi(y) - m); };
                // phi(ystar (1 + d)) - phi(ystar) = ystar ((1 + d)^r - 1) / r - ystar d, free of cancellation in m
                auto g = [=](double z) {
                    const double d = std::max(w * z / ystar, -1.0);
                    if (std::fabs(d) < 0.1) {
                        // binomial series from the quadratic term; the closed form cancels here
                        double term = (r - 1.0) * d * d / 2.0, sum = 0.0;
                        for (int k = 2; std::fabs(term) > 1e-17 * std::fabs(sum) && k < 60; ++k) {
                            sum += term;
                            term *= (r - k) * d / (k + 1);
                        }
                        return std::exp(ystar * sum);
                    }
                    const double l = d == -1.0 ? -inf : std::log1p(d);
                    return std::exp(ystar * (std::expm1(r * l) / r - d));
                };
                // phi is concave, so once g drops below e^-700 the rest of [0, ystar] is negligible
                double zl = 1.0;
                while (zl * w < ystar && g(-zl) > 1e-304) zl *= 2.0;
                const double head = zl * w < ystar ? w * quad::smooth("weibull mgf", g, -zl, 0.0, 1e-10).value
                                                   : quad::finite("weibull mgf", f, 0.0, ystar, 1e-10).value;
                const double tail = w * quad::half_line("weibull mgf", g, 0.0, 1e-10).value;
                return m + std::log(head + tail);
            }
            case Family::pareto: return inf;
        }
        return inf;
    }

    double mgf(double s) const { return std::exp(log_mgf(s)); }

    TailDescriptor tail() const {
        using K = TailDescriptor::Kind;
        switch (family_) {
            case Family::exponential: return {K::log_tail, 1.0, p1_};
            case Family::gamma: return {K::log_tail, 1.0, p2_};
            case Family::pareto: return {K::regularly_varying, p1_, std::pow(p2_, p1_)};
            case Family::weibull: return {K::log_tail, p1_, p2_};
        }
        return {K::log_tail, 1.0, 1.0};
    }

    double sample(RandomStream& rs) const {
        switch (family_) {
            case Family::exponential: return rs.exponential() / p1_;
            case Family::gamma: return rs.gamma(p1_) / p2_;
            case Family::pareto: return p2_ * std::exp(rs.exponential() / p1_);
            case Family::weibull: return std::pow(rs.exponential() / p2_, 1.0 / p1_);
        }
        return 0.0;
    }

    // Closed-form law of S_n exists (Gamma(n k, lambda)).
    bool has_gamma_sums() const { return family_ == Family::exponential || family_ == Family::gamma; }

    // Gamma shape and rate of S_n for the gamma family.
    std::pair<double, double> gamma_sum_params(long n) const {
        if (family_ == Family::exponential) return {double(n), p1_};
        if (family_ == Family::gamma) return {double(n) * p1_, p2_};
        throw PreconditionError("gamma_sum_params: family has no closed-form sums");
    }

private:
    IncrementLaw(Family f, double a, double b) : family_(f), p1_(a), p2_(b) {}

    static void require(bool ok, const char* msg) {
        if (!ok) throw DomainError(msg);
    }

    Family family_;
    double p1_;
    double p2_;
};

inline Moments moments(const IncrementLaw& law) { return law.moments(); }

inline DistributionValues distribution_functions(const IncrementLaw& law, double t) {
    return law.distribution_functions(t);
}

inline double mgf(const IncrementLaw& law, double s) { return law.mgf(s); }

inline double mgf_domain_sup(const IncrementLaw& law) { return law.mgf_domain_sup(); }

inline double sample(const IncrementLaw& law, RandomStream& rs) { return law.sample(rs); }

// Parses exp:RATE, gamma:SHAPE,RATE, pareto:INDEX,CUTOFF, weibull:SHAPE,SCALE.
inline IncrementLaw parse_law(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigurationError("law '" + std::string(text) + "': expected family:params");
    const std::string_view fam = text.substr(0, colon);
    std::vector<double> params;
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view tok = rest.substr(0, comma);
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw ConfigurationError("law '" + std::string(text) + "': bad number '" + std::string(tok) + "'");
        params.push_back(v);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    auto need = [&](std::size_t k) {
        if (params.size() != k)
            throw ConfigurationError("law '" + std::string(text) + "': expected " + std::to_string(k) + " parameter(s)");
    };
    try {
        if (fam == "exp" || fam == "exponential") {
            need(1);
            return IncrementLaw::exponential(params[0]);
        }
        if (fam == "gamma") {
            need(2);
            return IncrementLaw::gamma(params[0], params[1]);
        }
        if (fam == "pareto") {
            need(2);
            return IncrementLaw::pareto(params[0], params[1]);
        }
        if (fam == "weibull") {
            need(2);
            return IncrementLaw::weibull(params[0], params[1]);
        }
    } catch (const DomainError& e) {
        throw ConfigurationError("law '" + std::string(text) + "': " + e.what());
    }
    throw ConfigurationError("law '" + std::string(text) + "': unknown family '" + std::string(fam) + "'");
}

}  // namespace dsrw
