#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "dsrw/error.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"

namespace dsrw {

// Spectrally negative alpha-stable law with
//   log E exp(i z X) = -|z|^alpha Gamma(1-alpha) (cos(pi alpha/2) + i sin(pi alpha/2) sign z),
// i.e. skewness -1 and sigma^alpha = Gamma(1-alpha) cos(pi alpha/2) in the standard
// parameterization. At alpha = 2 the exponent has a pole; the law is taken as N(0, 1).
class SpectrallyNegativeStable {
public:
    explicit SpectrallyNegativeStable(double alpha) : alpha_(alpha) {
        if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("stable: alpha must lie in (1, 2]");
        if (alpha < 2.0) {
            const double g = signed_gamma(1.0 - alpha);
            real_coef_ = g * std::cos(std::numbers::pi * alpha / 2.0);
            imag_coef_ = g * std::sin(std::numbers::pi * alpha / 2.0);
            // both factors negative
            if (!(real_coef_ > 0.0)) throw DomainError("stable: 2 Gamma(1-alpha) cos(pi alpha/2) must be positive");
        } else {
            real_coef_ = 0.5;
            imag_coef_ = 0.0;
        }
    }

    double alpha() const noexcept { return alpha_; }
    bool is_normal() const noexcept { return alpha_ == 2.0; }

    // A and B in log phi(z) = -A z^alpha - i B z^alpha for z > 0.
    double real_coef() const noexcept { return real_coef_; }
    double imag_coef() const noexcept { return imag_coef_; }

    // c = 2 Gamma(1-alpha) cos(pi alpha/2); equals 1 at alpha = 2 (unit variance).
    double difference_constant() const noexcept { return 2.0 * real_coef_; }

    double scale() const noexcept { return is_normal() ? 1.0 : std::pow(real_coef_, 1.0 / alpha_); }

    std::complex<double> chf(double z) const {
        if (z == 0.0) return 1.0;
        const double za = std::pow(std::fabs(z), alpha_);
        const double sgn = z > 0.0 ? 1.0 : -1.0;
        return std::exp(std::complex<double>(-real_coef_ * za, -sgn * imag_coef_ * za));
    }

    // Chambers-Mallows-Stuck with beta = -1.
    double sample(RandomStream& rs) const {
        if (is_normal()) return rs.normal();
        const double a = alpha_;
        const double v = std::numbers::pi * (rs.uniform_open() - 0.5);
        const double w = rs.exponential();
        const double t = std::tan(std::numbers::pi * a / 2.0);
        const double b = std::atan(-t) / a;
        const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
        const double x = s * std::sin(a * (v + b)) / std::pow(std::cos(v), 1.0 / a) *
                         std::pow(std::cos(v - a * (v + b)) / w, (1.0 - a) / a);
        return scale() * x;
    }

private:
    double alpha_;
    double real_coef_ = 0.0;
    double imag_coef_ = 0.0;
};

inline double sample_stable(const SpectrallyNegativeStable& spec, RandomStream& rs) { return spec.sample(rs); }

// Positive alpha-stable variable with E exp(-z W) = exp(-z^alpha), alpha in (0, 1) (Kanter).
inline double sample_standard_positive_stable(double alpha, RandomStream& rs) {
    const double u = std::numbers::pi * rs.uniform_open();
    const double e = rs.exponential();
    return std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha) *
           std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
}

// Marginal W_alpha(t) of the subordinator with Laplace exponent Gamma(1-alpha) t z^alpha.
class SubordinatorMarginal {
public:
    SubordinatorMarginal(double alpha, double time) : alpha_(alpha), time_(time) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("subordinator: alpha must lie in (0, 1)");
        if (!(time > 0.0)) throw DomainError("subordinator: time must be positive");
    }
    double alpha() const noexcept { return alpha_; }
    double time() const noexcept { return time_; }

    double laplace(double z) const { return std::exp(-std::tgamma(1.0 - alpha_) * time_ * std::pow(z, alpha_)); }

    double sample(RandomStream& rs) const {
        return std::pow(std::tgamma(1.0 - alpha_) * time_, 1.0 / alpha_) * sample_standard_positive_stable(alpha_, rs);
    }

private:
    double alpha_;
    double time_;
};

// W^<-(1) = W(1)^(-alpha) by self-similarity of the subordinator.
inline double sample_mittag_leffler(double alpha, RandomStream& rs) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("mittag_leffler: alpha must lie in (0, 1)");
    return std::pow(SubordinatorMarginal(alpha, 1.0).sample(rs), -alpha);
}

}  // namespace dsrw
