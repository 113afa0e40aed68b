#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dsrw/error.hpp"

namespace dsrw::quad {

// Integrators extend their abscissa tables lazily, so each thread owns one.
inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
    thread_local boost::math::quadrature::tanh_sinh<double> rule;
    return rule;
}

inline boost::math::quadrature::exp_sinh<double>& exp_sinh_rule() {
    thread_local boost::math::quadrature::exp_sinh<double> rule;
    return rule;
}

struct Result {
    double value;
    double error;
};

inline void check(const char* who, Result r, double tol) {
    if (!std::isfinite(r.value) || r.error > tol * std::max(1.0, std::fabs(r.value)) * 100.0)
        throw ConvergenceError(std::string(who) + ": quadrature did not reach tolerance", r.error);
}

// Finite interval, tolerant of integrable endpoint singularities.
template <class F>
Result finite(const char* who, F f, double a, double b, double tol = 1e-11) {
    if (a == b) return {0.0, 0.0};
    double err = 0.0, l1 = 0.0;
    const double v = tanh_sinh_rule().integrate(f, a, b, tol, &err, &l1);
    Result r{v, err};
    check(who, r, tol);
    return r;
}

// [a, +inf) for integrands decaying at infinity.
template <class F>
Result half_line(const char* who, F f, double a, double tol = 1e-11) {
    double err = 0.0, l1 = 0.0;
    const double v = exp_sinh_rule().integrate(f, a, std::numeric_limits<double>::infinity(), tol, &err, &l1);
    Result r{v, err};
    check(who, r, tol);
    return r;
}

// Smooth integrand on a finite interval, adaptive Gauss-Kronrod.
template <class F>
Result smooth(const char* who, F f, double a, double b, double tol = 1e-11, unsigned depth = 15) {
    if (a == b) return {0.0, 0.0};
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, depth, tol, &err);
    Result r{v, err};
    check(who, r, tol);
    return r;
}

}  // namespace dsrw::quad
