#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dsrw/error.hpp"

namespace dsrw {

// sup_x |F_m(x) - F(x)|, checking both sides of every jump.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
    if (samples.size() < 2) throw PreconditionError("ks_statistic: need at least 2 samples");
    std::sort(samples.begin(), samples.end());
    const double m = double(samples.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        const double f = cdf(samples[i]);
        d = std::max({d, f - double(i) / m, double(j) / m - f});
        i = j;
    }
    return d;
}

// Single atom against a continuous reference: max(F(x), 1 - F(x-)).
inline double ks_point_mass(double atom, const std::function<double(double)>& cdf) {
    const double f = cdf(atom);
    return std::max(f, 1.0 - f);
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.size() < 2 || b.size() < 2) throw PreconditionError("ks_two_sample: need at least 2 samples per side");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
    }
    return d;
}

// Integer-valued samples against a continuous reference, empirical CDF read at k + 1/2.
template <class Cdf>
double ks_continuity_corrected(std::vector<long> counts, double center, double scale, Cdf cdf) {
    if (counts.size() < 2) throw PreconditionError("ks_continuity_corrected: need at least 2 samples");
    std::sort(counts.begin(), counts.end());
    const double m = double(counts.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < counts.size()) {
        std::size_t j = i;
        while (j < counts.size() && counts[j] == counts[i]) ++j;
        const double x = (double(counts[i]) + 0.5 - center) / scale;
        d = std::max(d, std::fabs(double(j) / m - cdf(x)));
        i = j;
    }
    return d;
}

struct MeanEstimate {
    double mean;
    double std_error;
};

inline double sample_mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

inline double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size() - 1);
}

// Batch means: contiguous batches in replication order.
inline MeanEstimate batch_means(std::span<const double> x, std::size_t batches = 20) {
    if (batches < 2 || x.size() < batches) throw PreconditionError("batch_means: too few samples for the batch count");
    const std::size_t per = x.size() / batches;
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) means[b] = sample_mean(x.subspan(b * per, per));
    return {sample_mean(x), std::sqrt(sample_variance(means) / double(batches))};
}

}  // namespace dsrw
