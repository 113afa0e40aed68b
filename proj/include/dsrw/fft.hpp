#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "dsrw/error.hpp"

namespace dsrw {

// FFTW planning and plan destruction are not thread-safe; execution with new arrays is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Truncated linear convolution out[k] = sum_{i<=k} a[i] b[k-i], k < K, against a fixed kernel b.
class FftConvolver {
public:
    explicit FftConvolver(std::size_t k) : k_(k) {
        if (k == 0) throw PreconditionError("FftConvolver: empty grid");
        len_ = 1;
        while (len_ < 2 * k_) len_ <<= 1;
        real_ = fftw_alloc_real(len_);
        spec_ = fftw_alloc_complex(len_ / 2 + 1);
        kernel_.resize(len_ / 2 + 1);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(int(len_), real_, spec_, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(int(len_), spec_, real_, FFTW_ESTIMATE);
    }
    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;
    ~FftConvolver() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(real_);
        fftw_free(spec_);
    }

    std::size_t size() const noexcept { return k_; }
    std::size_t transform_length() const noexcept { return len_; }

    void set_kernel(const std::vector<double>& b) {
        load(b);
        fftw_execute(forward_);
        for (std::size_t i = 0; i < len_ / 2 + 1; ++i) kernel_[i] = {spec_[i][0], spec_[i][1]};
        kernel_l2_ = l2(b);
    }

    // Returns a bound on the absolute roundoff of each output entry; negatives are clipped.
    double convolve(const std::vector<double>& a, std::vector<double>& out) {
        load(a);
        fftw_execute(forward_);
        for (std::size_t i = 0; i < len_ / 2 + 1; ++i) {
            const std::complex<double> z = std::complex<double>(spec_[i][0], spec_[i][1]) * kernel_[i];
            spec_[i][0] = z.real();
            spec_[i][1] = z.imag();
        }
        fftw_execute(backward_);
        out.resize(k_);
        const double scale = 1.0 / double(len_);
        for (std::size_t i = 0; i < k_; ++i) out[i] = std::max(0.0, real_[i] * scale);
        return 8.0 * std::log2(double(len_)) * 2.220446049250313e-16 * l2(a) * kernel_l2_ * std::sqrt(double(len_));
    }

private:
    void load(const std::vector<double>& v) {
        const std::size_t m = std::min(v.size(), k_);
        for (std::size_t i = 0; i < m; ++i) real_[i] = v[i];
        for (std::size_t i = m; i < len_; ++i) real_[i] = 0.0;
    }
    static double l2(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    std::size_t k_;
    std::size_t len_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    std::vector<std::complex<double>> kernel_;
    double kernel_l2_ = 0.0;
};

}  // namespace dsrw
