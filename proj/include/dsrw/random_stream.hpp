#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dsrw {

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        const std::uint64_t p0 = std::uint64_t(m0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(m1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    }
    return ctr;
}

// Counter-based stream: the key is the master seed, the stream index sits in the upper
// counter words, so distinct (seed, index) pairs never share a block.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t index) : seed_(seed), index_(index) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t index() const noexcept { return index_; }

    std::uint64_t next_u64() {
        if (pos_ == 2) refill();
        return buffer_[pos_++];
    }

    // [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1): never returns an endpoint.
    double uniform_open() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential() { return -std::log(uniform_open()); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        const double th = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    // Marsaglia-Tsang, unit rate.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::exp(std::log(uniform_open()) / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    void refill() {
        const auto out = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(index_),
                                     std::uint32_t(index_ >> 32)},
                                    {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
        ++block_;
        buffer_[0] = (std::uint64_t(out[0]) << 32) | out[1];
        buffer_[1] = (std::uint64_t(out[2]) << 32) | out[3];
        pos_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t index_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int pos_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dsrw
