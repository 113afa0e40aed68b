#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dsrw/error.hpp"
#include "dsrw/fft.hpp"
#include "dsrw/increment_law.hpp"
#include "dsrw/lattice.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"

namespace dsrw {

enum class SampleMethod { automatic, closed_form, lattice_inversion, naive_sum };

inline const char* to_string(SampleMethod m) {
    switch (m) {
        case SampleMethod::automatic: return "automatic";
        case SampleMethod::closed_form: return "closed-form";
        case SampleMethod::lattice_inversion: return "lattice-inversion";
        case SampleMethod::naive_sum: return "naive-sum";
    }
    return "?";
}

// log P{S_n > t} and log P{S_n <= t} for the gamma family.
inline double log_sum_survival(const IncrementLaw& law, long n, double t) {
    const auto [shape, rate] = law.gamma_sum_params(n);
    if (law.family() == Family::exponential) return log_erlang_q(n, rate * t);
    return log_gamma_q(shape, rate * t);
}

inline double log_sum_cdf(const IncrementLaw& law, long n, double t) {
    const auto [shape, rate] = law.gamma_sum_params(n);
    if (law.family() == Family::exponential) return log_erlang_p(n, rate * t);
    return log_gamma_p(shape, rate * t);
}

struct SamplerOptions {
    SampleMethod method = SampleMethod::automatic;
    long horizon_hint = 1000;       // sizes the lattice window
    double x_max = 0.0;             // 0: derived from horizon_hint
    std::size_t grid_points = 8192;  // lattice cells on [0, x_max)
    std::size_t memory_cap = std::size_t(1) << 25;  // stored CDF values
    long rejection_cap = 100000000;
};

// Draws independent copies of S_n for arbitrary n.
// Lattice inversion: the down-rounded index J = sum floor(xi_i / h) satisfies J h <= S_n < J h + n h,
// so S_n is drawn as J h + n h V with V uniform; the CDF bias is at most the mass of one such window.
// Draws with J beyond the grid are exact: naive sums rejected until their index leaves the grid.
class DecoupledSampler {
public:
    explicit DecoupledSampler(const IncrementLaw& law, SamplerOptions opt = {}) : law_(law), opt_(opt) {
        method_ = opt.method;
        if (method_ == SampleMethod::automatic)
            method_ = law.has_gamma_sums() ? SampleMethod::closed_form : SampleMethod::lattice_inversion;
        if (method_ == SampleMethod::closed_form && !law.has_gamma_sums())
            throw PreconditionError("DecoupledSampler: closed form needs the gamma family");
        if (method_ == SampleMethod::lattice_inversion && !std::isfinite(law.mean())) {
            method_ = SampleMethod::naive_sum;
            warning_ = "infinite mean: lattice path unavailable, naive summation costs O(n) per value";
        }
        if (method_ == SampleMethod::lattice_inversion) init_lattice();
    }

    SampleMethod method() const noexcept { return method_; }
    const std::string& warning() const noexcept { return warning_; }
    const IncrementLaw& law() const noexcept { return law_; }
    double step() const noexcept { return h_; }

    // worst-case CDF shift of the jittered draw, bounded by the window width n h
    double bias_bound(long n) const { return method_ == SampleMethod::lattice_inversion ? double(n) * h_ : 0.0; }

    // Extends the lattice rows through n; safe to call concurrently with draw.
    void prepare(long n) {
        if (method_ != SampleMethod::lattice_inversion) return;
        std::unique_lock lock(mutex_);
        while (long(rows_.size()) < n) extend();
    }

    double draw(long n, RandomStream& rs) {
        if (n < 1) throw DomainError("DecoupledSampler: n must be >= 1");
        switch (method_) {
            case SampleMethod::closed_form: {
                const auto [shape, rate] = law_.gamma_sum_params(n);
                return rs.gamma(shape) / rate;
            }
            case SampleMethod::naive_sum: return naive(n, rs);
            default: break;
        }
        std::shared_lock lock(mutex_);
        if (long(rows_.size()) < n) {
            lock.unlock();
            prepare(n);
            lock.lock();
        }
        const Row& row = rows_[n - 1];
        const double u = rs.uniform();
        const auto it = std::upper_bound(row.cdf.begin(), row.cdf.end(), u);
        if (u >= 1.0 - row.lump || it == row.cdf.end()) {
            lock.unlock();
            return beyond_grid(n, rs);
        }
        const std::size_t j = row.first + std::size_t(it - row.cdf.begin());
        return (double(j) + double(n) * rs.uniform()) * h_;
    }

private:
    struct Row {
        std::size_t first;
        std::vector<double> cdf;  // P{J <= first + i}
        double lump;
    };

    void init_lattice() {
        double x = opt_.x_max;
        if (!(x > 0.0)) {
            const double n = double(std::max<long>(1, opt_.horizon_hint));
            const double var = law_.variance();
            x = n * law_.mean() + (std::isfinite(var) ? 8.0 * std::sqrt(n * var) : 2.0 * n * law_.mean());
        }
        k_ = std::max<std::size_t>(16, opt_.grid_points);
        h_ = x / double(k_);
        xi_ = detail::discretize_unchecked(law_, h_, k_, Rounding::down);
        tails_ = xi_.tails();
        if (k_ > 2048) {
            fc_ = std::make_unique<FftConvolver>(k_);
            fc_->set_kernel(xi_.mass);
        }
        cur_ = xi_;
    }

    void extend() {
        if (!rows_.empty()) {
            const double lump = detail::convolved_lump(cur_, tails_, k_);
            if (fc_) fc_->convolve(cur_.mass, next_);
            else detail::direct_convolve(cur_.mass, xi_.mass, next_, k_);
            cur_.mass.swap(next_);
            cur_.lump = lump;
        }
        Row row{0, {}, cur_.lump};
        while (row.first < k_ && cur_.mass[row.first] == 0.0) ++row.first;
        double acc = 0.0;
        for (std::size_t j = row.first; j < k_; ++j) row.cdf.push_back(acc += cur_.mass[j]);
        stored_ += row.cdf.size();
        if (stored_ > opt_.memory_cap)
            throw CapReachedError("DecoupledSampler: lattice rows exceed the memory cap; lower horizon or grid_points");
        rows_.push_back(std::move(row));
    }

    double naive(long n, RandomStream& rs) const {
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += law_.sample(rs);
        return s;
    }

    // exact conditional law of S_n given J >= K
    double beyond_grid(long n, RandomStream& rs) const {
        for (long tries = 0; tries < opt_.rejection_cap; ++tries) {
            double s = 0.0, j = 0.0;
            for (long i = 0; i < n; ++i) {
                const double x = law_.sample(rs);
                s += x;
                j += std::floor(x / h_);
            }
            if (j >= double(k_)) return s;
        }
        throw CapReachedError("DecoupledSampler: rejection cap reached beyond the lattice window");
    }

    IncrementLaw law_;
    SamplerOptions opt_;
    SampleMethod method_;
    std::string warning_;
    double h_ = 0.0;
    std::size_t k_ = 0;
    LatticeLaw xi_, cur_;
    std::vector<double> tails_, next_;
    std::unique_ptr<FftConvolver> fc_;
    std::deque<Row> rows_;
    std::size_t stored_ = 0;
    mutable std::shared_mutex mutex_;
};

struct DecoupledPath {
    std::vector<double> values;
    SampleMethod method = SampleMethod::automatic;
    double bias_bound = 0.0;
    std::string warning;

    long horizon() const noexcept { return long(values.size()); }

    // number of n <= N with s_hat_n <= t
    long count_at_or_below(double t) const {
        return long(std::count_if(values.begin(), values.end(), [t](double v) { return v <= t; }));
    }

    std::vector<double> running_max() const {
        std::vector<double> m(values.size());
        double cur = -inf;
        for (std::size_t i = 0; i < values.size(); ++i) m[i] = cur = std::max(cur, values[i]);
        return m;
    }

    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "n,s_hat,running_max\n";
        const auto m = running_max();
        for (std::size_t i = 0; i < values.size(); ++i) os << i + 1 << ',' << values[i] << ',' << m[i] << '\n';
    }
};

inline DecoupledPath sample_decoupled(DecoupledSampler& sampler, long n, RandomStream& rs) {
    if (n < 1) throw DomainError("sample_decoupled: N must be >= 1");
    sampler.prepare(n);
    DecoupledPath p;
    p.method = sampler.method();
    p.warning = sampler.warning();
    p.bias_bound = sampler.bias_bound(n);
    p.values.resize(n);
    for (long i = 1; i <= n; ++i) p.values[i - 1] = sampler.draw(i, rs);
    return p;
}

inline DecoupledPath sample_decoupled(const IncrementLaw& law, long n, RandomStream& rs,
                                      SampleMethod method = SampleMethod::automatic) {
    SamplerOptions opt;
    opt.method = method;
    opt.horizon_hint = n;
    DecoupledSampler s(law, opt);
    return sample_decoupled(s, n, rs);
}

// Indices 1..n_certain are counted with certainty, Bernoulli(p) for the next p.size() indices,
// and the rest are dropped; both truncations cost at most eps/2 in total variation.
struct CountingModel {
    double t = 0.0;
    long n_certain = 0;
    std::vector<double> p;
    double tv_bound = 0.0;
    bool exact_marginals = true;

    long horizon() const noexcept { return n_certain + long(p.size()); }

    long sample(RandomStream& rs) const {
        long c = n_certain;
        for (double q : p) c += rs.uniform() < q;
        return c;
    }

    double mean() const {
        double s = double(n_certain);
        for (double q : p) s += q;
        return s;
    }

    double variance() const {
        double s = 0.0;
        for (double q : p) s += q * (1.0 - q);
        return s;
    }
};

struct CountingOptions {
    double h = 0.0;  // lattice step for non-gamma laws; 0: level / 16384
    long max_horizon = 100000000;
};

namespace detail {

// P{S_n <= level} for n = 1..N: exact for the gamma family, mean-preserving lattice estimates otherwise.
inline std::vector<double> sum_cdfs(const IncrementLaw& law, double level, long n, double h, bool& exact) {
    std::vector<double> p(n);
    if (law.has_gamma_sums()) {
        for (long i = 1; i <= n; ++i) p[i - 1] = std::exp(log_sum_cdf(law, i, level));
        return p;
    }
    exact = false;
    if (level <= 0.0) return p;
    if (!(h > 0.0)) h = level / 16384.0;
    const auto surv = survival_estimates(law, level, h, n, Rounding::mean_preserving);
    for (long i = 0; i < n; ++i) p[i] = std::clamp(1.0 - surv[i], 0.0, 1.0);
    return p;
}

inline long certain_prefix(const std::vector<double>& p, double budget, double& used) {
    long k = 0;
    used = 0.0;
    while (k < long(p.size()) && used + (1.0 - p[k]) <= budget) used += 1.0 - p[k++];
    return k;
}

}  // namespace detail

inline CountingModel counting_model(const IncrementLaw& law, double t, double eps, CountingOptions opt = {}) {
    if (!(t >= 0.0)) throw DomainError("counting: t must be nonnegative");
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("counting: eps must lie in (0, 1)");
    if (!std::isfinite(law.mean())) throw PreconditionError("counting: the truncation bound needs a finite mean");
    const long n = chernoff_horizon(law, t, 0.5 * eps, std::max<long>(1, long(t / law.mean())));
    if (n > opt.max_horizon) throw CapReachedError("counting: eps unreachable within the memory cap");
    CountingModel m;
    m.t = t;
    auto p = detail::sum_cdfs(law, t, n, opt.h, m.exact_marginals);
    double used = 0.0;
    m.n_certain = detail::certain_prefix(p, 0.5 * eps, used);
    m.p.assign(p.begin() + m.n_certain, p.end());
    m.tv_bound = used + chernoff_cdf_tail(law, t, n);
    return m;
}

inline long counting(const IncrementLaw& law, double t, RandomStream& rs, double eps) {
    return counting_model(law, t, eps).sample(rs);
}

// Joint counts at several levels. One uniform per index compared with P{S_n <= level_j} at every level
// reproduces the joint law of (1{S_hat_n <= level_j})_j, as S_hat_n = F_n^{-1}(U_n).
struct MultiLevelCountingModel {
    std::vector<double> levels;
    long n_certain = 0;
    std::vector<std::vector<double>> p;  // p[i][j] = P{S_{n_certain+1+i} <= levels[j]}
    double tv_bound = 0.0;
    bool exact_marginals = true;

    std::vector<long> sample(RandomStream& rs) const {
        std::vector<long> c(levels.size(), n_certain);
        for (const auto& row : p) {
            const double u = rs.uniform();
            for (std::size_t j = 0; j < row.size(); ++j) c[j] += u < row[j];
        }
        return c;
    }
};

inline MultiLevelCountingModel multi_level_counting_model(const IncrementLaw& law, std::vector<double> levels, double eps,
                                                          CountingOptions opt = {}) {
    if (levels.empty()) throw DomainError("multi_level_counting: need at least one level");
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("multi_level_counting: eps must lie in (0, 1)");
    if (!std::isfinite(law.mean())) throw PreconditionError("multi_level_counting: needs a finite mean");
    std::sort(levels.begin(), levels.end());
    if (levels.front() < 0.0) throw DomainError("multi_level_counting: levels must be nonnegative");
    const double top = levels.back();
    const long n = chernoff_horizon(law, top, 0.5 * eps, std::max<long>(1, long(top / law.mean())));
    if (n > opt.max_horizon) throw CapReachedError("multi_level_counting: eps unreachable within the memory cap");
    MultiLevelCountingModel m;
    m.levels = levels;
    std::vector<std::vector<double>> cols;
    for (double lv : levels) cols.push_back(detail::sum_cdfs(law, lv, n, opt.h, m.exact_marginals));
    // counting index n at every level is exact when it is certain at the lowest one
    double used = 0.0;
    m.n_certain = detail::certain_prefix(cols.front(), 0.5 * eps, used);
    for (long i = m.n_certain; i < n; ++i) {
        std::vector<double> row(levels.size());
        for (std::size_t j = 0; j < levels.size(); ++j) row[j] = cols[j][i];
        // CDFs are nondecreasing in the level; estimates are forced to agree
        for (std::size_t j = 1; j < row.size(); ++j) row[j] = std::max(row[j], row[j - 1]);
        m.p.push_back(std::move(row));
    }
    m.tv_bound = used + chernoff_cdf_tail(law, top, n);
    return m;
}

struct PassageResult {
    double t = 0.0;
    long tau = 0;
    std::vector<double> maxima;  // m_1..m_tau
};

inline constexpr long passage_cap = 1000000000;

inline PassageResult first_passage(DecoupledSampler& sampler, double t, RandomStream& rs, long cap = passage_cap) {
    if (!(t >= 0.0)) throw DomainError("first_passage: t must be nonnegative");
    PassageResult r;
    r.t = t;
    double m = -inf;
    for (long n = 1; n <= cap; ++n) {
        m = std::max(m, sampler.draw(n, rs));
        r.maxima.push_back(m);
        if (m > t) {
            r.tau = n;
            return r;
        }
    }
    throw CapReachedError("first_passage: iteration cap reached before the maxima exceeded t");
}

inline PassageResult first_passage(const IncrementLaw& law, double t, RandomStream& rs, long cap = passage_cap) {
    SamplerOptions opt;
    if (std::isfinite(law.mean())) opt.horizon_hint = std::max<long>(16, long(1.5 * t / law.mean()) + 16);
    DecoupledSampler s(law, opt);
    return first_passage(s, t, rs, cap);
}

// Bracket on P{tau_hat(t) > n} = prod_{k<=n} P{S_k <= t}, and on the dominating P{S_n <= t}.
struct PassageTail {
    double lo;
    double hi;
    double walk_lo;
    double walk_hi;
};

inline PassageTail passage_tail_exact(const IncrementLaw& law, double t, long n, double h = 1e-3) {
    if (n < 1) throw DomainError("passage_tail_exact: n must be >= 1");
    if (!(t >= 0.0)) throw DomainError("passage_tail_exact: t must be nonnegative");
    std::vector<double> cdf_lo(n), cdf_hi(n);
    if (law.has_gamma_sums()) {
        for (long k = 1; k <= n; ++k) {
            const double c = std::exp(log_sum_cdf(law, k, t));
            cdf_lo[k - 1] = std::max(0.0, c * (1.0 - 1e-12));
            cdf_hi[k - 1] = std::min(1.0, c * (1.0 + 1e-12));
        }
    } else {
        SurvivalTableOptions o;
        o.horizon = n;
        o.attach_remainder = false;
        const auto tab = survival_table(law, t, h, o);
        for (long k = 0; k < n; ++k) {
            cdf_lo[k] = 1.0 - tab.rows[k].hi;
            cdf_hi[k] = 1.0 - tab.rows[k].lo;
        }
    }
    double lo = 1.0, hi = 1.0;
    for (long k = 0; k < n; ++k) {
        lo *= cdf_lo[k];
        hi *= cdf_hi[k];
    }
    return {lo, hi, cdf_lo[n - 1], cdf_hi[n - 1]};
}

// tau(t) = inf{n : S_n > t} for the ordinary walk.
inline long coupled_first_passage(const IncrementLaw& law, double t, RandomStream& rs, long cap = passage_cap) {
    if (!(t >= 0.0)) throw DomainError("coupled_first_passage: t must be nonnegative");
    double s = 0.0;
    for (long n = 1; n <= cap; ++n) {
        s += law.sample(rs);
        if (s > t) return n;
    }
    throw CapReachedError("coupled_first_passage: iteration cap reached");
}

}  // namespace dsrw
