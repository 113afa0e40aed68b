#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "dsrw/lattice.hpp"
#include "dsrw/random_stream.hpp"
#include "dsrw/special.hpp"

using namespace dsrw;

TEST(Discretize, DownRoundingMasses) {
    const auto law = IncrementLaw::exponential(1.0);
    const double h = 0.01;
    const auto l = discretize(law, h, 1000, Rounding::down);
    for (std::size_t j : {0u, 1u, 57u, 999u})
        EXPECT_NEAR(l.mass[j], law.cdf((j + 1) * h) - law.cdf(j * h), 1e-15);
    EXPECT_NEAR(l.lump, std::exp(-10.0), 1e-18);
    EXPECT_NEAR(l.total(), 1.0, 1e-12);
}

TEST(Discretize, ParetoHasNoMassBelowCutoff) {
    const auto l = discretize(IncrementLaw::pareto(2.5, 1.0), 0.01, 1000, Rounding::down);
    for (std::size_t j = 0; j < 100; ++j) EXPECT_EQ(l.mass[j], 0.0);
    EXPECT_GT(l.mass[100], 0.0);
    const auto u = discretize(IncrementLaw::pareto(2.5, 1.0), 0.01, 1000, Rounding::up);
    for (std::size_t j = 0; j <= 100; ++j) EXPECT_EQ(u.mass[j], 0.0);
    EXPECT_NEAR(u.total(), 1.0, 1e-12);
}

TEST(Discretize, BracketShrinksOntoExactTail) {
    const auto law = IncrementLaw::exponential(1.0);
    double prev = 1.0;
    for (double h : {0.1, 0.01, 0.001}) {
        SurvivalTableOptions o;
        o.horizon = 1;
        const auto tab = survival_table(law, 2.0, h, o);
        EXPECT_LE(tab.rows[0].lo, std::exp(-2.0));
        EXPECT_GE(tab.rows[0].hi, std::exp(-2.0));
        EXPECT_LT(tab.rows[0].hi - tab.rows[0].lo, prev);
        prev = tab.rows[0].hi - tab.rows[0].lo;
    }
    EXPECT_LT(prev, 2e-4);
}

TEST(Discretize, PoorCoverageIsConfigurationError) {
    EXPECT_THROW(discretize(IncrementLaw::exponential(1.0), 0.01, 10, Rounding::down), ConfigurationError);
    EXPECT_THROW(discretize(IncrementLaw::exponential(1.0), -1.0, 10, Rounding::down), DomainError);
}

TEST(Discretize, MeanPreservingKeepsMean) {
    const auto law = IncrementLaw::pareto(2.5, 1.0);
    const double h = 0.05;
    const auto l = discretize(law, h, 20000, Rounding::mean_preserving);
    double m = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j) m += j * h * l.mass[j];
    // in-grid mean plus the lump's share E[xi; xi >= (K-1) h] stays within the lump tail
    EXPECT_NEAR(l.total(), 1.0, 1e-12);
    EXPECT_NEAR(m + law.integrated_tail((l.size() - 1) * h) + (l.size() - 1) * h * l.lump, law.mean(), 1e-6);
}

TEST(Convolve, PointMassIsIdentity) {
    const auto a = discretize(IncrementLaw::gamma(2.0, 1.0), 0.01, 3000, Rounding::down);
    const auto id = LatticeLaw::point_mass(0.01, 3000);
    for (auto m : {ConvolutionMethod::direct, ConvolutionMethod::fft}) {
        const auto c = convolve(id, a, m);
        ASSERT_EQ(c.size(), a.size());
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(c.mass[j], a.mass[j], 1e-15);
        EXPECT_NEAR(c.lump, a.lump, 1e-15);
    }
}

TEST(Convolve, TwoExponentialsBracketErlangTwo) {
    const auto law = IncrementLaw::exponential(1.0);
    const double h = 0.005;
    const std::size_t k = 401;  // index >= 401 <=> value > 2
    const auto d = convolve(detail::discretize_unchecked(law, h, k, Rounding::down),
                            detail::discretize_unchecked(law, h, k, Rounding::down));
    const auto u = convolve(detail::discretize_unchecked(law, h, k, Rounding::up),
                            detail::discretize_unchecked(law, h, k, Rounding::up));
    EXPECT_LE(d.lump, 3.0 * std::exp(-2.0));
    EXPECT_GE(u.lump, 3.0 * std::exp(-2.0));
    EXPECT_NEAR(d.total(), 1.0, 1e-12);
    EXPECT_NEAR(u.total(), 1.0, 1e-12);
}

TEST(Convolve, FftMatchesDirect) {
    RandomStream rs(31, 0);
    LatticeLaw a{0.1, std::vector<double>(512), 0.0}, b{0.1, std::vector<double>(512), 0.0};
    double sa = 0, sb = 0;
    for (auto& x : a.mass) sa += (x = rs.uniform());
    for (auto& x : b.mass) sb += (x = rs.uniform());
    for (auto& x : a.mass) x /= 2 * sa;
    for (auto& x : b.mass) x /= 2 * sb;
    a.lump = b.lump = 0.5;
    const auto d = convolve(a, b, ConvolutionMethod::direct);
    const auto f = convolve(a, b, ConvolutionMethod::fft);
    double dev = 0.0;
    for (std::size_t j = 0; j < 512; ++j) dev = std::max(dev, std::fabs(d.mass[j] - f.mass[j]));
    EXPECT_LT(dev, 1e-12);
    EXPECT_NEAR(d.lump, f.lump, 1e-15);
    EXPECT_NEAR(d.total(), 1.0, 1e-12);
}

TEST(Convolve, StepMismatchThrows) {
    EXPECT_THROW(convolve(LatticeLaw::point_mass(0.1, 4), LatticeLaw::point_mass(0.2, 4)), PreconditionError);
}

TEST(Convolve, MassConservationOverManySteps) {
    const auto xi = discretize(IncrementLaw::weibull(0.5, 1.0), 0.02, 5000, Rounding::down);
    auto cur = xi;
    for (int n = 0; n < 40; ++n) {
        const double before = cur.total();
        cur = convolve(cur, xi, ConvolutionMethod::fft);
        // FFT clipping of roundoff negatives changes the total by at most roundoff
        EXPECT_NEAR(cur.total(), before, 1e-12);
    }
    EXPECT_NEAR(cur.total(), 1.0, 1e-8);
}

TEST(SurvivalTable, ExponentialRowsContainErlang) {
    const auto law = IncrementLaw::exponential(1.0);
    const auto tab = survival_table(law, 10.0, 0.002);
    EXPECT_EQ(tab.horizon, 20);
    EXPECT_FALSE(tab.used_fft);
    for (const auto& r : tab.rows) {
        const double q = erlang_survival(r.n, 10.0, 1.0);
        EXPECT_LE(r.lo, q) << r.n;
        EXPECT_GE(r.hi, q) << r.n;
    }
    EXPECT_TRUE(tab.remainder_available);
}

TEST(SurvivalTable, BracketInequalitiesHold) {
    for (const auto& law : {IncrementLaw::exponential(1.0), IncrementLaw::gamma(2.0, 1.0), IncrementLaw::pareto(2.5, 1.0),
                            IncrementLaw::weibull(0.5, 1.0), IncrementLaw::weibull(2.0, 1.0)}) {
        const double t = 6.0;
        const auto tab = survival_table(law, t, 0.005);
        for (const auto& r : tab.rows) {
            // one big minimum and the maximum bound
            EXPECT_GE(r.hi, std::pow(law.survival(t / r.n), double(r.n)) * (1 - 1e-12)) << law.spec() << " " << r.n;
            EXPECT_GE(r.hi, 1.0 - std::pow(law.cdf(t), double(r.n)) - 1e-12) << law.spec() << " " << r.n;
            EXPECT_LE(r.lo, r.hi);
        }
        for (std::size_t i = 1; i < tab.rows.size(); ++i) {
            EXPECT_GE(tab.rows[i].hi, tab.rows[i - 1].hi - 1e-15);
            EXPECT_GE(tab.rows[i].lo, tab.rows[i - 1].lo - 1e-15);
        }
    }
}

TEST(SurvivalTable, WidthHalvesWithStep) {
    const auto law = IncrementLaw::gamma(2.0, 1.0);
    auto width = [&](double h) {
        const auto tab = survival_table(law, 8.0, h);
        double w = 0.0;
        for (const auto& r : tab.rows) w = std::max(w, r.hi - r.lo);
        return w;
    };
    const double w1 = width(0.01), w2 = width(0.005);
    EXPECT_GT(w2 / w1, 0.3);
    EXPECT_LT(w2 / w1, 0.7);
}

TEST(SurvivalTable, FftAndDirectBracketsOverlap) {
    const auto law = IncrementLaw::pareto(2.5, 1.0);
    SurvivalTableOptions od, of;
    od.method = ConvolutionMethod::direct;
    of.method = ConvolutionMethod::fft;
    const auto d = survival_table(law, 20.0, 0.01, od);
    const auto f = survival_table(law, 20.0, 0.01, of);
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        EXPECT_NEAR(d.rows[i].lo, f.rows[i].lo, 1e-10 + 1e-8 * d.rows[i].lo);
        EXPECT_NEAR(d.rows[i].hi, f.rows[i].hi, 1e-10 + 1e-8 * d.rows[i].hi);
        EXPECT_LE(f.rows[i].lo, d.rows[i].lo);
        EXPECT_GE(f.rows[i].hi, d.rows[i].hi);
    }
}

TEST(SurvivalTable, InfiniteMeanNeedsHorizon) {
    const auto law = IncrementLaw::pareto(0.5, 1.0);
    EXPECT_THROW(survival_table(law, 10.0, 0.01), PreconditionError);
    SurvivalTableOptions o;
    o.horizon = 5;
    const auto tab = survival_table(law, 10.0, 0.01, o);
    EXPECT_EQ(tab.rows.size(), 5u);
    // the Laplace bound needs no mean
    o.horizon = 400;
    const auto long_tab = survival_table(law, 10.0, 0.01, o);
    EXPECT_TRUE(long_tab.remainder_available);
    EXPECT_LT(long_tab.remainder, 1e-6);
}

TEST(SurvivalTable, CsvColumns) {
    const auto tab = survival_table(IncrementLaw::exponential(1.0), 1.0, 0.1);
    std::ostringstream os;
    tab.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 9), "n,lo,hi\n1");
}

TEST(Chernoff, BoundsOracleTail) {
    // oracle: sum_{n=61}^{500} -log Q(n, 20), tests/oracles/derived_values.py
    const double oracle = 2.019556762447155e-13;
    const double b = chernoff_remainder(IncrementLaw::exponential(1.0), 20.0, 60);
    EXPECT_GE(b, oracle);
    EXPECT_LT(b, 1e4 * oracle);
}

TEST(Chernoff, MonotoneAndVanishing) {
    for (const auto& law : {IncrementLaw::exponential(1.0), IncrementLaw::pareto(2.5, 1.0), IncrementLaw::weibull(0.5, 1.0)}) {
        const double t = 10.0;
        const long n0 = long(std::ceil(2 * t / law.mean()));
        double prev = inf;
        for (long n = n0; n < 8 * n0; n += n0) {
            const double b = chernoff_remainder(law, t, n);
            EXPECT_LE(b, prev * (1 + 1e-9)) << law.spec();
            prev = b;
        }
        EXPECT_LT(chernoff_remainder(law, t, 50 * n0), 1e-8) << law.spec();
    }
    EXPECT_THROW(chernoff_remainder(IncrementLaw::exponential(1.0), 100.0, 1), PreconditionError);
}

TEST(RenewalV, ExponentialIsIdentity) {
    const auto b = renewal_V(IncrementLaw::exponential(1.0), 5.0, 0.001);
    EXPECT_TRUE(b.contains(5.0)) << b.lo << " " << b.hi;
    EXPECT_LT(b.width(), 0.01);
    const auto z = renewal_V(IncrementLaw::gamma(2.0, 1.0), 0.0, 0.001);
    EXPECT_TRUE(z.contains(0.0));
}

TEST(RenewalV, LordenBracket) {
    for (const auto& law : {IncrementLaw::gamma(2.0, 1.0), IncrementLaw::pareto(2.5, 1.0), IncrementLaw::weibull(2.0, 1.0)}) {
        const double t = 7.0, mu = law.mean();
        const auto b = renewal_V(law, t, 0.002);
        const double upper = law.second_moment() / (mu * mu) - 1.0;
        EXPECT_GE(b.hi - t / mu, -1.0) << law.spec();
        EXPECT_LE(b.lo - t / mu, upper) << law.spec();
    }
}
