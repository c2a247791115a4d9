#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ddl/analytic.hpp"
#include "ddl/empirical.hpp"
#include "oracles.hpp"

using namespace ddl;

namespace {

constexpr double meissel_mertens = 0.2614972128476428;

// sum_{p <= P} 1/p from a plain sieve.
double reciprocal_prime_sum(std::uint64_t P)
{
    double s = 0;
    for (auto p : oracle::primes(P))
        s += 1.0 / static_cast<double>(p);
    return s;
}

// m/sigma(m) in (v, u] with m squarefree and sigma computed without the library.
void verify_witness(const witness& w, const mult_func& f, const rational& v, const rational& u)
{
    big_int m = 1, s = 1;
    for (std::size_t i = 0; i < w.primes.size(); ++i) {
        const auto p = w.primes[i];
        ASSERT_TRUE(oracle::is_prime(p));
        if (i > 0) {
            ASSERT_LT(w.primes[i - 1], p);
        }
        ASSERT_GT(oracle::value(f, p).real(), 0.0);
        m *= p;
        s *= p + 1;
    }
    ASSERT_EQ(m, w.m);
    if (m < big_int(1'000'000'000'000ull)) {
        const auto mi = m.convert_to<std::uint64_t>();
        ASSERT_EQ(big_int(oracle::divisor_sum(mi)), w.sigma);
        ASSERT_EQ(oracle::moebius(mi) != 0, true);
    } else {
        ASSERT_EQ(s, w.sigma);
    }
    EXPECT_TRUE(m * v.den > s * v.num);
    EXPECT_TRUE(m * u.den <= s * u.num);
}

} // namespace

TEST(LocalFactors, Examples)
{
    const auto one = mult_func::make(rule::one);
    EXPECT_NEAR(local_factors(one, 2, 0.0, 60).delta.real(), 2.0, 1e-12);
    for (std::uint64_t p : {2, 3, 5, 101, 7919}) {
        const auto v = local_factors(one, p, 0.0, default_series_cutoff(p));
        EXPECT_EQ(v.alpha, v.delta);
        EXPECT_NEAR(v.delta.real(), 1.0 / (1.0 - 1.0 / static_cast<double>(p)), 1e-12);
        EXPECT_EQ(local_factors(mult_func::make(rule::mu_squared), p, 1.0, 10).eta, cplx{});
    }
    EXPECT_THROW(local_factors(one, 2, 0.0, 1), validation_error);
    EXPECT_THROW(local_factors(one, 4, 0.0, 5), validation_error);
}

TEST(LocalFactors, MatchesDirectSeries)
{
    const auto tau = mult_func::make(rule::tau);
    for (std::uint64_t p : {2, 3, 13}) {
        const double t = 2.5;
        cplx alpha{};
        for (unsigned j = 0; j <= 60; ++j) {
            const double pjd = std::pow(static_cast<double>(p), j);
            const double sig = (std::pow(static_cast<double>(p), j + 1.0) - 1.0) / (static_cast<double>(p) - 1.0);
            alpha += (j + 1.0) / pjd * std::polar(1.0, t * std::log(pjd / sig));
        }
        const auto v = local_factors(tau, p, t, default_series_cutoff(p));
        EXPECT_LE(std::abs(v.alpha - alpha), 1e-11 + v.truncation_tail) << p;
    }
}

TEST(MeanValue, ConstantFunctionIsOne)
{
    const auto r = mean_value_product(mult_func::make(rule::one), 1e6);
    EXPECT_NEAR(r.value.real(), 1.0, 1e-14);
    EXPECT_EQ(r.value.imag(), 0.0);
}

TEST(MeanValue, TotientRatioMatchesZetaTwoPartialProducts)
{
    const auto f = mult_func::make(rule::phi_over_n);
    double ref = 1.0;
    for (auto p : oracle::primes(1'000'000))
        ref *= 1.0 - 1.0 / (static_cast<double>(p) * static_cast<double>(p));
    const auto closed = mean_value_product(f, 1e6);
    const auto series = mean_value_product(f, 1e6, false);
    EXPECT_NEAR(closed.value.real(), ref, 1e-12);
    EXPECT_NEAR(series.value.real(), ref, 1e-10);
    EXPECT_NEAR(closed.value.real(), 6.0 / (std::numbers::pi * std::numbers::pi), closed.tail_bound);
    EXPECT_NEAR(closed.value.real(), 0.607927, 1e-3);
}

TEST(MeanValue, ClosedFormAgreesWithSeriesPerPrime)
{
    const auto f = mult_func::make(rule::phi_over_n);
    for (auto p : oracle::primes(10'000)) {
        const auto v = local_factors(f, p, 0.0, default_series_cutoff(p));
        const double pd = static_cast<double>(p);
        ASSERT_NEAR(v.delta.real() * (1.0 - 1.0 / pd), 1.0 - 1.0 / (pd * pd), 1e-10) << p;
    }
}

TEST(MeanValue, EmpiricalMeansAgree)
{
    const auto half = parse_grid("half");
    for (auto [spec, limit] : {std::pair<const char*, double>{"phi_over_n", 6.0 / (std::numbers::pi * std::numbers::pi)},
                               {"sigma_over_n", std::numbers::pi * std::numbers::pi / 6.0}}) {
        const auto f = parse_mult_func(spec);
        const double emp = estimate_df(f, 1'000'000, half).total.real() / 1e6;
        const auto an = mean_value_product(f, 1e6);
        EXPECT_NEAR(an.value.real(), limit, 1e-5) << spec;
        EXPECT_NEAR(emp, limit, 1e-3) << spec;
    }
}

TEST(MeanValue, Errors)
{
    EXPECT_THROW(mean_value_product(mult_func::make(rule::tau), 1e4), validation_error);
    EXPECT_THROW(mean_value_product(mult_func::make(rule::one), 1), validation_error);
    EXPECT_THROW(mean_value_product(mult_func::make(rule::one), 1e12), resource_error);
}

TEST(Wirsing, WithinFivePercentAtOneMillion)
{
    const std::uint64_t x = 1'000'000;
    const double xd = static_cast<double>(x);
    EXPECT_NEAR(wirsing_prediction(mult_func::make(rule::one), xd, xd) / xd, 1.0, 0.05);
    const double sqf = static_cast<double>(oracle::squarefree_count(x));
    EXPECT_NEAR(wirsing_prediction(mult_func::make(rule::mu_squared), xd, xd) / sqf, 1.0, 0.05);
    const double tau = static_cast<double>(oracle::divisor_summatory(x));
    EXPECT_NEAR(wirsing_prediction(mult_func::make(rule::tau), xd, xd) / tau, 1.0, 0.05);
}

TEST(Wirsing, Errors)
{
    EXPECT_THROW(wirsing_prediction(mult_func::make(rule::mu), 1e6, 1e6), validation_error);
    EXPECT_THROW(wirsing_prediction(mult_func::make(rule::one), 1e6, 1e7), validation_error);
    EXPECT_THROW(wirsing_prediction(mult_func::make(rule::one), 2, 2), validation_error);
}

TEST(Psi, BasicProperties)
{
    const auto grid = symmetric_grid(20, 0.05);
    for (const char* spec : {"one", "tau", "r", "two_squares_indicator"}) {
        const auto prof = psi(parse_mult_func(spec), grid, 1e5);
        const std::size_t mid = grid.size() / 2;
        ASSERT_EQ(prof.t[mid], 0.0);
        EXPECT_EQ(prof.psi[mid], cplx(1.0, 0.0));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            ASSERT_EQ(prof.t[k], -prof.t[grid.size() - 1 - k]);
            EXPECT_LE(std::abs(prof.psi[k] - std::conj(prof.psi[grid.size() - 1 - k])), 1e-12) << spec;
            EXPECT_LE(std::abs(prof.psi[k]), 1.0 + prof.tail_bound[k]) << spec;
        }
    }
}

TEST(Psi, UniformGridPathMatchesDirectPath)
{
    const auto f = mult_func::make(rule::tau);
    const auto uniform = linspace_step(0.0, 200.0, 0.05);
    auto irregular = uniform;
    irregular.push_back(200.0123);
    const auto a = psi(f, uniform, 2e4);
    const auto b = psi(f, irregular, 2e4);
    for (std::size_t k = 0; k < uniform.size(); ++k)
        ASSERT_LE(std::abs(a.psi[k] - b.psi[k]), 1e-9) << uniform[k];
}

TEST(Psi, MatchesProductOfLocalFactors)
{
    const auto f = mult_func::make(rule::r);
    const std::vector<double> ts{0.7, -3.0};
    const auto prof = psi(f, ts, 500);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        cplx prod{1.0, 0.0};
        for (auto p : oracle::primes(500)) {
            const auto v = local_factors(f, p, ts[k], default_series_cutoff(p));
            prod *= v.alpha / v.delta;
        }
        EXPECT_LE(std::abs(prof.psi[k] - prod), 1e-12);
    }
}

TEST(Psi, RaisingTheCutoffStaysWithinTheTailBound)
{
    const auto grid = symmetric_grid(200, 0.05);
    const auto f = mult_func::make(rule::one);
    const auto lo = psi(f, grid, 1e5);
    const auto hi = psi(f, grid, 1e6);
    for (std::size_t k = 0; k < grid.size(); ++k)
        ASSERT_LE(std::abs(hi.psi[k] - lo.psi[k]), lo.tail_bound[k]) << grid[k];
}

TEST(Psi, MatchesEmpiricalCharacteristicFunction)
{
    const std::vector<double> ts{0.5, 1.0, 2.0, 5.0};
    const auto f = mult_func::make(rule::one);
    const auto prof = psi(f, ts, 1e6);
    const auto emp = empirical_char_fn(f, 1'000'000, ts);
    for (std::size_t k = 0; k < ts.size(); ++k)
        EXPECT_LE(std::abs(prof.psi[k] - emp[k]), 0.01) << ts[k];
}

TEST(Psi, Errors)
{
    const std::vector<double> ts{1.0};
    EXPECT_THROW(psi(mult_func::make(rule::mu), ts, 100), validation_error);
    EXPECT_THROW(psi(mult_func::make(rule::one), ts, 100, 1), validation_error);
}

TEST(Kappa, DivisorFunctionAtOneHundredMillion)
{
    const double x = 1e8;
    const auto k = mertens_kappa(mult_func::make(rule::tau), x);
    // sum_{p <= x} log p / p = log x - 1.3325... + o(1)
    EXPECT_NEAR(k.weighted_logsum_ratio.real(), 2.0 * (1.0 - 1.3325 / std::log(x)), 0.01);
    EXPECT_NEAR(k.weighted_logsum_ratio.real(), 1.86, 0.02);
    const auto r = mertens_kappa(mult_func::make(rule::r), x);
    EXPECT_NEAR(r.weighted_logsum_ratio.real(), 1.0, 0.15);
}

TEST(Kappa, ReciprocalSumMatchesMertens)
{
    const auto k = mertens_kappa(mult_func::make(rule::one), 1e6);
    EXPECT_NEAR(k.reciprocal_sum.real(), reciprocal_prime_sum(1'000'000), 1e-10);
    EXPECT_NEAR(k.reciprocal_sum.real(), std::log(std::log(1e6)) + meissel_mertens, 0.01);
}

TEST(Kappa, NondecreasingAtSampledCutoffs)
{
    for (const char* spec : {"tau", "one"}) {
        const auto f = parse_mult_func(spec);
        double prev = -1;
        for (double x : {1e3, 1e4, 1e5, 1e6, 1e7}) {
            const double v = mertens_kappa(f, x).weighted_logsum_ratio.real();
            EXPECT_GE(v, prev) << spec << " x=" << x;
            prev = v;
        }
    }
    EXPECT_THROW(mertens_kappa(mult_func::make(rule::one), 5), validation_error);
}

TEST(Halasz, Examples)
{
    EXPECT_EQ(halasz_series(mult_func::make(rule::one), 0.0, 1e5), 0.0);
    const double mu = halasz_series(mult_func::make(rule::mu), 0.0, 1e5);
    EXPECT_NEAR(mu, 2.0 * reciprocal_prime_sum(100'000), 1e-10);
    EXPECT_NEAR(mu, 2.0 * (std::log(std::log(1e5)) + meissel_mertens), 0.02);
    EXPECT_NEAR(mu, 5.40, 0.02);
    EXPECT_EQ(halasz_series(parse_mult_func("lambda:a=1,q=2"), 0.0, 1e5), mu);
    EXPECT_THROW(halasz_series(mult_func::make(rule::tau), 0.0, 100), validation_error);
}

TEST(Continuity, Examples)
{
    EXPECT_EQ(continuity_diagnostic(mult_func::make(rule::one), 1), 0.0);
    const double one = continuity_diagnostic(mult_func::make(rule::one), 1e6);
    EXPECT_NEAR(one, reciprocal_prime_sum(1'000'000), 1e-9);
    EXPECT_NEAR(one, std::log(std::log(1e6)) + meissel_mertens, 0.01);
    double ref = 0;
    for (auto p : oracle::primes(100'000))
        ref += 1.0 / (static_cast<double>(p) + 1.0);
    EXPECT_NEAR(continuity_diagnostic(mult_func::make(rule::mu_squared), 1e5), ref, 1e-9);
    const auto tau = mult_func::make(rule::tau);
    EXPECT_GE(continuity_diagnostic(tau, 1e6) - continuity_diagnostic(tau, 1e4), 0.15);
    EXPECT_THROW(continuity_diagnostic(mult_func::make(rule::mu), 100), validation_error);
}

TEST(Witness, Examples)
{
    const auto one = mult_func::make(rule::one);
    const auto s = mult_func::make(rule::two_squares_indicator);
    auto w = greedy_witness(one, {0, 1}, {1, 1}, 1000);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->m, 1);
    w = greedy_witness(one, {2, 5}, {1, 2}, 1000);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->m, 6);
    EXPECT_EQ(w->sigma, 12);
    w = greedy_witness(s, {2, 5}, {1, 2}, 1000);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->m, 2210);
    EXPECT_EQ(w->sigma, 4536);
    EXPECT_NEAR(w->ratio(), 2210.0 / 4536.0, 1e-15);
}

TEST(Witness, PostconditionHoldsAcrossIntervals)
{
    const std::pair<rational, rational> intervals[] = {
        {{2, 5}, {1, 2}}, {{9, 20}, {1, 2}}, {{3, 10}, {7, 20}}, {{1, 10}, {1, 5}}, {{49, 100}, {1, 2}}, {{0, 1}, {1, 3}}};
    for (const char* spec : {"one", "two_squares_indicator", "r", "principal_char:q=6"}) {
        const auto f = parse_mult_func(spec);
        for (const auto& [v, u] : intervals) {
            for (std::uint64_t cap : {1000ull, 100'000ull}) {
                const auto w = greedy_witness(f, v, u, cap);
                if (!w)
                    continue;
                SCOPED_TRACE(std::string(spec) + " (" + to_string(v) + ", " + to_string(u) + "]");
                verify_witness(*w, f, v, u);
            }
        }
    }
}

TEST(Witness, ExhaustionAndErrors)
{
    const auto one = mult_func::make(rule::one);
    // Far below what the primes up to 10 can reach.
    EXPECT_FALSE(greedy_witness(one, {1, 100}, {1, 50}, 10).has_value());
    EXPECT_THROW(greedy_witness(one, {1, 2}, {1, 2}, 100), validation_error);
    EXPECT_THROW(greedy_witness(one, {1, 2}, {3, 2}, 100), validation_error);
}
