#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "multfunc.hpp"
#include "rational.hpp"
#include "sieve.hpp"

namespace ddl {

enum class normalization : std::uint8_t {
    per_x,     // (1/x) sum, the D_f estimator
    per_total, // (1/S(f;x)) sum, the D~_f estimator
    per_pi_r,  // 1/(pi R), lattice points in the disc
};

inline std::string_view to_string(normalization m)
{
    switch (m) {
    case normalization::per_x: return "df";
    case normalization::per_total: return "dtilde";
    case normalization::per_pi_r: return "lattice";
    }
    return "?";
}

struct weighted_cdf_estimate {
    std::uint64_t x = 0; // cutoff (R for the lattice count)
    threshold_grid grid;
    normalization mode = normalization::per_x;
    std::string function;
    std::vector<cplx> raw;                              // sum of f(n) over n <= x, n/sigma(n) <= u_k
    std::optional<std::vector<std::int64_t>> exact_raw; // same sums, exact, when f is integer valued
    cplx total{};                                       // sum of f(n) over all n <= x
    cplx normalizer{};
    std::vector<cplx> values;

    const cplx& value_at(const rational& u) const { return values[grid.index_of(u)]; }
    const cplx& raw_at(const rational& u) const { return raw[grid.index_of(u)]; }
};

namespace detail {

// Histogram over grid buckets; bucket K = grid.size() collects n/sigma(n) above
// every threshold.
struct cdf_accumulator {
    const threshold_grid* grid = nullptr;
    bool exact = false;
    std::vector<cplx> hist;
    std::vector<std::int64_t> ihist;

    cdf_accumulator(const threshold_grid& g, bool track_exact)
        : grid(&g), exact(track_exact), hist(g.size() + 1), ihist(track_exact ? g.size() + 1 : 0)
    {
    }

    void operator()(const sieve_entry& e)
    {
        const std::size_t k = grid->bucket_of(e.n, e.sigma);
        hist[k] += e.f;
        if (exact)
            ihist[k] += static_cast<std::int64_t>(std::llround(e.f.real()));
    }

    void merge(const cdf_accumulator& o)
    {
        for (std::size_t k = 0; k < hist.size(); ++k)
            hist[k] += o.hist[k];
        for (std::size_t k = 0; k < ihist.size(); ++k)
            ihist[k] += o.ihist[k];
    }
};

inline weighted_cdf_estimate finish_cdf(const cdf_accumulator& acc, std::uint64_t x, const threshold_grid& grid,
                                        std::string function)
{
    weighted_cdf_estimate est;
    est.x = x;
    est.grid = grid;
    est.function = std::move(function);
    const std::size_t K = grid.size();
    est.raw.resize(K);
    cplx run{};
    for (std::size_t k = 0; k < K; ++k) {
        run += acc.hist[k];
        est.raw[k] = run;
    }
    est.total = run + acc.hist[K];
    if (acc.exact) {
        std::vector<std::int64_t> er(K);
        std::int64_t irun = 0;
        for (std::size_t k = 0; k < K; ++k) {
            irun += acc.ihist[k];
            er[k] = irun;
        }
        est.exact_raw = std::move(er);
    }
    return est;
}

inline void apply_normalizer(weighted_cdf_estimate& est, cplx normalizer, normalization mode)
{
    est.mode = mode;
    est.normalizer = normalizer;
    est.values.resize(est.raw.size());
    for (std::size_t k = 0; k < est.raw.size(); ++k)
        est.values[k] = est.raw[k] / normalizer;
}

} // namespace detail

// D^_f(u) = (1/x) sum_{n <= x, n/sigma(n) <= u} f(n) at every grid threshold,
// one sieve pass. Threshold tests are exact: n * den <= num * sigma(n).
inline weighted_cdf_estimate estimate_df(const mult_func& f, std::uint64_t x, const threshold_grid& grid,
                                         const fold_options& opt = {})
{
    auto acc = fold_over_range(
        f, x, [&] { return detail::cdf_accumulator(grid, f.integer_valued()); }, opt);
    auto est = detail::finish_cdf(acc, x, grid, f.spec());
    detail::apply_normalizer(est, cplx(static_cast<double>(x), 0.0), normalization::per_x);
    return est;
}

// Same sums normalized by S(f;x) from the same pass, so the u = 1 value is 1.
inline weighted_cdf_estimate estimate_dtilde(const mult_func& f, std::uint64_t x, const threshold_grid& grid,
                                             const fold_options& opt = {})
{
    if (!f.nonnegative())
        throw validation_error("D~ estimator needs a nonnegative function; " + f.spec() + " is not");
    auto acc = fold_over_range(
        f, x, [&] { return detail::cdf_accumulator(grid, f.integer_valued()); }, opt);
    auto est = detail::finish_cdf(acc, x, grid, f.spec());
    if (!(est.total.real() > 0.0))
        throw validation_error("S(f;x) = 0 for " + f.spec() + " at x = " + std::to_string(x));
    detail::apply_normalizer(est, cplx(est.total.real(), 0.0), normalization::per_total);
    return est;
}

// Counts lattice points (a, b) with 0 < a^2 + b^2 <= R, bucketed by the exact
// test n * den <= num * sigma(n) for n = a^2 + b^2; normalized by pi R. Every
// point is enumerated individually (no symmetry folding). With a sigma table
// it must cover [1, R].
inline weighted_cdf_estimate lattice_two_squares(std::uint64_t R, const threshold_grid& grid, const fold_options& opt = {},
                                                 const sigma_table* table = nullptr)
{
    if (R < 1)
        throw validation_error("lattice count needs R >= 1");
    if (table && !table->covers(1, R))
        throw resource_error("sigma table [" + std::to_string(table->lo) + ", " + std::to_string(table->hi) +
                             "] does not cover [1, " + std::to_string(R) + "]");
    if (!table && R > max_sieve_bound)
        throw resource_error("R exceeds the 32-bit sieve limit");

    const std::size_t K = grid.size();
    std::vector<std::int64_t> hist(K + 1, 0);

    auto count_points = [&](std::uint64_t lo, std::uint64_t hi, auto&& sigma_of) {
        const auto X = static_cast<std::int64_t>(isqrt(hi));
        for (std::int64_t a = -X; a <= X; ++a) {
            const auto a2 = static_cast<std::uint64_t>(a * a);
            if (a2 > hi)
                continue;
            const std::uint64_t ymax = isqrt(hi - a2);
            std::uint64_t ymin = 0;
            if (lo > a2) {
                ymin = isqrt(lo - a2);
                if (ymin * ymin < lo - a2)
                    ++ymin;
            }
            for (std::uint64_t b = ymin; b <= ymax; ++b) {
                const std::uint64_t n = a2 + b * b;
                if (n == 0)
                    continue;
                const std::size_t k = grid.bucket_of(n, sigma_of(n));
                hist[k] += (b == 0) ? 1 : 2; // (a, b) and (a, -b)
            }
        }
    };

    if (table) {
        count_points(1, R, [&](std::uint64_t n) { return table->at(n); });
    } else {
        auto primes = base_primes::for_range(R);
        sieve_segment seg;
        const std::uint64_t step = opt.segment_size;
        for (std::uint64_t lo = 1; lo <= R; lo += step) {
            const std::uint64_t hi = std::min(R, lo + step - 1);
            build_segment_into(seg, lo, hi, primes, nullptr);
            count_points(lo, hi, [&](std::uint64_t n) { return seg.sigma[n - seg.lo]; });
        }
    }

    weighted_cdf_estimate est;
    est.x = R;
    est.grid = grid;
    est.function = "lattice";
    est.raw.resize(K);
    std::vector<std::int64_t> exact(K);
    std::int64_t run = 0;
    for (std::size_t k = 0; k < K; ++k) {
        run += hist[k];
        exact[k] = run;
        est.raw[k] = static_cast<double>(run);
    }
    est.total = static_cast<double>(run + hist[K]);
    est.exact_raw = std::move(exact);
    detail::apply_normalizer(est, cplx(std::numbers::pi * static_cast<double>(R), 0.0), normalization::per_pi_r);
    return est;
}

struct smoothed_result {
    cplx value;           // (1/x) sum f(n) psi_m(n/sigma(n))
    cplx sharp_at_u;      // D^_f(u) from the same pass
    cplx sharp_at_u_plus; // D^_f(u + 1/m) from the same pass
};

// Tent-smoothed cutoff: weight 1 on [0, u], linear down to 0 on [u, u + 1/m].
inline smoothed_result smoothed_estimate(const mult_func& f, std::uint64_t x, const rational& u, std::int64_t m,
                                         const fold_options& opt = {})
{
    if (m < 1)
        throw validation_error("smoothing needs m >= 1");
    if (u.num < 0)
        throw validation_error("smoothing needs u >= 0");
    const rational upper = make_rational(u.num * m + u.den, u.den * m);
    if (!(upper < rational{1, 1}))
        throw validation_error("smoothing needs u + 1/m < 1");

    struct acc_t {
        rational u, upper;
        double m;
        cplx smooth{}, lo{}, hi{};
        void operator()(const sieve_entry& e)
        {
            if (ratio_le(e.n, e.sigma, u)) {
                smooth += e.f;
                lo += e.f;
                hi += e.f;
            } else if (ratio_le(e.n, e.sigma, upper)) {
                // 1 - m (n/sigma - u) = 1 - m (n den - num sigma) / (sigma den)
                const auto excess = static_cast<__int128>(e.n) * u.den - static_cast<__int128>(u.num) * e.sigma;
                const double w = 1.0 - m * static_cast<double>(excess) /
                                           (static_cast<double>(e.sigma) * static_cast<double>(u.den));
                smooth += w * e.f;
                hi += e.f;
            }
        }
        void merge(const acc_t& o)
        {
            smooth += o.smooth;
            lo += o.lo;
            hi += o.hi;
        }
    };
    auto acc = fold_over_range(f, x, [&] { return acc_t{u, upper, static_cast<double>(m)}; }, opt);
    const double xd = static_cast<double>(x);
    return {acc.smooth / xd, acc.lo / xd, acc.hi / xd};
}

enum class equidist_mode : std::uint8_t { omega_mod_q, coprime_classes };

struct equidist_result {
    equidist_mode mode{};
    std::int64_t q = 1;
    rational u;
    std::uint64_t x = 0;
    std::vector<std::int64_t> labels;    // Omega residue, or coprime residue class
    std::vector<std::int64_t> counts;    // qualifying n per class
    std::int64_t qualifying = 0;         // counted separately, not summed from classes
    std::vector<double> densities;       // counts / x
};

// Tallies {n <= x : n/sigma(n) <= u} by Omega(n) mod q, or (restricted to n
// coprime to q) by n mod q.
inline equidist_result equidist_tally(equidist_mode mode, std::int64_t q, const rational& u, std::uint64_t x,
                                      const fold_options& opt = {})
{
    if (q < 1)
        throw validation_error("equidistribution needs q >= 1");
    if (q > 1'000'000)
        throw resource_error("q too large for per-class tallies");

    equidist_result res;
    res.mode = mode;
    res.q = q;
    res.u = u;
    res.x = x;
    std::vector<std::int64_t> slot(static_cast<std::size_t>(q), -1);
    if (mode == equidist_mode::omega_mod_q) {
        for (std::int64_t c = 0; c < q; ++c) {
            slot[static_cast<std::size_t>(c)] = c;
            res.labels.push_back(c);
        }
    } else {
        for (std::int64_t c = 0; c < q; ++c)
            if (std::gcd(c, q) == 1) {
                slot[static_cast<std::size_t>(c)] = static_cast<std::int64_t>(res.labels.size());
                res.labels.push_back(c);
            }
    }

    struct acc_t {
        const std::vector<std::int64_t>* slot;
        equidist_mode mode;
        std::uint64_t q;
        rational u;
        std::vector<std::int64_t> counts;
        std::int64_t qualifying = 0;
        void operator()(const sieve_entry& e)
        {
            if (!ratio_le(e.n, e.sigma, u))
                return;
            const std::uint64_t key = mode == equidist_mode::omega_mod_q ? e.omega % q : e.n % q;
            const std::int64_t s = (*slot)[key];
            if (s < 0)
                return; // not coprime to q
            ++counts[static_cast<std::size_t>(s)];
            ++qualifying;
        }
        void merge(const acc_t& o)
        {
            for (std::size_t i = 0; i < counts.size(); ++i)
                counts[i] += o.counts[i];
            qualifying += o.qualifying;
        }
    };
    const auto one = mult_func::make(rule::one);
    auto acc = fold_over_range(
        one, x, [&] { return acc_t{&slot, mode, static_cast<std::uint64_t>(q), u, std::vector<std::int64_t>(res.labels.size())}; },
        opt);
    res.counts = std::move(acc.counts);
    res.qualifying = acc.qualifying;
    for (auto c : res.counts)
        res.densities.push_back(static_cast<double>(c) / static_cast<double>(x));
    return res;
}

struct partial_sum_check {
    cplx lhs; // (2/x^2) sum_{n <= x, n/sigma(n) <= u} n f(n)
    cplx rhs; // D^_f(u) from the same pass
};

inline partial_sum_check partial_summation_check(const mult_func& f, std::uint64_t x, const rational& u,
                                                 const fold_options& opt = {})
{
    struct acc_t {
        rational u;
        cplx weighted{}, plain{};
        void operator()(const sieve_entry& e)
        {
            if (!ratio_le(e.n, e.sigma, u))
                return;
            weighted += static_cast<double>(e.n) * e.f;
            plain += e.f;
        }
        void merge(const acc_t& o)
        {
            weighted += o.weighted;
            plain += o.plain;
        }
    };
    auto acc = fold_over_range(f, x, [&] { return acc_t{u}; }, opt);
    const double xd = static_cast<double>(x);
    return {2.0 * acc.weighted / (xd * xd), acc.plain / xd};
}

// phi_x(t) = (1/S(f;x)) sum_{n <= x} f(n) (n/sigma(n))^{it}, the characteristic
// function of the empirical distribution of log(n/sigma(n)).
inline std::vector<cplx> empirical_char_fn(const mult_func& f, std::uint64_t x, std::span<const double> ts,
                                           const fold_options& opt = {})
{
    struct acc_t {
        std::vector<double> t;
        std::vector<cplx> sums;
        cplx total{};
        void operator()(const sieve_entry& e)
        {
            const double l = -std::log(static_cast<double>(e.sigma) / static_cast<double>(e.n));
            for (std::size_t k = 0; k < t.size(); ++k)
                sums[k] += e.f * std::polar(1.0, t[k] * l);
            total += e.f;
        }
        void merge(const acc_t& o)
        {
            for (std::size_t k = 0; k < sums.size(); ++k)
                sums[k] += o.sums[k];
            total += o.total;
        }
    };
    std::vector<double> tv(ts.begin(), ts.end());
    auto acc = fold_over_range(f, x, [&] { return acc_t{tv, std::vector<cplx>(tv.size()), {}}; }, opt);
    if (std::abs(acc.total) == 0.0)
        throw validation_error("S(f;x) = 0; characteristic function undefined");
    for (auto& s : acc.sums)
        s /= acc.total;
    return acc.sums;
}

} // namespace ddl
