#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"
#include "multfunc.hpp"
#include "primes.hpp"
#include "rational.hpp"

namespace ddl {

// ceil(40 / log2 p) + 2: keeps the dropped terms of a local series near 1e-12.
inline unsigned default_series_cutoff(std::uint64_t p)
{
    return static_cast<unsigned>(std::ceil(40.0 / std::log2(static_cast<double>(p)))) + 2;
}

// Upper estimate of sum_{p > P} 1/p^2: exact below 1000, then 1.2 / (P log P).
inline double prime_square_tail(double P)
{
    constexpr double knee = 1000.0;
    auto tail_from = [](double q) { return 1.2 / (q * std::log(q)); };
    if (P >= knee)
        return tail_from(P);
    double s = tail_from(knee);
    for_each_prime(static_cast<std::uint64_t>(knee), [&](std::uint64_t p) {
        if (static_cast<double>(p) > P)
            s += 1.0 / (static_cast<double>(p) * static_cast<double>(p));
    });
    return s;
}

struct local_factor_values {
    cplx alpha;             // sum_j f(p^j)/p^j (p^j/sigma(p^j))^{it}
    cplx delta;             // sum_j f(p^j)/p^j
    cplx eta;               // the j >= 2 part of delta
    double truncation_tail; // bound on the dropped terms j > J
    unsigned terms;         // J
};

namespace detail {

struct local_series {
    std::vector<cplx> w;   // f(p^j)/p^j, j = 0..J
    std::vector<double> l; // log(p^j/sigma(p^j))
    double tail = 0.0;
};

inline local_series make_local_series(const mult_func& f, std::uint64_t p, unsigned J)
{
    local_series s;
    s.w.resize(J + 1);
    s.l.resize(J + 1);
    const double pd = static_cast<double>(p);
    const double lp = std::log(pd);
    for (unsigned j = 0; j <= J; ++j) {
        const double scale = std::exp(-static_cast<double>(j) * lp);
        s.w[j] = scale == 0.0 ? cplx{} : f.at(p, j) * scale;
        s.l[j] = j == 0 ? 0.0 : log_ratio_prime_power(p, j);
    }
    // Terms are bounded by B (j+1)^d p^{-j}; the envelope must shrink past J.
    const double d = static_cast<double>(f.growth_degree());
    const double ratio = std::pow((J + 2.0) / (J + 1.0), d) / pd;
    if (!(ratio < 1.0))
        throw validation_error("local series for " + f.spec() + " diverges at p = " + std::to_string(p));
    s.tail = f.growth_base() * std::pow(J + 2.0, d) * std::exp(-(J + 1.0) * lp) / (1.0 - ratio);
    return s;
}

} // namespace detail

inline local_factor_values local_factors(const mult_func& f, std::uint64_t p, double t, unsigned J)
{
    if (J < 2)
        throw validation_error("local series cutoff J must be >= 2");
    if (!is_prime(p))
        throw validation_error(std::to_string(p) + " is not prime");
    const auto s = detail::make_local_series(f, p, J);
    local_factor_values v{{}, {}, {}, s.tail, J};
    for (unsigned j = 0; j <= J; ++j) {
        v.delta += s.w[j];
        v.alpha += s.w[j] * std::polar(1.0, t * s.l[j]);
        if (j >= 2)
            v.eta += s.w[j];
    }
    return v;
}

struct euler_product_value {
    cplx value;
    double P = 0;
    double tail_bound = 0;
};

// prod_{p <= P} (1 - 1/p) sum_j f(p^j)/p^j. With closed_form, catalog entries
// whose factor has a known closed form use it instead of the series.
inline euler_product_value mean_value_product(const mult_func& f, double P, bool closed_form = true, unsigned J = 0)
{
    if (!f.mean_value_hypotheses())
        throw validation_error(f.spec() + " does not satisfy the mean-value hypotheses");
    if (P < 2)
        throw validation_error("mean value product needs P >= 2");
    if (P > 4e9)
        throw resource_error("P exceeds the prime sieve limit");
    const bool use_closed = closed_form && f.closed_mean_factor(2).has_value();

    cplx log_sum{};
    cplx block{1.0, 0.0};
    int in_block = 0;
    bool zero = false;
    for_each_prime(static_cast<std::uint64_t>(P), [&](std::uint64_t p) {
        cplx factor;
        if (use_closed) {
            factor = *f.closed_mean_factor(p);
        } else {
            const auto s = detail::make_local_series(f, p, J ? J : default_series_cutoff(p));
            cplx delta{};
            for (const auto& w : s.w)
                delta += w;
            factor = delta * (1.0 - 1.0 / static_cast<double>(p));
        }
        if (factor == cplx{})
            zero = true;
        block *= factor;
        if (++in_block == 32) {
            log_sum += std::log(block);
            block = 1.0;
            in_block = 0;
        }
    });
    log_sum += std::log(block);

    euler_product_value r;
    r.P = P;
    r.value = zero ? cplx{} : std::exp(log_sum);
    const double s2 = prime_square_tail(P);
    if (use_closed) {
        r.tail_bound = *f.closed_mean_tail_coeff() * s2;
    } else {
        r.tail_bound = 1.1 * (f.deviation_coeff() + f.prime_bound() + 1.1 * f.eta_coeff()) * s2;
    }
    // Primes above P where f vanishes contribute -log(1 - 1/p) each.
    if (f.coprime_above()) {
        const double y = *f.coprime_above();
        for_each_prime(static_cast<std::uint64_t>(y), [&](std::uint64_t p) {
            if (static_cast<double>(p) > P)
                r.tail_bound -= std::log1p(-1.0 / static_cast<double>(p));
        });
    }
    if (f.id() == rule::principal_char) {
        for (std::uint64_t p = 2; p <= static_cast<std::uint64_t>(f.params().q); ++p)
            if (static_cast<double>(p) > P && f.params().q % static_cast<std::int64_t>(p) == 0 && is_prime(p))
                r.tail_bound -= std::log1p(-1.0 / static_cast<double>(p));
    }
    return r;
}

// e^{-gamma kappa} / Gamma(kappa) * x / log x * prod_{p <= min(P, x)} sum_j f(p^j)/p^j
inline double wirsing_prediction(const mult_func& f, double x, double P)
{
    const auto kappa = f.claimed_kappa();
    if (!kappa)
        throw validation_error(f.spec() + " has no Wirsing density kappa");
    if (x < 3)
        throw validation_error("Wirsing prediction needs x >= 3");
    if (P > x)
        throw validation_error("Wirsing prediction needs P <= x");
    if (P > 4e9)
        throw resource_error("P exceeds the prime sieve limit");
    double log_prod = 0.0;
    for_each_prime(static_cast<std::uint64_t>(P), [&](std::uint64_t p) {
        const auto s = detail::make_local_series(f, p, default_series_cutoff(p));
        double delta = 0.0;
        for (const auto& w : s.w)
            delta += w.real();
        log_prod += std::log(delta);
    });
    const double k = *kappa;
    return std::exp(-std::numbers::egamma * k + log_prod) / std::tgamma(k) * x / std::log(x);
}

struct char_fn_profile {
    std::vector<double> t;
    std::vector<cplx> psi;
    std::vector<double> tail_bound;
    double P = 0;
    unsigned J = 0;        // 0: per-prime default cutoff
    double mean_log = 0.0; // expectation of the limit law, d/dt psi at 0 divided by i
    double origin_atom = 0.0; // mass at 0 of the truncated law: prod_{p <= P} 1/Delta_p
};

namespace detail {

inline void cmul(double& ar, double& ai, double br, double bi)
{
    const double r = ar * br - ai * bi;
    ai = ar * bi + ai * br;
    ar = r;
}

} // namespace detail

// psi(t) = prod_{p <= P} alpha_p(t) / Delta_p. Negative t come from conjugation.
inline char_fn_profile psi(const mult_func& f, std::span<const double> t_grid, double P, unsigned J = 0)
{
    if (!f.nonnegative())
        throw validation_error("psi needs a nonnegative function; " + f.spec() + " is not");
    if (J == 1)
        throw validation_error("local series cutoff J must be >= 2");
    if (P > 4e9)
        throw resource_error("P exceeds the prime sieve limit");

    char_fn_profile prof;
    prof.t.assign(t_grid.begin(), t_grid.end());
    prof.P = P;
    prof.J = J;

    std::vector<double> nodes;
    for (double t : prof.t)
        nodes.push_back(std::abs(t));
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    const std::size_t K = nodes.size();

    // Uniformly spaced nodes let cis(t_k l) be advanced by one rotation per
    // step, re-anchored exactly every 64 steps.
    double h = 0.0;
    bool uniform = K >= 3;
    if (uniform) {
        h = (nodes.back() - nodes.front()) / static_cast<double>(K - 1);
        for (std::size_t k = 0; k < K && uniform; ++k)
            uniform = std::abs(nodes[k] - (nodes.front() + static_cast<double>(k) * h)) <= 1e-9 * (1.0 + nodes.back());
    }

    std::vector<double> pr(K, 1.0), pi(K, 0.0);
    std::vector<cplx> logs(K);
    int in_block = 0;
    double mean_log = 0.0;
    double log_atom = 0.0;
    std::vector<double> c, l;

    auto flush = [&] {
        for (std::size_t k = 0; k < K; ++k) {
            logs[k] += std::log(cplx(pr[k], pi[k]));
            pr[k] = 1.0;
            pi[k] = 0.0;
        }
        in_block = 0;
    };

    for_each_prime(static_cast<std::uint64_t>(std::max(P, 0.0)), [&](std::uint64_t p) {
        const auto s = detail::make_local_series(f, p, J ? J : default_series_cutoff(p));
        double delta = 0.0;
        for (const auto& w : s.w)
            delta += w.real();
        c.clear();
        l.clear();
        for (std::size_t j = 1; j < s.w.size(); ++j) {
            const double cj = s.w[j].real() / delta;
            if (cj == 0.0)
                continue;
            c.push_back(cj);
            l.push_back(s.l[j]);
            mean_log += cj * s.l[j];
        }
        const double c0 = s.w[0].real() / delta;
        log_atom += std::log(c0);
        const std::size_t m = c.size();
        if (m == 0)
            return;
        if (uniform && m <= 64) {
            double rr[64], ri[64], sr[64], si[64];
            const std::size_t mm = m;
            for (std::size_t j = 0; j < mm; ++j) {
                sr[j] = std::cos(h * l[j]);
                si[j] = std::sin(h * l[j]);
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (k % 64 == 0)
                    for (std::size_t j = 0; j < mm; ++j) {
                        rr[j] = std::cos(nodes[k] * l[j]);
                        ri[j] = std::sin(nodes[k] * l[j]);
                    }
                double fr = c0, fi = 0.0;
                for (std::size_t j = 0; j < mm; ++j) {
                    fr += c[j] * rr[j];
                    fi += c[j] * ri[j];
                    detail::cmul(rr[j], ri[j], sr[j], si[j]);
                }
                detail::cmul(pr[k], pi[k], fr, fi);
            }
        } else {
            for (std::size_t k = 0; k < K; ++k) {
                double fr = c0, fi = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    fr += c[j] * std::cos(nodes[k] * l[j]);
                    fi += c[j] * std::sin(nodes[k] * l[j]);
                }
                detail::cmul(pr[k], pi[k], fr, fi);
            }
        }
        if (++in_block == 16)
            flush();
    });
    flush();
    prof.mean_log = mean_log;
    prof.origin_atom = std::exp(log_atom);

    const double s2 = prime_square_tail(std::max(P, 1.0));
    prof.psi.resize(prof.t.size());
    prof.tail_bound.resize(prof.t.size());
    for (std::size_t i = 0; i < prof.t.size(); ++i) {
        const double t = prof.t[i];
        const std::size_t k =
            static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), std::abs(t)) - nodes.begin());
        cplx v = t == 0.0 ? cplx(1.0, 0.0) : std::exp(logs[k]);
        if (t < 0)
            v = std::conj(v);
        prof.psi[i] = v;
        prof.tail_bound[i] = (2.0 * (1.0 + std::abs(t)) + f.eta_coeff()) * s2;
    }
    return prof;
}

// lo, lo + step, ..., hi (hi included when it lands on the lattice).
inline std::vector<double> linspace_step(double lo, double hi, double step)
{
    if (!(step > 0) || hi < lo)
        throw validation_error("bad t range");
    const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
    if (n > 10'000'000)
        throw resource_error("t grid too large");
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k) {
        const double t = lo + static_cast<double>(k) * step;
        v.push_back(std::abs(t) < 1e-9 * step ? 0.0 : t);
    }
    return v;
}

// k * step for k = -N..N, N = round(T / step); exactly symmetric with t = 0.
inline std::vector<double> symmetric_grid(double T, double step)
{
    if (!(step > 0) || !(T >= 0))
        throw validation_error("bad t range");
    const auto n = static_cast<std::int64_t>(std::llround(T / step));
    if (n > 5'000'000)
        throw resource_error("t grid too large");
    std::vector<double> v;
    v.reserve(2 * static_cast<std::size_t>(n) + 1);
    for (std::int64_t k = -n; k <= n; ++k)
        v.push_back(static_cast<double>(k) * step);
    return v;
}

struct kappa_sums {
    cplx weighted_logsum_ratio; // sum_{p <= x} f(p) log p / p, over log x
    cplx reciprocal_sum;        // sum_{p <= x} f(p) / p
};

inline kappa_sums mertens_kappa(const mult_func& f, double x)
{
    if (x < 10)
        throw validation_error("kappa diagnostic needs x >= 10");
    if (x > 4e9)
        throw resource_error("x exceeds the prime sieve limit");
    cplx s1{}, s2{};
    for_each_prime(static_cast<std::uint64_t>(x), [&](std::uint64_t p) {
        const double pd = static_cast<double>(p);
        const cplx v = f.at(p, 1);
        s1 += v * (std::log(pd) / pd);
        s2 += v / pd;
    });
    return {s1 / std::log(x), s2};
}

// sum_{p <= P} (1 - Re(f(p) p^{-i beta})) / p
inline double halasz_series(const mult_func& f, double beta, double P)
{
    if (f.vclass() != value_class::unit_disc)
        throw validation_error("Halasz series needs |f| <= 1; " + f.spec() + " is " + std::string(to_string(f.vclass())));
    if (P > 4e9)
        throw resource_error("P exceeds the prime sieve limit");
    double s = 0.0;
    for_each_prime(static_cast<std::uint64_t>(std::max(P, 0.0)), [&](std::uint64_t p) {
        const double pd = static_cast<double>(p);
        const cplx v = f.at(p, 1) * std::polar(1.0, -beta * std::log(pd));
        s += (1.0 - v.real()) / pd;
    });
    return s;
}

// sum_{p <= P} (1 - d_p), d_p the largest atom (f(p^j)/p^j)/Delta_p.
inline double continuity_diagnostic(const mult_func& f, double P)
{
    if (!f.nonnegative())
        throw validation_error("jump diagnostic needs a nonnegative function; " + f.spec() + " is not");
    if (P > 4e9)
        throw resource_error("P exceeds the prime sieve limit");
    double s = 0.0;
    for_each_prime(static_cast<std::uint64_t>(std::max(P, 0.0)), [&](std::uint64_t p) {
        const auto ser = detail::make_local_series(f, p, default_series_cutoff(p));
        double delta = 0.0, top = 0.0;
        for (const auto& w : ser.w) {
            delta += w.real();
            top = std::max(top, w.real());
        }
        s += 1.0 - top / delta;
    });
    return s;
}

using big_int = boost::multiprecision::cpp_int;

struct witness {
    big_int m = 1;
    big_int sigma = 1;
    std::vector<std::uint64_t> primes;

    // Integer part of m * 2^60 / sigma, scaled back: exact to ~1e-18.
    double ratio() const
    {
        const big_int q = (m << 60) / sigma;
        return std::ldexp(q.convert_to<double>(), -60);
    }
};

// Squarefree m over the smallest usable primes (f(p) > 0) with v < m/sigma(m) <= u.
// A prime is skipped when taking it would push the ratio to v or below.
// nullopt: the primes up to p_cap ran out first.
inline std::optional<witness> greedy_witness(const mult_func& f, const rational& v, const rational& u,
                                             std::uint64_t p_cap)
{
    if (!(rational{0, 1} <= v && v < u && u <= rational{1, 1}))
        throw validation_error("greedy witness needs 0 <= v < u <= 1");
    if (p_cap > max_prime_cap)
        throw resource_error("p_cap exceeds the prime sieve limit");
    witness w;
    auto below_u = [&] { return w.m * u.den <= w.sigma * u.num; };
    if (below_u() && w.m * v.den > w.sigma * v.num)
        return w;
    std::optional<witness> found;
    for_each_prime(p_cap, [&](std::uint64_t p) {
        const cplx fp = f.at(p, 1);
        if (!(fp.imag() == 0.0 && fp.real() > 0.0))
            return true;
        const big_int m2 = w.m * p;
        const big_int s2 = w.sigma * (p + 1);
        if (!(m2 * v.den > s2 * v.num))
            return true;
        w.m = m2;
        w.sigma = s2;
        w.primes.push_back(p);
        if (below_u()) {
            found = w;
            return false;
        }
        return true;
    });
    return found;
}

} // namespace ddl
