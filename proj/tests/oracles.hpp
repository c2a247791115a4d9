#pragma once

// Slow, direct reference computations. Nothing here goes through the sieve or
// the catalog's prime-power rules.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ddl/multfunc.hpp"

namespace oracle {

using cplx = std::complex<double>;

inline std::uint64_t divisor_sum(std::uint64_t n)
{
    std::uint64_t s = 0;
    for (std::uint64_t d = 1; d * d <= n; ++d)
        if (n % d == 0) {
            s += d;
            if (d * d != n)
                s += n / d;
        }
    return s;
}

inline std::uint64_t divisor_count(std::uint64_t n)
{
    std::uint64_t c = 0;
    for (std::uint64_t d = 1; d * d <= n; ++d)
        if (n % d == 0)
            c += (d * d == n) ? 1 : 2;
    return c;
}

inline std::vector<std::pair<std::uint64_t, unsigned>> factor(std::uint64_t n)
{
    std::vector<std::pair<std::uint64_t, unsigned>> f;
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        unsigned e = 0;
        while (n % d == 0) {
            n /= d;
            ++e;
        }
        if (e)
            f.emplace_back(d, e);
    }
    if (n > 1)
        f.emplace_back(n, 1);
    return f;
}

inline unsigned big_omega(std::uint64_t n)
{
    unsigned k = 0;
    for (auto [p, e] : factor(n))
        k += e;
    return k;
}

inline int moebius(std::uint64_t n)
{
    int m = 1;
    for (auto [p, e] : factor(n)) {
        if (e > 1)
            return 0;
        m = -m;
    }
    return m;
}

inline std::uint64_t totient(std::uint64_t n)
{
    std::uint64_t t = n;
    for (auto [p, e] : factor(n))
        t = t / p * (p - 1);
    return t;
}

inline std::uint64_t totient_by_gcd(std::uint64_t n)
{
    std::uint64_t c = 0;
    for (std::uint64_t k = 1; k <= n; ++k)
        if (std::gcd(k, n) == 1)
            ++c;
    return c;
}

// #{(a, b) in Z^2 : a^2 + b^2 = n}
inline std::uint64_t two_square_reps(std::uint64_t n)
{
    std::uint64_t c = 0;
    const auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n))) + 1;
    for (std::int64_t a = -r; a <= r; ++a)
        for (std::int64_t b = -r; b <= r; ++b)
            if (static_cast<std::uint64_t>(a * a + b * b) == n)
                ++c;
    return c;
}

inline bool is_prime(std::uint64_t n)
{
    if (n < 2)
        return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0)
            return false;
    return true;
}

inline std::uint64_t pow_mod(std::uint64_t b, std::uint64_t e, std::uint64_t m)
{
    std::uint64_t r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1)
            r = r * b % m;
        b = b * b % m;
        e >>= 1;
    }
    return r;
}

// Legendre symbol by Euler's criterion, q an odd prime.
inline int legendre(std::uint64_t n, std::uint64_t q)
{
    if (n % q == 0)
        return 0;
    return pow_mod(n, (q - 1) / 2, q) == 1 ? 1 : -1;
}

inline bool l_free(std::uint64_t n, unsigned ell)
{
    for (std::uint64_t d = 2;; ++d) {
        std::uint64_t dl = 1;
        bool big = false;
        for (unsigned i = 0; i < ell; ++i) {
            dl *= d;
            if (dl > n) {
                big = true;
                break;
            }
        }
        if (big)
            return true;
        if (n % dl == 0)
            return false;
    }
}

inline bool has_prime_factor_at_most(std::uint64_t n, double y)
{
    for (auto [p, e] : factor(n))
        if (static_cast<double>(p) <= y)
            return true;
    return false;
}

// f(n) from the definition of each catalog rule, plus the twist / restriction
// wrappers applied to the whole n.
inline cplx value(const ddl::mult_func& f, std::uint64_t n)
{
    using ddl::rule;
    const auto& prm = f.params();
    const double nd = static_cast<double>(n);
    cplx v;
    switch (f.id()) {
    case rule::one: v = 1.0; break;
    case rule::tau: v = static_cast<double>(divisor_count(n)); break;
    case rule::mu: v = moebius(n); break;
    case rule::mu_squared: v = moebius(n) != 0 ? 1.0 : 0.0; break;
    case rule::phi_over_n: v = static_cast<double>(totient(n)) / nd; break;
    case rule::sigma_over_n: v = static_cast<double>(divisor_sum(n)) / nd; break;
    case rule::phi_over_n_pow: v = std::exp(prm.z * std::log(static_cast<double>(totient(n)) / nd)); break;
    case rule::sigma_over_n_pow: v = std::exp(prm.z * std::log(static_cast<double>(divisor_sum(n)) / nd)); break;
    case rule::r: v = static_cast<double>(two_square_reps(n)) / 4.0; break;
    case rule::two_squares_indicator: v = two_square_reps(n) > 0 ? 1.0 : 0.0; break;
    case rule::lfree: v = l_free(n, prm.ell) ? 1.0 : 0.0; break;
    case rule::lambda: {
        const double turns = static_cast<double>(prm.a) * big_omega(n) / static_cast<double>(prm.q);
        v = std::polar(1.0, 2.0 * std::numbers::pi * (turns - std::floor(turns)));
        break;
    }
    case rule::principal_char: v = std::gcd(n, static_cast<std::uint64_t>(prm.q)) == 1 ? 1.0 : 0.0; break;
    case rule::quadratic_char: v = legendre(n, static_cast<std::uint64_t>(prm.q)); break;
    }
    const double ratio = nd / static_cast<double>(divisor_sum(n));
    if (f.twist() > 0)
        v *= std::pow(ratio, static_cast<double>(f.twist()));
    if (f.coprime_above()) {
        if (has_prime_factor_at_most(n, *f.coprime_above()))
            return 0.0;
        if (f.sigma_weight())
            v /= ratio;
    }
    return v;
}

// Squarefree count up to x by inclusion-exclusion: sum_d mu(d) floor(x / d^2).
inline std::int64_t squarefree_count(std::uint64_t x)
{
    const auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(x))) + 1;
    std::vector<int> mu(r + 1, 1);
    std::vector<bool> comp(r + 1, false);
    for (std::uint64_t p = 2; p <= r; ++p) {
        if (comp[p])
            continue;
        for (std::uint64_t m = p; m <= r; m += p) {
            if (m > p)
                comp[m] = true;
            mu[m] = -mu[m];
        }
        for (std::uint64_t m = p * p; m <= r; m += p * p)
            mu[m] = 0;
    }
    std::int64_t s = 0;
    for (std::uint64_t d = 1; d * d <= x; ++d)
        s += mu[d] * static_cast<std::int64_t>(x / (d * d));
    return s;
}

// sum_{n <= x} tau(n) = sum_d floor(x / d)
inline std::uint64_t divisor_summatory(std::uint64_t x)
{
    std::uint64_t s = 0;
    for (std::uint64_t d = 1; d <= x; ++d)
        s += x / d;
    return s;
}

// Mertens function from a Moebius sieve.
inline std::int64_t mertens(std::uint64_t x)
{
    std::vector<int> mu(x + 1, 1);
    std::vector<bool> comp(x + 1, false);
    for (std::uint64_t p = 2; p <= x; ++p) {
        if (comp[p])
            continue;
        for (std::uint64_t m = p; m <= x; m += p) {
            if (m > p)
                comp[m] = true;
            mu[m] = -mu[m];
        }
        for (std::uint64_t m = p * p; m <= x; m += p * p)
            mu[m] = 0;
    }
    std::int64_t s = 0;
    for (std::uint64_t n = 1; n <= x; ++n)
        s += mu[n];
    return s;
}

// Plain Eratosthenes up to x.
inline std::vector<std::uint64_t> primes(std::uint64_t x)
{
    std::vector<bool> comp(x + 1, false);
    std::vector<std::uint64_t> ps;
    for (std::uint64_t p = 2; p <= x; ++p) {
        if (comp[p])
            continue;
        ps.push_back(p);
        for (std::uint64_t m = p * p; m <= x; m += p)
            comp[m] = true;
    }
    return ps;
}

// Exact test n/s <= num/den.
inline bool at_most(std::uint64_t n, std::uint64_t s, std::int64_t num, std::int64_t den)
{
    return static_cast<unsigned __int128>(n) * static_cast<std::uint64_t>(den) <=
           static_cast<unsigned __int128>(static_cast<std::uint64_t>(num)) * s;
}

// A representative of every catalog rule plus wrapped variants.
inline std::vector<std::string> catalog_specs()
{
    return {"one",
            "tau",
            "mu",
            "mu2",
            "phi_over_n",
            "sigma_over_n",
            "phi_over_n_pow:re=0.5,im=0",
            "phi_over_n_pow:re=-1.5,im=2",
            "sigma_over_n_pow:re=2,im=-0.75",
            "r",
            "two_squares_indicator",
            "lfree:l=2",
            "lfree:l=3",
            "lambda:a=1,q=2",
            "lambda:a=1,q=3",
            "lambda:a=2,q=5",
            "principal_char:q=6",
            "quadratic_char:q=3",
            "quadratic_char:q=7",
            "one:k=1",
            "tau:k=3",
            "mu:k=2",
            "one:y=5",
            "one:y=5,bw=1",
            "lambda:a=1,q=3,k=1,y=3"};
}

} // namespace oracle
