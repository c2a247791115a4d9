#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ddl {

inline std::uint64_t isqrt(std::uint64_t n)
{
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (r > 0 && r * r > n)
        --r;
    while ((r + 1) * (r + 1) <= n)
        ++r;
    return r;
}

// Deterministic trial division; only used for validation and small inputs.
inline bool is_prime(std::uint64_t n)
{
    if (n < 2)
        return false;
    if (n % 2 == 0)
        return n == 2;
    for (std::uint64_t d = 3; d * d <= n; d += 2)
        if (n % d == 0)
            return false;
    return true;
}

inline constexpr std::uint64_t max_prime_cap = 0xFFFFFFFFull;

namespace detail {

// fn may return bool; false stops the enumeration.
template <class Fn>
bool visit_prime(Fn& fn, std::uint64_t p)
{
    if constexpr (std::is_same_v<decltype(fn(p)), bool>)
        return fn(p);
    else {
        fn(p);
        return true;
    }
}

} // namespace detail

// Calls fn(p) for every prime p <= limit, in increasing order. Segmented
// odd-only sieve of Eratosthenes, so memory stays O(sqrt(limit)).
template <class Fn>
void for_each_prime(std::uint64_t limit, Fn&& fn)
{
    if (limit < 2)
        return;
    if (!detail::visit_prime(fn, 2))
        return;
    if (limit < 3)
        return;

    const std::uint64_t root = isqrt(limit);
    std::vector<std::uint32_t> small;
    {
        std::vector<char> comp(root + 1, 0);
        for (std::uint64_t i = 3; i <= root; i += 2) {
            if (comp[i])
                continue;
            small.push_back(static_cast<std::uint32_t>(i));
            for (std::uint64_t j = i * i; j <= root; j += 2 * i)
                comp[j] = 1;
        }
    }

    // Segment holds odd numbers lo, lo+2, ..., indexed by (n - lo) / 2.
    constexpr std::uint64_t seg_odds = 1u << 18;
    std::vector<char> comp(seg_odds);
    std::vector<std::uint64_t> next(small.size());
    for (std::size_t i = 0; i < small.size(); ++i)
        next[i] = static_cast<std::uint64_t>(small[i]) * small[i];

    for (std::uint64_t lo = 3; lo <= limit; lo += 2 * seg_odds) {
        const std::uint64_t hi = std::min(limit, lo + 2 * seg_odds - 1);
        const std::uint64_t count = (hi - lo) / 2 + 1;
        std::fill(comp.begin(), comp.begin() + static_cast<std::ptrdiff_t>(count), 0);
        for (std::size_t i = 0; i < small.size(); ++i) {
            const std::uint64_t p = small[i];
            std::uint64_t m = next[i];
            if (m > hi)
                continue;
            for (; m <= hi; m += 2 * p)
                comp[(m - lo) / 2] = 1;
            next[i] = m;
        }
        for (std::uint64_t k = 0; k < count; ++k)
            if (!comp[k] && !detail::visit_prime(fn, lo + 2 * k))
                return;
    }
}

inline std::vector<std::uint32_t> primes_up_to(std::uint64_t limit)
{
    if (limit > 0xFFFFFFFFull)
        throw resource_error("prime table limited to 2^32");
    std::vector<std::uint32_t> out;
    if (limit >= 100)
        out.reserve(static_cast<std::size_t>(1.26 * static_cast<double>(limit) / std::log(static_cast<double>(limit))));
    for_each_prime(limit, [&](std::uint64_t p) { out.push_back(static_cast<std::uint32_t>(p)); });
    return out;
}

// Jacobi symbol (a/n) for odd n > 0.
inline int jacobi(std::int64_t a, std::int64_t n)
{
    a %= n;
    if (a < 0)
        a += n;
    int result = 1;
    while (a != 0) {
        while (a % 2 == 0) {
            a /= 2;
            const std::int64_t r = n % 8;
            if (r == 3 || r == 5)
                result = -result;
        }
        std::swap(a, n);
        if (a % 4 == 3 && n % 4 == 3)
            result = -result;
        a %= n;
    }
    return n == 1 ? result : 0;
}

// Inverse of odd a modulo 2^64 (Newton iteration).
constexpr std::uint64_t inverse_mod_2_64(std::uint64_t a)
{
    std::uint64_t x = a;
    for (int i = 0; i < 6; ++i)
        x *= 2 - a * x;
    return x;
}

} // namespace ddl
