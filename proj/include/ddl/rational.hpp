#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace ddl {

using u128 = unsigned __int128;

// Reduced fraction num/den with den > 0.
struct rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const rational&, const rational&) = default;
    friend bool operator<(const rational& a, const rational& b)
    {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    }
    friend bool operator<=(const rational& a, const rational& b) { return !(b < a); }
};

inline rational make_rational(std::int64_t num, std::int64_t den)
{
    if (den == 0)
        throw validation_error("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return {num, den};
}

namespace detail {

inline std::int64_t parse_int(std::string_view s, std::string_view what)
{
    std::int64_t v = 0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last)
        throw validation_error("cannot parse integer '" + std::string(s) + "' in " + std::string(what));
    return v;
}

} // namespace detail

// Accepts "a/b", an integer, or a finite decimal such as "0.35" (converted exactly).
inline rational parse_rational(std::string_view s)
{
    if (auto slash = s.find('/'); slash != std::string_view::npos)
        return make_rational(detail::parse_int(s.substr(0, slash), s), detail::parse_int(s.substr(slash + 1), s));

    if (auto dot = s.find('.'); dot != std::string_view::npos) {
        std::string_view ip = s.substr(0, dot);
        std::string_view fp = s.substr(dot + 1);
        if (fp.size() > 15)
            throw validation_error("too many decimal digits in '" + std::string(s) + "'");
        bool neg = !ip.empty() && ip.front() == '-';
        if (neg)
            ip.remove_prefix(1);
        std::int64_t den = 1;
        for (std::size_t i = 0; i < fp.size(); ++i)
            den *= 10;
        const std::int64_t whole = ip.empty() ? 0 : detail::parse_int(ip, s);
        const std::int64_t frac = fp.empty() ? 0 : detail::parse_int(fp, s);
        if (frac < 0)
            throw validation_error("malformed decimal '" + std::string(s) + "'");
        std::int64_t num = whole * den + frac;
        return make_rational(neg ? -num : num, den);
    }
    return make_rational(detail::parse_int(s, s), 1);
}

inline std::string to_string(const rational& r)
{
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

// Exact test n/s <= r for positive n, s and r >= 0.
inline bool ratio_le(std::uint64_t n, std::uint64_t s, const rational& r)
{
    return static_cast<u128>(n) * static_cast<std::uint64_t>(r.den) <=
           static_cast<u128>(static_cast<std::uint64_t>(r.num)) * s;
}

// Strictly increasing rational thresholds in [0, 1].
class threshold_grid {
public:
    threshold_grid() = default;

    explicit threshold_grid(std::vector<rational> u) : u_(std::move(u))
    {
        if (u_.empty())
            throw validation_error("threshold grid is empty");
        for (std::size_t i = 0; i < u_.size(); ++i) {
            const auto& r = u_[i];
            if (r.den <= 0 || std::gcd(r.num, r.den) != 1)
                throw validation_error("threshold " + to_string(r) + " is not a reduced fraction");
            if (r.num < 0 || r.num > r.den)
                throw validation_error("threshold " + to_string(r) + " outside [0,1]");
            if (i > 0 && !(u_[i - 1] < r))
                throw validation_error("threshold grid is not strictly increasing at " + to_string(r));
        }
        approx_.reserve(u_.size());
        for (const auto& r : u_)
            approx_.push_back(r.to_double());
        const std::int64_t steps = static_cast<std::int64_t>(u_.size()) - 1;
        uniform_steps_ = steps;
        for (std::size_t k = 0; k < u_.size() && uniform_steps_ > 0; ++k)
            if (!(u_[k] == make_rational(static_cast<std::int64_t>(k), steps)))
                uniform_steps_ = 0;
    }

    // k/200 for k = 0..200; 1/2 is already among them.
    static threshold_grid default_grid() { return uniform(200); }

    static threshold_grid uniform(std::int64_t steps)
    {
        if (steps < 1 || steps > 1'000'000)
            throw validation_error("uniform grid needs 1 <= steps <= 1e6");
        std::vector<rational> u;
        u.reserve(static_cast<std::size_t>(steps) + 1);
        for (std::int64_t k = 0; k <= steps; ++k)
            u.push_back(make_rational(k, steps));
        return threshold_grid(std::move(u));
    }

    // Sorts and deduplicates before validating.
    static threshold_grid from_unsorted(std::vector<rational> u)
    {
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        return threshold_grid(std::move(u));
    }

    std::size_t size() const { return u_.size(); }
    const rational& operator[](std::size_t k) const { return u_[k]; }
    const std::vector<rational>& values() const { return u_; }

    std::size_t index_of(const rational& r) const
    {
        auto it = std::lower_bound(u_.begin(), u_.end(), r);
        if (it == u_.end() || !(*it == r))
            throw validation_error("threshold " + to_string(r) + " not in grid");
        return static_cast<std::size_t>(it - u_.begin());
    }

    // First k with n/s <= u_k, or size() when n/s exceeds every threshold.
    // The floating-point guess is only a starting point; the answer is fixed
    // up with exact integer comparisons.
    std::size_t bucket_of(std::uint64_t n, std::uint64_t s) const
    {
        const double r = static_cast<double>(n) / static_cast<double>(s);
        std::size_t k;
        if (uniform_steps_ > 0) {
            const double g = std::ceil(r * static_cast<double>(uniform_steps_));
            k = g <= 0.0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(g), u_.size());
        } else {
            k = static_cast<std::size_t>(std::lower_bound(approx_.begin(), approx_.end(), r) - approx_.begin());
        }
        while (k > 0 && ratio_le(n, s, u_[k - 1]))
            --k;
        while (k < u_.size() && !ratio_le(n, s, u_[k]))
            ++k;
        return k;
    }

    // Reference version: plain exact binary search.
    std::size_t bucket_of_exact(std::uint64_t n, std::uint64_t s) const
    {
        std::size_t lo = 0, hi = u_.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (ratio_le(n, s, u_[mid]))
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

private:
    std::vector<rational> u_;
    std::vector<double> approx_;
    std::int64_t uniform_steps_ = 0;
};

// Grid specs: "default", "half" ({1/2, 1}), "uniform:<N>", or a comma list of
// rationals/decimals such as "0.3,1/2,0.7,1".
inline threshold_grid parse_grid(std::string_view spec)
{
    if (spec == "default")
        return threshold_grid::default_grid();
    if (spec == "half")
        return threshold_grid({make_rational(1, 2), make_rational(1, 1)});
    if (spec.starts_with("uniform:"))
        return threshold_grid::uniform(detail::parse_int(spec.substr(8), spec));

    std::vector<rational> u;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto comma = spec.find(',', start);
        auto item = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (item.empty())
            throw validation_error("empty entry in grid spec '" + std::string(spec) + "'");
        u.push_back(parse_rational(item));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return threshold_grid::from_unsorted(std::move(u));
}

} // namespace ddl
