#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "primes.hpp"
#include "rational.hpp"

namespace ddl {

using cplx = std::complex<double>;

// Closed catalog of multiplicative functions. Every function is fixed by its
// values on prime powers; see mult_func::at.
enum class rule : std::uint8_t {
    one,                   // f = 1
    tau,                   // divisor count
    mu,                    // Moebius
    mu_squared,            // squarefree indicator
    phi_over_n,            // phi(n)/n
    sigma_over_n,          // sigma(n)/n
    phi_over_n_pow,        // (phi(n)/n)^z
    sigma_over_n_pow,      // (sigma(n)/n)^z
    r,                     // quarter count of representations as x^2 + y^2
    two_squares_indicator, // 1 if n is a sum of two squares
    lfree,                 // l-free indicator
    lambda,                // exp(2 pi i a Omega(n) / q)
    principal_char,        // principal character mod q
    quadratic_char,        // Legendre symbol mod an odd prime q
};

enum class value_class : std::uint8_t { unit_disc, nonnegative_bounded_prime, general };

inline std::string_view to_string(value_class c)
{
    switch (c) {
    case value_class::unit_disc: return "unit-disc";
    case value_class::nonnegative_bounded_prime: return "nonnegative-bounded-prime";
    case value_class::general: return "general";
    }
    return "?";
}

struct func_params {
    std::int64_t a = 1;  // lambda numerator
    std::int64_t q = 1;  // modulus for lambda and characters
    cplx z{0.0, 0.0};    // exponent for the power rules
    unsigned ell = 2;    // l-free order
};

// sigma(p^j) = 1 + p + ... + p^j, exact; throws when it does not fit.
inline std::uint64_t sigma_prime_power(std::uint64_t p, unsigned j)
{
    std::uint64_t s = 1, pw = 1;
    for (unsigned i = 0; i < j; ++i) {
        if (pw > std::numeric_limits<std::uint64_t>::max() / p)
            throw resource_error("sigma(p^j) overflows 64 bits");
        pw *= p;
        if (s > std::numeric_limits<std::uint64_t>::max() - pw)
            throw resource_error("sigma(p^j) overflows 64 bits");
        s += pw;
    }
    return s;
}

// log(p^j / sigma(p^j)) = -log(1 + 1/p + ... + 1/p^j), accurate for large p.
inline double log_ratio_prime_power(std::uint64_t p, unsigned j)
{
    if (j == 0)
        return 0.0;
    const double pd = static_cast<double>(p);
    const double s = -std::expm1(-static_cast<double>(j) * std::log(pd)) / (pd - 1.0);
    return -std::log1p(s);
}

// p^j / sigma(p^j) as a double; exact division when both fit in 53 bits.
inline double ratio_prime_power(std::uint64_t p, unsigned j)
{
    if (j == 0)
        return 1.0;
    if (j * std::log2(static_cast<double>(p)) < 52.0) {
        std::uint64_t pw = 1;
        for (unsigned i = 0; i < j; ++i)
            pw *= p;
        return static_cast<double>(pw) / static_cast<double>(sigma_prime_power(p, j));
    }
    return std::exp(log_ratio_prime_power(p, j));
}

struct prime_power {
    std::uint64_t p = 2;
    unsigned j = 0;
    std::uint64_t value = 1;

    static prime_power make(std::uint64_t p, unsigned j)
    {
        if (!is_prime(p))
            throw validation_error(std::to_string(p) + " is not prime");
        std::uint64_t v = 1;
        for (unsigned i = 0; i < j; ++i) {
            if (v > std::numeric_limits<std::uint64_t>::max() / p)
                throw resource_error("prime power overflows 64 bits");
            v *= p;
        }
        return {p, j, v};
    }

    friend bool operator==(const prime_power&, const prime_power&) = default;
};

class mult_func {
public:
    static mult_func make(rule id, func_params params = {})
    {
        switch (id) {
        case rule::lambda:
            if (params.q <= 0)
                throw validation_error("lambda needs q >= 1");
            break;
        case rule::principal_char:
            if (params.q <= 0)
                throw validation_error("principal_char needs q >= 1");
            break;
        case rule::quadratic_char:
            if (params.q < 3 || params.q % 2 == 0 || !is_prime(static_cast<std::uint64_t>(params.q)))
                throw validation_error("quadratic_char needs an odd prime modulus q");
            break;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow:
            if (!(std::abs(params.z.real()) <= 8.0 && std::abs(params.z.imag()) <= 8.0))
                throw validation_error("power exponent z must satisfy |Re z|, |Im z| <= 8");
            break;
        case rule::lfree:
            if (params.ell < 2 || params.ell > 64)
                throw validation_error("lfree needs 2 <= l <= 64");
            break;
        default:
            break;
        }
        mult_func f;
        f.id_ = id;
        f.params_ = params;
        return f;
    }

    rule id() const { return id_; }
    const func_params& params() const { return params_; }
    unsigned twist() const { return twist_k_; }
    const std::optional<double>& coprime_above() const { return coprime_y_; }
    bool sigma_weight() const { return sigma_weight_; }

    bool is_one() const { return id_ == rule::one && twist_k_ == 0 && !coprime_y_ && !sigma_weight_; }

    // f(p^j). The caller guarantees p is prime; j = 0 always gives 1.
    cplx at(std::uint64_t p, unsigned j) const
    {
        if (j == 0)
            return 1.0;
        if (coprime_y_ && static_cast<double>(p) <= *coprime_y_)
            return 0.0;
        cplx v = base_at(p, j);
        if (twist_k_ > 0) {
            const double r = ratio_prime_power(p, j);
            double w = 1.0;
            for (unsigned i = 0; i < twist_k_; ++i)
                w *= r;
            v *= w;
        }
        if (sigma_weight_)
            v /= ratio_prime_power(p, j);
        return v;
    }

    // True when f(p^j) = 0 for every j >= 1.
    bool kills_prime(std::uint64_t p) const
    {
        if (coprime_y_ && static_cast<double>(p) <= *coprime_y_)
            return true;
        return id_ == rule::principal_char && static_cast<std::uint64_t>(params_.q) % p == 0;
    }

    bool real_valued() const
    {
        switch (id_) {
        case rule::lambda: return (2 * params_.a) % params_.q == 0;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow: return params_.z.imag() == 0.0;
        default: return true;
        }
    }

    bool nonnegative() const
    {
        switch (id_) {
        case rule::mu:
        case rule::quadratic_char: return false;
        case rule::lambda: return params_.a % params_.q == 0;
        default: return real_valued();
        }
    }

    // Values are exact small integers (so sums of doubles are exact).
    bool integer_valued() const
    {
        if (twist_k_ > 0 || sigma_weight_)
            return false;
        switch (id_) {
        case rule::phi_over_n:
        case rule::sigma_over_n: return false;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow: return params_.z == cplx{0.0, 0.0};
        case rule::lambda: return real_valued();
        default: return true;
        }
    }

    value_class vclass() const
    {
        bool disc = false;
        switch (id_) {
        case rule::tau:
        case rule::r:
        case rule::sigma_over_n: disc = false; break;
        case rule::phi_over_n_pow: disc = params_.z.real() >= 0.0; break;
        case rule::sigma_over_n_pow: disc = params_.z.real() <= 0.0; break;
        default: disc = true; break;
        }
        if (sigma_weight_)
            disc = false;
        if (disc)
            return value_class::unit_disc;
        return nonnegative() ? value_class::nonnegative_bounded_prime : value_class::general;
    }

    // Wirsing density for the nonnegative entries.
    std::optional<double> claimed_kappa() const
    {
        if (!nonnegative())
            return std::nullopt;
        switch (id_) {
        case rule::tau: return 2.0;
        case rule::two_squares_indicator: return 0.5;
        case rule::lambda: return 1.0; // a = 0 mod q, i.e. f = 1
        default: return 1.0;
        }
    }

    // Whether the catalog entry satisfies the hypotheses under which the mean
    // value equals the Euler product prod_p (1 - 1/p)(1 + f(p)/p + ...):
    // sum |f(p) - 1|/p and sum_p sum_{j>=2} |f(p^j)|/p^j converge, or |f| <= 1
    // and sum (f(p) - 1)/p converges.
    bool mean_value_hypotheses() const
    {
        switch (id_) {
        case rule::one:
        case rule::mu_squared:
        case rule::phi_over_n:
        case rule::sigma_over_n:
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow:
        case rule::lfree:
        case rule::principal_char: return true;
        case rule::lambda: return params_.a % params_.q == 0;
        default: return false;
        }
    }

    // Tail-model constants, valid for primes p > 11:
    //   |f(p)| <= prime_bound(), |f(p) - 1| <= deviation_coeff()/p,
    //   sum_{j>=2} |f(p^j)|/p^j <= eta_coeff()/p^2.
    double prime_bound() const
    {
        double m = 1.0;
        switch (id_) {
        case rule::tau:
        case rule::r: m = 2.0; break;
        case rule::sigma_over_n: m = 1.1; break;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow: m = std::pow(1.1, std::abs(params_.z.real())); break;
        default: break;
        }
        return sigma_weight_ ? 1.1 * m : m;
    }

    double deviation_coeff() const
    {
        double a = 0.0;
        switch (id_) {
        case rule::phi_over_n:
        case rule::sigma_over_n: a = 1.0; break;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow: {
            const double az = std::abs(params_.z);
            a = 1.05 * az * std::exp(1.05 * az / 11.0);
            break;
        }
        case rule::one:
        case rule::mu_squared:
        case rule::lfree:
        case rule::principal_char: a = 0.0; break;
        case rule::lambda: a = params_.a % params_.q == 0 ? 0.0 : std::numeric_limits<double>::infinity(); break;
        default: a = std::numeric_limits<double>::infinity(); break;
        }
        const double m = prime_bound();
        a += 1.1 * twist_k_ * m;
        if (sigma_weight_)
            a += m;
        return a;
    }

    double eta_coeff() const
    {
        double e = 1.1;
        switch (id_) {
        case rule::mu:
        case rule::mu_squared: e = 0.0; break;
        case rule::lfree: e = params_.ell == 2 ? 0.0 : 1.1; break;
        case rule::tau:
        case rule::r: e = 3.5; break;
        case rule::sigma_over_n: e = 1.25; break;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow: e = 1.1 * std::pow(1.1, std::abs(params_.z.real())); break;
        default: break;
        }
        return sigma_weight_ ? 1.2 * e : e;
    }

    // Closed form of (1 - 1/p) * sum_j f(p^j)/p^j where one is known.
    std::optional<double> closed_mean_factor(std::uint64_t p) const
    {
        if (twist_k_ > 0 || coprime_y_ || sigma_weight_)
            return std::nullopt;
        const double pd = static_cast<double>(p);
        switch (id_) {
        case rule::one: return 1.0;
        case rule::phi_over_n:
        case rule::mu_squared: return 1.0 - 1.0 / (pd * pd);
        case rule::sigma_over_n: return 1.0 / (1.0 - 1.0 / (pd * pd));
        case rule::lfree: return -std::expm1(-static_cast<double>(params_.ell) * std::log(pd));
        case rule::principal_char: return static_cast<std::uint64_t>(params_.q) % p == 0 ? 1.0 - 1.0 / pd : 1.0;
        default: return std::nullopt;
        }
    }

    // |log closed_mean_factor(p)| <= coeff / p^2 for p > 11.
    std::optional<double> closed_mean_tail_coeff() const
    {
        if (!closed_mean_factor(2))
            return std::nullopt;
        switch (id_) {
        case rule::one:
        case rule::principal_char: return 0.0;
        default: return 1.1;
        }
    }

    // Growth of |f(p^j)| in j is at most growth_base() * (j + 1)^growth_degree().
    unsigned growth_degree() const { return (id_ == rule::tau || id_ == rule::r) ? 1u : 0u; }
    double growth_base() const
    {
        double b = 1.0;
        if (id_ == rule::phi_over_n_pow || id_ == rule::sigma_over_n_pow)
            b = std::pow(2.0, std::abs(params_.z.real()));
        if (id_ == rule::sigma_over_n)
            b = 2.0;
        if (sigma_weight_)
            b *= 2.0;
        return b;
    }

    std::string spec() const
    {
        std::ostringstream os;
        os.precision(17);
        os << name();
        std::vector<std::string> kv;
        auto num = [](double v) {
            std::ostringstream s;
            s.precision(17);
            s << v;
            return s.str();
        };
        switch (id_) {
        case rule::lambda:
            kv.push_back("a=" + std::to_string(params_.a));
            kv.push_back("q=" + std::to_string(params_.q));
            break;
        case rule::principal_char:
        case rule::quadratic_char: kv.push_back("q=" + std::to_string(params_.q)); break;
        case rule::phi_over_n_pow:
        case rule::sigma_over_n_pow:
            kv.push_back("re=" + num(params_.z.real()));
            kv.push_back("im=" + num(params_.z.imag()));
            break;
        case rule::lfree: kv.push_back("l=" + std::to_string(params_.ell)); break;
        default: break;
        }
        if (twist_k_ > 0)
            kv.push_back("k=" + std::to_string(twist_k_));
        if (coprime_y_)
            kv.push_back("y=" + num(*coprime_y_));
        if (sigma_weight_)
            kv.push_back("bw=1");
        for (std::size_t i = 0; i < kv.size(); ++i)
            os << (i == 0 ? ':' : ',') << kv[i];
        return os.str();
    }

    std::string_view name() const { return rule_name(id_); }

    static std::string_view rule_name(rule id)
    {
        switch (id) {
        case rule::one: return "one";
        case rule::tau: return "tau";
        case rule::mu: return "mu";
        case rule::mu_squared: return "mu2";
        case rule::phi_over_n: return "phi_over_n";
        case rule::sigma_over_n: return "sigma_over_n";
        case rule::phi_over_n_pow: return "phi_over_n_pow";
        case rule::sigma_over_n_pow: return "sigma_over_n_pow";
        case rule::r: return "r";
        case rule::two_squares_indicator: return "two_squares_indicator";
        case rule::lfree: return "lfree";
        case rule::lambda: return "lambda";
        case rule::principal_char: return "principal_char";
        case rule::quadratic_char: return "quadratic_char";
        }
        return "?";
    }

    static constexpr rule all_rules[] = {
        rule::one, rule::tau, rule::mu, rule::mu_squared, rule::phi_over_n, rule::sigma_over_n,
        rule::phi_over_n_pow, rule::sigma_over_n_pow, rule::r, rule::two_squares_indicator,
        rule::lfree, rule::lambda, rule::principal_char, rule::quadratic_char,
    };

    friend mult_func sigma_power_twist(const mult_func& f, unsigned k);
    friend mult_func restrict_coprime(const mult_func& f, double y, bool with_sigma_weight);

private:
    cplx base_at(std::uint64_t p, unsigned j) const
    {
        switch (id_) {
        case rule::one: return 1.0;
        case rule::tau: return static_cast<double>(j + 1);
        case rule::mu: return j == 1 ? -1.0 : 0.0;
        case rule::mu_squared: return j == 1 ? 1.0 : 0.0;
        case rule::phi_over_n: return 1.0 - 1.0 / static_cast<double>(p);
        case rule::sigma_over_n: return 1.0 / ratio_prime_power(p, j);
        case rule::phi_over_n_pow: return std::exp(params_.z * std::log1p(-1.0 / static_cast<double>(p)));
        case rule::sigma_over_n_pow: return std::exp(-params_.z * log_ratio_prime_power(p, j));
        case rule::r:
            if (p == 2)
                return 1.0;
            if (p % 4 == 1)
                return static_cast<double>(j + 1);
            return (j % 2 == 0) ? 1.0 : 0.0;
        case rule::two_squares_indicator: return (p % 4 == 3 && j % 2 == 1) ? 0.0 : 1.0;
        case rule::lfree: return j < params_.ell ? 1.0 : 0.0;
        case rule::lambda: return root_of_unity(params_.a * static_cast<std::int64_t>(j), params_.q);
        case rule::principal_char: return static_cast<std::uint64_t>(params_.q) % p == 0 ? 0.0 : 1.0;
        case rule::quadratic_char: {
            const int s = jacobi(static_cast<std::int64_t>(p % static_cast<std::uint64_t>(params_.q)), params_.q);
            return (s == -1 && j % 2 == 1) ? -1.0 : static_cast<double>(s == 0 ? 0 : 1);
        }
        }
        return 0.0;
    }

    // exp(2 pi i k / q), exact at the quarter turns.
    static cplx root_of_unity(std::int64_t k, std::int64_t q)
    {
        std::int64_t r = k % q;
        if (r < 0)
            r += q;
        if (r == 0)
            return 1.0;
        if (2 * r == q)
            return -1.0;
        if (4 * r == q)
            return cplx{0.0, 1.0};
        if (4 * r == 3 * q)
            return cplx{0.0, -1.0};
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(q);
        return {std::cos(angle), std::sin(angle)};
    }

    rule id_ = rule::one;
    func_params params_{};
    unsigned twist_k_ = 0;
    std::optional<double> coprime_y_;
    bool sigma_weight_ = false;
};

inline cplx eval_prime_power(const mult_func& f, std::uint64_t p, unsigned j)
{
    if (!is_prime(p))
        throw validation_error(std::to_string(p) + " is not prime");
    return f.at(p, j);
}

// f_k(n) = f(n) (n / sigma(n))^k.
inline mult_func sigma_power_twist(const mult_func& f, unsigned k)
{
    if (k > 64)
        throw validation_error("twist exponent k must be <= 64");
    mult_func g = f;
    g.twist_k_ += k;
    return g;
}

// a_y = f * 1_{(n, prod_{p<=y} p) = 1}; with the flag, b_y = a_y * sigma(n)/n.
inline mult_func restrict_coprime(const mult_func& f, double y, bool with_sigma_weight)
{
    if (!(y >= 2.0) || y > 4.0e9)
        throw validation_error("restrict_coprime needs 2 <= y <= 4e9");
    mult_func g = f;
    g.coprime_y_ = g.coprime_y_ ? std::max(*g.coprime_y_, y) : y;
    g.sigma_weight_ = g.sigma_weight_ || with_sigma_weight;
    return g;
}

// Evaluates f on n = prod p^j.
template <class Factors>
cplx eval_factored(const mult_func& f, const Factors& factors)
{
    cplx v = 1.0;
    for (const auto& pp : factors)
        v *= f.at(pp.p, pp.j);
    return v;
}

// Trial-division factorization, for small n and for tests.
inline std::vector<prime_power> trial_factor(std::uint64_t n)
{
    std::vector<prime_power> out;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        if (n % p != 0)
            continue;
        prime_power pp{p, 0, 1};
        while (n % p == 0) {
            n /= p;
            ++pp.j;
            pp.value *= p;
        }
        out.push_back(pp);
    }
    if (n > 1)
        out.push_back({n, 1, n});
    return out;
}

// Parses "id" or "id:key=value,...". Keys: a, q (lambda, characters), re, im
// (power exponent), l (lfree order), k (sigma-power twist), y (coprime
// restriction), bw=1 (sigma(n)/n weight together with y).
inline mult_func parse_mult_func(std::string_view spec)
{
    const auto colon = spec.find(':');
    const std::string_view id = spec.substr(0, colon);
    std::optional<rule> which;
    for (rule r : mult_func::all_rules)
        if (mult_func::rule_name(r) == id)
            which = r;
    if (id == "mu_squared")
        which = rule::mu_squared;
    if (id == "liouville") // lambda with a=1, q=2
        which = rule::lambda;
    if (id == "1_S")
        which = rule::two_squares_indicator;
    if (!which)
        throw validation_error("unknown catalog id '" + std::string(id) + "'");

    func_params params;
    if (id == "liouville") {
        params.a = 1;
        params.q = 2;
    }
    unsigned k = 0;
    std::optional<double> y;
    bool bw = false;

    auto to_double = [&](std::string_view v) {
        try {
            std::size_t used = 0;
            const std::string s(v);
            const double d = std::stod(s, &used);
            if (used != s.size())
                throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw validation_error("cannot parse number '" + std::string(v) + "' in '" + std::string(spec) + "'");
        }
    };

    if (colon != std::string_view::npos) {
        std::string_view rest = spec.substr(colon + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos)
                throw validation_error("expected key=value in '" + std::string(spec) + "'");
            const std::string_view key = item.substr(0, eq);
            const std::string_view val = item.substr(eq + 1);
            if (key == "a")
                params.a = detail::parse_int(val, spec);
            else if (key == "q")
                params.q = detail::parse_int(val, spec);
            else if (key == "re")
                params.z.real(to_double(val));
            else if (key == "im")
                params.z.imag(to_double(val));
            else if (key == "l") {
                const auto l = detail::parse_int(val, spec);
                if (l < 0 || l > 1000)
                    throw validation_error("l out of range in '" + std::string(spec) + "'");
                params.ell = static_cast<unsigned>(l);
            } else if (key == "k") {
                const auto kk = detail::parse_int(val, spec);
                if (kk < 0)
                    throw validation_error("k must be >= 0");
                k = static_cast<unsigned>(std::min<std::int64_t>(kk, 1000));
            } else if (key == "y")
                y = to_double(val);
            else if (key == "bw")
                bw = detail::parse_int(val, spec) != 0;
            else
                throw validation_error("unknown parameter '" + std::string(key) + "' in '" + std::string(spec) + "'");
        }
    }
    if (bw && !y)
        throw validation_error("bw=1 requires y=<bound>");

    mult_func f = mult_func::make(*which, params);
    if (k > 0)
        f = sigma_power_twist(f, k);
    if (y)
        f = restrict_coprime(f, *y, bw);
    return f;
}

} // namespace ddl
