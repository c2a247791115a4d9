#pragma once

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "multfunc.hpp"
#include "parallel.hpp"
#include "primes.hpp"

namespace ddl {

// Largest n the segmented sieve accepts. Residues and smallest prime factors
// are stored in 32 bits, and the cache header stores lo/hi as u32.
inline constexpr std::uint64_t max_sieve_bound = 0xFFFFFFFFull;
// Largest single segment; 2^28 entries is ~8 GB with function values.
inline constexpr std::uint64_t max_segment_length = 1ull << 28;
// 2^16 entries keep the per-segment tables (~2 MB with function values)
// close to L2; larger segments are several times slower.
inline constexpr std::uint64_t default_segment_size = 1ull << 16;

// Primes up to `limit`, in increasing order.
struct base_primes {
    std::uint64_t limit = 1;
    std::vector<std::uint32_t> primes;

    static std::shared_ptr<const base_primes> up_to(std::uint64_t limit)
    {
        auto bp = std::make_shared<base_primes>();
        bp->limit = limit;
        bp->primes = primes_up_to(limit);
        return bp;
    }

    // Enough base primes to sieve [1, hi].
    static std::shared_ptr<const base_primes> for_range(std::uint64_t hi) { return up_to(std::max<std::uint64_t>(isqrt(hi), 2)); }
};

struct factorization {
    std::vector<prime_power> factors;

    std::uint64_t product() const
    {
        std::uint64_t n = 1;
        for (const auto& f : factors)
            n *= f.value;
        return n;
    }
    auto begin() const { return factors.begin(); }
    auto end() const { return factors.end(); }
    std::size_t size() const { return factors.size(); }
    bool empty() const { return factors.empty(); }
};

// Exact tables over [lo, hi]: smallest prime factor (spf(1) = 1), sigma,
// Omega, and optionally the values of one multiplicative function.
struct sieve_segment {
    std::uint64_t lo = 1;
    std::uint64_t hi = 0;
    std::vector<std::uint32_t> spf;
    std::vector<std::uint64_t> sigma;
    std::vector<std::uint8_t> omega;
    std::vector<cplx> fvals; // empty unless a function was folded in
    std::shared_ptr<const base_primes> primes;

    // Scratch: unfactored part of n while sieving.
    std::vector<std::uint32_t> residue;

    std::uint64_t size() const { return hi >= lo ? hi - lo + 1 : 0; }
    bool contains(std::uint64_t n) const { return n >= lo && n <= hi; }

    std::uint64_t sigma_at(std::uint64_t n) const
    {
        check(n);
        return sigma[n - lo];
    }
    std::uint32_t spf_at(std::uint64_t n) const
    {
        check(n);
        return spf[n - lo];
    }

    void check(std::uint64_t n) const
    {
        if (!contains(n))
            throw validation_error(std::to_string(n) + " outside segment [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]");
    }
};

namespace detail {

struct prime_tables {
    std::uint32_t inv32_pow[33];
    std::uint64_t sigma_pow[33];
    cplx fval[33];
    unsigned jmax = 0;
};

inline void fill_prime_tables(prime_tables& t, std::uint64_t p, std::uint64_t hi, const mult_func* f)
{
    const auto inv = static_cast<std::uint32_t>(inverse_mod_2_64(p | 1));
    std::uint32_t ip = 1;
    std::uint64_t pw = 1;
    t.inv32_pow[0] = 1;
    t.sigma_pow[0] = 1;
    t.fval[0] = 1.0;
    unsigned j = 0;
    while (pw <= hi / p) {
        pw *= p;
        ++j;
        ip *= inv;
        t.inv32_pow[j] = ip;
        t.sigma_pow[j] = sigma_prime_power(p, j);
        if (f)
            t.fval[j] = f->at(p, j);
    }
    t.jmax = j;
}

} // namespace detail

// Sieves [lo, hi] into `seg`, reusing its storage. With f given, fvals holds
// f(n) built multiplicatively from the same factorization.
inline void build_segment_into(sieve_segment& seg, std::uint64_t lo, std::uint64_t hi,
                               std::shared_ptr<const base_primes> primes, const mult_func* f = nullptr)
{
    if (lo < 1 || lo > hi)
        throw validation_error("segment needs 1 <= lo <= hi");
    if (hi > max_sieve_bound)
        throw resource_error("segment bound " + std::to_string(hi) + " exceeds the 32-bit sieve limit " +
                             std::to_string(max_sieve_bound));
    const std::uint64_t len = hi - lo + 1;
    if (len > max_segment_length)
        throw resource_error("segment length " + std::to_string(len) + " exceeds the memory budget");
    const std::uint64_t root = isqrt(hi);
    if (!primes || primes->limit < root)
        throw validation_error("base primes do not cover sqrt(hi)");

    seg.lo = lo;
    seg.hi = hi;
    seg.primes = primes;
    seg.residue.resize(len);
    seg.sigma.assign(len, 1);
    seg.spf.assign(len, 0);
    seg.omega.assign(len, 0);
    if (f)
        seg.fvals.assign(len, cplx{1.0, 0.0});
    else
        seg.fvals.clear();
    for (std::uint64_t i = 0; i < len; ++i)
        seg.residue[i] = static_cast<std::uint32_t>(lo + i);

    auto* residue = seg.residue.data();
    auto* sigma = seg.sigma.data();
    auto* spf = seg.spf.data();
    auto* omega = seg.omega.data();
    auto* fv = f ? seg.fvals.data() : nullptr;

    detail::prime_tables tab;
    const auto& plist = primes->primes;
    // Descending order so the last write to spf is the smallest prime.
    std::size_t np = static_cast<std::size_t>(std::upper_bound(plist.begin(), plist.end(), root) - plist.begin());
    while (np-- > 0) {
        const std::uint64_t p = plist[np];
        detail::fill_prime_tables(tab, p, hi, f);
        const std::uint64_t first = (lo + p - 1) / p;
        if (p == 2) {
            std::uint64_t q = first;
            for (std::uint64_t i = 2 * first - lo; i < len; i += 2, ++q) {
                const unsigned j = 1 + static_cast<unsigned>(std::countr_zero(q));
                residue[i] >>= j;
                sigma[i] *= tab.sigma_pow[j];
                omega[i] = static_cast<std::uint8_t>(omega[i] + j);
                spf[i] = 2;
                if (fv)
                    fv[i] *= tab.fval[j];
            }
            continue;
        }
        // q divisible by p  <=>  q * p^{-1} mod 2^64 <= (2^64 - 1) / p.
        const std::uint64_t inv = inverse_mod_2_64(p);
        const std::uint64_t lim = ~std::uint64_t{0} / p;
        const auto p32 = static_cast<std::uint32_t>(p);
        std::uint64_t q = first;
        for (std::uint64_t i = first * p - lo; i < len; i += p, ++q) {
            unsigned j = 1;
            std::uint64_t t = q;
            while (t * inv <= lim) {
                t *= inv;
                ++j;
            }
            residue[i] *= tab.inv32_pow[j];
            sigma[i] *= tab.sigma_pow[j];
            omega[i] = static_cast<std::uint8_t>(omega[i] + j);
            spf[i] = p32;
            if (fv)
                fv[i] *= tab.fval[j];
        }
    }

    // Whatever is left is 1 or a single prime above sqrt(hi).
    for (std::uint64_t i = 0; i < len; ++i) {
        const std::uint32_t c = residue[i];
        if (c > 1) {
            sigma[i] *= static_cast<std::uint64_t>(c) + 1;
            ++omega[i];
            if (spf[i] == 0)
                spf[i] = c;
            if (fv)
                fv[i] *= f->at(c, 1);
        } else if (spf[i] == 0) {
            spf[i] = 1; // n = 1
        }
    }
}

inline sieve_segment build_segment(std::uint64_t lo, std::uint64_t hi, std::shared_ptr<const base_primes> primes,
                                   const mult_func* f = nullptr)
{
    sieve_segment seg;
    build_segment_into(seg, lo, hi, std::move(primes), f);
    return seg;
}

inline sieve_segment build_segment(std::uint64_t lo, std::uint64_t hi, const mult_func* f = nullptr)
{
    if (hi > max_sieve_bound)
        throw resource_error("segment bound exceeds the 32-bit sieve limit");
    return build_segment(lo, hi, base_primes::for_range(hi), f);
}

// Factorization by repeated smallest-prime-factor division. Once the cofactor
// drops below the segment, the remaining primes come from trial division by
// the segment's base primes.
inline factorization factorize(std::uint64_t n, const sieve_segment& seg)
{
    seg.check(n);
    factorization out;
    std::uint64_t m = n;
    std::uint64_t last = 1;
    auto take = [&](std::uint64_t p) {
        prime_power pp{p, 0, 1};
        while (m % p == 0) {
            m /= p;
            ++pp.j;
            pp.value *= p;
        }
        out.factors.push_back(pp);
        last = p;
    };
    while (m > 1 && seg.contains(m))
        take(seg.spf[m - seg.lo]);
    if (m > 1) {
        for (std::uint32_t p : seg.primes->primes) {
            if (p <= last)
                continue;
            if (static_cast<std::uint64_t>(p) * p > m)
                break;
            if (m % p == 0)
                take(p);
        }
        if (m > 1)
            take(m);
    }
    return out;
}

// One visited integer with its exact sigma, f(n), spf and Omega.
struct sieve_entry {
    std::uint64_t n;
    std::uint64_t sigma;
    cplx f;
    std::uint32_t spf;
    std::uint8_t omega;
};

struct fold_options {
    std::uint64_t segment_size = default_segment_size;
    unsigned workers = 1;
};

template <class Acc>
void visit_segment(const sieve_segment& seg, Acc& acc)
{
    const std::uint64_t len = seg.size();
    const bool has_f = !seg.fvals.empty();
    for (std::uint64_t i = 0; i < len; ++i)
        acc(sieve_entry{seg.lo + i, seg.sigma[i], has_f ? seg.fvals[i] : cplx{1.0, 0.0}, seg.spf[i], seg.omega[i]});
}

// Visits every n <= x exactly once. `make_acc()` creates an accumulator with
// operator()(const sieve_entry&) and merge(const Acc&); one accumulator runs
// per segment and the results are merged in segment order, so a run does not
// depend on the worker count.
template <class MakeAcc>
auto fold_over_range(const mult_func& f, std::uint64_t x, MakeAcc&& make_acc, const fold_options& opt = {})
{
    using Acc = std::decay_t<decltype(make_acc())>;
    if (x < 1)
        throw validation_error("fold needs x >= 1");
    if (x > max_sieve_bound)
        throw resource_error("x = " + std::to_string(x) + " exceeds the 32-bit sieve limit");
    if (opt.segment_size < 1 || opt.segment_size > max_segment_length)
        throw resource_error("segment size must be in [1, 2^28]");

    auto primes = base_primes::for_range(x);
    const std::uint64_t seg = opt.segment_size;
    const std::uint64_t nseg = (x + seg - 1) / seg;
    const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(std::min<std::uint64_t>(nseg, 1024))));
    const mult_func* fp = f.is_one() ? nullptr : &f;

    std::vector<std::optional<Acc>> parts(nseg);
    std::vector<sieve_segment> work(workers);
    parallel_for_index(static_cast<std::size_t>(nseg), workers, [&](unsigned w, std::size_t s) {
        const std::uint64_t lo = 1 + s * seg;
        const std::uint64_t hi = std::min(x, lo + seg - 1);
        build_segment_into(work[w], lo, hi, primes, fp);
        Acc acc = make_acc();
        visit_segment(work[w], acc);
        parts[s].emplace(std::move(acc));
    });

    Acc total = make_acc();
    for (auto& part : parts)
        total.merge(*part);
    return total;
}

// ---------------------------------------------------------------------------
// Sigma cache: 16-byte header {"SGMA", u32 version, u32 lo, u32 hi}, then
// sigma(lo..hi) as little-endian u64.

inline constexpr std::uint32_t sigma_cache_version = 1;
inline constexpr std::uint64_t max_cache_entries = 1ull << 27; // 1 GiB of u64

struct sigma_table {
    std::uint64_t lo = 1;
    std::uint64_t hi = 0;
    std::vector<std::uint64_t> sigma;

    bool covers(std::uint64_t a, std::uint64_t b) const { return lo <= a && b <= hi; }
    std::uint64_t at(std::uint64_t n) const { return sigma[n - lo]; }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

} // namespace detail

// Streams sigma values to a cache file; finish() checks the count.
class sigma_cache_writer {
public:
    sigma_cache_writer(const std::filesystem::path& path, std::uint64_t lo, std::uint64_t hi)
        : path_(path), expected_(hi - lo + 1)
    {
        if (hi > max_sieve_bound || lo < 1 || lo > hi)
            throw validation_error("sigma cache: bad range");
        os_.open(path, std::ios::binary | std::ios::trunc);
        if (!os_)
            throw resource_error("cannot open " + path.string() + " for writing");
        os_.write("SGMA", 4);
        detail::put_u32(os_, sigma_cache_version);
        detail::put_u32(os_, static_cast<std::uint32_t>(lo));
        detail::put_u32(os_, static_cast<std::uint32_t>(hi));
    }

    void append(std::span<const std::uint64_t> sigma)
    {
        buf_.resize(sigma.size() * 8);
        for (std::size_t i = 0; i < sigma.size(); ++i)
            for (int b = 0; b < 8; ++b)
                buf_[8 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(sigma[i] >> (8 * b));
        os_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        written_ += sigma.size();
    }

    void finish()
    {
        if (written_ != expected_)
            throw validation_error("sigma cache: wrote " + std::to_string(written_) + " of " +
                                   std::to_string(expected_) + " values");
        os_.close();
        if (!os_)
            throw resource_error("short write to " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream os_;
    std::uint64_t expected_;
    std::uint64_t written_ = 0;
    std::vector<unsigned char> buf_;
};

inline void write_sigma_cache(const std::filesystem::path& path, std::uint64_t lo, std::uint64_t hi,
                              const std::vector<std::uint64_t>& sigma)
{
    if (lo <= hi && sigma.size() != hi - lo + 1)
        throw validation_error("sigma cache: bad range");
    sigma_cache_writer w(path, lo, hi);
    w.append(sigma);
    w.finish();
}

inline void write_sigma_cache(const std::filesystem::path& path, const sieve_segment& seg)
{
    write_sigma_cache(path, seg.lo, seg.hi, seg.sigma);
}

inline sigma_table read_sigma_cache(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw resource_error("cannot open " + path.string());
    unsigned char head[16];
    is.read(reinterpret_cast<char*>(head), 16);
    if (!is || std::memcmp(head, "SGMA", 4) != 0)
        throw validation_error(path.string() + ": not a sigma cache");
    if (detail::get_u32(head + 4) != sigma_cache_version)
        throw validation_error(path.string() + ": unsupported cache version");
    sigma_table t;
    t.lo = detail::get_u32(head + 8);
    t.hi = detail::get_u32(head + 12);
    if (t.lo < 1 || t.lo > t.hi)
        throw validation_error(path.string() + ": bad range in header");
    const std::uint64_t len = t.hi - t.lo + 1;
    if (len > max_cache_entries)
        throw resource_error(path.string() + ": table too large to load");
    std::vector<unsigned char> buf(len * 8);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is || is.peek() != std::char_traits<char>::eof())
        throw validation_error(path.string() + ": payload size does not match header");
    t.sigma.resize(len);
    for (std::uint64_t i = 0; i < len; ++i) {
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b)
            v |= static_cast<std::uint64_t>(buf[8 * i + static_cast<std::uint64_t>(b)]) << (8 * b);
        t.sigma[i] = v;
    }
    return t;
}

inline std::string sigma_cache_name(std::uint64_t lo, std::uint64_t hi)
{
    return "sigma_" + std::to_string(lo) + "_" + std::to_string(hi) + ".sgma";
}

// DDL_CACHE_DIR, when set and non-empty.
inline std::optional<std::filesystem::path> cache_dir_from_env()
{
    const char* dir = std::getenv("DDL_CACHE_DIR");
    if (!dir || !*dir)
        return std::nullopt;
    return std::filesystem::path(dir);
}

// A cached table in `dir` covering [1, hi], if any.
inline std::optional<sigma_table> find_sigma_cache(const std::filesystem::path& dir, std::uint64_t hi)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        return std::nullopt;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.path().extension() != ".sgma")
            continue;
        try {
            auto t = read_sigma_cache(entry.path());
            if (t.covers(1, hi))
                return t;
        } catch (const std::exception&) {
            continue;
        }
    }
    return std::nullopt;
}

} // namespace ddl
