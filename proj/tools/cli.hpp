#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddl/ddl.hpp"

namespace ddl::cli {

inline constexpr const char* tool_version = "0.1.0";

using json = nlohmann::ordered_json;

namespace detail {

inline std::string fmt12(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline json cjson(const cplx& z) { return json::array({z.real(), z.imag()}); }

// Integer counts written as "12345", "1e7" or "10^8".
inline std::uint64_t parse_count(const std::string& flag, const std::string& s)
{
    auto fail = [&] { return validation_error(flag + ": expected a nonnegative integer, got '" + s + "'"); };
    if (s.empty())
        throw fail();
    if (auto caret = s.find('^'); caret != std::string::npos) {
        const std::int64_t b = ddl::detail::parse_int(s.substr(0, caret), flag);
        const std::int64_t e = ddl::detail::parse_int(s.substr(caret + 1), flag);
        if (b < 0 || e < 0)
            throw fail();
        long double v = std::pow(static_cast<long double>(b), static_cast<long double>(e));
        if (v > 1.8e19L)
            throw resource_error(flag + ": " + s + " overflows 64 bits");
        std::uint64_t r = 1;
        for (std::int64_t i = 0; i < e; ++i)
            r *= static_cast<std::uint64_t>(b);
        return r;
    }
    if (s.find_first_of("eE.") != std::string::npos) {
        double v = 0;
        std::size_t used = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw fail();
        }
        if (used != s.size() || v < 0 || v != std::floor(v))
            throw fail();
        if (v > 1.8e19)
            throw resource_error(flag + ": " + s + " overflows 64 bits");
        return static_cast<std::uint64_t>(v);
    }
    const std::int64_t v = ddl::detail::parse_int(s, flag);
    if (v < 0)
        throw fail();
    return static_cast<std::uint64_t>(v);
}

inline double parse_real(const std::string& flag, const std::string& s)
{
    if (s.find('^') != std::string::npos)
        return static_cast<double>(parse_count(flag, s));
    double v = 0;
    std::size_t used = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw validation_error(flag + ": expected a number, got '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v))
        throw validation_error(flag + ": expected a number, got '" + s + "'");
    return v;
}

template <class Fn>
auto with_flag(const std::string& flag, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const validation_error& e) {
        throw validation_error(flag + ": " + e.what());
    }
}

inline std::vector<double> split_reals(const std::string& flag, const std::string& s)
{
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        v.push_back(parse_real(flag, item));
    if (v.empty())
        throw validation_error(flag + ": empty list");
    return v;
}

// "a,b,c", "linspace:lo:hi:n" or "sym:T:step" (k * step for |k * step| <= T).
inline std::vector<double> parse_reals_spec(const std::string& flag, const std::string& s)
{
    auto fields = [&](const std::string& rest) {
        std::vector<std::string> f;
        std::stringstream ss(rest);
        std::string item;
        while (std::getline(ss, item, ':'))
            f.push_back(item);
        return f;
    };
    if (s.starts_with("linspace:")) {
        const auto f = fields(s.substr(9));
        if (f.size() != 3)
            throw validation_error(flag + ": expected linspace:lo:hi:n");
        const double lo = parse_real(flag, f[0]), hi = parse_real(flag, f[1]);
        const auto n = parse_count(flag, f[2]);
        if (n < 2 || hi <= lo)
            throw validation_error(flag + ": linspace needs n >= 2 and lo < hi");
        if (n > 10'000'000)
            throw resource_error(flag + ": too many points");
        std::vector<double> v;
        for (std::uint64_t k = 0; k < n; ++k)
            v.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
        return v;
    }
    if (s.starts_with("sym:")) {
        const auto f = fields(s.substr(4));
        if (f.size() != 2)
            throw validation_error(flag + ": expected sym:T:step");
        return with_flag(flag, [&] { return symmetric_grid(parse_real(flag, f[0]), parse_real(flag, f[1])); });
    }
    return split_reals(flag, s);
}

struct common_opts {
    std::string output;
    std::string format;
    std::string gnuplot;
    std::string segment;
    std::string workers;
};

inline void add_common(CLI::App* sub, common_opts& c, const std::string& default_format)
{
    c.format = default_format;
    sub->add_option("--output,-o", c.output, "Output file (default: stdout)");
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--gnuplot", c.gnuplot, "Also write a gnuplot script for the CSV output");
    sub->add_option("--segment", c.segment, "Sieve segment length");
    sub->add_option("--workers", c.workers, "Worker threads");
}

inline fold_options fold_from(const common_opts& c)
{
    fold_options o;
    o.workers = default_workers();
    if (!c.segment.empty()) {
        o.segment_size = parse_count("--segment", c.segment);
        if (o.segment_size < 1)
            throw validation_error("--segment: must be >= 1");
        if (o.segment_size > max_segment_length)
            throw resource_error("--segment: exceeds " + std::to_string(max_segment_length));
    }
    if (!c.workers.empty()) {
        const auto w = parse_count("--workers", c.workers);
        if (w < 1 || w > 1024)
            throw validation_error("--workers: must be in [1, 1024]");
        o.workers = static_cast<unsigned>(w);
    }
    return o;
}

inline mult_func parse_f(const std::string& s)
{
    return with_flag("--f", [&] { return parse_mult_func(s); });
}

inline rational parse_u(const std::string& flag, const std::string& s)
{
    return with_flag(flag, [&] { return parse_rational(s); });
}

struct run_context {
    std::string config;
    std::chrono::steady_clock::time_point start;
    std::ostream* out;
    std::ostream* err;

    double elapsed() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    json meta() const
    {
        return json{{"tool", std::string("ddl ") + tool_version}, {"config", config}, {"wall_time_s", elapsed()}};
    }

    std::string csv_header(const std::vector<std::pair<std::string, std::string>>& extra) const
    {
        std::string h = std::string("# tool: ddl ") + tool_version + "\n# config: " + config + "\n";
        for (const auto& [k, v] : extra)
            h += "# " + k + ": " + v + "\n";
        h += "# wall_time_s: " + fmt12(elapsed()) + "\n";
        return h;
    }
};

inline void emit(const run_context& ctx, const common_opts& c, const std::string& body)
{
    if (c.output.empty()) {
        *ctx.out << body;
        ctx.out->flush();
        return;
    }
    std::ofstream os(c.output, std::ios::binary | std::ios::trunc);
    if (!os)
        throw resource_error("--output: cannot open " + c.output);
    os << body;
    if (!os)
        throw resource_error("--output: short write to " + c.output);
}

inline void emit_json(const run_context& ctx, const common_opts& c, json j)
{
    json doc;
    doc["meta"] = ctx.meta();
    for (auto& [k, v] : j.items())
        doc[k] = v;
    emit(ctx, c, doc.dump(2) + "\n");
}

inline void write_gnuplot(const common_opts& c, const std::string& xcol, const std::string& ycol, const std::string& title)
{
    if (c.gnuplot.empty())
        return;
    if (c.output.empty())
        throw validation_error("--gnuplot: needs --output so the script can reference the data file");
    if (c.format != "csv")
        throw validation_error("--gnuplot: needs --format csv");
    std::ofstream os(c.gnuplot, std::ios::trunc);
    if (!os)
        throw resource_error("--gnuplot: cannot open " + c.gnuplot);
    os << "set datafile separator ','\n"
       << "set datafile commentschars '#'\n"
       << "set key autotitle columnhead\n"
       << "set title '" << title << "'\n"
       << "plot '" << c.output << "' using " << xcol << ":" << ycol << " with lines\n";
}

inline std::string estimate_csv(const run_context& ctx, const weighted_cdf_estimate& est,
                                std::vector<std::pair<std::string, std::string>> extra)
{
    extra.insert(extra.begin(), {{"function", est.function},
                                 {"x", std::to_string(est.x)},
                                 {"mode", std::string(to_string(est.mode))},
                                 {"normalizer", fmt12(est.normalizer.real())},
                                 {"total_re", fmt12(est.total.real())},
                                 {"total_im", fmt12(est.total.imag())}});
    std::string s = ctx.csv_header(extra);
    s += "u_num,u_den,raw_re,raw_im,value_re,value_im\n";
    for (std::size_t k = 0; k < est.grid.size(); ++k) {
        const auto& u = est.grid[k];
        s += std::to_string(u.num) + "," + std::to_string(u.den) + ",";
        s += est.exact_raw ? std::to_string((*est.exact_raw)[k]) : fmt12(est.raw[k].real());
        s += "," + fmt12(est.raw[k].imag()) + "," + fmt12(est.values[k].real()) + "," + fmt12(est.values[k].imag()) +
             "\n";
    }
    return s;
}

inline json estimate_json(const weighted_cdf_estimate& est)
{
    json rows = json::array();
    for (std::size_t k = 0; k < est.grid.size(); ++k) {
        const auto& u = est.grid[k];
        json r{{"u_num", u.num}, {"u_den", u.den}, {"raw", cjson(est.raw[k])}, {"value", cjson(est.values[k])}};
        if (est.exact_raw)
            r["raw_exact"] = (*est.exact_raw)[k];
        rows.push_back(std::move(r));
    }
    return json{{"function", est.function},
                {"x", est.x},
                {"mode", to_string(est.mode)},
                {"normalizer", est.normalizer.real()},
                {"total", cjson(est.total)},
                {"rows", std::move(rows)}};
}

// Evaluation points for invert: "grid[:<grid spec>]" takes log u over the
// positive thresholds; otherwise a list / linspace in log coordinates.
inline std::vector<double> parse_points(const std::string& s)
{
    if (s == "grid" || s.starts_with("grid:")) {
        const auto grid = with_flag("--points", [&] { return parse_grid(s == "grid" ? "default" : s.substr(5)); });
        std::vector<double> v;
        for (const auto& u : grid.values())
            if (u.num > 0)
                v.push_back(std::log(u.to_double()));
        return v;
    }
    return parse_reals_spec("--points", s);
}

} // namespace detail

// Runs one command line; returns the process exit code (0 ok, 2 validation,
// 3 resource refusal).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    using namespace detail;
    CLI::App app{"Weighted distribution of n/sigma(n): sieve estimates, Euler products, inversion"};
    app.name("ddl");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ddl ") + tool_version);

    run_context ctx;
    ctx.out = &out;
    ctx.err = &err;
    for (const auto& a : args)
        ctx.config += (ctx.config.empty() ? "" : " ") + a;

    std::function<void()> action;

    // catalog
    common_opts cat_c;
    auto* cat = app.add_subcommand("catalog", "List the multiplicative function catalog");
    add_common(cat, cat_c, "json");
    cat->callback([&] {
        action = [&] {
            json rows = json::array();
            for (auto id : mult_func::all_rules) {
                func_params params;
                if (id == rule::quadratic_char)
                    params.q = 3; // needs an odd prime modulus; listed with q = 3
                const auto f = mult_func::make(id, params);
                json r{{"id", f.name()},
                       {"spec", f.spec()},
                       {"value_class", to_string(f.vclass())},
                       {"real", f.real_valued()},
                       {"nonnegative", f.nonnegative()},
                       {"integer_valued", f.integer_valued()},
                       {"mean_value_hypotheses", f.mean_value_hypotheses()}};
                if (auto k = f.claimed_kappa())
                    r["kappa"] = *k;
                else
                    r["kappa"] = nullptr;
                rows.push_back(std::move(r));
            }
            if (cat_c.format == "csv") {
                std::string s = ctx.csv_header({});
                s += "id,spec,value_class,real,nonnegative,integer_valued,mean_value_hypotheses,kappa\n";
                for (const auto& r : rows)
                    s += r["id"].get<std::string>() + "," + r["spec"].get<std::string>() + "," +
                         r["value_class"].get<std::string>() + "," + (r["real"].get<bool>() ? "1" : "0") + "," +
                         (r["nonnegative"].get<bool>() ? "1" : "0") + "," +
                         (r["integer_valued"].get<bool>() ? "1" : "0") + "," +
                         (r["mean_value_hypotheses"].get<bool>() ? "1" : "0") + "," +
                         (r["kappa"].is_null() ? "" : fmt12(r["kappa"].get<double>())) + "\n";
                emit(ctx, cat_c, s);
            } else {
                emit_json(ctx, cat_c, json{{"entries", rows}});
            }
        };
    });

    // sieve-cache
    common_opts sc_c;
    std::string sc_x, sc_dir;
    auto* sc = app.add_subcommand("sieve-cache", "Write sigma(1..x) to a cache file");
    add_common(sc, sc_c, "json");
    sc->add_option("--x", sc_x, "Upper bound")->required();
    sc->add_option("--dir", sc_dir, "Cache directory (default: $DDL_CACHE_DIR)");
    sc->callback([&] {
        action = [&] {
            const auto x = parse_count("--x", sc_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            if (x > max_cache_entries)
                throw resource_error("--x: cache limited to " + std::to_string(max_cache_entries) + " entries");
            std::filesystem::path dir;
            if (!sc_dir.empty())
                dir = sc_dir;
            else if (auto env = cache_dir_from_env())
                dir = *env;
            else
                throw validation_error("--dir: not given and DDL_CACHE_DIR is unset");
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ec)
                throw resource_error("--dir: cannot create " + dir.string());
            const auto path = dir / sigma_cache_name(1, x);
            const auto opt = fold_from(sc_c);
            auto primes = base_primes::for_range(x);
            sieve_segment seg;
            sigma_cache_writer w(path, 1, x);
            for (std::uint64_t lo = 1; lo <= x; lo += opt.segment_size) {
                build_segment_into(seg, lo, std::min(x, lo + opt.segment_size - 1), primes, nullptr);
                w.append(seg.sigma);
            }
            w.finish();
            emit_json(ctx, sc_c, json{{"path", path.string()}, {"lo", 1}, {"hi", x}});
        };
    });

    // estimate
    common_opts est_c;
    std::string est_f, est_x, est_mode = "df", est_grid = "default";
    auto* est = app.add_subcommand("estimate", "Sieve estimate of D_f or D~_f on a threshold grid");
    add_common(est, est_c, "csv");
    est->add_option("--f", est_f, "Function spec, e.g. one, tau, lambda:a=1,q=3")->required();
    est->add_option("--x", est_x, "Cutoff x")->required();
    est->add_option("--mode", est_mode, "df or dtilde")->check(CLI::IsMember({"df", "dtilde"}));
    est->add_option("--grid", est_grid, "default | half | uniform:N | comma list");
    est->callback([&] {
        action = [&] {
            const auto f = parse_f(est_f);
            const auto x = parse_count("--x", est_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            const auto grid = with_flag("--grid", [&] { return parse_grid(est_grid); });
            const auto opt = fold_from(est_c);
            const auto e = est_mode == "df" ? estimate_df(f, x, grid, opt) : estimate_dtilde(f, x, grid, opt);
            if (est_c.format == "csv") {
                emit(ctx, est_c, estimate_csv(ctx, e, {}));
                write_gnuplot(est_c, "($1/$2)", "5", "estimate " + f.spec());
            } else {
                emit_json(ctx, est_c, estimate_json(e));
            }
        };
    });

    // lattice
    common_opts lat_c;
    std::string lat_R, lat_grid = "default";
    auto* lat = app.add_subcommand("lattice", "Count lattice points a^2 + b^2 <= R by threshold");
    add_common(lat, lat_c, "csv");
    lat->add_option("--R", lat_R, "Radius squared")->required();
    lat->add_option("--grid", lat_grid, "Threshold grid spec");
    lat->callback([&] {
        action = [&] {
            const auto R = parse_count("--R", lat_R);
            if (R < 1)
                throw validation_error("--R: must be >= 1");
            const auto grid = with_flag("--grid", [&] { return parse_grid(lat_grid); });
            std::optional<sigma_table> table;
            std::string cache_note = "none";
            if (auto dir = cache_dir_from_env()) {
                table = find_sigma_cache(*dir, R);
                if (table)
                    cache_note = (*dir / sigma_cache_name(table->lo, table->hi)).string();
            }
            const auto e = lattice_two_squares(R, grid, fold_from(lat_c), table ? &*table : nullptr);
            if (lat_c.format == "csv") {
                emit(ctx, lat_c, estimate_csv(ctx, e, {{"sigma_cache", cache_note}}));
                write_gnuplot(lat_c, "($1/$2)", "5", "lattice");
            } else {
                auto j = estimate_json(e);
                j["sigma_cache"] = cache_note;
                emit_json(ctx, lat_c, j);
            }
        };
    });

    // equidist
    common_opts eq_c;
    std::string eq_mode = "omega", eq_q, eq_u, eq_x;
    auto* eq = app.add_subcommand("equidist", "Tally qualifying n by Omega(n) mod q or by coprime class mod q");
    add_common(eq, eq_c, "json");
    eq->add_option("--mode", eq_mode, "omega or coprime")->check(CLI::IsMember({"omega", "coprime"}));
    eq->add_option("--q", eq_q, "Modulus")->required();
    eq->add_option("--u", eq_u, "Threshold")->required();
    eq->add_option("--x", eq_x, "Cutoff x")->required();
    eq->callback([&] {
        action = [&] {
            const auto q = parse_count("--q", eq_q);
            if (q < 1)
                throw validation_error("--q: must be >= 1");
            if (q > 1'000'000)
                throw resource_error("--q: too many classes");
            const auto u = parse_u("--u", eq_u);
            const auto x = parse_count("--x", eq_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            const auto mode = eq_mode == "omega" ? equidist_mode::omega_mod_q : equidist_mode::coprime_classes;
            const auto r = equidist_tally(mode, static_cast<std::int64_t>(q), u, x, fold_from(eq_c));
            std::int64_t class_sum = 0;
            for (auto c : r.counts)
                class_sum += c;
            if (eq_c.format == "csv") {
                std::string s = ctx.csv_header({{"mode", eq_mode},
                                                {"q", std::to_string(q)},
                                                {"u", to_string(u)},
                                                {"x", std::to_string(x)},
                                                {"qualifying", std::to_string(r.qualifying)},
                                                {"class_sum", std::to_string(class_sum)}});
                s += "label,count,density\n";
                for (std::size_t i = 0; i < r.labels.size(); ++i)
                    s += std::to_string(r.labels[i]) + "," + std::to_string(r.counts[i]) + "," + fmt12(r.densities[i]) +
                         "\n";
                emit(ctx, eq_c, s);
            } else {
                json classes = json::array();
                for (std::size_t i = 0; i < r.labels.size(); ++i)
                    classes.push_back({{"label", r.labels[i]}, {"count", r.counts[i]}, {"density", r.densities[i]}});
                emit_json(ctx, eq_c,
                          json{{"mode", eq_mode},
                               {"q", q},
                               {"u", to_string(u)},
                               {"x", x},
                               {"classes", classes},
                               {"qualifying", r.qualifying},
                               {"class_sum", class_sum},
                               {"partition_exact", class_sum == r.qualifying},
                               {"density", static_cast<double>(r.qualifying) / static_cast<double>(x)}});
            }
        };
    });

    // smoothed
    common_opts sm_c;
    std::string sm_f, sm_x, sm_u, sm_m;
    auto* sm = app.add_subcommand("smoothed", "Tent-smoothed estimate with the sharp sandwich values");
    add_common(sm, sm_c, "json");
    sm->add_option("--f", sm_f, "Function spec")->required();
    sm->add_option("--x", sm_x, "Cutoff x")->required();
    sm->add_option("--u", sm_u, "Threshold")->required();
    sm->add_option("--m", sm_m, "Smoothing steepness (ramp width 1/m)")->required();
    sm->callback([&] {
        action = [&] {
            const auto f = parse_f(sm_f);
            const auto x = parse_count("--x", sm_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            const auto u = parse_u("--u", sm_u);
            const auto m = parse_count("--m", sm_m);
            if (m < 1 || m > 1'000'000'000)
                throw validation_error("--m: must be in [1, 1e9]");
            const auto r = smoothed_estimate(f, x, u, static_cast<std::int64_t>(m), fold_from(sm_c));
            emit_json(ctx, sm_c,
                      json{{"function", f.spec()},
                           {"x", x},
                           {"u", to_string(u)},
                           {"m", m},
                           {"value", cjson(r.value)},
                           {"sharp_at_u", cjson(r.sharp_at_u)},
                           {"sharp_at_u_plus", cjson(r.sharp_at_u_plus)}});
        };
    });

    // psum-check
    common_opts ps_c;
    std::string ps_f, ps_x, ps_u;
    auto* ps = app.add_subcommand("psum-check", "Compare (2/x^2) sum n f(n) with D_f(u)");
    add_common(ps, ps_c, "json");
    ps->add_option("--f", ps_f, "Function spec")->required();
    ps->add_option("--x", ps_x, "Cutoff x")->required();
    ps->add_option("--u", ps_u, "Threshold")->required();
    ps->callback([&] {
        action = [&] {
            const auto f = parse_f(ps_f);
            const auto x = parse_count("--x", ps_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            const auto u = parse_u("--u", ps_u);
            const auto r = partial_summation_check(f, x, u, fold_from(ps_c));
            emit_json(ctx, ps_c,
                      json{{"function", f.spec()},
                           {"x", x},
                           {"u", to_string(u)},
                           {"lhs", cjson(r.lhs)},
                           {"rhs", cjson(r.rhs)},
                           {"difference", std::abs(r.lhs - r.rhs)}});
        };
    });

    // analytic
    auto* an = app.add_subcommand("analytic", "Euler products, psi, and prime-sum diagnostics");
    an->require_subcommand(1);

    common_opts am_c;
    std::string am_f, am_P;
    bool am_series = false;
    auto* am = an->add_subcommand("mean", "Mean-value Euler product");
    add_common(am, am_c, "json");
    am->add_option("--f", am_f, "Function spec")->required();
    am->add_option("--P", am_P, "Prime bound")->required();
    am->add_flag("--series", am_series, "Sum local series instead of closed-form factors");
    am->callback([&] {
        action = [&] {
            const auto f = parse_f(am_f);
            const double P = parse_real("--P", am_P);
            const auto r = mean_value_product(f, P, !am_series);
            emit_json(ctx, am_c, json{{"function", f.spec()}, {"value", cjson(r.value)}, {"P", r.P}, {"tail_bound", r.tail_bound}});
        };
    });

    common_opts aw_c;
    std::string aw_f, aw_x, aw_P;
    auto* aw = an->add_subcommand("wirsing", "Wirsing asymptotic for sum_{n<=x} f(n)");
    add_common(aw, aw_c, "json");
    aw->add_option("--f", aw_f, "Function spec")->required();
    aw->add_option("--x", aw_x, "Cutoff x")->required();
    aw->add_option("--P", aw_P, "Prime bound (default: x)");
    aw->callback([&] {
        action = [&] {
            const auto f = parse_f(aw_f);
            const double x = parse_real("--x", aw_x);
            const double P = aw_P.empty() ? x : parse_real("--P", aw_P);
            const double v = wirsing_prediction(f, x, P);
            emit_json(ctx, aw_c,
                      json{{"function", f.spec()},
                           {"x", x},
                           {"value", v},
                           {"P", P},
                           {"tail_bound", nullptr},
                           {"kappa", *f.claimed_kappa()}});
        };
    });

    common_opts ap_c;
    std::string ap_f, ap_t = "sym:200:0.05", ap_P, ap_J;
    auto* ap = an->add_subcommand("psi", "Characteristic-function product psi(t)");
    add_common(ap, ap_c, "csv");
    ap->add_option("--f", ap_f, "Function spec")->required();
    ap->add_option("--t", ap_t, "t values: list, linspace:lo:hi:n or sym:T:step");
    ap->add_option("--P", ap_P, "Prime bound")->required();
    ap->add_option("--J", ap_J, "Local series cutoff (default per prime)");
    ap->callback([&] {
        action = [&] {
            const auto f = parse_f(ap_f);
            const auto ts = parse_reals_spec("--t", ap_t);
            const double P = parse_real("--P", ap_P);
            unsigned J = 0;
            if (!ap_J.empty()) {
                const auto j = parse_count("--J", ap_J);
                if (j < 2 || j > 200)
                    throw validation_error("--J: must be in [2, 200]");
                J = static_cast<unsigned>(j);
            }
            const auto prof = psi(f, ts, P, J);
            if (ap_c.format == "csv") {
                std::string s = ctx.csv_header({{"function", f.spec()},
                                                {"P", fmt12(P)},
                                                {"J", J ? std::to_string(J) : "default"},
                                                {"mean_log", fmt12(prof.mean_log)},
                                                {"origin_atom", fmt12(prof.origin_atom)}});
                s += "t,psi_re,psi_im,tail_bound\n";
                for (std::size_t i = 0; i < prof.t.size(); ++i)
                    s += fmt12(prof.t[i]) + "," + fmt12(prof.psi[i].real()) + "," + fmt12(prof.psi[i].imag()) + "," +
                         fmt12(prof.tail_bound[i]) + "\n";
                emit(ctx, ap_c, s);
                write_gnuplot(ap_c, "1", "2", "psi " + f.spec());
            } else {
                json rows = json::array();
                for (std::size_t i = 0; i < prof.t.size(); ++i)
                    rows.push_back({{"t", prof.t[i]}, {"value", cjson(prof.psi[i])}, {"tail_bound", prof.tail_bound[i]}});
                emit_json(ctx, ap_c,
                          json{{"function", f.spec()},
                               {"P", P},
                               {"J", J},
                               {"mean_log", prof.mean_log},
                               {"origin_atom", prof.origin_atom},
                               {"rows", rows}});
            }
        };
    });

    common_opts ak_c;
    std::string ak_f, ak_x;
    auto* ak = an->add_subcommand("kappa", "Mertens-type prime sums");
    add_common(ak, ak_c, "json");
    ak->add_option("--f", ak_f, "Function spec")->required();
    ak->add_option("--x", ak_x, "Prime bound x")->required();
    ak->callback([&] {
        action = [&] {
            const auto f = parse_f(ak_f);
            const double x = parse_real("--x", ak_x);
            const auto r = mertens_kappa(f, x);
            json j{{"function", f.spec()},
                   {"value", cjson(r.weighted_logsum_ratio)},
                   {"reciprocal_sum", cjson(r.reciprocal_sum)},
                   {"P", x},
                   {"tail_bound", nullptr}};
            if (auto k = f.claimed_kappa())
                j["claimed_kappa"] = *k;
            else
                j["claimed_kappa"] = nullptr;
            emit_json(ctx, ak_c, j);
        };
    });

    common_opts ah_c;
    std::string ah_f, ah_beta = "0", ah_P;
    auto* ah = an->add_subcommand("halasz", "Partial sum of the Halasz series");
    add_common(ah, ah_c, "json");
    ah->add_option("--f", ah_f, "Function spec")->required();
    ah->add_option("--beta", ah_beta, "Twist beta");
    ah->add_option("--P", ah_P, "Prime bound")->required();
    ah->callback([&] {
        action = [&] {
            const auto f = parse_f(ah_f);
            const double beta = parse_real("--beta", ah_beta);
            const double P = parse_real("--P", ah_P);
            emit_json(ctx, ah_c,
                      json{{"function", f.spec()}, {"beta", beta}, {"value", halasz_series(f, beta, P)}, {"P", P}, {"tail_bound", nullptr}});
        };
    });

    common_opts aj_c;
    std::string aj_f, aj_P;
    auto* aj = an->add_subcommand("jumps", "Jump-sum continuity diagnostic");
    add_common(aj, aj_c, "json");
    aj->add_option("--f", aj_f, "Function spec")->required();
    aj->add_option("--P", aj_P, "Prime bound")->required();
    aj->callback([&] {
        action = [&] {
            const auto f = parse_f(aj_f);
            const double P = parse_real("--P", aj_P);
            emit_json(ctx, aj_c,
                      json{{"function", f.spec()}, {"value", continuity_diagnostic(f, P)}, {"P", P}, {"tail_bound", nullptr}});
        };
    });

    common_opts ag_c;
    std::string ag_f, ag_v, ag_u, ag_cap = "1000000";
    auto* ag = an->add_subcommand("witness", "Greedy squarefree m with v < m/sigma(m) <= u");
    add_common(ag, ag_c, "json");
    ag->add_option("--f", ag_f, "Function spec")->required();
    ag->add_option("--v", ag_v, "Lower end (exclusive)")->required();
    ag->add_option("--u", ag_u, "Upper end (inclusive)")->required();
    ag->add_option("--p-cap", ag_cap, "Largest prime to try");
    ag->callback([&] {
        action = [&] {
            const auto f = parse_f(ag_f);
            const auto v = parse_u("--v", ag_v);
            const auto u = parse_u("--u", ag_u);
            const auto cap = parse_count("--p-cap", ag_cap);
            const auto w = greedy_witness(f, v, u, cap);
            if (!w)
                throw resource_error("--p-cap: primes up to " + std::to_string(cap) +
                                     " exhausted before reaching (v, u]; increase --p-cap");
            std::vector<std::uint64_t> primes = w->primes;
            const double ratio = w->ratio();
            emit_json(ctx, ag_c,
                      json{{"function", f.spec()},
                           {"v", to_string(v)},
                           {"u", to_string(u)},
                           {"m", w->m.str()},
                           {"sigma", w->sigma.str()},
                           {"primes", primes},
                           {"value", ratio},
                           {"P", cap},
                           {"tail_bound", nullptr}});
        };
    });

    // invert
    common_opts inv_c;
    std::string inv_f, inv_P, inv_T = "200", inv_step = "0.05", inv_points = "grid", inv_slack = "0.02";
    bool inv_plain = false;
    auto* inv = app.add_subcommand("invert", "Invert psi to the CDF of log(n/sigma(n))");
    add_common(inv, inv_c, "csv");
    inv->add_option("--f", inv_f, "Function spec")->required();
    inv->add_option("--P", inv_P, "Prime bound")->required();
    inv->add_option("--T", inv_T, "Integration cutoff");
    inv->add_option("--step", inv_step, "Quadrature step");
    inv->add_option("--points", inv_points, "grid[:<grid spec>], list, or linspace:lo:hi:n (log coordinates)");
    inv->add_option("--slack", inv_slack, "Declared numerical slack");
    inv->add_flag("--plain", inv_plain, "Plain quadrature: no origin-atom removal, no support-edge rule");

    // compare
    common_opts cmp_c;
    std::string cmp_f, cmp_x, cmp_P = "1000000", cmp_T = "200", cmp_step = "0.05", cmp_grid = "default",
                                  cmp_slack = "0.02";
    bool cmp_plain = false;
    auto* cmp = app.add_subcommand("compare", "Sup distance between the empirical and inverted CDFs");
    add_common(cmp, cmp_c, "json");
    cmp->add_option("--f", cmp_f, "Function spec")->required();
    cmp->add_option("--x", cmp_x, "Sieve cutoff x")->required();
    cmp->add_option("--P", cmp_P, "Prime bound");
    cmp->add_option("--T", cmp_T, "Integration cutoff");
    cmp->add_option("--step", cmp_step, "Quadrature step");
    cmp->add_option("--grid", cmp_grid, "Threshold grid spec");
    cmp->add_option("--slack", cmp_slack, "Declared numerical slack");
    cmp->add_flag("--plain", cmp_plain, "Plain quadrature: no origin-atom removal, no support-edge rule");

    auto inversion_from = [](const std::string& T, const std::string& step, const std::string& slack, bool plain) {
        inversion_options o;
        o.T = parse_real("--T", T);
        o.step = parse_real("--step", step);
        o.slack = parse_real("--slack", slack);
        if (!(o.T > 0) || !(o.step > 0) || o.step > o.T)
            throw validation_error("--T/--step: need 0 < step <= T");
        if (o.T / o.step > 4'000'000)
            throw resource_error("--T/--step: too many quadrature nodes");
        if (!(o.slack >= 0))
            throw validation_error("--slack: must be >= 0");
        o.remove_origin_atom = !plain;
        o.support_edge = !plain;
        return o;
    };

    inv->callback([&] {
        action = [&] {
            const auto f = parse_f(inv_f);
            const double P = parse_real("--P", inv_P);
            const auto opt = inversion_from(inv_T, inv_step, inv_slack, inv_plain);
            const auto points = parse_points(inv_points);
            const auto prof = psi(f, symmetric_grid(opt.T, opt.step), P);
            const auto r = invert(prof, points, opt);
            if (inv_c.format == "csv") {
                std::string s = ctx.csv_header({{"function", f.spec()},
                                                {"P", fmt12(P)},
                                                {"T", fmt12(r.T)},
                                                {"step", fmt12(r.step)},
                                                {"slack", fmt12(r.slack)},
                                                {"slack_ok", r.slack_ok ? "true" : "false"},
                                                {"max_imag_residue", fmt12(r.max_imag_residue)},
                                                {"max_monotone_violation", fmt12(r.max_monotone_violation)},
                                                {"isotonic_applied", r.isotonic_applied ? "true" : "false"},
                                                {"origin_atom", fmt12(r.origin_atom)},
                                                {"edge_points", std::to_string(r.edge_points)},
                                                {"note", "T is calibrated, not derived"}});
                s += "x,u,raw,value\n";
                for (std::size_t i = 0; i < r.points.size(); ++i)
                    s += fmt12(r.points[i]) + "," + fmt12(std::exp(r.points[i])) + "," + fmt12(r.raw[i]) + "," +
                         fmt12(r.values[i]) + "\n";
                emit(ctx, inv_c, s);
                write_gnuplot(inv_c, "1", "4", "inverted CDF " + f.spec());
            } else {
                json rows = json::array();
                for (std::size_t i = 0; i < r.points.size(); ++i)
                    rows.push_back({{"x", r.points[i]}, {"raw", r.raw[i]}, {"value", r.values[i]}});
                emit_json(ctx, inv_c,
                          json{{"function", f.spec()},
                               {"P", P},
                               {"T", r.T},
                               {"step", r.step},
                               {"slack", r.slack},
                               {"slack_ok", r.slack_ok},
                               {"max_imag_residue", r.max_imag_residue},
                               {"max_monotone_violation", r.max_monotone_violation},
                               {"isotonic_applied", r.isotonic_applied},
                               {"origin_atom", r.origin_atom},
                               {"edge_points", r.edge_points},
                               {"note", "T is calibrated, not derived"},
                               {"rows", rows}});
            }
        };
    });

    cmp->callback([&] {
        action = [&] {
            const auto f = parse_f(cmp_f);
            const auto x = parse_count("--x", cmp_x);
            if (x < 1)
                throw validation_error("--x: must be >= 1");
            const double P = parse_real("--P", cmp_P);
            const auto opt = inversion_from(cmp_T, cmp_step, cmp_slack, cmp_plain);
            const auto grid = with_flag("--grid", [&] { return parse_grid(cmp_grid); });
            const auto est = estimate_dtilde(f, x, grid, fold_from(cmp_c));
            const auto emp = as_log_cdf(est);
            const auto prof = psi(f, symmetric_grid(opt.T, opt.step), P);
            const auto r = invert(prof, emp.x, opt);
            const auto d = sup_distance(emp, r.as_points());
            double tail = 0;
            for (double b : prof.tail_bound)
                tail = std::max(tail, b);
            emit_json(ctx, cmp_c,
                      json{{"function", f.spec()},
                           {"x", x},
                           {"P", P},
                           {"sup_distance", d.distance},
                           {"at_x", d.at},
                           {"at_u", std::exp(d.at)},
                           {"compared", d.compared},
                           {"budgets",
                            {{"empirical", {{"x", x}, {"note", "finite-x estimate; no convergence rate known"}}},
                             {"inversion",
                              {{"T", r.T},
                               {"step", r.step},
                               {"slack", r.slack},
                               {"slack_ok", r.slack_ok},
                               {"max_monotone_violation", r.max_monotone_violation},
                               {"origin_atom", r.origin_atom},
                               {"edge_points", r.edge_points},
                               {"psi_tail_bound_max", tail},
                               {"note", "T is calibrated, not derived"}}}}}});
        };
    });

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        std::ostringstream o, eo;
        app.exit(e, o, eo);
        out << o.str();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, eo;
        app.exit(e, o, eo);
        err << eo.str() << o.str();
        return 2;
    }

    try {
        ctx.start = std::chrono::steady_clock::now();
        if (action)
            action();
        return 0;
    } catch (const validation_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const resource_error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return 3;
    }
}

} // namespace ddl::cli
