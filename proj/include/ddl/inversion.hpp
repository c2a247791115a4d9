#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "analytic.hpp"
#include "empirical.hpp"
#include "errors.hpp"

namespace ddl {

struct inversion_options {
    double T = 200.0;
    double step = 0.05;
    double slack = 0.02;
    // The truncated law has an atom at 0 (no X_p moves); invert the rest and
    // add the atom back, which removes its ringing from nearby points.
    bool remove_origin_atom = true;
    // log(n/sigma(n)) <= 0 always, so F = 1 for x0 >= 0.
    bool support_edge = true;
};

// A CDF sampled at points in log(n/sigma(n)) coordinates.
struct cdf_points {
    std::vector<double> x;
    std::vector<double> F;
};

struct inverted_cdf {
    std::vector<double> points;   // sorted ascending
    std::vector<double> values;   // clipped to [0, 1], nondecreasing
    std::vector<double> raw;      // quadrature output before cleanup
    double max_imag_residue = 0;  // imaginary part of the two-sided integral
    double max_monotone_violation = 0;
    bool slack_ok = true;         // every raw value within [-slack, 1 + slack]
    bool isotonic_applied = false;
    std::size_t edge_points = 0;  // points set by the support edge rule
    double origin_atom = 0;       // atom mass removed before quadrature
    double T = 0, step = 0, slack = 0;

    cdf_points as_points() const { return {points, values}; }
};

namespace detail {

// Pool-adjacent-violators fit: least-squares nondecreasing sequence.
inline std::vector<double> isotonic_fit(const std::vector<double>& y)
{
    std::vector<double> mean;
    std::vector<std::size_t> count;
    for (double v : y) {
        mean.push_back(v);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const std::size_t n = count.back() + count[count.size() - 2];
            const double m = (mean.back() * count.back() + mean[mean.size() - 2] * count[count.size() - 2]) / n;
            mean.pop_back();
            count.pop_back();
            mean.back() = m;
            count.back() = n;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t b = 0; b < mean.size(); ++b)
        out.insert(out.end(), count[b], mean[b]);
    return out;
}

} // namespace detail

// F(x0) = 1/2 - (1/pi) int_0^T Im(e^{-i t x0} psi(t)) / t dt by the trapezoid
// rule on t = 0, step, ..., T. At t = 0 the integrand is mean_log - x0.
// Defaults also apply the origin-atom and support-edge adjustments above.
inline inverted_cdf invert(const char_fn_profile& prof, std::span<const double> points,
                           const inversion_options& opt = {})
{
    if (!(opt.step > 0) || !(opt.T > 0))
        throw validation_error("inversion needs T > 0 and step > 0");
    if (points.empty())
        throw validation_error("no evaluation points");

    // Locate psi at k * step, k = 0..N, among the profile's nonnegative t.
    std::vector<std::size_t> order(prof.t.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return prof.t[a] < prof.t[b]; });
    std::vector<double> ts;
    std::vector<cplx> vals;
    for (auto i : order)
        if (prof.t[i] >= 0) {
            ts.push_back(prof.t[i]);
            vals.push_back(prof.psi[i]);
        }
    if (ts.empty() || ts.front() != 0.0)
        throw validation_error("profile must contain t = 0");
    if (ts.back() < opt.T * (1 - 1e-12))
        throw validation_error("T = " + std::to_string(opt.T) + " beyond the profile range " + std::to_string(ts.back()));

    const auto N = static_cast<std::size_t>(std::llround(opt.T / opt.step));
    if (std::abs(static_cast<double>(N) * opt.step - opt.T) > 1e-9 * opt.T)
        throw validation_error("T must be a multiple of the step");
    std::vector<cplx> node(N + 1);
    std::vector<cplx> node_neg(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) * opt.step;
        auto it = std::lower_bound(ts.begin(), ts.end(), t - 1e-9 * (1 + t));
        if (it == ts.end() || std::abs(*it - t) > 1e-9 * (1 + t))
            throw validation_error("profile t grid too sparse for step " + std::to_string(opt.step));
        node[k] = vals[static_cast<std::size_t>(it - ts.begin())];
        node_neg[k] = std::conj(node[k]);
    }
    // Use the profile's own negative-t values when present.
    for (std::size_t i = 0; i < prof.t.size(); ++i) {
        if (prof.t[i] >= 0)
            continue;
        const double k = -prof.t[i] / opt.step;
        const double kr = std::round(k);
        if (std::abs(k - kr) <= 1e-9 * (1 + k) && kr <= static_cast<double>(N))
            node_neg[static_cast<std::size_t>(kr)] = prof.psi[i];
    }

    const double a0 = opt.remove_origin_atom && prof.origin_atom < 1.0 - 1e-12 ? prof.origin_atom : 0.0;
    double mean = prof.mean_log;
    if (a0 > 0) {
        for (std::size_t k = 0; k <= N; ++k) {
            node[k] = (node[k] - a0) / (1.0 - a0);
            node_neg[k] = (node_neg[k] - a0) / (1.0 - a0);
        }
        mean /= 1.0 - a0;
    }

    inverted_cdf out;
    out.origin_atom = a0;
    out.T = opt.T;
    out.step = opt.step;
    out.slack = opt.slack;
    out.points.assign(points.begin(), points.end());
    std::sort(out.points.begin(), out.points.end());
    out.raw.resize(out.points.size());

    const double h = opt.step;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        const double x0 = out.points[i];
        // Two-sided form (1/2pi) int_{-T}^{T} e^{-itx0} psi(t) / (it) dt; its
        // real part is the one-sided integral, its imaginary part should vanish.
        if (opt.support_edge && x0 >= 0) {
            out.raw[i] = 1.0;
            ++out.edge_points;
            continue;
        }
        double acc = 0.5 * (mean - x0);
        double imag = 0.0;
        for (std::size_t k = 1; k <= N; ++k) {
            const double t = static_cast<double>(k) * h;
            const cplx e = std::polar(1.0, -t * x0);
            const cplx pos = e * node[k];
            const cplx negv = std::conj(e) * node_neg[k];
            const double w = (k == N) ? 0.5 : 1.0;
            // e^{-itx}psi(t)/(it) + e^{itx}psi(-t)/(-it)
            const cplx pair = (pos - negv) / cplx(0.0, t);
            acc += w * 0.5 * pair.real();
            imag += w * 0.5 * pair.imag();
        }
        const double F = 0.5 - h * acc / std::numbers::pi;
        out.raw[i] = (1.0 - a0) * F + (x0 >= 0 ? a0 : 0.0);
        out.max_imag_residue = std::max(out.max_imag_residue, std::abs(h * imag / std::numbers::pi));
    }

    double running = -1e300;
    for (double v : out.raw) {
        running = std::max(running, v);
        out.max_monotone_violation = std::max(out.max_monotone_violation, running - v);
        if (v < -opt.slack || v > 1 + opt.slack)
            out.slack_ok = false;
    }
    out.values = out.raw;
    if (out.max_monotone_violation > 0) {
        out.values = detail::isotonic_fit(out.raw);
        out.isotonic_applied = true;
    }
    for (auto& v : out.values)
        v = std::clamp(v, 0.0, 1.0);
    return out;
}

// Log-threshold view of an estimate: x = log u_k (u_k > 0), F = Re value.
inline cdf_points as_log_cdf(const weighted_cdf_estimate& est)
{
    cdf_points c;
    for (std::size_t k = 0; k < est.grid.size(); ++k) {
        const auto& u = est.grid[k];
        if (u.num <= 0)
            continue;
        c.x.push_back(std::log(u.to_double()));
        c.F.push_back(est.values[k].real());
    }
    return c;
}

struct sup_distance_result {
    double distance = 0;
    double at = 0;           // point where the maximum occurs
    std::size_t compared = 0;
};

// max |a(x) - b(x)| over a's points inside b's range, b linearly interpolated.
inline sup_distance_result sup_distance(const cdf_points& a, const cdf_points& b)
{
    if (b.x.empty() || a.x.empty())
        throw validation_error("empty CDF in comparison");
    std::vector<std::size_t> order(b.x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return b.x[i] < b.x[j]; });
    std::vector<double> bx, bf;
    for (auto i : order) {
        bx.push_back(b.x[i]);
        bf.push_back(b.F[i]);
    }
    sup_distance_result r;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        const double x = a.x[i];
        if (x < bx.front() || x > bx.back())
            continue;
        auto it = std::lower_bound(bx.begin(), bx.end(), x);
        const auto k = static_cast<std::size_t>(it - bx.begin());
        double v;
        if (bx[k] == x || k == 0) {
            v = bf[k];
        } else {
            const double w = (x - bx[k - 1]) / (bx[k] - bx[k - 1]);
            v = bf[k - 1] + w * (bf[k] - bf[k - 1]);
        }
        const double d = std::abs(a.F[i] - v);
        if (r.compared == 0 || d > r.distance) {
            r.distance = d;
            r.at = x;
        }
        ++r.compared;
    }
    if (r.compared == 0)
        throw validation_error("CDFs have disjoint supports");
    return r;
}

} // namespace ddl
