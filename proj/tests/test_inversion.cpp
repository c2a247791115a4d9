#include <cmath>

#include <gtest/gtest.h>

#include "ddl/inversion.hpp"
#include "oracles.hpp"

using namespace ddl;

namespace {

char_fn_profile point_mass_profile(double T, double step)
{
    char_fn_profile p;
    p.t = symmetric_grid(T, step);
    p.psi.assign(p.t.size(), cplx(1.0, 0.0));
    p.tail_bound.assign(p.t.size(), 0.0);
    p.origin_atom = 1.0;
    return p;
}

std::vector<double> log_grid_points()
{
    std::vector<double> pts;
    for (int k = 1; k < 200; ++k)
        pts.push_back(std::log(k / 200.0));
    return pts;
}

} // namespace

TEST(Invert, PointMassAtZero)
{
    const auto prof = point_mass_profile(200, 0.05);
    const std::vector<double> pts{-0.1, 0.1};
    for (bool plain : {true, false}) {
        inversion_options opt;
        opt.remove_origin_atom = !plain;
        opt.support_edge = !plain;
        const auto F = invert(prof, pts, opt);
        EXPECT_LE(F.raw[0], 0.02) << plain;
        EXPECT_GE(F.raw[1], 0.98) << plain;
        EXPECT_LE(F.max_imag_residue, 1e-8);
    }
}

TEST(Invert, NormalLawRecoversItsCdf)
{
    // psi(t) = exp(i mu t - s^2 t^2 / 2), F(x) = Phi((x - mu) / s)
    const double mu = -0.4, s = 0.15;
    char_fn_profile prof;
    prof.t = symmetric_grid(200, 0.05);
    for (double t : prof.t)
        prof.psi.push_back(std::exp(cplx(-s * s * t * t / 2, mu * t)));
    prof.tail_bound.assign(prof.t.size(), 0.0);
    prof.mean_log = mu;
    prof.origin_atom = 0.0;
    std::vector<double> pts;
    for (double x = -1.0; x < 0; x += 0.01)
        pts.push_back(x);
    const auto F = invert(prof, pts);
    for (std::size_t i = 0; i < pts.size(); ++i)
        EXPECT_NEAR(F.values[i], 0.5 * std::erfc(-(pts[i] - mu) / (s * std::sqrt(2.0))), 1e-6) << pts[i];
    EXPECT_LE(F.max_imag_residue, 1e-8);
}

TEST(Invert, CatalogProfilesStayWithinSlack)
{
    const auto grid = symmetric_grid(200, 0.05);
    const auto pts = log_grid_points();
    for (const char* spec : {"one", "tau", "r", "two_squares_indicator", "mu2", "phi_over_n"}) {
        const auto f = parse_mult_func(spec);
        ASSERT_GE(f.claimed_kappa().value_or(1.0), 0.5);
        const auto prof = psi(f, grid, 1e5);
        const auto F = invert(prof, pts);
        EXPECT_LE(F.max_imag_residue, 1e-8) << spec;
        EXPECT_LE(F.max_monotone_violation, 0.02) << spec;
        EXPECT_TRUE(F.slack_ok) << spec;
        for (std::size_t i = 1; i < F.values.size(); ++i)
            ASSERT_GE(F.values[i], F.values[i - 1]) << spec;
    }
}

TEST(Invert, QuadratureSelfConsistency)
{
    const auto f = mult_func::make(rule::one);
    const auto prof = psi(f, symmetric_grid(400, 0.025), 1e5);
    const auto pts = log_grid_points();
    inversion_options coarse, fine;
    fine.T = 400;
    fine.step = 0.025;
    const auto a = invert(prof, pts, coarse);
    const auto b = invert(prof, pts, fine);
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        worst = std::max(worst, std::abs(a.raw[i] - b.raw[i]));
    EXPECT_LE(worst, 0.01);
}

TEST(Invert, Errors)
{
    const auto prof = point_mass_profile(10, 0.05);
    const std::vector<double> pts{-0.1};
    inversion_options opt;
    EXPECT_THROW(invert(prof, pts, opt), validation_error); // T = 200 beyond the profile
    opt.T = 10;
    opt.step = 0.03;
    EXPECT_THROW(invert(prof, pts, opt), validation_error); // not a multiple
    opt.step = 0.025;
    EXPECT_THROW(invert(prof, pts, opt), validation_error); // too sparse
    opt.step = 0.05;
    EXPECT_THROW(invert(prof, std::vector<double>{}, opt), validation_error);
    auto no_zero = prof;
    no_zero.t.erase(no_zero.t.begin() + static_cast<std::ptrdiff_t>(no_zero.t.size() / 2));
    no_zero.psi.pop_back();
    EXPECT_THROW(invert(no_zero, pts, opt), validation_error);
}

TEST(Isotonic, PoolAdjacentViolators)
{
    EXPECT_EQ(detail::isotonic_fit({1, 3, 2, 4}), (std::vector<double>{1, 2.5, 2.5, 4}));
    EXPECT_EQ(detail::isotonic_fit({3, 2, 1}), (std::vector<double>{2, 2, 2}));
    EXPECT_EQ(detail::isotonic_fit({0, 1, 2}), (std::vector<double>{0, 1, 2}));
}

TEST(SupDistance, Basics)
{
    const cdf_points a{{-1, -0.5, 0}, {0.1, 0.5, 1}};
    EXPECT_EQ(sup_distance(a, a).distance, 0.0);
    const cdf_points b{{-1, 0}, {0.0, 1.0}};
    const auto d = sup_distance(a, b);
    EXPECT_NEAR(d.distance, 0.1, 1e-15);
    EXPECT_EQ(d.at, -1.0);
    EXPECT_EQ(d.compared, 3u);
    EXPECT_THROW(sup_distance(a, cdf_points{{1, 2}, {0, 1}}), validation_error);
    EXPECT_THROW(sup_distance(a, cdf_points{}), validation_error);
}

TEST(SupDistance, EmpiricalCdfsAreStableInX)
{
    const auto g = threshold_grid::default_grid();
    const auto one = mult_func::make(rule::one);
    const auto a = as_log_cdf(estimate_df(one, 1'000'000, g));
    const auto b = as_log_cdf(estimate_df(one, 4'000'000, g));
    EXPECT_LE(sup_distance(a, b).distance, 0.005);
}

TEST(SupDistance, PointMassIsFarFromTheConstantFunction)
{
    const auto g = threshold_grid::default_grid();
    const auto emp = as_log_cdf(estimate_df(mult_func::make(rule::one), 1'000'000, g));
    const auto F = invert(point_mass_profile(200, 0.05), emp.x);
    EXPECT_GE(sup_distance(emp, F.as_points()).distance, 0.2);
}
