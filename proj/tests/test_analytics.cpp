#include "vardyn/analytics.hpp"
#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"

#include <doctest.h>

#include <cmath>

using namespace vardyn;

namespace {

NonlinearFit linear_fit(std::vector<double> b) {
    NonlinearFit f;
    f.a.assign(b.size(), 0.0);
    f.gamma.assign(b.size(), 1.0);
    f.b = std::move(b);
    f.u_corr = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(f.b.size()), static_cast<Eigen::Index>(f.b.size()));
    return f;
}

// Skewness double sum written out as a plain O(n^2) loop.
double skewness_oracle(const VarianceCurve& c, const ModelParams& p, const NonlinearFit& f, double T, double zeta, double dt) {
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    double var = 0.0, intrinsic = 0.0, cross = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
        const double xu = c(static_cast<double>(u) * dt);
        var += xu * dt;
        intrinsic += std::pow(xu * dt, 1.5);
        for (std::size_t v = 0; v < u; ++v)
            for (std::size_t a = 0; a < p.n(); ++a)
                cross += 3.0 * p.theta[a] * (f.a[a] * zeta - f.b[a]) * xu * std::sqrt(c(static_cast<double>(v) * dt)) *
                         std::exp(-p.k[a] * static_cast<double>(u - v) * dt) * dt * dt;
    }
    return (zeta * intrinsic + cross) / std::pow(var, 1.5);
}

VarianceCurve sloped() {
    const std::vector<double> knots{0.03, 0.034, 0.037, 0.04, 0.042, 0.044, 0.045, 0.046, 0.047};
    return VarianceCurve::interpolate(knots);
}

}  // namespace

TEST_CASE("return skewness recursion matches the double loop") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    for (double T : {0.1, 0.5})
        CHECK(return_skewness(sloped(), p, f, T, -0.57) ==
              doctest::Approx(skewness_oracle(sloped(), p, f, T, -0.57, kDeltaT)).epsilon(1e-12));
}

TEST_CASE("flat skewness closed form is the fine-grid limit") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    const double T = 0.25, dt = T / 20000.0;
    const auto c = VarianceCurve::flat(0.04);
    CHECK(return_skewness(c, p, f, T, 0.0, dt) == doctest::Approx(return_skewness_flat(p, f, T, 0.0, dt)).epsilon(1e-3));
    // intrinsic term alone on the daily grid
    CHECK(return_skewness_flat(p.scaled(0.0), f, 1.0, -0.57) == doctest::Approx(-0.57 / std::sqrt(252.0)).epsilon(1e-14));
}

TEST_CASE("linear skew equals return skewness over 6 sqrt(T)") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = linear_fit({0.55, 0.83});
    for (double T : {1.0 / 12.0, 0.25, 0.5, 1.0}) {
        const auto s = smile_impact(sloped(), p, f, T);
        const double z = return_skewness(sloped(), p, f, T, 0.0);
        CHECK(s.skew_linear == doctest::Approx(z / (6.0 * std::sqrt(T))).epsilon(1e-3));
        CHECK(s.skew_nonlinear == 0.0);
    }
}

TEST_CASE("smile impact flat closed forms are the fine-grid limit") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    const double T = 0.25, dt = T / 4000.0;
    const auto grid = smile_impact(VarianceCurve::flat(0.04), p, f, T, 1e-4, 0.25, dt);
    const auto flat = smile_impact_flat(p, f, T, 0.2, 0.25, dt);
    CHECK(grid.sigma_vs == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(grid.skew_linear == doctest::Approx(flat.skew_linear).epsilon(2e-3));
    CHECK(grid.spread_linear == doctest::Approx(flat.spread_linear).epsilon(2e-3));
    CHECK(grid.skew_nonlinear == doctest::Approx(flat.skew_nonlinear).epsilon(2e-3));
    CHECK(grid.spread_nonlinear == doctest::Approx(flat.spread_nonlinear).epsilon(2e-3));
    // first order in the scale
    const auto full = smile_impact_flat(p, f, T, 0.2, 1.0, dt);
    CHECK(full.skew == doctest::Approx(4.0 * flat.skew).epsilon(1e-12));
}

TEST_CASE("skew-stickiness ratio limits") {
    const auto f = linear_fit({0.7});
    const auto p = ModelParams::one_factor(2.0, 1.0);
    CHECK(skew_stickiness_ratio(p, f, 1e-7) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(skew_stickiness_ratio(p, f, 1e5) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(skew_stickiness_ratio(p, f, 0.5) == doctest::Approx(std::expm1(1.0)).epsilon(1e-12));
    CHECK(g(1.0) / h(1.0) == doctest::Approx(1.718).epsilon(1e-3));
    double prev = 3.0;
    for (double T = 0.01; T < 50.0; T *= 1.5) {
        const double r = skew_stickiness_ratio(p, f, T);
        CHECK(r < prev);
        prev = r;
    }
    CHECK_THROWS_AS(skew_stickiness_ratio(p, linear_fit({0.0}), 1.0), DomainError);
}

TEST_CASE("variance-swap variance in the Gaussian constant-vol case") {
    const auto p = ModelParams::reference_two_factor().scaled(0.0);
    const auto f = NonlinearFit::replica();
    for (double T : {1.0 / 12.0, 0.25, 0.5}) {
        const auto d = varswap_total_variance(p, f, 0.0, 0.0, T);
        const double n = std::round(T * 252.0);
        CHECK(d.total == doctest::Approx(2.0 / (n * T)).epsilon(1e-14));
        CHECK(d.implied == 0.0);
        CHECK(d.shocks == 0.0);
    }
    CHECK_THROWS_AS(varswap_total_variance(p, f, -2.5, 0.0, 0.25), DomainError);
}

TEST_CASE("variance-swap decomposition with the replica coupling") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    const auto d = varswap_total_variance(p, f, f.excess_kurtosis, f.skew, 0.25);
    REQUIRE(d.rho_shocks.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(d.rho_shocks[i] == doctest::Approx(f.shock_correlation(i)).epsilon(1e-14));
    CHECK(d.total == doctest::Approx(d.sampling + d.implied + d.shocks).epsilon(1e-14));
    CHECK(d.shock_vol_share() > 0.05);
    CHECK(d.shock_vol_share() < 0.15);
    CHECK(d.shock_vol_share() == doctest::Approx(1.0 - std::sqrt(1.0 - d.shock_share())).epsilon(1e-14));
    double implied = 0.0;
    const Eigen::MatrixXd om = p.omega();
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) implied += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * l(p.k[a], p.k[b], 0.25);
    CHECK(d.implied == doctest::Approx(implied).epsilon(1e-14));
}

TEST_CASE("analytics row wiring") {
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    const auto r = analytics_row(VarianceCurve::flat(0.04), p, f, 0.25, 0.5);
    CHECK(r.maturity == 0.25);
    CHECK(r.smile.lambda_scale == 0.5);
    CHECK(r.ssr > 1.0);
    CHECK(r.ssr < 2.0);
    CHECK(r.skewness < 0.0);
}
