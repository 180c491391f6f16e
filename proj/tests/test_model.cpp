#include "oracles.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"
#include "vardyn/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace vardyn;

namespace {

VarianceCurve humped_curve() {
    const std::vector<double> v = {0.05, 0.03, 0.035, 0.045, 0.05, 0.052, 0.055, 0.056, 0.058, 0.06, 0.06};
    return VarianceCurve::from_control_values(v);
}

// Convexity as the second-order time integral over the exposure window [0, t1]:
// (1/(8 K^4)) sum Omega int_0^{t1} dv Ka(v) Kb(v), Ka(v) = (1/dT) int_{t1}^{t2} e^{-k_a (u - v)} xi(u) du.
double convexity_oracle(const ForwardCurve& c, const ModelParams& p, double t1, double t2) {
    const double w = t2 - t1;
    const auto knots = VarianceCurve::default_knots();
    const double k2 = oracle::integrate_pieces([&](double u) { return c(u); }, t1, t2, knots) / w;
    double total = 0.0;
    const Eigen::MatrixXd om = p.omega();
    for (std::size_t a = 0; a < p.n(); ++a)
        for (std::size_t b = 0; b < p.n(); ++b) {
            auto kw = [&](std::size_t i, double v) {
                return oracle::integrate_pieces([&](double u) { return std::exp(-p.k[i] * (u - v)) * c(u); }, t1, t2,
                                                knots) / w;
            };
            const double inner = t1 > 0.0 ? oracle::integrate_pieces([&](double v) { return kw(a, v) * kw(b, v); }, 0.0, t1, {}) : 0.0;
            total += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * inner;
        }
    return total / (8.0 * k2 * k2);
}

}  // namespace

TEST_CASE("convexity matches the second-order time integral") {
    const auto c = humped_curve();
    const auto p = ModelParams::reference_two_factor();
    for (double t1 : {0.0, 12.0 / 252.0, 0.2, 0.45}) {
        const double t2 = t1 + kVixWindow;
        const double want = convexity_oracle(c, p, t1, t2);
        CHECK(convexity_correction(c, p, t1, t2) == doctest::Approx(want).epsilon(1e-9));
        CHECK(convexity_correction(c, p, t1, t2, ConvexityForm::anchored_at_today) ==
              doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("pricing limits and orders of magnitude") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();

    auto zero = p.scaled(0.0);
    const auto px0 = price_vix_future(flat, zero, 0.1, 0.1 + kVixWindow);
    CHECK(px0.convexity_correction == 0.0);
    CHECK(px0.price == px0.strike);

    for (double t1 : {12.0 / 252.0, 33.0 / 252.0}) {
        const auto px = price_vix_future(flat, p, t1, t1 + kVixWindow);
        CHECK(px.convexity_correction < 0.05);
        CHECK(px.price < px.strike);
    }
    CHECK(approx_convexity(p, 50.0, kVixWindow) < 0.10);
    CHECK(approx_convexity(p, 0.0, kVixWindow) == 0.0);

    const double base = approx_convexity(p, 0.5, kVixWindow);
    CHECK(approx_convexity(p.scaled(0.3), 0.5, kVixWindow) == doctest::Approx(0.09 * base).epsilon(1e-12));
    // flat curve: closed form and the exact integral coincide
    CHECK(approx_convexity(p, 0.5, kVixWindow) ==
          doctest::Approx(convexity_correction(flat, p, 0.5, 0.5 + kVixWindow)).epsilon(1e-3));
}

TEST_CASE("regime error when the expansion breaks down") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto wild = ModelParams::reference_two_factor().scaled(20.0);
    CHECK_THROWS_AS(price_vix_future(flat, wild, 1.0, 1.0 + kVixWindow), RegimeError);
}

TEST_CASE("factor relabeling leaves the convexity unchanged") {
    const auto c = humped_curve();
    auto p = ModelParams::two_factor(10.25, 1.05, 1.8, 0.92, 0.51);
    auto q = p;
    std::swap(q.k[0], q.k[1]);
    std::swap(q.theta[0], q.theta[1]);
    // q violates the ordering convention but the formula is symmetric; compare raw sums directly
    CHECK(convexity_correction(c, p, 0.3, 0.3 + kVixWindow) ==
          doctest::Approx(convexity_oracle(c, q, 0.3, 0.3 + kVixWindow)).epsilon(1e-9));
}

TEST_CASE("dynamics loadings and vol magnitudes") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();
    const double nu0 = std::sqrt(1.8 * 1.8 + 0.92 * 0.92 + 2.0 * 0.51 * 1.8 * 0.92);
    CHECK(instantaneous_var_vol(p, 0.0) == doctest::Approx(nu0).epsilon(1e-14));
    CHECK(nu0 == doctest::Approx(2.403).epsilon(1e-3));
    CHECK(instantaneous_var_vol(ModelParams::one_factor(3.0, 0.7), 0.4) ==
          doctest::Approx(0.7 * std::exp(-1.2)).epsilon(1e-14));

    CHECK(vix_future_vol_approx(p, 0.0, kVixWindow) == doctest::Approx(0.90).epsilon(0.03));
    CHECK(vix_future_vol_approx(p, 30.0, kVixWindow) < 1e-5);
    double prev = 10.0;
    for (double tau = 0.0; tau < 2.0; tau += 0.1) {
        const double v = vix_future_vol_approx(p, tau, kVixWindow);
        CHECK(v < prev);
        prev = v;
    }

    for (double t1 : {0.0, 0.1, 0.3, 0.7}) {
        const double t2 = t1 + kVixWindow;
        const double strike = forward_var_strike(flat, t1, t2);
        const auto ld = future_dynamics_loadings(flat, p, t1, t2, strike);
        CHECK(loading_vol(p, ld) == doctest::Approx(vix_future_vol_approx(p, t1, kVixWindow)).epsilon(1e-12));
        for (std::size_t a = 0; a < 2; ++a) {
            const double want = 0.5 * p.theta[a] * g(p.k[a] * kVixWindow) * std::exp(-p.k[a] * t1);
            CHECK(ld[a] == doctest::Approx(want).epsilon(1e-12));
        }
        const auto priced = future_dynamics_loadings(flat, p, t1, t2);
        for (std::size_t a = 0; a < 2; ++a) CHECK((t1 > 0.0 ? priced[a] > ld[a] : priced[a] == ld[a]));
    }
}

TEST_CASE("parameter validation and serialization") {
    const auto p = ModelParams::reference_two_factor();
    const auto q = ModelParams::from_json(p.to_json());
    CHECK(q.k == p.k);
    CHECK(q.theta == p.theta);
    CHECK(q.mu == p.mu);
    CHECK(q.rho.isApprox(p.rho, 0.0));

    auto j = p.to_json();
    j["extra"] = 1;
    CHECK_THROWS_AS(ModelParams::from_json(j), ValidationError);
    CHECK_THROWS_AS(ModelParams::two_factor(1.0, 2.0, 1.0, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(ModelParams::two_factor(2.0, 1.0, 1.0, 1.0, 1.5), ValidationError);

    // rho = 1 is singular: the floor keeps Cholesky usable and TrI TrI^T close to rho
    const auto s = ModelParams::two_factor(2.0, 1.0, 1.0, 1.0, 1.0);
    const Eigen::MatrixXd l = s.cholesky();
    CHECK((l * l.transpose() - s.rho).norm() < 1e-8);
    const Eigen::VectorXd drift = p.factor_drift();
    CHECK(drift[0] == doctest::Approx(-0.075 / std::sqrt(kDeltaT)).epsilon(1e-12));
}
