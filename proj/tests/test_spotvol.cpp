#include "vardyn/errors.hpp"
#include "vardyn/spotvol.hpp"
#include "vardyn/validation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vardyn;

namespace {

oracles::CoupledSample coupled_sample(std::size_t n, const InnovationLaw& law, double a, double b, double gamma,
                                      std::uint64_t seed) {
    return oracles::coupled_sample(n, law.skew, law.excess_kurtosis, a, b, gamma, seed);
}

}  // namespace

TEST_CASE("moment formulas and least squares give the same coefficients") {
    const auto s = coupled_sample(5000, {-0.57, 1.59}, 0.2, 0.6, 0.7, 3);
    Eigen::MatrixXd w(s.w.rows(), 2);
    w.col(0) = s.w.col(0);
    w.col(1) = 0.3 * s.w.col(0) + Eigen::VectorXd::LinSpaced(s.w.rows(), -1.0, 1.0);
    const auto fit = fit_nonlinear(s.z, w);
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(std::abs(fit.a[f] - fit.a_ls[f]) < 1e-10);
        CHECK(std::abs(fit.b[f] - fit.b_ls[f]) < 1e-10);
    }
    // residuals are orthogonal to both regressors
    Eigen::VectorXd z = s.z.array() - s.z.mean();
    z /= std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
    const Eigen::VectorXd q = z.array().square() - 1.0;
    for (Eigen::Index f = 0; f < 2; ++f) {
        const Eigen::VectorXd u = fit.residuals.col(f) * fit.gamma[static_cast<std::size_t>(f)];
        CHECK(std::abs(u.dot(z)) / static_cast<double>(z.size()) < 1e-10);
        CHECK(std::abs(u.dot(q)) / static_cast<double>(z.size()) < 1e-10);
    }
}

TEST_CASE("coupling coefficients are recovered within three standard errors") {
    const double a = 0.3, b = 0.5, gamma = 0.8;
    const std::size_t n = 100000;
    const InnovationLaw law{-0.57, 1.59};
    const auto s = coupled_sample(n, law, a, b, gamma, 17);
    const auto fit = fit_nonlinear(s.z, s.w);
    // OLS standard errors: gamma^2 (X'X)^{-1} with X = [z^2 - 1, z] at the population moments
    const double det = 2.0 + law.excess_kurtosis - law.skew * law.skew;
    const double sn = std::sqrt(static_cast<double>(n));
    const double se_a = gamma / sn / std::sqrt(det);
    const double se_b = gamma * std::sqrt((2.0 + law.excess_kurtosis) / det) / sn;
    const double se_g = gamma / std::sqrt(2.0 * static_cast<double>(n));
    CHECK(std::abs(fit.a[0] - a) < 3.0 * se_a);
    CHECK(std::abs(fit.b[0] - b) < 3.0 * se_b);
    CHECK(std::abs(fit.gamma[0] - gamma) < 3.0 * se_g);
    CHECK(fit.skew == doctest::Approx(law.skew).epsilon(0.1));
    CHECK(fit.excess_kurtosis == doctest::Approx(law.excess_kurtosis).epsilon(0.15));
}

TEST_CASE("linear sample gives a vanishing quadratic coefficient") {
    const auto s = coupled_sample(50000, {}, 0.0, 0.7, 0.7, 21);
    const auto fit = fit_nonlinear(s.z, s.w);
    CHECK(std::abs(fit.a[0]) < 3.0 * 0.7 / std::sqrt(2.0 * 50000.0));
    CHECK(fit.spot_correlation(0) == doctest::Approx(-0.7).epsilon(0.02));
}

TEST_CASE("fit input validation") {
    CHECK_THROWS_AS(fit_nonlinear(Eigen::VectorXd::Zero(40), Eigen::MatrixXd::Zero(39, 1)), ValidationError);
    CHECK_THROWS_AS(fit_nonlinear(Eigen::VectorXd::Zero(20), Eigen::MatrixXd::Zero(20, 1)), ValidationError);
}

TEST_CASE("replica coupling reproduces the reference correlation") {
    const auto f = NonlinearFit::replica();
    const auto p = ModelParams::reference_two_factor();
    const Eigen::MatrixXd c = f.implied_factor_correlation();
    CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(c(0, 1) == doctest::Approx(p.rho(0, 1)).epsilon(1e-10));
    // shock correlations of order 25% on both factors
    CHECK(f.shock_correlation(0) == doctest::Approx(0.25).epsilon(0.05));
    CHECK(f.shock_correlation(1) == doctest::Approx(0.25).epsilon(0.05));
    CHECK(f.gamma[0] > f.gamma[1]);
    const auto back = NonlinearFit::from_json(f.to_json());
    CHECK(back.a == f.a);
    CHECK(back.gamma == f.gamma);
    CHECK((back.u_corr - f.u_corr).norm() < 1e-15);
}

TEST_CASE("spot-independent vol reduces to the full vol without coupling") {
    const auto p = ModelParams::reference_two_factor();
    NonlinearFit f;
    f.a = {0.0, 0.0};
    f.b = {0.0, 0.0};
    f.gamma = {1.0, 1.0};
    f.u_corr = p.rho;
    for (double tau : {0.0, 0.1, 1.0}) CHECK(sigma_v(f, p, tau) == doctest::Approx(instantaneous_var_vol(p, tau)).epsilon(1e-12));
    // the replica's exogenous part carries roughly a third to a half of the variance
    const auto r = NonlinearFit::replica();
    const double share = std::pow(sigma_v(r, p, 0.0) / instantaneous_var_vol(p, 0.0), 2);
    CHECK(share > 0.25);
    CHECK(share < 0.45);
}

TEST_CASE("leverage and clustering closed forms") {
    const auto p = ModelParams::reference_two_factor();
    auto f = NonlinearFit::replica();
    const double dt = 1.0 / 252.0;
    double lev = 0.0, clu = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        lev += p.theta[i] * std::exp(-p.k[i] * 0.1) * (f.a[i] * f.skew - f.b[i]);
        clu += p.theta[i] * std::exp(-p.k[i] * 0.1) * (f.a[i] * (2.0 + f.excess_kurtosis) - f.b[i] * f.skew);
    }
    CHECK(leverage_correlation(f, p, 0.1) == doctest::Approx(lev * std::sqrt(dt)).epsilon(1e-14));
    CHECK(volatility_clustering(f, p, 0.1) == doctest::Approx(clu * std::sqrt(dt)).epsilon(1e-14));
    CHECK(leverage_correlation(f, p, 0.1) < 0.0);
    CHECK(volatility_clustering(f, p, 0.1) > 0.0);
    // Gaussian-linear configuration: no clustering
    f.a = {0.0, 0.0};
    f.skew = 0.0;
    CHECK(volatility_clustering(f, p, 0.1) == 0.0);
    CHECK_THROWS_AS(leverage_correlation(f, p, 0.0), DomainError);
}

TEST_CASE("GARCH map collapses without vol-of-vol") {
    const auto f = NonlinearFit::replica();
    const auto p = ModelParams::reference_two_factor().scaled(0.0);
    const auto g = garch_map(f, p, 0.0, SpotMoments::reference(), {0.0, 0.0});
    CHECK(g.phi0 == 0.0);
    CHECK(g.phi1 == 0.0);
    CHECK(g.phi2 == 0.0);
    CHECK(g.phi3 == 0.0);
    CHECK(g.phi4 == 0.0);
    CHECK_THROWS_AS(garch_map(f, p, 0.0, SpotMoments::reference(), {0.0}), ValidationError);
}

TEST_CASE("GARCH map signs with reference inputs") {
    const auto f = NonlinearFit::replica();
    const auto p = ModelParams::reference_two_factor();
    const auto g = garch_map(f, p, 0.0, SpotMoments::reference(), {-1.17, -0.68});
    CHECK(g.phi1 > 0.0);
    CHECK(g.phi2 > 0.0);
    CHECK(g.phi3 < 0.0);
    CHECK(g.phi4 == doctest::Approx(sigma_v(f, p, 1.0 / 252.0)).epsilon(1e-14));
}

TEST_CASE("direct GARCH regression recovers simulated coefficients") {
    const double dt = 1.0 / 252.0;
    const double c0 = 0.005, c1 = 0.05, c2 = -0.004, c3 = -0.2;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    const std::size_t n = 20000;
    std::vector<double> var{0.033}, ret;
    for (std::size_t t = 0; t < n; ++t) {
        const double r = std::sqrt(var.back() * dt) * nd(rng);
        ret.push_back(r);
        const double next = c0 + c1 * r * r / dt + c2 * r / std::sqrt(dt) + (1.0 + c3) * var.back() + 0.002 * nd(rng);
        var.push_back(std::max(next, 1e-4));
    }
    const auto g = fit_garch_direct(ret, var, dt);
    CHECK(std::abs(g.coefficients.phi0 - c0) < 4.0 * g.std_errors[0]);
    CHECK(std::abs(g.coefficients.phi1 - c1) < 4.0 * g.std_errors[1]);
    CHECK(std::abs(g.coefficients.phi2 - c2) < 4.0 * g.std_errors[2]);
    CHECK(std::abs(g.coefficients.phi3 - c3) < 4.0 * g.std_errors[3]);
}

TEST_CASE("deterministic variance leaves only persistence") {
    const double dt = 1.0 / 252.0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> var{0.09}, ret;
    for (int t = 0; t < 500; ++t) {
        ret.push_back(std::sqrt(var.back() * dt) * nd(rng));
        var.push_back(0.04 + 0.97 * (var.back() - 0.04));
    }
    const auto g = fit_garch_direct(ret, var, dt);
    CHECK(std::abs(g.coefficients.phi1) < 1e-9);
    CHECK(std::abs(g.coefficients.phi2) < 1e-9);
    CHECK(g.coefficients.phi3 == doctest::Approx(-0.03).epsilon(1e-8));
    CHECK_THROWS_AS(fit_garch_direct(std::vector<double>(100, 0.01), std::vector<double>(101, 0.04), dt), ValidationError);
    CHECK_THROWS_AS(fit_garch_direct(std::vector<double>(300, 0.01), std::vector<double>(301, 0.04), dt), NumericalError);
}
