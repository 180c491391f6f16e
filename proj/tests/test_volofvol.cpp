#include "oracles.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/volofvol.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vardyn;

namespace {

// Average over the life of the future of the instantaneous variance of dV/V, with the window
// average of each kernel integrated explicitly.
double future_total_variance_oracle(const ModelParams& p, double tau, double window) {
    const Eigen::MatrixXd om = p.omega();
    auto load = [&](std::size_t a, double to_expiry) {
        return oracle::integrate([&](double s) { return std::exp(-p.k[a] * s); }, to_expiry, to_expiry + window) / window;
    };
    return oracle::integrate(
               [&](double u) {
                   double v = 0.0;
                   for (std::size_t a = 0; a < p.n(); ++a)
                       for (std::size_t b = 0; b < p.n(); ++b)
                           v += 0.25 * om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * load(a, tau - u) * load(b, tau - u);
                   return v;
               },
               0.0, tau) /
           tau;
}

}  // namespace

TEST_CASE("future total variance against explicit integration") {
    const auto p = ModelParams::reference_two_factor();
    for (double tau : {0.02, 0.1, 0.5, 1.5})
        CHECK(vix_future_total_variance(p, tau) == doctest::Approx(future_total_variance_oracle(p, tau, kVixWindow)).epsilon(1e-10));
    // at expiry the variance is the instantaneous one of the index window
    const double g0 = std::expm1(-10.25 * kVixWindow) / (-10.25 * kVixWindow);
    CHECK(vix_future_total_variance(ModelParams::one_factor(10.25, 1.8), 0.0) == doctest::Approx(0.25 * 1.8 * 1.8 * g0 * g0).epsilon(1e-12));
}

TEST_CASE("model VVIX from a zero first expiry is the future total vol") {
    const auto p = ModelParams::reference_two_factor();
    const double w = 0.1;
    CHECK(model_vvix(p, 0.0, w) == doctest::Approx(std::sqrt(vix_future_total_variance(p, w, w))).epsilon(1e-12));
    CHECK_THROWS_AS(model_vvix(p, 0.2, 0.1), DomainError);
}

TEST_CASE("model VVIX with reference parameters is around 75%") {
    const auto p = ModelParams::reference_two_factor();
    const double tau1 = 14.0 / 365.0;
    CHECK(std::abs(model_vvix(p, tau1, tau1 + kVixWindow) - 0.75) < 0.02);
}

TEST_CASE("log-lambda Ornstein-Uhlenbeck parameters are recovered") {
    const double k = 16.0, sigma = 1.52, inf = 1.26, dt = 1.0 / 252.0;
    const double phi = std::exp(-k * dt);
    const double sd = sigma * std::sqrt((1.0 - phi * phi) / (2.0 * k));
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    std::vector<double> lambda;
    double x = std::log(inf);
    for (int t = 0; t < 20000; ++t) {
        lambda.push_back(std::exp(x));
        x = std::log(inf) + phi * (x - std::log(inf)) + sd * nd(rng);
    }
    const auto s = fit_lambda_process(lambda, dt);
    CHECK(s.k == doctest::Approx(k).epsilon(0.3));
    CHECK(s.lambda_inf == doctest::Approx(inf).epsilon(0.1));
    CHECK(s.sigma == doctest::Approx(sigma).epsilon(0.05));
    CHECK(std::abs(s.residual_skew) < 0.1);
    CHECK(s.half_life() == doctest::Approx(std::log(2.0) / s.k));
    CHECK(s.lambda_t == lambda.back());
}

TEST_CASE("lambda fit edge cases") {
    const auto flat = fit_lambda_process(std::vector<double>(300, 1.1));
    CHECK(flat.degenerate);
    CHECK(flat.sigma == 0.0);
    CHECK(flat.lambda_inf == 1.1);
    std::vector<double> bad(300, 1.0);
    bad[10] = -1.0;
    CHECK_THROWS_AS(fit_lambda_process(bad), ValidationError);
    CHECK_THROWS_AS(fit_lambda_process(std::vector<double>(249, 1.0)), ValidationError);
    // an alternating series has negative persistence
    std::vector<double> alt;
    for (int t = 0; t < 300; ++t) alt.push_back(t % 2 ? 1.5 : 0.8);
    CHECK_THROWS_AS(fit_lambda_process(alt), NumericalError);
}

TEST_CASE("lambda ratio and expectations") {
    const auto r = lambda_ratio({0.75, 1.5}, 0.75);
    CHECK(r[0] == doctest::Approx(1.0));
    CHECK(r[1] == doctest::Approx(4.0));
    CHECK_THROWS_AS(lambda_ratio({0.5}, 0.0), DomainError);
    VolOfVolState s;
    s.lambda_t = 2.0;
    CHECK(lambda_expectation(s, 0.0) == doctest::Approx(2.0));
    CHECK(log_lambda_expectation(s, 0.0) == doctest::Approx(std::log(2.0)));
    CHECK(log_lambda_expectation(s, 10.0) == doctest::Approx(std::log(s.lambda_inf)).epsilon(1e-12));
}

TEST_CASE("adjusted future variance reduces to the constant vol-of-vol case") {
    const auto p = ModelParams::reference_two_factor();
    VolOfVolState s;
    s.sigma = 0.0;
    s.lambda_t = s.lambda_inf;
    for (double tau : {0.05, 0.3, 1.0})
        CHECK(adjusted_future_variance(p, s, tau) == doctest::Approx(vix_future_total_variance(p, tau)).epsilon(1e-8));
    // a currently elevated lambda raises the variance of near expiries
    s.lambda_t = 2.0 * s.lambda_inf;
    CHECK(adjusted_future_variance(p, s, 0.05) > vix_future_total_variance(p, 0.05));
}
