#include "vardyn/errors.hpp"
#include "vardyn/statistics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vardyn;

namespace {

Eigen::VectorXd gaussian(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(mean, sd);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (auto& v : x) v = nd(rng);
    return x;
}

// Textbook distance correlation with full n x n double-centred matrices.
double dcor_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.size();
    auto centred = [n](const Eigen::VectorXd& v) {
        Eigen::MatrixXd d(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::abs(v[i] - v[j]);
        const Eigen::VectorXd row = d.rowwise().mean();
        const double all = d.mean();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) d(i, j) += all - row[i] - row[j];
        return d;
    };
    const Eigen::MatrixXd a = centred(x), b = centred(y);
    const double xy = (a.array() * b.array()).mean();
    const double xx = a.array().square().mean(), yy = b.array().square().mean();
    return std::sqrt(xy / std::sqrt(xx * yy));
}

}  // namespace

TEST_CASE("Gaussian sample moments sit within four standard errors") {
    const std::size_t n = 200000;
    const double dt = 1.0 / 252.0;
    const auto x = gaussian(n, 11, 0.001, 0.02);
    const auto m = moments(x, dt);
    const double sn = std::sqrt(static_cast<double>(n));
    CHECK(m.samples == n);
    CHECK(std::abs(m.mean * dt - 0.001) < 4.0 * 0.02 / sn);
    CHECK(std::abs(m.vol * std::sqrt(dt) - 0.02) < 4.0 * 0.02 / std::sqrt(2.0 * static_cast<double>(n)));
    CHECK(std::abs(m.skew) < 4.0 * std::sqrt(6.0 / static_cast<double>(n)));
    CHECK(std::abs(m.excess_kurtosis) < 4.0 * std::sqrt(24.0 / static_cast<double>(n)));
    CHECK_FALSE(m.degenerate);
    CHECK_THROWS_AS(moments(gaussian(29, 1)), ValidationError);
}

TEST_CASE("constant series is degenerate") {
    const auto m = moments(Eigen::VectorXd::Constant(100, 0.3));
    CHECK(m.degenerate);
    CHECK(std::isnan(m.skew));
}

TEST_CASE("Hill exponent of exact Pareto tails") {
    // symmetric Pareto(4) above 1: the Hill estimator is unbiased up to O(1/k), sd alpha / sqrt(k)
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni;
    Eigen::VectorXd x(200000);
    for (auto& v : x) v = (uni(rng) < 0.5 ? -1.0 : 1.0) * std::pow(1.0 - uni(rng), -0.25);
    const auto m = moments(x);
    const double sd = 4.0 / std::sqrt(0.02 * 200000.0);
    CHECK(std::abs(m.tail_upper - 4.0) < 4.0 * sd);
    CHECK(std::abs(m.tail_lower - 4.0) < 4.0 * sd);
}

TEST_CASE("Hill exponent orders Student-t tails") {
    std::mt19937_64 rng(6);
    std::student_t_distribution<double> t3(3.0), t6(6.0);
    Eigen::VectorXd a(200000), b(200000);
    for (auto& v : a) v = t3(rng);
    for (auto& v : b) v = t6(rng);
    // the 2% threshold biases t tails low, but the ordering survives and Gaussian is thinner still
    CHECK(hill_exponent(a) < hill_exponent(b));
    CHECK(hill_exponent(b) < hill_exponent(gaussian(200000, 7)));
}

TEST_CASE("risk premium from realised over implied vol") {
    const auto r = risk_premium(0.796, 1.59);
    CHECK(r.premium == doctest::Approx(1.0 - 0.796 * 0.796).epsilon(1e-14));
    CHECK(r.premium_vol == doctest::Approx(std::sqrt(3.59) * 0.796 * 0.796).epsilon(1e-14));
}

TEST_CASE("distance correlation agrees with the quadratic-memory oracle") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    Eigen::VectorXd x(300), y(300);
    for (Eigen::Index i = 0; i < 300; ++i) {
        x[i] = nd(rng);
        y[i] = x[i] * x[i] + 0.5 * nd(rng);
    }
    CHECK(distance_correlation(x, y) == doctest::Approx(dcor_oracle(x, y)).epsilon(1e-10));
    CHECK(distance_correlation(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(distance_correlation(x, 3.0 * x.array() - 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // uncorrelated but dependent: Pearson misses it, dCor does not
    CHECK(distance_correlation(x, y) > 0.3);
    CHECK(distance_correlation(gaussian(3000, 1), gaussian(3000, 2)) < 0.1);
    CHECK(distance_correlation(x, Eigen::VectorXd::Constant(300, 2.0)) == 0.0);
    CHECK_THROWS_AS(distance_correlation(x, gaussian(200, 3)), ValidationError);
}

TEST_CASE("AR(1) autocorrelation decays geometrically") {
    const double phi = 0.6;
    const auto e = gaussian(100000, 9);
    Eigen::VectorXd x(e.size());
    x[0] = e[0];
    for (Eigen::Index t = 1; t < x.size(); ++t) x[t] = phi * x[t - 1] + e[t];
    const auto acf = autocorrelation(x, {1, 2, 5, 10});
    REQUIRE(acf.size() == 4);
    for (const auto& p : acf) {
        CHECK(std::abs(p.value - std::pow(phi, p.lag)) < 0.02);
        CHECK(p.band == doctest::Approx(1.96 / std::sqrt(100000.0)));
    }
    // white noise stays inside its band at roughly the nominal rate
    std::vector<int> lags;
    for (int l = 1; l <= 40; ++l) lags.push_back(l);
    int inside = 0;
    for (const auto& p : autocorrelation(e, lags)) inside += std::abs(p.value) < p.band;
    CHECK(inside >= 34);
    CHECK_THROWS_AS(autocorrelation(gaussian(99, 1), {1}), ValidationError);
}

TEST_CASE("one-factor model has a single exponential mode") {
    const auto p = ModelParams::one_factor(3.0, 1.2);
    const auto tenors = default_mode_tenors();
    const auto md = model_modes(p, tenors);
    CHECK(md.shares[0] == doctest::Approx(1.0).epsilon(1e-12));
    double norm = 0.0;
    for (double t : tenors) norm += std::exp(-6.0 * t);
    for (std::size_t i = 0; i < tenors.size(); ++i)
        CHECK(md.modes(static_cast<Eigen::Index>(i), 0) ==
              doctest::Approx(std::exp(-3.0 * tenors[i]) / std::sqrt(norm)).epsilon(1e-10));
}

TEST_CASE("reference model puts about 95% on the level mode") {
    const auto md = model_modes(ModelParams::reference_two_factor());
    CHECK(md.shares[0] == doctest::Approx(0.95).epsilon(0.01));
    CHECK(md.shares[0] + md.shares[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("sampled two-factor variations recover the model modes") {
    const auto p = ModelParams::reference_two_factor();
    const auto tenors = default_mode_tenors();
    const Eigen::MatrixXd chol = p.omega().llt().matrixL();
    const auto m = static_cast<Eigen::Index>(tenors.size());
    Eigen::MatrixXd e(m, 2);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index a = 0; a < 2; ++a) e(i, a) = std::exp(-p.k[static_cast<std::size_t>(a)] * tenors[static_cast<std::size_t>(i)]);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(20000, m);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        const Eigen::Vector2d w(nd(rng), nd(rng));
        x.row(t) = (e * chol * w).transpose() * std::sqrt(1.0 / 252.0);
    }
    const auto kl = kl_modes(x, tenors);
    CHECK(kl.shares[0] + kl.shares[1] > 1.0 - 1e-10);
    const auto ov = mode_overlaps(kl, model_modes(p, tenors), 2);
    CHECK(ov[0] > 0.9999);
    CHECK(ov[1] > 0.99);
}

TEST_CASE("curve log variations follow a fixed maturity") {
    // a static flat curve has no variation at any fixed maturity
    const auto c0 = VarianceCurve::flat(0.04);
    const std::vector<VarianceCurve> curves(3, c0);
    const auto x = curve_log_variations(curves, {0.01, 0.01}, {0.1, 0.2});
    CHECK(x.rows() == 2);
    CHECK(x.cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(kl_modes(std::vector<VarianceCurve>(50, c0), BusinessCalendar{}), ValidationError);
}
