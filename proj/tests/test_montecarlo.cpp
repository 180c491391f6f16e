#include "oracles.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/montecarlo.hpp"

#include <doctest.h>

#include <cmath>

using namespace vardyn;

namespace {

double mixture_moment(const std::vector<MixtureComponent>& mix, int order) {
    // raw moments of N(m, s^2) up to order 4
    double total = 0.0;
    for (const auto& c : mix) {
        const double m = c.mean, v = c.sd * c.sd;
        const double mom[5] = {1.0, m, m * m + v, m * m * m + 3 * m * v, m * m * m * m + 6 * m * m * v + 3 * v * v};
        total += c.weight * mom[order];
    }
    return total;
}

}  // namespace

TEST_CASE("innovation mixture hits the requested moments") {
    for (const auto& law : {InnovationLaw{-0.57, 1.59}, InnovationLaw{0.0, 2.0}, InnovationLaw{0.4, 0.8}}) {
        const auto mix = fit_innovation_mixture(law);
        CHECK(mixture_moment(mix, 1) == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(mixture_moment(mix, 2) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(mixture_moment(mix, 3) == doctest::Approx(law.skew).epsilon(1e-10));
        CHECK(mixture_moment(mix, 4) == doctest::Approx(3.0 + law.excess_kurtosis).epsilon(1e-10));
    }
    CHECK(fit_innovation_mixture(InnovationLaw{}).size() == 1);
    CHECK_THROWS_AS(fit_innovation_mixture(InnovationLaw{1.5, -1.0}), ValidationError);
}

TEST_CASE("quadratic log-MGF against direct integration") {
    const auto mix = fit_innovation_mixture(InnovationLaw{-0.57, 1.59});
    for (const auto& ab : {std::pair{0.02, 0.05}, std::pair{-0.03, -0.1}, std::pair{0.1, 0.3}}) {
        const double a = ab.first, b = ab.second;
        double want = 0.0;
        for (const auto& c : mix) {
            want += c.weight * oracle::integrate_pieces(
                                   [&](double z) {
                                       const double x = (z - c.mean) / c.sd;
                                       return std::exp(a * (z * z - 1.0) - b * z - 0.5 * x * x) /
                                              (c.sd * std::sqrt(2.0 * M_PI));
                                   },
                                   -40.0, 40.0, {-10.0, -3.0, 0.0, 3.0, 10.0});
        }
        CHECK(mixture_quadratic_log_mgf(mix, a, b) == doctest::Approx(std::log(want)).epsilon(1e-10));
    }
}

TEST_CASE("consistent coupling reproduces the factor correlation") {
    const InnovationLaw law{-0.57, 1.59};
    Eigen::MatrixXd rho(2, 2);
    rho << 1.0, 0.51, 0.51, 1.0;
    const auto c = SpotVolCoupling::consistent({0.05, 0.02}, {0.6, 0.5}, law, rho);
    CHECK((c.factor_correlation(law) - rho).norm() < 1e-12);
    for (std::size_t a = 0; a < 2; ++a) {
        const double f = (2.0 + law.excess_kurtosis) * c.a[a] * c.a[a] + c.b[a] * c.b[a] - 2.0 * law.skew * c.a[a] * c.b[a];
        CHECK(c.gamma[a] * c.gamma[a] + f == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(SpotVolCoupling::consistent({0.5, 0.0}, {0.9, 0.0}, law, rho), RegimeError);
}

TEST_CASE("frozen curve: deterministic variance") {
    const auto flat = VarianceCurve::flat(0.04);
    SimConfig cfg;
    cfg.paths = 4000;
    cfg.lambda_scale = 0.0;
    Simulator sim(flat, ModelParams::reference_two_factor(), cfg);
    const auto v = mc_vix_future(sim, 21.0 / 252.0, 21.0 / 252.0 + kVixWindow);
    CHECK(v.mean == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(v.se < 1e-12);
    const auto rv = mc_realized_variance(sim, 63.0 / 252.0);
    CHECK(std::abs(rv.mean - 0.04) < 4.0 * rv.se);

    const auto smile = mc_smile(sim, 63.0 / 252.0, {-0.1, -0.05, 0.0, 0.05, 0.1});
    for (const auto& p : smile) CHECK(std::abs(p.implied_vol.mean - 0.2) < 4.0 * p.implied_vol.se + 2e-3);
}

TEST_CASE("curve stays a martingale in every mode") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();
    const std::vector<double> u = {0.25, 0.3, 0.5, 1.0, 2.0};
    const InnovationLaw skewed{-0.57, 1.59};

    std::vector<SimConfig> configs(3);
    configs[1].coupling = SpotVolCoupling::consistent({0.05, 0.02}, {0.6, 0.5}, skewed, p.rho);
    configs[1].innovation = skewed;
    configs[2].vol_of_vol = LambdaProcess{};
    for (auto& cfg : configs) {
        cfg.paths = 4000;
        Simulator sim(flat, p, cfg);
        for (const auto& e : mc_curve_martingale(sim, 0.25, u)) CHECK(std::abs(e.mean - 1.0) < 4.0 * e.se);
    }
}

TEST_CASE("generator self-consistency") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();
    SimConfig cfg;
    cfg.paths = 20000;
    cfg.coupling = SpotVolCoupling::consistent({0.0, 0.0}, {0.6, 0.4}, InnovationLaw{}, p.rho);
    Simulator sim(flat, p, cfg);
    struct Obs : PathObserver {
        double zz = 0, zw0 = 0, zw1 = 0, n = 0;
        void on_step(const PathState& s) override {
            zz += s.last_dz() * s.last_dz();
            zw0 += s.last_dz() * s.last_dwbar()[0];
            zw1 += s.last_dz() * s.last_dwbar()[1];
            n += 1;
        }
    };
    auto parts = sim.run_collect<Obs>(1, [](std::size_t) { return std::make_unique<Obs>(); });
    double zz = 0, zw0 = 0, zw1 = 0, n = 0;
    for (const auto& o : parts) {
        zz += o->zz;
        zw0 += o->zw0;
        zw1 += o->zw1;
        n += o->n;
    }
    const double se = 1.0 / std::sqrt(n);
    CHECK(std::abs(zw0 / n + 0.6) < 4.0 * se);
    CHECK(std::abs(zw1 / n + 0.4) < 4.0 * se);
    CHECK(std::abs(zz / n - 1.0) < 4.0 * std::sqrt(2.0) * se);
}

TEST_CASE("bit-reproducible and chunking-invariant") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();
    SimConfig cfg;
    cfg.paths = 3000;
    const Simulator a(flat, p, cfg);
    const auto x = mc_vix_future(a, 42.0 / 252.0, 42.0 / 252.0 + kVixWindow);
    const auto y = mc_vix_future(a, 42.0 / 252.0, 42.0 / 252.0 + kVixWindow);
    CHECK(x.mean == y.mean);
    CHECK(x.se == y.se);
    cfg.chunk_paths = 700;
    const Simulator b(flat, p, cfg);
    const auto z = mc_vix_future(b, 42.0 / 252.0, 42.0 / 252.0 + kVixWindow);
    CHECK(z.mean == doctest::Approx(x.mean).epsilon(1e-13));
    cfg.seed += 1;
    const Simulator c(flat, p, cfg);
    CHECK(mc_vix_future(c, 42.0 / 252.0, 42.0 / 252.0 + kVixWindow).mean != x.mean);
}

TEST_CASE("pricing formula inside the Monte Carlo band") {
    const auto flat = VarianceCurve::flat(0.04);
    const auto p = ModelParams::reference_two_factor();
    SimConfig cfg;
    cfg.paths = 20000;
    cfg.lambda_scale = 0.5;
    Simulator sim(flat, p, cfg);
    const double t1 = 21.0 / 252.0;
    const auto mc = mc_vix_future(sim, t1, t1 + kVixWindow);
    const auto px = price_vix_future(flat, p.scaled(0.5), t1, t1 + kVixWindow);
    CHECK(std::abs(mc.mean - px.price) < 3.0 * mc.se);
    CHECK(mc.mean < px.strike);
}

TEST_CASE("Black-Scholes inversion") {
    for (double k : {90.0, 100.0, 110.0})
        for (double v : {0.05, 0.2, 0.8}) {
            const double c = bs_call(100.0, k, v, 0.5);
            CHECK(implied_vol(c, 100.0, k, 0.5) == doctest::Approx(v).epsilon(1e-9));
        }
    CHECK(std::isnan(implied_vol(0.0, 100.0, 120.0, 0.5)));
    CHECK(std::isnan(implied_vol(101.0, 100.0, 120.0, 0.5)));
}

TEST_CASE("path dump layout") {
    const auto flat = VarianceCurve::flat(0.04);
    SimConfig cfg;
    cfg.paths = 4;
    Simulator sim(flat, ModelParams::reference_two_factor(), cfg);
    const auto file = std::filesystem::temp_directory_path() / "vardyn_dump_test.bin";
    dump_paths(sim, 3, {0.0, 0.5}, file);
    CHECK(std::filesystem::file_size(file) == 3 * 8 + 2 * 8 + 4 * 3 * 3 * 8);
    std::filesystem::remove(file);
}
