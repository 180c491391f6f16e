#include "vardyn/calibration.hpp"
#include "vardyn/errors.hpp"
#include "vardyn/synthetic.hpp"
#include "vardyn/validation.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace vardyn;

namespace {

using oracles::quadrature_loglik;
using oracles::random_params;
using oracles::random_workspace;

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
    return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

SyntheticSpec short_spec(int days) {
    SyntheticSpec s;
    s.days = days;
    return s;
}

}  // namespace

TEST_CASE("day likelihood equals quadrature marginalisation of the factor shocks") {
    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i % 2);
        const ModelParams p = random_params(rng, n);
        const DayWorkspace ws = random_workspace(rng, n);
        worst = std::max(worst, std::abs(day_loglik(ws, p) - quadrature_loglik(ws, p)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("day likelihood rejects mismatched workspaces") {
    std::mt19937_64 rng(1);
    const DayWorkspace ws = random_workspace(rng, 1);
    CHECK_THROWS_AS((void)day_loglik(ws, ModelParams::reference_two_factor()), ValidationError);
}

TEST_CASE("posterior limits") {
    std::mt19937_64 rng(3);
    ModelParams p = ModelParams::reference_two_factor();
    DayWorkspace ws = random_workspace(rng, 2);
    while (ws.y.size() < 3) ws = random_workspace(rng, 2);

    SUBCASE("uninformative quotes return the prior mean") {
        ws.noise_var.setConstant(1e12);
        const auto post = day_posterior(ws, p);
        CHECK(post.u[0] == doctest::Approx(p.mu[0]).epsilon(1e-9));
        CHECK(post.u[1] == doctest::Approx(p.mu[1]).epsilon(1e-9));
        CHECK(post.u_cov(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("near-noiseless quotes invert the loadings") {
        const Eigen::Vector2d dw(0.07, -0.03);
        Eigen::MatrixXd b = ws.loadings;
        b.col(0) *= p.theta[0];
        b.col(1) *= p.theta[1];
        ws.y = b * dw;
        ws.noise_var.setConstant(1e-16);
        const auto post = day_posterior(ws, p);
        CHECK(post.dw[0] == doctest::Approx(dw[0]).epsilon(1e-6));
        CHECK(post.dw[1] == doctest::Approx(dw[1]).epsilon(1e-6));
    }
}

TEST_CASE("calibration config validation") {
    CalibrationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.k_grids = {{5, 6}};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = CalibrationConfig{};
    cfg.k_grids[1] = {};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("interior maximum detection") {
    CalibrationConfig cfg;
    cfg.k_grids = {{5, 10, 15}, {0.5, 1.0, 1.5}};
    std::vector<GridPoint> profile;
    for (double kf : cfg.k_grids[0])
        for (double ks : cfg.k_grids[1]) profile.push_back({{kf, ks}, {}, -std::abs(kf - 10) - std::abs(ks - 1.0)});
    CHECK(has_interior_maximum(profile, cfg));
    profile[0].loglik = 1.0;
    CHECK_FALSE(has_interior_maximum(profile, cfg));
}

TEST_CASE("synthetic futures are constant along a deterministic curve") {
    SyntheticSpec spec = short_spec(40);
    spec.truth = spec.truth.scaled(0.0);
    spec.noise_multiplier = 0.0;
    const auto data = generate(spec);
    std::map<Date, double> first;
    double worst = 0.0;
    for (const auto& r : data.futures) {
        const auto [it, fresh] = first.emplace(r.expiry, r.settle);
        if (!fresh) worst = std::max(worst, std::abs(r.settle / it->second - 1.0));
    }
    CHECK(first.size() > 7);
    CHECK(worst < 1e-12);
    // the spot variance rolls down the frozen initial curve
    const auto curve0 = VarianceCurve::interpolate(spec.initial_knot_values);
    for (std::size_t t = 0; t < data.true_spot_variance.size(); ++t)
        CHECK(data.true_spot_variance[t] == doctest::Approx(curve0(static_cast<double>(t) * kDeltaT)).epsilon(1e-12));
}

TEST_CASE("synthetic dataset layout and determinism") {
    const auto spec = short_spec(60);
    const auto a = generate(spec);
    const auto b = generate(spec);
    REQUIRE(a.futures.size() == b.futures.size());
    CHECK(a.futures.back().settle == b.futures.back().settle);
    CHECK(a.futures.size() == 60u * 7u);
    CHECK(a.dates.size() == 60u);
    CHECK(a.true_dw.rows() == 59);
    CHECK(monthly_expiries(parse_date("2024-01-01"), parse_date("2024-03-31")) ==
          std::vector<Date>{parse_date("2024-01-17"), parse_date("2024-02-21"), parse_date("2024-03-20")});

    const auto dir = std::filesystem::temp_directory_path() / "vardyn_synth_test";
    write_dataset(a, dir);
    const auto rows = load_futures_rows(dir / "futures.csv");
    CHECK(rows.size() == a.futures.size());
    CHECK(rows.front().settle == doctest::Approx(a.futures.front().settle).epsilon(1e-11));
    CHECK(load_levels(dir / "vix.csv").size() == 60u);
    CHECK(std::filesystem::exists(dir / "truth.json"));
    std::filesystem::remove_all(dir);

    auto j = spec.to_json();
    CHECK(SyntheticSpec::from_json(j).to_json() == j);
    j["colour"] = 1;
    CHECK_THROWS_AS((void)SyntheticSpec::from_json(j), ValidationError);
}

TEST_CASE("factor extraction tracks the injected shocks") {
    const auto spec = short_spec(300);
    const auto data = generate(spec);
    const auto obs = data.observations();
    CalibrationConfig cfg;
    const auto curves = fit_daily_curves(obs, spec.truth, cfg);
    const auto spot = data.spot();
    const auto fs = extract_factors(obs, curves, spec.truth, &spot);
    REQUIRE(fs.dw.rows() == data.true_dw.rows());
    // the fast factor is identified by the two front futures only; quote noise caps it near 0.93
    CHECK(correlation(fs.dw.col(0), data.true_dw.col(0)) > 0.9);
    CHECK(correlation(fs.dw.col(1), data.true_dw.col(1)) > 0.95);
    CHECK(correlation(fs.dz, data.true_dz) > 0.99);
    CHECK(fs.dw_bar.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));

    const auto back = FactorSeries::from_json(fs.to_json());
    CHECK(back.dw.isApprox(fs.dw));
    CHECK(back.dz.isApprox(fs.dz));

    const auto path = std::filesystem::temp_directory_path() / "vardyn_curves_test.jsonl";
    write_curves_jsonl(curves, path);
    const auto read = read_curves_jsonl(path);
    REQUIRE(read.size() == curves.size());
    CHECK(read[5](0.3) == doctest::Approx(curves[5](0.3)).epsilon(1e-12));
    std::filesystem::remove(path);
}

TEST_CASE("small calibration recovers the vol-of-vol scale") {
    const auto spec = short_spec(400);
    const auto obs = generate(spec).observations();
    CalibrationConfig cfg;
    cfg.k_grids = {{8, 10, 12}, {0.8, 1.05, 1.3}};
    cfg.restarts = 1;
    const auto res = calibrate(obs, cfg);
    CHECK(res.profile.size() == 9u);
    CHECK(res.params.theta[0] == doctest::Approx(spec.truth.theta[0]).epsilon(0.25));
    CHECK(res.params.theta[1] == doctest::Approx(spec.truth.theta[1]).epsilon(0.25));
    CHECK(res.params.rho(0, 1) == doctest::Approx(spec.truth.rho(0, 1)).epsilon(0.3));
    CHECK(res.curves.size() == obs.days.size());

    CalibrationConfig few = cfg;
    few.min_days = 1000;
    CHECK_THROWS_AS((void)calibrate(obs, few), ValidationError);
}
