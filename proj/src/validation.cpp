#include "vardyn/validation.hpp"

#include "vardyn/analytics.hpp"
#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"
#include "vardyn/montecarlo.hpp"
#include "vardyn/spotvol.hpp"
#include "vardyn/statistics.hpp"
#include "vardyn/synthetic.hpp"
#include "vardyn/volofvol.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>

namespace vardyn {

namespace oracles {

double quadrature_loglik(const DayWorkspace& ws, const ModelParams& p) {
    const auto n = static_cast<Eigen::Index>(p.n());
    const double dt = ws.dt;
    Eigen::MatrixXd b = ws.loadings;
    for (Eigen::Index a = 0; a < n; ++a) b.col(a) *= p.theta[static_cast<std::size_t>(a)];
    const Eigen::MatrixXd prior_cov = dt * p.rho;
    const Eigen::MatrixXd prior_prec = prior_cov.inverse();
    const Eigen::Map<const Eigen::VectorXd> mu(p.mu.data(), n);
    const Eigen::VectorXd prior_mean = std::sqrt(dt) * p.cholesky() * mu;
    const Eigen::VectorXd dinv = ws.noise_var.cwiseInverse();

    auto log_integrand = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd r = ws.y - b * x;
        double v = -0.5 * r.dot(dinv.cwiseProduct(r));
        v -= 0.5 * (static_cast<double>(ws.y.size()) * std::log(2 * std::numbers::pi) + ws.noise_var.array().log().sum());
        const Eigen::VectorXd e = x - prior_mean;
        v -= 0.5 * e.dot(prior_prec * e);
        v -= 0.5 * (static_cast<double>(n) * std::log(2 * std::numbers::pi) + std::log(prior_cov.determinant()));
        return v;
    };

    const Eigen::MatrixXd post_prec = b.transpose() * dinv.asDiagonal() * b + prior_prec;
    const Eigen::MatrixXd post_cov = post_prec.inverse();
    const Eigen::VectorXd mode = post_cov * (b.transpose() * dinv.cwiseProduct(ws.y) + prior_prec * prior_mean);
    const double peak = log_integrand(mode);

    constexpr int panels = 24;
    const auto& nodes = boost::math::quadrature::gauss<double, 10>::abscissa();
    const auto& weights = boost::math::quadrature::gauss<double, 10>::weights();
    std::vector<double> pts, wts;  // rule on [-1, 1] in units of the half-width
    for (int q = 0; q < panels; ++q) {
        const double lo = -1.0 + 2.0 * q / panels, half = 1.0 / panels;
        for (std::size_t j = 0; j < nodes.size(); ++j)
            for (int sgn : {-1, 1}) {
                if (nodes[j] == 0.0 && sgn < 0) continue;
                pts.push_back(lo + half + sgn * half * nodes[j]);
                wts.push_back(half * weights[j]);
            }
    }
    Eigen::VectorXd width(n);
    for (Eigen::Index a = 0; a < n; ++a) width[a] = 12.0 * std::sqrt(post_cov(a, a));

    double total = 0.0;
    Eigen::VectorXd x(n);
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    for (;;) {
        double w = 1.0;
        for (Eigen::Index a = 0; a < n; ++a) {
            x[a] = mode[a] + width[a] * pts[idx[static_cast<std::size_t>(a)]];
            w *= width[a] * wts[idx[static_cast<std::size_t>(a)]];
        }
        total += w * std::exp(log_integrand(x) - peak);
        std::size_t a = 0;
        while (a < idx.size() && ++idx[a] == pts.size()) idx[a++] = 0;
        if (a == idx.size()) break;
    }
    return peak + std::log(total);
}

ModelParams random_params(std::mt19937_64& rng, std::size_t factors) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (factors == 1) return ModelParams::one_factor(1.0 + 10 * u(rng), 0.3 + 2.0 * u(rng), 0.3 * (u(rng) - 0.5));
    const double kf = 4.0 + 10 * u(rng);
    return ModelParams::two_factor(kf, 0.2 + 2.0 * u(rng), 0.3 + 2.0 * u(rng), 0.2 + 1.2 * u(rng),
                                   -0.9 + 1.8 * u(rng), 0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5));
}

DayWorkspace random_workspace(std::mt19937_64& rng, std::size_t factors) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z;
    const auto m = static_cast<Eigen::Index>(1 + rng() % 7);
    DayWorkspace ws;
    ws.y.resize(m);
    ws.noise_var.resize(m);
    ws.loadings.resize(m, static_cast<Eigen::Index>(factors));
    for (Eigen::Index i = 0; i < m; ++i) {
        ws.y[i] = 0.05 * z(rng);
        const double sigma = 0.1 + 0.9 * u(rng);
        ws.noise_var[i] = sigma * sigma * ws.dt;
        for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(factors); ++a) ws.loadings(i, a) = 0.1 + 0.5 * u(rng);
    }
    return ws;
}

namespace {
double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-14);
}
}  // namespace

double kernel_g(double x) {
    return gk([x](double s) { return std::exp(-x * s); }, 0.0, 1.0);
}

double kernel_h(double x) {
    return gk([x](double w) { return (1.0 - w) * std::exp(-x * w); }, 0.0, 1.0);
}

double kernel_l(double x, double y, double z) {
    const double a = x * z, b = y * z;
    return gk([a, b](double t) { return std::expm1(-a * t) * std::expm1(-b * t); }, 0.0, 1.0) / (a * b);
}

CoupledSample coupled_sample(std::size_t n, double skew, double excess_kurtosis, double a, double b, double gamma,
                             std::uint64_t seed) {
    const auto mix = fit_innovation_mixture(InnovationLaw{skew, excess_kurtosis});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni;
    std::normal_distribution<double> nd;
    CoupledSample s{Eigen::VectorXd(static_cast<Eigen::Index>(n)), Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1)};
    for (Eigen::Index i = 0; i < s.z.size(); ++i) {
        double pick = uni(rng);
        std::size_t c = 0;
        while (c + 1 < mix.size() && pick > mix[c].weight) pick -= mix[c++].weight;
        const double z = mix[c].mean + mix[c].sd * nd(rng);
        s.z[i] = z;
        s.w(i, 0) = a * (z * z - 1.0) - b * z + gamma * nd(rng);
    }
    return s;
}

}  // namespace oracles

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    // FNV-1a of the tag keeps the mapping identical across standard libraries
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : tag) hash = (hash ^ c) * 1099511628211ull;
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(hash), static_cast<std::uint32_t>(hash >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string to_string(CriterionStatus s) {
    switch (s) {
        case CriterionStatus::pass: return "PASS";
        case CriterionStatus::fail: return "FAIL";
        case CriterionStatus::expected_failure: return "FAIL (documented)";
        case CriterionStatus::skipped: return "SKIP";
    }
    return "?";
}

const std::vector<int>& documented_failures() {
    static const std::vector<int> ids = {4, 10, 13};
    return ids;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t criterion_seed(std::uint64_t master, int id) { return derive_seed(master, "criterion-" + std::to_string(id)); }

// Sub-check of a criterion. `documented` marks the one known, recorded discrepancy.
struct Check {
    std::string name;
    bool ok = false;
    bool documented = false;
};

class Recorder {
public:
    Recorder(int id, std::string title) {
        r_.id = id;
        r_.title = std::move(title);
    }
    void check(std::string name, bool ok, bool documented = false) { checks_.push_back({std::move(name), ok, documented}); }
    nlohmann::json& metrics() { return r_.metrics; }
    CriterionResult finish(Clock::time_point t0) {
        r_.seconds = seconds_since(t0);
        bool all = true, undocumented = false;
        std::string failed;
        for (const auto& c : checks_) {
            if (c.ok) continue;
            all = false;
            undocumented = undocumented || !c.documented;
            failed += (failed.empty() ? "" : "; ") + c.name;
        }
        if (checks_.empty()) r_.status = CriterionStatus::skipped;
        else if (all) r_.status = CriterionStatus::pass;
        else r_.status = undocumented ? CriterionStatus::fail : CriterionStatus::expected_failure;
        r_.detail = all ? fmt::format("{} checks", checks_.size()) : "failed: " + failed;
        return r_;
    }
    CriterionResult skip(std::string why) {
        r_.status = CriterionStatus::skipped;
        r_.detail = std::move(why);
        return r_;
    }

private:
    CriterionResult r_;
    std::vector<Check> checks_;
};

std::vector<double> log_grid(double lo, double hi, int per_decade) {
    std::vector<double> out;
    const int n = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
    for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
    return out;
}

VarianceCurve reference_curve() {
    return VarianceCurve::interpolate(SyntheticSpec{}.initial_knot_values);
}

// --- 1
CriterionResult kernels() {
    const auto t0 = Clock::now();
    Recorder rec(1, "kernel functions g, h, l");
    double worst_gh = 0.0, worst_l = 0.0;
    for (double x : log_grid(1e-8, 1e3, 12)) {
        worst_gh = std::max(worst_gh, std::abs(g(x) / oracles::kernel_g(x) - 1.0));
        worst_gh = std::max(worst_gh, std::abs(h(x) / oracles::kernel_h(x) - 1.0));
    }
    for (double x : {0.3, 1.05, 10.25})
        for (double y : {0.3, 1.05, 10.25})
            for (double z : log_grid(1e-6, 1e2, 4)) worst_l = std::max(worst_l, std::abs(l(x, y, z) / oracles::kernel_l(x, y, z) - 1.0));
    rec.metrics() = {{"max_rel_gh", worst_gh}, {"max_rel_l", worst_l}};
    rec.check("g,h vs quadrature rel 1e-10", worst_gh < 1e-10);
    rec.check("l vs quadrature rel 1e-10", worst_l < 1e-10);
    rec.check("g(0) = 1", std::abs(g(0.0) - 1.0) < 1e-6);
    rec.check("h(0) = 1/2", std::abs(h(0.0) - 0.5) < 1e-6);
    rec.check("l -> 1/3", std::abs(l(1.0, 1.0, 1e-8) - 1.0 / 3.0) < 1e-6);
    rec.check("runtime < 1 s", seconds_since(t0) < 1.0);
    return rec.finish(t0);
}

// --- 2
CriterionResult convexity() {
    const auto t0 = Clock::now();
    Recorder rec(2, "convexity magnitude");
    const auto p = ModelParams::reference_two_factor();
    const auto flat = VarianceCurve::flat(0.04);
    const double c1 = convexity_correction(flat, p, 1.0 / 12.0, 1.0 / 12.0 + kVixWindow);
    const double c2 = convexity_correction(flat, p, 2.0 / 12.0, 2.0 / 12.0 + kVixWindow);
    const double limit = approx_convexity(p, 200.0, kVixWindow);
    double worst = 0.0;
    for (double t1 : {1.0 / 12.0, 2.0 / 12.0, 0.5, 1.0, 5.0}) {
        const double exact = convexity_correction(flat, p, t1, t1 + kVixWindow);
        worst = std::max(worst, std::abs(exact / approx_convexity(p, t1, kVixWindow) - 1.0));
    }
    rec.metrics() = {{"first", c1}, {"second", c2}, {"long_limit", limit}, {"max_rel_exact_vs_approx", worst}};
    rec.check("first two futures < 5%", c1 < 0.05 && c2 < 0.05);
    rec.check("long-maturity limit < 10%", limit < 0.10);
    rec.check("exact vs approximate rel 1e-2", worst < 1e-2);
    return rec.finish(t0);
}

// --- 3
CriterionResult pricing_oracle(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(3, "MC pricing oracle");
    const auto curve = reference_curve();
    const std::vector<ModelParams> sets = {ModelParams::reference_two_factor(),
                                           ModelParams::reference_two_factor().scaled(0.5),
                                           ModelParams::one_factor(8.0, 1.5)};
    double worst = 0.0;
    int combos = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        SimConfig cfg;
        cfg.paths = 100000;
        cfg.seed = seed + s;
        Simulator sim(curve, sets[s], cfg);
        for (int m = 1; m <= 4; ++m) {
            const double t1 = 21.0 * m / 252.0;
            const auto mc = mc_vix_future(sim, t1, t1 + kVixWindow);
            const auto px = price_vix_future(curve, sets[s], t1, t1 + kVixWindow);
            worst = std::max(worst, std::abs(mc.mean - px.price) / mc.se);
            ++combos;
        }
    }
    rec.metrics() = {{"combos", combos}, {"max_abs_z", worst}};
    rec.check("12 combos within 3 SE", combos == 12 && worst < 3.0);
    rec.check("runtime < 2 min", seconds_since(t0) < 120.0);
    return rec.finish(t0);
}

// --- 4
CriterionResult short_end_vol(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(4, "short-end VIX vol");
    const auto p = ModelParams::reference_two_factor();
    const double limit = vix_future_vol_approx(p, 1e-10, kVixWindow);
    SimConfig cfg;
    cfg.paths = 100000;
    cfg.seed = seed;
    const auto flat = VarianceCurve::flat(0.04);
    Simulator sim(flat, p, cfg);
    const std::vector<double> tenors = {2.0 / 252.0, 21.0 / 252.0, 63.0 / 252.0, 126.0 / 252.0, 189.0 / 252.0};
    double worst = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& f : mc_future_vols(sim, tenors)) {
        const double model = vix_future_vol_approx(p, f.tau1, kVixWindow);
        const double z = (f.vol.mean - model) / f.vol.se;
        worst = std::max(worst, std::abs(z));
        rows.push_back({{"tau1", f.tau1}, {"mc", f.vol.mean}, {"se", f.vol.se}, {"model", model}});
    }
    rec.metrics() = {{"short_end_limit", limit}, {"mc", rows}, {"max_abs_z", worst}};
    rec.check(fmt::format("limit {:.2f}% within 90% +- 1", 100 * limit), std::abs(limit - 0.90) <= 0.01, true);
    rec.check("MC front-future vol within 3 SE", worst < 3.0);
    return rec.finish(t0);
}

// --- 5
CriterionResult calibration_recovery(const std::optional<std::filesystem::path>& run) {
    const auto t0 = Clock::now();
    Recorder rec(5, "calibration recovery");
    if (!run) return rec.skip("needs a pipeline run directory");
    const auto truth_path = *run / "truth.json", cal_path = *run / "calibration.json";
    if (!std::filesystem::exists(truth_path) || !std::filesystem::exists(cal_path))
        return rec.skip("missing " + truth_path.string() + " or " + cal_path.string());
    std::ifstream tf(truth_path), cf(cal_path);
    const auto tj = nlohmann::json::parse(tf);
    const auto cj = nlohmann::json::parse(cf);
    const auto truth = ModelParams::from_json(tj.at("truth"));
    const auto fit = ModelParams::from_json(cj.at("params"));
    if (truth.n() != 2 || fit.n() != 2) {
        rec.check("two-factor truth and fit", false);
        return rec.finish(t0);
    }
    auto rel = [](double a, double b) { return std::abs(a / b - 1.0); };
    const double e_tf = rel(fit.theta[0], truth.theta[0]), e_ts = rel(fit.theta[1], truth.theta[1]);
    const double e_rho = rel(fit.rho(0, 1), truth.rho(0, 1));
    const double secs = cj.at("seconds").get<double>();
    rec.metrics() = {{"theta", fit.theta}, {"k", fit.k}, {"rho", fit.rho(0, 1)}, {"rel_theta_fast", e_tf},
                     {"rel_theta_slow", e_ts}, {"rel_rho", e_rho}, {"seconds", secs}};
    rec.check("theta_F within 15%", e_tf <= 0.15);
    rec.check("theta_S within 15%", e_ts <= 0.15);
    rec.check("rho within 15%", e_rho <= 0.15);
    rec.check("k_F in [6, 14]", fit.k[0] >= 6.0 && fit.k[0] <= 14.0);
    rec.check("k_S in [0.3, 1.4]", fit.k[1] >= 0.3 && fit.k[1] <= 1.4);
    rec.check("interior likelihood maximum", cj.at("interior_maximum").get<bool>());
    rec.check("runtime < 10 min", secs < 600.0);
    return rec.finish(t0);
}

// --- 6
CriterionResult likelihood(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(6, "likelihood correctness");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i % 2);
        const auto p = oracles::random_params(rng, n);
        const auto ws = oracles::random_workspace(rng, n);
        worst = std::max(worst, std::abs(day_loglik(ws, p) - oracles::quadrature_loglik(ws, p)));
    }
    rec.metrics() = {{"instances", 100}, {"max_abs_diff", worst}};
    rec.check("100 instances within 1e-6", worst < 1e-6);
    rec.check("runtime < 10 s", seconds_since(t0) < 10.0);
    return rec.finish(t0);
}

// --- 7
CriterionResult kl_modes_check(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(7, "KL modes");
    const auto model = model_modes(ModelParams::reference_two_factor());
    auto run = [&](double noise, std::uint64_t s) {
        SyntheticSpec spec;
        spec.noise_multiplier = noise;
        spec.seed = s;
        const auto data = generate(spec);
        const auto obs = data.observations(spec.liquidity);
        const auto curves = fit_daily_curves(obs, spec.truth, CalibrationConfig{});
        return kl_modes(curves, obs.calendar);
    };
    const auto clean = run(0.0, seed);
    const auto noisy = run(1.0, seed + 1);
    const double s_clean = clean.shares[0] + clean.shares[1], s_noisy = noisy.shares[0] + noisy.shares[1];
    const auto ov = mode_overlaps(noisy, model, 2);
    rec.metrics() = {{"top2_noise_free", s_clean}, {"top2_noisy", s_noisy}, {"overlaps", ov},
                     {"model_first_share", model.shares[0]}};
    rec.check("noise-free top-2 >= 99.9%", s_clean >= 0.999);
    rec.check("noisy top-2 >= 99%", s_noisy >= 0.99);
    rec.check("mode inner products > 0.99", ov[0] > 0.99 && ov[1] > 0.99);
    return rec.finish(t0);
}

// --- 8
CriterionResult nonlinear_fit(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(8, "non-linear fit");
    const double a = 0.3, b = 0.5, gamma = 0.8;
    const auto law = SpotMoments::reference().law();
    const std::size_t n = 100000;
    const auto s = oracles::coupled_sample(n, law.skew, law.excess_kurtosis, a, b, gamma, seed);
    const auto fit = fit_nonlinear(s.z, s.w);
    const double diff = std::max(std::abs(fit.a[0] - fit.a_ls[0]), std::abs(fit.b[0] - fit.b_ls[0]));
    // Bootstrap SEs: the estimator standardises dZbar by its sample moments, which the
    // regression-only formula leaves out and which dominates the error on a.
    constexpr int reps = 200;
    std::mt19937_64 rng(seed + 1);
    std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(n) - 1);
    Eigen::VectorXd bz(s.z.size());
    Eigen::MatrixXd bw(s.w.rows(), 1);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sum2 = Eigen::Vector3d::Zero();
    for (int r = 0; r < reps; ++r) {
        for (Eigen::Index i = 0; i < bz.size(); ++i) {
            const auto j = pick(rng);
            bz[i] = s.z[j];
            bw(i, 0) = s.w(j, 0);
        }
        const auto bf = fit_nonlinear(bz, bw);
        const Eigen::Vector3d v(bf.a[0], bf.b[0], bf.gamma[0]);
        sum += v;
        sum2 += v.cwiseProduct(v);
    }
    const Eigen::Vector3d se = ((sum2 - sum.cwiseProduct(sum) / reps) / (reps - 1)).cwiseSqrt();
    const double za = (fit.a[0] - a) / se[0], zb = (fit.b[0] - b) / se[1], zg = (fit.gamma[0] - gamma) / se[2];
    rec.metrics() = {{"moment_vs_ls", diff}, {"a", fit.a[0]}, {"b", fit.b[0]}, {"gamma", fit.gamma[0]},
                     {"bootstrap_se", {se[0], se[1], se[2]}}, {"z", {za, zb, zg}}};
    rec.check("moment vs least squares 1e-10", diff < 1e-10);
    rec.check("(a, b, gamma) within 3 SE", std::abs(za) < 3.0 && std::abs(zb) < 3.0 && std::abs(zg) < 3.0);
    return rec.finish(t0);
}

// --- 9
CriterionResult leverage_clustering(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(9, "leverage and clustering");
    const auto p = ModelParams::reference_two_factor();
    const auto f = NonlinearFit::replica();
    const auto curve = VarianceCurve::flat(0.04);
    const std::vector<std::size_t> lags = {1, 5, 21, 63};

    SimConfig cfg;
    cfg.paths = 400000;
    cfg.seed = seed;
    cfg.innovation = f.law();
    cfg.coupling = f.coupling();
    cfg.scheme = CurveScheme::linear_perturbation;
    double worst = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& x : mc_lag_correlations(Simulator(curve, p, cfg), lags)) {
        const double d = static_cast<double>(x.lag) * cfg.dt;
        const double lev = leverage_correlation(f, p, d), clu = volatility_clustering(f, p, d);
        worst = std::max({worst, std::abs(x.leverage.mean - lev) / x.leverage.se, std::abs(x.clustering.mean - clu) / x.clustering.se});
        rows.push_back({{"lag", x.lag}, {"leverage_mc", x.leverage.mean}, {"leverage", lev},
                        {"clustering_mc", x.clustering.mean}, {"clustering", clu}});
    }

    // Gaussian-linear configuration: a = 0, zeta = 0
    NonlinearFit lin = f;
    lin.a = {0.0, 0.0};
    lin.skew = 0.0;
    lin.excess_kurtosis = 0.0;
    SimConfig gcfg = cfg;
    gcfg.paths = 200000;
    gcfg.seed = seed + 1;
    gcfg.innovation = InnovationLaw{};
    gcfg.coupling = SpotVolCoupling::consistent(lin.a, lin.b, InnovationLaw{}, p.rho);
    double worst_null = 0.0, closed_null = 0.0;
    for (const auto& x : mc_lag_correlations(Simulator(curve, p, gcfg), lags)) {
        worst_null = std::max(worst_null, std::abs(x.clustering.mean) / x.clustering.se);
        closed_null = std::max(closed_null, std::abs(volatility_clustering(lin, p, static_cast<double>(x.lag) * cfg.dt)));
    }
    rec.metrics() = {{"rows", rows}, {"max_abs_z", worst}, {"gaussian_linear_max_abs_z", worst_null}};
    rec.check("closed forms within 3 SE", worst < 3.0);
    rec.check("Gaussian-linear clustering zero within SE", closed_null == 0.0 && worst_null < 3.0);
    return rec.finish(t0);
}

// --- 10
CriterionResult garch(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(10, "GARCH map");
    const auto p = ModelParams::reference_two_factor();
    const auto rep = NonlinearFit::replica();
    const auto row = garch_map(rep, p, 0.0, SpotMoments::reference(), {-1.17, -0.68});
    const std::vector<double> got = {row.phi0, row.phi1, row.phi2, row.phi3, row.phi4};
    const std::vector<double> printed = {0.0, 0.0096, 0.0015, -0.0150, 1.41};
    const std::vector<double> half_digit = {0.00005, 0.00005, 0.00005, 0.00005, 0.005};
    bool row_ok = true;
    for (std::size_t i = 0; i < got.size(); ++i) row_ok = row_ok && std::abs(got[i] - printed[i]) <= half_digit[i];

    SyntheticSpec spec;
    spec.days = 5000;
    spec.seed = seed;
    spec.innovation = rep.law();
    spec.coupling = rep.coupling();
    const auto data = generate(spec);
    const auto spot = data.spot();
    std::vector<double> var(data.true_spot_variance.begin(), data.true_spot_variance.end());
    var.resize(spot.returns.size() + 1);
    const auto direct = fit_garch_direct(spot.returns, var);
    Eigen::MatrixXd wb = data.true_dw;
    std::vector<double> drift;
    for (Eigen::Index a = 0; a < wb.cols(); ++a) {
        drift.push_back(wb.col(a).mean() / kDeltaT);
        wb.col(a).array() -= wb.col(a).mean();
        wb.col(a) /= std::sqrt(wb.col(a).squaredNorm() / static_cast<double>(wb.rows()));
    }
    const auto fit = fit_nonlinear(data.true_dz, wb);
    const auto m = moments(data.true_dz);
    const auto model = garch_map(fit, spec.truth, 0.0, SpotMoments{m.mean, m.vol, m.skew, m.excess_kurtosis}, drift);
    rec.metrics() = {{"model_row", got}, {"printed_row", printed}, {"phi1_data", direct.coefficients.phi1},
                     {"phi1_data_se", direct.std_errors[1]}, {"phi1_model_same_data", model.phi1}};
    rec.check(fmt::format("model row ({:.2f}%, {:.2f}%, {:.2f}%, {:.2f}%, {:.0f}%) vs printed", 100 * got[0], 100 * got[1],
                          100 * got[2], 100 * got[3], 100 * got[4]),
              row_ok, true);
    rec.check("phi1 data >= phi1 model", direct.coefficients.phi1 >= model.phi1);
    return rec.finish(t0);
}

// --- 11
CriterionResult vvix() {
    const auto t0 = Clock::now();
    Recorder rec(11, "VVIX");
    const auto p = ModelParams::reference_two_factor();
    double lo = 1e9, hi = -1e9;
    for (int d = 1; d < 30; ++d) {
        const double tau1 = d / 365.0;
        const double v = model_vvix(p, tau1, tau1 + kVixWindow);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    VolOfVolState s;
    s.sigma = 0.0;
    s.lambda_t = s.lambda_inf;
    double worst = 0.0;
    for (double tau : {7.0 / 365.0, 1.0 / 12.0, 0.25, 0.5, 1.0})
        worst = std::max(worst, std::abs(adjusted_future_variance(p, s, tau) / vix_future_total_variance(p, tau) - 1.0));
    rec.metrics() = {{"vvix_min", lo}, {"vvix_max", hi}, {"adjusted_vs_constant_rel", worst}};
    rec.check("model VVIX 75% +- 2 for first expiries inside the window", lo >= 0.73 && hi <= 0.77);
    rec.check("adjusted = constant vol-of-vol at sigma 0 (rel 1e-8)", worst < 1e-8);
    return rec.finish(t0);
}

// --- 12
CriterionResult smile(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(12, "smile and skew");
    const auto p = ModelParams::reference_two_factor();
    const auto rep = NonlinearFit::replica();
    NonlinearFit lin = rep;
    lin.a = {0.0, 0.0};
    const auto curve = reference_curve();
    double worst_id = 0.0;
    for (double T : {1.0 / 12.0, 0.25, 0.5, 1.0}) {
        const double skew = smile_impact(curve, p, lin, T).skew_linear;
        const double z = return_skewness(curve, p, lin, T, 0.0);
        worst_id = std::max(worst_id, std::abs(skew / (z / (6.0 * std::sqrt(T))) - 1.0));
    }
    const double ssr0 = skew_stickiness_ratio(p, rep, 1e-6), ssr_inf = skew_stickiness_ratio(p, rep, 1e4);

    const double lambda = 0.25;
    SimConfig cfg;
    cfg.paths = 200000;
    cfg.seed = seed;
    cfg.lambda_scale = lambda;
    cfg.coupling = SpotVolCoupling::consistent(rep.a, rep.b, InnovationLaw{}, p.rho);
    const auto flat = VarianceCurve::flat(0.04);
    Simulator sim(flat, p, cfg);
    double worst_mc = 0.0;
    for (double T : {1.0 / 12.0, 0.25, 0.5})
        for (const auto& pt : mc_smile(sim, T, {-0.1, -0.05, 0.0, 0.05, 0.1})) {
            const auto [l1, q1] = smile_shift(flat, p, rep, T, std::log1p(pt.moneyness), lambda);
            worst_mc = std::max(worst_mc, std::abs(pt.implied_vol.mean - 0.2 - l1 - q1) / pt.implied_vol.se);
        }
    rec.metrics() = {{"identity_max_rel", worst_id}, {"ssr_short", ssr0}, {"ssr_long", ssr_inf}, {"mc_max_abs_z", worst_mc}};
    rec.check("linear identity rel 1e-3", worst_id < 1e-3);
    rec.check("SSR -> 2 and -> 1 within 1e-3", std::abs(ssr0 - 2.0) < 1e-3 && std::abs(ssr_inf - 1.0) < 1e-3);
    rec.check("MC implied vols at lambda 0.25 within 3 SE", worst_mc < 3.0);
    return rec.finish(t0);
}

// --- 13
CriterionResult varswap(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Recorder rec(13, "variance-swap variance");
    const auto p = ModelParams::reference_two_factor();
    const auto rep = NonlinearFit::replica();
    double worst_null = 0.0;
    for (double T : {1.0 / 12.0, 0.25, 0.5}) {
        const auto d = varswap_total_variance(p.scaled(0.0), rep, 0.0, 0.0, T);
        worst_null = std::max(worst_null, std::abs(d.total * static_cast<double>(d.returns) * T / 2.0 - 1.0));
    }
    const auto d3 = varswap_total_variance(p, rep, rep.excess_kurtosis, rep.skew, 0.25);

    // Path counts resolve the formula's higher-order gap at the reference vol-of-vol (about +3%
    // at one month, scaling like theta^3); at a quarter of it the gap is far below the SE.
    const auto flat = VarianceCurve::flat(0.04);
    const std::vector<std::pair<double, std::size_t>> plan = {{1.0 / 12.0, 100000}, {0.25, 50000}, {0.5, 25000}};
    auto compare = [&](double lambda, std::size_t divisor, std::uint64_t s, nlohmann::json& rows) {
        double worst = 0.0;
        for (const auto& [T, n] : plan) {
            SimConfig cfg;
            cfg.paths = n / divisor;
            cfg.seed = s++;
            cfg.lambda_scale = lambda;
            cfg.innovation = rep.law();
            cfg.coupling = rep.coupling();
            cfg.scheme = CurveScheme::linear_perturbation;
            const Simulator sim(flat, p, cfg);
            const auto mc = mc_varswap_variance(sim, T);
            const auto d = varswap_total_variance(p.scaled(lambda), rep, rep.excess_kurtosis, rep.skew, T);
            const double z = (mc.mean - d.total) / mc.se;
            worst = std::max(worst, std::abs(z));
            rows.push_back({{"lambda_scale", lambda}, {"maturity", T}, {"paths", cfg.paths}, {"mc", mc.mean}, {"se", mc.se},
                            {"formula", d.total}, {"z", z}});
        }
        return worst;
    };
    nlohmann::json rows = nlohmann::json::array();
    const double worst_full = compare(1.0, 1, seed, rows);
    const double worst_small = compare(0.25, 2, seed + 10, rows);
    rec.metrics() = {{"gaussian_rel", worst_null}, {"rho_shocks", d3.rho_shocks}, {"shock_vol_share_3m", d3.shock_vol_share()},
                     {"shock_variance_share_3m", d3.shock_share()}, {"mc", rows}, {"max_abs_z_reference", worst_full},
                     {"max_abs_z_quarter_vol_of_vol", worst_small}};
    rec.check("theta = 0 Gaussian total = 2/(N T)", worst_null < 1e-12);
    rec.check("rho_shocks of order 25%", std::all_of(d3.rho_shocks.begin(), d3.rho_shocks.end(),
                                                      [](double r) { return r > 0.15 && r < 0.35; }));
    rec.check("3m shock share in [5%, 15%]", d3.shock_vol_share() >= 0.05 && d3.shock_vol_share() <= 0.15);
    rec.check(fmt::format("MC at reference vol-of-vol within 3 SE (max |z| {:.1f})", worst_full), worst_full < 3.0, true);
    rec.check("MC at quarter vol-of-vol within 3 SE", worst_small < 3.0);
    rec.check("runtime < 5 min", seconds_since(t0) < 300.0);
    return rec.finish(t0);
}

// --- 14
CriterionResult end_to_end(const std::optional<std::filesystem::path>& run, double validate_seconds) {
    const auto t0 = Clock::now();
    Recorder rec(14, "end-to-end pipeline");
    if (!run) return rec.skip("needs a pipeline run directory");
    const std::vector<std::string> steps = {"synth", "calibrate", "extract", "nonlinear", "analytics"};
    const std::vector<std::string> artifacts = {"truth.json", "params.json", "curves.jsonl", "calibration.json",
                                                "factors.json", "nonlinear.json", "analytics.csv"};
    bool all_present = true;
    for (const auto& a : artifacts) all_present = all_present && std::filesystem::exists(*run / a);
    double total = validate_seconds;
    bool all_timed = false;
    if (std::filesystem::exists(*run / "timings.json")) {
        std::ifstream f(*run / "timings.json");
        const auto tj = nlohmann::json::parse(f);
        all_timed = true;
        for (const auto& s : steps) {
            all_timed = all_timed && tj.contains(s);
            if (tj.contains(s)) total += tj[s].get<double>();
        }
    }
    rec.metrics() = {{"pipeline_seconds", total}};
    rec.check("all pipeline artifacts present", all_present);
    rec.check("every step recorded", all_timed);
    rec.check("total < 15 min", total < 900.0);
    return rec.finish(t0);
}

bool wanted(const ValidationOptions& o, int id) {
    return o.only.empty() || std::find(o.only.begin(), o.only.end(), id) != o.only.end();
}

}  // namespace

std::vector<CriterionResult> run_validation(const ValidationOptions& o) {
    const auto t0 = Clock::now();
    std::vector<CriterionResult> out;
    auto seed = [&](int id) { return criterion_seed(o.seed, id); };
    const std::vector<std::pair<int, std::function<CriterionResult()>>> suite = {
        {1, [] { return kernels(); }},
        {2, [] { return convexity(); }},
        {3, [&] { return pricing_oracle(seed(3)); }},
        {4, [&] { return short_end_vol(seed(4)); }},
        {5, [&] { return calibration_recovery(o.run_dir); }},
        {6, [&] { return likelihood(seed(6)); }},
        {7, [&] { return kl_modes_check(seed(7)); }},
        {8, [&] { return nonlinear_fit(seed(8)); }},
        {9, [&] { return leverage_clustering(seed(9)); }},
        {10, [&] { return garch(seed(10)); }},
        {11, [] { return vvix(); }},
        {12, [&] { return smile(seed(12)); }},
        {13, [&] { return varswap(seed(13)); }},
    };
    for (const auto& [id, run] : suite) {
        if (!wanted(o, id)) continue;
        try {
            out.push_back(run());
        } catch (const std::exception& e) {
            CriterionResult r;
            r.id = id;
            r.title = "criterion " + std::to_string(id);
            r.status = CriterionStatus::fail;
            r.detail = std::string("exception: ") + e.what();
            out.push_back(r);
        }
    }
    if (wanted(o, 14)) out.push_back(end_to_end(o.run_dir, seconds_since(t0)));
    return out;
}

bool suite_passed(const std::vector<CriterionResult>& results) {
    return std::none_of(results.begin(), results.end(), [](const auto& r) { return r.status == CriterionStatus::fail; });
}

std::string pass_table(const std::vector<CriterionResult>& results) {
    std::string s;
    for (const auto& r : results)
        s += fmt::format("[{}] {:>2} {:<28} {:7.1f}s  {}\n", to_string(r.status), r.id, r.title, r.seconds, r.detail);
    return s;
}

nlohmann::json results_json(const std::vector<CriterionResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results)
        j.push_back({{"id", r.id}, {"title", r.title}, {"status", to_string(r.status)}, {"detail", r.detail},
                     {"seconds", r.seconds}, {"metrics", r.metrics}});
    return j;
}

}  // namespace vardyn
